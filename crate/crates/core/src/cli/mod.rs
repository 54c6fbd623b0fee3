//! The `conforma` command line.
//!
//! Exit codes: 0 conform (or a satisfied formula), 1 nonconform (violated),
//! 2 inconclusive, 64 usage and configuration errors, 65 bad input data, 70
//! failures during a run.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::RngCore;

pub use config::{ConfigError, LoadedConfig, RunConfig, SystemSpec};

use crate::engine::{
    run_conformance, run_equality_test, Assertion, ConformanceReport, EngineError, TestConfig, VecSampler,
};
use crate::stats::SampleSet;
use crate::stl::{evaluate, parse_formula, FormulaError, ParamDecl};
use crate::systems::path_seed;
use crate::traces::{load_traces_csv, write_trace_csv};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_RUNTIME: i32 = 70;

#[derive(Debug, Parser)]
#[command(
    name = "conforma",
    version,
    about = "Statistical conformance checking of stochastic systems"
)]
pub struct Cli {
    /// Worker threads for parallel sampling (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test two configured systems for conformance under a parameterized formula.
    Verify {
        /// TOML run configuration.
        config: PathBuf,
    },
    /// Sequential two-sample test on recorded samples, one value or tuple per line.
    TestDist(TestDistArgs),
    /// Evaluate a formula on the traces of a CSV file.
    Monitor {
        formula: String,
        /// CSV file or directory of CSV files.
        trace: PathBuf,
        /// Parameter value as name=value; repeatable.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Evaluation time.
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
    },
    /// Write sample paths of the configured systems as CSV files.
    Simulate {
        config: PathBuf,
        /// Paths per system.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Which system to simulate (1 or 2); both by default.
        #[arg(long)]
        system: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TestDistArgs {
    pub file_x: PathBuf,
    pub file_y: PathBuf,
    /// Distance threshold: conform means the CDFs differ by less than this.
    #[arg(long)]
    pub c: f64,
    /// Confidence to reach before deciding.
    #[arg(long)]
    pub alpha: f64,
    /// Lines consumed from the first file per iteration.
    #[arg(long, default_value_t = 1)]
    pub k1: usize,
    /// Lines consumed from the second file per iteration.
    #[arg(long, default_value_t = 1)]
    pub k2: usize,
    /// Cap on samples per side.
    #[arg(long, default_value_t = 100_000)]
    pub max_samples: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn data(message: impl ToString) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Data(_) => CliError::data(e),
            _ => CliError::usage(e),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::Config(_) | EngineError::HorizonTooShort { .. } => CliError::usage(e),
            EngineError::Formula {
                source: FormulaError::MissingSignal(_) | FormulaError::TraceTooShort { .. } | FormulaError::Trace(_),
                ..
            } => CliError::data(e),
            _ => CliError::runtime(e),
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Verify { config } => verify(&config),
        Command::TestDist(args) => test_dist(&args),
        Command::Monitor {
            formula,
            trace,
            params,
            t0,
        } => monitor(&formula, &trace, &params, t0),
        Command::Simulate {
            config,
            n,
            seed,
            out_dir,
            system,
        } => simulate(&config, n, seed, &out_dir, system),
    }
}

fn exit_code(a: Assertion) -> i32 {
    match a {
        Assertion::Conform => 0,
        Assertion::NonConform => 1,
        Assertion::Inconclusive => 2,
    }
}

fn emit(report: &ConformanceReport, output: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).map_err(CliError::runtime)? + "\n";
    match output {
        Some(path) => std::fs::write(path, json)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    eprintln!("{}", report.summary_line());
    if let Some(reason) = &report.reason {
        eprintln!("reason: {reason}");
    }
    Ok(())
}

fn verify(path: &Path) -> Result<i32, CliError> {
    let loaded = LoadedConfig::read(path)?;
    let cfg = &loaded.config;
    let seed = cfg.seed.unwrap_or_else(|| rand::rng().next_u64());
    let sys1 = loaded.system(&cfg.system1, seed, 0)?;
    let sys2 = loaded.system(&cfg.system2, seed, 1)?;
    let vars2 = sys2.variables();
    let signature: Vec<String> = sys1.variables().into_iter().filter(|v| vars2.contains(v)).collect();
    let pf = parse_formula(&cfg.formula.text, &signature, &loaded.param_decls()).map_err(CliError::usage)?;
    let input = loaded.input()?;
    let test = loaded.test_config(seed);
    log::info!("verifying {} against {} with seed {seed}", sys1.name(), sys2.name());
    let mut report = run_conformance(sys1.as_ref(), sys2.as_ref(), &input, &pf, &test)?;
    report.formula = Some(cfg.formula.text.clone());
    let output = cfg.output.as_ref().map(|p| loaded.resolve(p));
    emit(&report, output.as_deref())?;
    Ok(exit_code(report.assertion))
}

/// One sample per non-empty line: comma or whitespace separated numbers.
/// Lines starting with `#` are comments.
pub fn read_samples(path: &Path) -> Result<SampleSet<f64>, CliError> {
    let name = path.display();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {name}: {e}")))?;
    let mut set: Option<SampleSet<f64>> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let point: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| CliError::data(format!("{name}:{}: not a number: {s:?}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        let set = match &mut set {
            Some(s) => s,
            None => set.insert(SampleSet::new(point.len()).map_err(CliError::data)?),
        };
        set.push(&point)
            .map_err(|e| CliError::data(format!("{name}:{}: {e}", i + 1)))?;
    }
    set.ok_or_else(|| CliError::data(format!("{name}: no samples")))
}

fn test_dist(args: &TestDistArgs) -> Result<i32, CliError> {
    let x = read_samples(&args.file_x)?;
    let y = read_samples(&args.file_y)?;
    if x.dim() != y.dim() {
        return Err(CliError::data(format!(
            "sample files have different dimensions ({} and {})",
            x.dim(),
            y.dim()
        )));
    }
    let cfg = TestConfig {
        k1: args.k1,
        k2: args.k2,
        max_samples: args.max_samples,
        ..TestConfig::new(args.c, args.alpha)
    };
    let sx = VecSampler::new(args.file_x.display().to_string(), x);
    let sy = VecSampler::new(args.file_y.display().to_string(), y);
    let report = run_equality_test(&sx, &sy, &cfg)?;
    emit(&report, args.output.as_deref())?;
    Ok(exit_code(report.assertion))
}

fn monitor(formula: &str, path: &Path, params: &[String], t0: f64) -> Result<i32, CliError> {
    let mut decls = Vec::new();
    let mut values = Vec::new();
    for p in params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param expects name=value, got {p:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("--param {name}: not a number: {value:?}")))?;
        decls.push(ParamDecl::increasing(name.trim(), v, v));
        values.push(v);
    }
    let traces = load_traces_csv::<f64>(path).map_err(CliError::data)?;
    let first = traces
        .first()
        .ok_or_else(|| CliError::data(format!("{}: no traces", path.display())))?;
    let pf = parse_formula(formula, first.variables(), &decls).map_err(CliError::usage)?;
    let f = pf.instantiate(&values).map_err(CliError::usage)?;
    let mut all = true;
    for trace in &traces {
        let sat = evaluate(&f, trace, t0).map_err(CliError::data)?;
        all &= sat;
        if traces.len() == 1 {
            println!("{sat}");
        } else {
            println!("{}: {sat}", trace.id().unwrap_or("?"));
        }
    }
    Ok(if all { 0 } else { 1 })
}

fn simulate(path: &Path, n: usize, seed: Option<u64>, out_dir: &Path, which: Option<usize>) -> Result<i32, CliError> {
    let loaded = LoadedConfig::read(path)?;
    let cfg = &loaded.config;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let input = loaded.input()?;
    let sides: Vec<usize> = match which {
        None => vec![1, 2],
        Some(s @ (1 | 2)) => vec![s],
        Some(s) => return Err(CliError::usage(format!("--system must be 1 or 2, got {s}"))),
    };
    for side in sides {
        let spec = if side == 1 { &cfg.system1 } else { &cfg.system2 };
        let sys = loaded.system(spec, seed, side as u64 - 1)?;
        let dir = out_dir.join(format!("system{side}"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        for i in 0..n {
            let path_seed = path_seed(seed, side as u64 - 1, i as u64);
            let trace = sys
                .sample_path(&input, path_seed, cfg.horizon, cfg.step)
                .map_err(|e| CliError::runtime(format!("system {side} path {i}: {e}")))?;
            write_trace_csv(&trace, dir.join(format!("path_{i:04}.csv"))).map_err(CliError::runtime)?;
        }
        eprintln!("wrote {n} paths of {} to {}", sys.name(), dir.display());
    }
    Ok(0)
}
