//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! c = 0.4
//! alpha_d = 0.99
//! horizon = 3.0
//! step = 0.01
//! output = "report.json"
//!
//! [formula]
//! text = "F[0.22, tau](abs(e) < 0.05)"
//!
//! [[param]]
//! name = "tau"
//! direction = "increasing"
//! lo = 0.22
//! hi = 3.0
//!
//! [input]
//! u = 1.0
//!
//! [system1]
//! kind = "hitting"
//! variable = "e"
//! distribution = "uniform"
//! a = 0.0
//! b = 1.0
//!
//! [system2]
//! kind = "replay"
//! path = "traces/"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::TestConfig;
use crate::stl::{Monotonicity, ParamDecl};
use crate::systems::{
    BouncingBall, EventTime, GreyBoxSystem, HittingModel, Input, InputSignal, SecondOrder, SystemError, TraceReplay,
};
use crate::traces::load_traces_csv;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot load traces: {0}")]
    Data(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub c: f64,
    pub alpha_d: f64,
    #[serde(default = "one")]
    pub k1: usize,
    #[serde(default = "one")]
    pub k2: usize,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub formula: FormulaSpec,
    #[serde(default, rename = "param")]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub input: toml::Table,
    pub system1: SystemSpec,
    pub system2: SystemSpec,
}

fn one() -> usize {
    1
}

fn default_max_samples() -> usize {
    100_000
}

fn default_step() -> f64 {
    0.01
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaSpec {
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub direction: Monotonicity,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Hitting {
        name: Option<String>,
        #[serde(default = "default_variable")]
        variable: String,
        distribution: Distribution,
        a: Option<f64>,
        b: Option<f64>,
        mu: Option<f64>,
        sd: Option<f64>,
        #[serde(default)]
        shift: f64,
        #[serde(default = "default_before")]
        before: f64,
        #[serde(default)]
        after: f64,
    },
    BouncingBall {
        name: Option<String>,
        x0: f64,
        g0: f64,
        sigma: f64,
        #[serde(default = "elastic")]
        restitution: f64,
        rest_speed: Option<f64>,
    },
    SecondOrder {
        name: Option<String>,
        wn: f64,
        zeta: f64,
        #[serde(default)]
        noise_sd: f64,
        #[serde(default = "default_band")]
        band: f64,
        #[serde(default)]
        y0: f64,
        #[serde(default)]
        init_sd: f64,
        #[serde(default = "default_reference")]
        input: String,
    },
    Replay {
        name: Option<String>,
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Normal,
}

fn default_variable() -> String {
    "x".into()
}

fn default_before() -> f64 {
    1.0
}

fn elastic() -> f64 {
    1.0
}

fn default_band() -> f64 {
    0.05
}

fn default_reference() -> String {
    "u".into()
}

/// A parsed config plus the directory relative paths refer to.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn test_config(&self, seed: u64) -> TestConfig<f64> {
        let c = &self.config;
        TestConfig {
            c: c.c,
            alpha_d: c.alpha_d,
            k1: c.k1,
            k2: c.k2,
            max_samples: c.max_samples,
            seed,
            tol: c.tol,
            horizon: c.horizon,
            step: c.step,
        }
    }

    pub fn param_decls(&self) -> Vec<ParamDecl<f64>> {
        self.config
            .params
            .iter()
            .map(|p| ParamDecl::new(p.name.clone(), p.direction, p.lo, p.hi))
            .collect()
    }

    /// Constants are numbers; tables are `{ csv = "file.csv", column = "u" }`.
    pub fn input(&self) -> Result<Input<f64>, ConfigError> {
        let mut input = Input::new();
        for (name, value) in &self.config.input {
            let signal = match value {
                toml::Value::Float(v) => InputSignal::Constant(*v),
                toml::Value::Integer(v) => InputSignal::Constant(*v as f64),
                toml::Value::Table(t) => {
                    let file = t
                        .get("csv")
                        .and_then(toml::Value::as_str)
                        .ok_or_else(|| ConfigError::Invalid(format!("input {name:?}: table needs a `csv` path")))?;
                    let column = t.get("column").and_then(toml::Value::as_str).unwrap_or(name);
                    let traces = load_traces_csv::<f64>(self.resolve(Path::new(file)))
                        .map_err(|e| ConfigError::Data(e.to_string()))?;
                    let trace = traces
                        .first()
                        .ok_or_else(|| ConfigError::Data(format!("input {name:?}: {file} holds no trace")))?;
                    let col = trace
                        .variable_index(column)
                        .ok_or_else(|| ConfigError::Data(format!("input {name:?}: {file} has no column {column:?}")))?;
                    InputSignal::Table {
                        times: trace.timestamps().to_vec(),
                        values: trace.rows().map(|(_, r)| r[col]).collect(),
                    }
                }
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "input {name:?}: expected a number or a table, got {other}"
                    )))
                }
            };
            input = input.with(name.clone(), signal);
        }
        Ok(input)
    }

    /// Builds a system; `side` (0 or 1) keys the replay permutation.
    pub fn system(&self, spec: &SystemSpec, seed: u64, side: u64) -> Result<Box<dyn GreyBoxSystem<f64>>, ConfigError> {
        let bad = |e: SystemError| ConfigError::Invalid(e.to_string());
        let sys: Box<dyn GreyBoxSystem<f64>> = match spec {
            SystemSpec::Hitting {
                name,
                variable,
                distribution,
                a,
                b,
                mu,
                sd,
                shift,
                before,
                after,
            } => {
                let need = |v: &Option<f64>, key: &str| {
                    v.ok_or_else(|| ConfigError::Invalid(format!("hitting system: {distribution:?} needs `{key}`")))
                };
                let base = match distribution {
                    Distribution::Uniform => EventTime::Uniform {
                        a: need(a, "a")?,
                        b: need(b, "b")?,
                    },
                    Distribution::Normal => EventTime::Normal {
                        mu: need(mu, "mu")?,
                        sd: need(sd, "sd")?,
                    },
                };
                let event = if *shift != 0.0 { base.shifted(*shift) } else { base };
                let mut m = HittingModel::new(event).map_err(bad)?.with_variable(variable.clone());
                m.before = *before;
                m.after = *after;
                Box::new(m.with_name(name.clone().unwrap_or_else(|| "hitting".into())))
            }
            SystemSpec::BouncingBall {
                name,
                x0,
                g0,
                sigma,
                restitution,
                rest_speed,
            } => {
                let mut ball = BouncingBall::new(*x0, *g0, *sigma, *restitution).map_err(bad)?;
                if let Some(r) = rest_speed {
                    ball.rest_speed = *r;
                }
                Box::new(ball.with_name(name.clone().unwrap_or_else(|| "bouncing_ball".into())))
            }
            SystemSpec::SecondOrder {
                name,
                wn,
                zeta,
                noise_sd,
                band,
                y0,
                init_sd,
                input,
            } => {
                let mut sys = SecondOrder::new(*wn, *zeta, *noise_sd, *band)
                    .and_then(|s| s.with_initial(*y0, *init_sd))
                    .map_err(bad)?;
                sys.input = input.clone();
                Box::new(sys.with_name(name.clone().unwrap_or_else(|| "second_order".into())))
            }
            SystemSpec::Replay { name, path } => {
                let traces =
                    load_traces_csv::<f64>(self.resolve(path)).map_err(|e| ConfigError::Data(e.to_string()))?;
                if traces.is_empty() {
                    return Err(ConfigError::Data(format!("no traces found under {}", path.display())));
                }
                let replay = TraceReplay::new(traces, crate::systems::path_seed(seed, side, u64::MAX)).map_err(bad)?;
                Box::new(replay.with_name(name.clone().unwrap_or_else(|| "replay".into())))
            }
        };
        Ok(sys)
    }
}
