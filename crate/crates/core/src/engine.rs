//! The sequential two-sample test and the conformance loop built on it.
//!
//! Both systems are sampled in batches of `k1` and `k2` paths. After every
//! batch the statistic `delta` and its confidence `alpha` are recomputed; the
//! loop stops as soon as `alpha >= alpha_d`. Conformance testing maps every
//! path to its vector of critical parameter values, so that the empirical
//! satisfaction functions of the template become (orthant) ECDFs of those
//! vectors.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::{total_cmp, Scalar};
use crate::stats::{
    assert_hypothesis, confidence_level, delta_multi, Hypothesis, IncrementalDelta, SampleSet, StatsError,
};
use crate::stl::{critical_parameter, FormulaError, Monitor, Monotonicity, ParameterizedFormula};
use crate::systems::{path_seed, GreyBoxSystem, Input, SystemError};
use crate::traces::Trace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A sample source ran dry; the run ends inconclusive.
    #[error("{0}")]
    Exhausted(String),
    #[error("system {side} path {index}: {source}")]
    System {
        side: usize,
        index: u64,
        source: SystemError,
    },
    #[error("system {side} path {index}: {source}")]
    Formula {
        side: usize,
        index: u64,
        source: FormulaError,
    },
    #[error(
        "parameters are not separable on trace {trace}: at {point} the per-parameter critical values predict {predicted}, \
         direct monitoring gives {actual}; use a one-parameter template or evaluate the satisfaction functions on a grid"
    )]
    NonSeparable {
        trace: String,
        point: String,
        predicted: bool,
        actual: bool,
    },
    #[error("formula needs traces of length {needed} but the simulation horizon is {horizon}")]
    HorizonTooShort { needed: String, horizon: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl From<FormulaError> for EngineError {
    fn from(source: FormulaError) -> Self {
        EngineError::Formula {
            side: 0,
            index: 0,
            source,
        }
    }
}

/// Parameters of one sequential test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig<T> {
    pub c: T,
    pub alpha_d: T,
    pub k1: usize,
    pub k2: usize,
    /// Cap on the samples drawn from each side.
    pub max_samples: usize,
    pub seed: u64,
    /// Bisection tolerance for critical parameters.
    pub tol: T,
    pub horizon: T,
    pub step: T,
}

impl<T: Scalar> TestConfig<T> {
    pub fn new(c: T, alpha_d: T) -> Self {
        Self {
            c,
            alpha_d,
            k1: 1,
            k2: 1,
            max_samples: 100_000,
            seed: 0,
            tol: T::lit(1e-6),
            horizon: T::one(),
            step: T::lit(0.01),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let open_unit = |v: T| v > T::zero() && v < T::one();
        let problem = if !open_unit(self.c) {
            Some(format!("c must lie in (0, 1), got {}", self.c))
        } else if !open_unit(self.alpha_d) {
            Some(format!("alpha_d must lie in (0, 1), got {}", self.alpha_d))
        } else if self.k1 == 0 || self.k2 == 0 {
            Some("k1 and k2 must be at least 1".to_string())
        } else if self.max_samples < self.k1.max(self.k2) {
            Some(format!("max_samples {} is below the batch size", self.max_samples))
        } else if !(self.tol > T::zero()) {
            Some(format!("tol must be positive, got {}", self.tol))
        } else if !(self.horizon > T::zero() && self.horizon.is_finite()) {
            Some(format!("horizon must be positive, got {}", self.horizon))
        } else if !(self.step > T::zero() && self.step.is_finite()) {
            Some(format!("step must be positive, got {}", self.step))
        } else {
            None
        };
        problem.map_or(Ok(()), |p| Err(EngineError::Config(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assertion {
    Conform,
    NonConform,
    Inconclusive,
}

impl From<Hypothesis> for Assertion {
    fn from(h: Hypothesis) -> Self {
        match h {
            Hypothesis::Conform => Assertion::Conform,
            Hypothesis::NonConform => Assertion::NonConform,
        }
    }
}

impl std::fmt::Display for Assertion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Assertion::Conform => "conform",
            Assertion::NonConform => "nonconform",
            Assertion::Inconclusive => "inconclusive",
        })
    }
}

/// One drawn sample and what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw<T> {
    pub point: Vec<T>,
    /// Seconds spent producing the underlying path.
    pub sim_s: f64,
    /// Seconds spent reducing the path to `point`.
    pub extract_s: f64,
}

impl<T> Draw<T> {
    pub fn new(point: Vec<T>) -> Self {
        Self {
            point,
            sim_s: 0.0,
            extract_s: 0.0,
        }
    }
}

/// A source of i.i.d. samples addressed by index.
pub trait Sampler<T>: Sync {
    fn dim(&self) -> usize;

    /// Sample number `index`. For non-sequential samplers the result may
    /// depend on nothing but `index`.
    fn sample(&self, index: u64) -> Result<Draw<T>, EngineError>;

    /// Sequential samplers are only ever called with increasing indices from
    /// a single thread.
    fn is_sequential(&self) -> bool {
        false
    }
}

/// Sampler backed by a closure of the sample index.
pub struct FnSampler<F> {
    dim: usize,
    f: F,
}

impl<F> FnSampler<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F> Sampler<T> for FnSampler<F>
where
    F: Fn(u64) -> Vec<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, index: u64) -> Result<Draw<T>, EngineError> {
        Ok(Draw::new((self.f)(index)))
    }
}

/// Replays a fixed list of samples in order; running past its end exhausts
/// it.
pub struct VecSampler<T> {
    label: String,
    samples: SampleSet<T>,
}

impl<T: Scalar> VecSampler<T> {
    pub fn new(label: impl Into<String>, samples: SampleSet<T>) -> Self {
        Self {
            label: label.into(),
            samples,
        }
    }
}

impl<T: Scalar> Sampler<T> for VecSampler<T> {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    fn sample(&self, index: u64) -> Result<Draw<T>, EngineError> {
        let i = index as usize;
        if i >= self.samples.len() {
            return Err(EngineError::Exhausted(format!(
                "samples exhausted: {} holds {} samples",
                self.label,
                self.samples.len()
            )));
        }
        Ok(Draw::new(self.samples.point(i).to_vec()))
    }

    fn is_sequential(&self) -> bool {
        true
    }
}

/// Running state of the sequential test.
pub struct TestState<T> {
    pub n: usize,
    pub m: usize,
    pub x: SampleSet<T>,
    pub y: SampleSet<T>,
    pub delta: T,
    pub alpha: T,
    running: Option<IncrementalDelta<T>>,
}

impl<T: Scalar> TestState<T> {
    pub fn new(dim: usize, k1: usize, k2: usize) -> Result<Self, EngineError> {
        Ok(Self {
            n: 0,
            m: 0,
            x: SampleSet::new(dim)?,
            y: SampleSet::new(dim)?,
            delta: T::zero(),
            alpha: T::zero(),
            running: (dim == 1).then(|| IncrementalDelta::new(k1, k2)),
        })
    }

    /// Adds one batch per side and refreshes `delta` and `alpha`.
    pub fn update(&mut self, xs: &[Vec<T>], ys: &[Vec<T>], c: T) -> Result<(), EngineError> {
        for p in xs {
            self.x.push(p)?;
            if let Some(r) = self.running.as_mut() {
                r.push_x(p[0])?;
            }
        }
        for p in ys {
            self.y.push(p)?;
            if let Some(r) = self.running.as_mut() {
                r.push_y(p[0])?;
            }
        }
        self.n = self.x.len();
        self.m = self.y.len();
        self.delta = match &self.running {
            Some(r) => r.delta(),
            None => delta_multi(&self.x, &self.y)?,
        };
        self.alpha = confidence_level(self.delta, c, self.n, self.m);
        Ok(())
    }
}

/// Distribution summary of one coordinate of one side's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub count: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub pos_inf: usize,
    pub neg_inf: usize,
}

fn summarize<T: Scalar>(set: &SampleSet<T>, names: &[String]) -> Vec<CoordinateSummary> {
    (0..set.dim())
        .map(|k| {
            let all = set.coordinate(k);
            let mut finite: Vec<T> = all.iter().copied().filter(|v| v.is_finite()).collect();
            finite.sort_by(total_cmp);
            let median = match finite.len() {
                0 => None,
                len if len % 2 == 1 => Some(finite[len / 2].as_f64()),
                len => Some((finite[len / 2 - 1].as_f64() + finite[len / 2].as_f64()) / 2.0),
            };
            CoordinateSummary {
                name: names.get(k).cloned().unwrap_or_else(|| format!("x{k}")),
                count: all.len(),
                min: finite.first().map(|v| v.as_f64()),
                median,
                max: finite.last().map(|v| v.as_f64()),
                pos_inf: all.iter().filter(|v| **v == T::infinity()).count(),
                neg_inf: all.iter().filter(|v| **v == T::neg_infinity()).count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEcho {
    pub name: String,
    pub direction: Monotonicity,
    pub lo: f64,
    pub hi: f64,
}

/// Outcome of a run, with the configuration echoed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub assertion: Assertion,
    /// Why the run was inconclusive.
    pub reason: Option<String>,
    pub c: f64,
    pub alpha_d: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n: usize,
    pub m: usize,
    pub samples_total: usize,
    pub dim: usize,
    pub k1: usize,
    pub k2: usize,
    pub max_samples: usize,
    pub seed: u64,
    pub formula: Option<String>,
    pub params: Vec<ParamEcho>,
    pub system1: Option<String>,
    pub system2: Option<String>,
    pub sim_time_s: f64,
    pub test_time_s: f64,
    pub wall_time_s: f64,
    pub side1: Vec<CoordinateSummary>,
    pub side2: Vec<CoordinateSummary>,
}

impl ConformanceReport {
    /// One-line summary in the style of a results table row.
    pub fn summary_line(&self) -> String {
        format!(
            "{}: c = {}, alpha_d = {}, delta = {:.4}, alpha = {:.4}, samples = {} ({} + {}), time = {:.3} s",
            self.assertion,
            self.c,
            self.alpha_d,
            self.delta,
            self.alpha,
            self.samples_total,
            self.n,
            self.m,
            self.wall_time_s
        )
    }

    /// The report with every timing field zeroed, for reproducibility checks.
    pub fn without_times(&self) -> Self {
        Self {
            sim_time_s: 0.0,
            test_time_s: 0.0,
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Default)]
struct Clock {
    sim_s: f64,
    test_s: f64,
}

fn draw_batch<T: Scalar, S: Sampler<T> + ?Sized>(
    sampler: &S,
    from: usize,
    k: usize,
    clock: &mut Clock,
) -> Result<Vec<Vec<T>>, EngineError> {
    let range = from as u64..(from + k) as u64;
    let draws: Vec<Result<Draw<T>, EngineError>> = if sampler.is_sequential() || k == 1 {
        let mut out = Vec::with_capacity(k);
        for i in range {
            let d = sampler.sample(i);
            let failed = d.is_err();
            out.push(d);
            if failed {
                break;
            }
        }
        out
    } else {
        range.into_par_iter().map(|i| sampler.sample(i)).collect()
    };
    let mut points = Vec::with_capacity(k);
    for d in draws {
        let d = d?;
        if d.point.len() != sampler.dim() {
            return Err(StatsError::DimensionMismatch {
                expected: sampler.dim(),
                got: d.point.len(),
            }
            .into());
        }
        clock.sim_s += d.sim_s;
        clock.test_s += d.extract_s;
        points.push(d.point);
    }
    Ok(points)
}

/// The sequential test on two sample sources.
pub fn run_equality_test<T: Scalar>(
    x: &dyn Sampler<T>,
    y: &dyn Sampler<T>,
    cfg: &TestConfig<T>,
) -> Result<ConformanceReport, EngineError> {
    cfg.validate()?;
    if x.dim() != y.dim() {
        return Err(StatsError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        }
        .into());
    }
    let start = Instant::now();
    let mut clock = Clock::default();
    let mut state = TestState::new(x.dim(), cfg.k1, cfg.k2)?;
    let mut reason = None;
    let assertion = loop {
        if state.n + cfg.k1 > cfg.max_samples || state.m + cfg.k2 > cfg.max_samples {
            reason = Some(format!("sample budget of {} per side reached", cfg.max_samples));
            break Assertion::Inconclusive;
        }
        let batch = draw_batch(x, state.n, cfg.k1, &mut clock)
            .and_then(|xs| Ok((xs, draw_batch(y, state.m, cfg.k2, &mut clock)?)));
        let (xs, ys) = match batch {
            Ok(b) => b,
            Err(EngineError::Exhausted(why)) => {
                reason = Some(why);
                break Assertion::Inconclusive;
            }
            Err(e) => return Err(e),
        };
        let t = Instant::now();
        state.update(&xs, &ys, cfg.c)?;
        clock.test_s += t.elapsed().as_secs_f64();
        log::trace!(
            "n = {}, m = {}, delta = {}, alpha = {}",
            state.n,
            state.m,
            state.delta,
            state.alpha
        );
        if state.alpha >= cfg.alpha_d {
            break assert_hypothesis(state.delta, cfg.c).into();
        }
    };
    let names: Vec<String> = (0..x.dim()).map(|k| format!("x{k}")).collect();
    Ok(ConformanceReport {
        assertion,
        reason,
        c: cfg.c.as_f64(),
        alpha_d: cfg.alpha_d.as_f64(),
        alpha: state.alpha.as_f64(),
        delta: state.delta.as_f64(),
        n: state.n,
        m: state.m,
        samples_total: state.n + state.m,
        dim: x.dim(),
        k1: cfg.k1,
        k2: cfg.k2,
        max_samples: cfg.max_samples,
        seed: cfg.seed,
        formula: None,
        params: Vec::new(),
        system1: None,
        system2: None,
        sim_time_s: clock.sim_s,
        test_time_s: clock.test_s,
        wall_time_s: start.elapsed().as_secs_f64(),
        side1: summarize(&state.x, &names),
        side2: summarize(&state.y, &names),
    })
}

fn trace_name<T: Scalar>(trace: &Trace<T>) -> String {
    trace.id().unwrap_or("<unnamed>").to_string()
}

/// Critical value of every parameter on one trace.
///
/// Each parameter is searched with the others held at their most permissive
/// bracket end. For `K >= 2` the result is then checked on the `3^K` grid of
/// bracket ends and midpoints: satisfaction must equal the conjunction of
/// the per-parameter threshold tests, otherwise the formula is rejected as
/// non-separable.
pub fn critical_vector<T: Scalar>(
    trace: &Trace<T>,
    pf: &ParameterizedFormula<T>,
    tol: T,
) -> Result<Vec<T>, EngineError> {
    let k = pf.dim();
    if k == 0 || k > 3 {
        return Err(EngineError::Config(format!(
            "templates need 1 to 3 parameters, got {k}"
        )));
    }
    let base: Vec<T> = pf.params.iter().map(|p| p.permissive()).collect();
    let crit: Vec<T> = (0..k)
        .map(|i| critical_parameter(pf, trace, i, &base, tol))
        .collect::<Result<_, _>>()?;
    if k == 1 {
        return Ok(crit);
    }
    let monitor = Monitor::new(&pf.formula, trace)?;
    let margin = T::lit(2.0) * tol;
    let levels: Vec<[T; 3]> = pf.params.iter().map(|p| [p.lo, p.midpoint(), p.hi]).collect();
    let mut d = vec![T::zero(); k];
    'grid: for code in 0..3usize.pow(k as u32) {
        let mut rest = code;
        let mut predicted = true;
        for i in 0..k {
            d[i] = levels[i][rest % 3];
            rest /= 3;
            if (d[i] - crit[i]).abs() <= margin {
                continue 'grid;
            }
            predicted &= match pf.params[i].monotonicity {
                Monotonicity::Increasing => d[i] > crit[i],
                Monotonicity::Decreasing => d[i] < crit[i],
            };
        }
        let actual = monitor.holds_at(&pf.formula.root, &d, T::zero())?;
        if actual != predicted {
            let point = pf
                .params
                .iter()
                .zip(&d)
                .map(|(p, v)| format!("{} = {v}", p.name))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(EngineError::NonSeparable {
                trace: trace_name(trace),
                point,
                predicted,
                actual,
            });
        }
    }
    Ok(crit)
}

/// Largest trace length the template can ask for over its brackets.
pub fn template_horizon<T: Scalar>(pf: &ParameterizedFormula<T>) -> Result<T, FormulaError> {
    let k = pf.dim();
    let mut worst = T::zero();
    for corner in 0..(1usize << k) {
        let d: Vec<T> = pf
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| if corner >> i & 1 == 1 { p.hi } else { p.lo })
            .collect();
        worst = worst.max(crate::stl::formula_horizon(&pf.instantiate(&d)?)?);
    }
    Ok(worst)
}

/// Samples paths of one system and reduces them to critical vectors.
pub struct SystemSampler<'a, T: Scalar> {
    pub system: &'a dyn GreyBoxSystem<T>,
    pub input: &'a Input<T>,
    pub pf: &'a ParameterizedFormula<T>,
    pub cfg: &'a TestConfig<T>,
    /// 0 for the first system, 1 for the second.
    pub side: usize,
}

impl<T: Scalar> Sampler<T> for SystemSampler<'_, T> {
    fn dim(&self) -> usize {
        self.pf.dim()
    }

    fn sample(&self, index: u64) -> Result<Draw<T>, EngineError> {
        let seed = path_seed(self.cfg.seed, self.side as u64, index);
        let t = Instant::now();
        let trace = self
            .system
            .sample_path(self.input, seed, self.cfg.horizon, self.cfg.step)
            .map_err(|source| match source {
                SystemError::PoolExhausted(_) => EngineError::Exhausted(format!("system {}: {source}", self.side + 1)),
                source => EngineError::System {
                    side: self.side + 1,
                    index,
                    source,
                },
            })?;
        let sim_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let point = critical_vector(&trace, self.pf, self.cfg.tol).map_err(|e| match e {
            EngineError::Formula { source, .. } => EngineError::Formula {
                side: self.side + 1,
                index,
                source,
            },
            other => other,
        })?;
        Ok(Draw {
            point,
            sim_s,
            extract_s: t.elapsed().as_secs_f64(),
        })
    }

    fn is_sequential(&self) -> bool {
        self.system.is_sequential()
    }
}

/// Statistical conformance of two systems under the same input with respect
/// to every instance of a monotone template.
pub fn run_conformance<T: Scalar>(
    sys1: &dyn GreyBoxSystem<T>,
    sys2: &dyn GreyBoxSystem<T>,
    input: &Input<T>,
    pf: &ParameterizedFormula<T>,
    cfg: &TestConfig<T>,
) -> Result<ConformanceReport, EngineError> {
    cfg.validate()?;
    let needed = template_horizon(pf)?;
    if needed > cfg.horizon + T::time_tol(cfg.horizon) {
        return Err(EngineError::HorizonTooShort {
            needed: needed.to_string(),
            horizon: cfg.horizon.to_string(),
        });
    }
    let side = |s: usize, system| SystemSampler {
        system,
        input,
        pf,
        cfg,
        side: s,
    };
    let (x, y) = (side(0, sys1), side(1, sys2));
    let mut report = run_equality_test(&x, &y, cfg)?;
    let names: Vec<String> = pf.params.iter().map(|p| p.name.clone()).collect();
    for (summary, name) in report
        .side1
        .iter_mut()
        .chain(report.side2.iter_mut())
        .zip(names.iter().cycle())
    {
        summary.name = name.clone();
    }
    report.formula = Some(pf.formula.root.to_string());
    report.params = pf
        .params
        .iter()
        .map(|p| ParamEcho {
            name: p.name.clone(),
            direction: p.monotonicity,
            lo: p.lo.as_f64(),
            hi: p.hi.as_f64(),
        })
        .collect();
    report.system1 = Some(sys1.name().to_string());
    report.system2 = Some(sys2.name().to_string());
    Ok(report)
}
