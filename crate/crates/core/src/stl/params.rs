//! Per-trace critical parameter values of monotone templates.

use std::fmt;

use super::ast::{Monotonicity, ParameterizedFormula};
use super::monitor::Monitor;
use super::FormulaError;
use crate::scalar::Scalar;
use crate::traces::Trace;

fn trace_label<T: Scalar>(trace: &Trace<T>) -> String {
    trace.id().unwrap_or("<unnamed>").to_string()
}

/// Boundary of `{d_i : trace |= phi_d}` with the other coordinates of `d`
/// taken from `others` (its entry `i` is ignored).
///
/// For an increasing parameter the result `c` satisfies `phi_d` for
/// `d_i > c` and fails it for `d_i < c`; `-inf` means satisfied on the whole
/// bracket and `+inf` never satisfied. Decreasing parameters mirror this.
/// Finite results are the midpoint of a final bisection bracket no wider
/// than `tol`.
pub fn critical_parameter<T: Scalar>(
    pf: &ParameterizedFormula<T>,
    trace: &Trace<T>,
    i: usize,
    others: &[T],
    tol: T,
) -> Result<T, FormulaError> {
    pf.check_dim(others)?;
    let decl = pf.params.get(i).ok_or(FormulaError::DimensionMismatch {
        expected: pf.dim(),
        got: i + 1,
    })?;
    let monitor = Monitor::new(&pf.formula, trace)?;
    let mut d = others.to_vec();
    let mut sat = |v: T| -> Result<bool, FormulaError> {
        d[i] = v;
        monitor.holds_at(&pf.formula.root, &d, T::zero())
    };
    let (mut lo, mut hi) = (decl.lo, decl.hi);
    let (at_lo, at_hi) = (sat(lo)?, sat(hi)?);
    let inc = decl.monotonicity == Monotonicity::Increasing;
    // orient so that `hi` is the satisfying side
    let (below, above) = if inc { (at_lo, at_hi) } else { (at_hi, at_lo) };
    match (below, above) {
        (true, true) => {
            return Ok(if inc { T::neg_infinity() } else { T::infinity() });
        }
        (false, false) => {
            return Ok(if inc { T::infinity() } else { T::neg_infinity() });
        }
        (true, false) => {
            let (s, u) = if inc { (lo, hi) } else { (hi, lo) };
            return Err(FormulaError::MonotonicityViolation {
                trace: trace_label(trace),
                param: decl.name.clone(),
                satisfied: s.to_string(),
                unsatisfied: u.to_string(),
            });
        }
        (false, true) => {}
    }
    let tol = tol.abs().max(T::epsilon());
    while hi - lo > tol {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if sat(mid)? == inc {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + (hi - lo) / T::lit(2.0)).max(decl.lo).min(decl.hi))
}

/// One parameter whose satisfaction pattern across the grid contradicts its
/// declared direction.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation<T> {
    pub trace: String,
    pub param: String,
    /// Midpoints between adjacent grid values where satisfaction changes.
    pub switches: Vec<T>,
    /// Satisfaction at each grid value, lowest value first.
    pub pattern: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonotonicityReport<T> {
    /// Number of (trace, parameter) pairs examined.
    pub checked: usize,
    pub violations: Vec<MonotonicityViolation<T>>,
    /// Pairs that could not be evaluated, with the reason.
    pub errors: Vec<(String, String)>,
}

impl<T> MonotonicityReport<T> {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty() && self.errors.is_empty()
    }
}

impl<T: fmt::Display> fmt::Display for MonotonicityReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "checked {} (trace, parameter) pairs; monotone: {}",
            self.checked,
            if self.is_monotone() { "yes" } else { "no" }
        )?;
        for v in &self.violations {
            write!(f, "  trace {} parameter {}: switches at", v.trace, v.param)?;
            for s in &v.switches {
                write!(f, " {s}")?;
            }
            writeln!(f)?;
        }
        for (who, why) in &self.errors {
            writeln!(f, "  {who}: {why}")?;
        }
        Ok(())
    }
}

/// Evaluates every parameter on `grid` evenly spaced values across its
/// bracket, the others held at their most permissive bracket end, and
/// reports patterns with more than one switch or a switch against the
/// declared direction.
pub fn check_monotonicity<T: Scalar>(
    pf: &ParameterizedFormula<T>,
    traces: &[Trace<T>],
    grid: usize,
) -> MonotonicityReport<T> {
    let grid = grid.max(2);
    let mut report = MonotonicityReport {
        checked: 0,
        violations: Vec::new(),
        errors: Vec::new(),
    };
    let base: Vec<T> = pf.params.iter().map(|p| p.permissive()).collect();
    for (k, trace) in traces.iter().enumerate() {
        let label = trace.id().map(str::to_string).unwrap_or_else(|| format!("#{k}"));
        let monitor = match Monitor::new(&pf.formula, trace) {
            Ok(m) => m,
            Err(e) => {
                report.errors.push((label, e.to_string()));
                continue;
            }
        };
        for (i, decl) in pf.params.iter().enumerate() {
            report.checked += 1;
            let values: Vec<T> = (0..grid)
                .map(|j| {
                    let w = T::lit(j as f64 / (grid - 1) as f64);
                    decl.lo + (decl.hi - decl.lo) * w
                })
                .collect();
            let mut d = base.clone();
            let pattern: Result<Vec<bool>, _> = values
                .iter()
                .map(|&v| {
                    d[i] = v;
                    monitor.holds_at(&pf.formula.root, &d, T::zero())
                })
                .collect();
            let pattern = match pattern {
                Ok(p) => p,
                Err(e) => {
                    report.errors.push((format!("{label} / {}", decl.name), e.to_string()));
                    continue;
                }
            };
            let switches: Vec<T> = (1..grid)
                .filter(|&j| pattern[j] != pattern[j - 1])
                .map(|j| values[j - 1] + (values[j] - values[j - 1]) / T::lit(2.0))
                .collect();
            let against = match decl.monotonicity {
                Monotonicity::Increasing => pattern[0] && !pattern[grid - 1],
                Monotonicity::Decreasing => !pattern[0] && pattern[grid - 1],
            };
            if switches.len() > 1 || against {
                report.violations.push(MonotonicityViolation {
                    trace: label.clone(),
                    param: decl.name.clone(),
                    switches,
                    pattern,
                });
            }
        }
    }
    report
}
