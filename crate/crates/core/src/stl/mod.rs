//! Signal temporal logic: syntax, parameters, boolean monitoring and
//! per-trace critical parameter extraction.
//!
//! Until follows `s |= a U[t1,t2] b` iff some `t` in `[t1, t2]` has
//! `s^(t) |= b` and `s^(t') |= a` for every `0 <= t' < t`. Note that `a` is
//! required from time 0 of the shifted signal, not from `t1` as in several
//! other STL tools. An Until whose interval has `t2 < t1`, `t1 < 0` or
//! `t2 < 0` is false.

mod ast;
mod monitor;
mod params;
mod parser;

pub use ast::{Alternation, Bound, Expr, Formula, Interval, Monotonicity, Node, ParamDecl, ParameterizedFormula};
pub use monitor::{evaluate, formula_horizon};
pub use params::{check_monotonicity, critical_parameter, MonotonicityReport, MonotonicityViolation};
pub use parser::parse_formula;

pub(crate) use monitor::Monitor;

use crate::traces::TraceError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulaError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared signal variable {name:?} at {line}:{column}")]
    UndeclaredSignal { name: String, line: usize, column: usize },
    #[error("parameter {0:?} is used as both a lower and an upper interval bound")]
    AmbiguousBound(String),
    #[error("parameter {0:?} is declared but not used in the formula")]
    UnusedParameter(String),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("parameter {name:?} has invalid bracket [{lo}, {hi}]")]
    InvalidBracket { name: String, lo: String, hi: String },
    #[error("expected {expected} parameter values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unbounded-time formula not supported")]
    Unbounded,
    #[error("formula still contains parameter {0:?}; instantiate it first")]
    Uninstantiated(String),
    #[error("signal variable {0:?} missing from trace")]
    MissingSignal(String),
    #[error("trace too short: formula needs time {needed}, trace ends at {end}")]
    TraceTooShort { needed: String, end: String },
    #[error(
        "monotonicity violation on trace {trace}: parameter {param:?} is satisfied at {satisfied} but not at {unsatisfied}"
    )]
    MonotonicityViolation {
        trace: String,
        param: String,
        satisfied: String,
        unsatisfied: String,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
}
