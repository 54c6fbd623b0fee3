//! Statistical verification of probabilistic conformance.
//!
//! Two stochastic systems conform with respect to a monotonically
//! parameterized STL template if every instance of the template holds on
//! both with approximately the same probability. [`engine::run_conformance`]
//! decides this with a sequential Kolmogorov-Smirnov style test whose
//! confidence level is computed as it goes.
//!
//! The core is generic over the scalar type; the aliases below fix it to
//! `f64` (and `f32` where useful).

// `!(x > y)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod scalar;
pub mod stats;
pub mod stl;
pub mod systems;
pub mod traces;

pub use scalar::Scalar;

pub type Trace64 = traces::Trace<f64>;
pub type Trace32 = traces::Trace<f32>;
pub type Formula64 = stl::Formula<f64>;
pub type ParameterizedFormula64 = stl::ParameterizedFormula<f64>;
pub type ParameterizedFormula32 = stl::ParameterizedFormula<f32>;
pub type SampleSet64 = stats::SampleSet<f64>;
pub type SampleSet32 = stats::SampleSet<f32>;
pub type TestConfig64 = engine::TestConfig<f64>;
pub type Input64 = systems::Input<f64>;
