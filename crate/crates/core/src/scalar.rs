//! Floating point abstraction shared by the statistics, trace and monitor code.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used for signal values, timestamps and statistics: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Absolute slack used when comparing times that were produced by
    /// adding or subtracting interval endpoints.
    const TIME_EPS: Self;

    /// Converts an `f64` literal; every finite `f64` maps to some value.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal converts to scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for time `t`, relative above magnitude 1.
    fn time_tol(t: Self) -> Self {
        Self::TIME_EPS * t.abs().max(Self::one())
    }
}

impl Scalar for f32 {
    const TIME_EPS: Self = 1e-5;
}

impl Scalar for f64 {
    const TIME_EPS: Self = 1e-9;
}

/// Total order used for sorting samples; NaNs never reach the statistics.
pub(crate) fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}
