//! Scalar abstraction shared by the polynomial, mesh and kernel layers.
//!
//! Everything that only needs field arithmetic and ordering is generic over
//! [`Scalar`], so the same code runs in `f32`, `f64` and exact rationals.
//! Code that needs `sqrt`, `sin` or random draws is `f64`-only.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Ordered field usable for exact piecewise-polynomial arithmetic.
pub trait Scalar:
    Copy
    + Num
    + NumAssign
    + Signed
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Breakpoints closer than this (relative to `scale`) are treated as one.
    fn breakpoint_tol(scale: Self) -> Self;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("index fits in scalar")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value fits in scalar")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn breakpoint_tol(scale: Self) -> Self {
        1e-14 * scale.abs().max(1.0)
    }
}

impl Scalar for f32 {
    fn breakpoint_tol(scale: Self) -> Self {
        4.0 * f32::EPSILON * scale.abs().max(1.0)
    }
}

impl Scalar for Ratio<i64> {
    fn breakpoint_tol(_scale: Self) -> Self {
        Ratio::from_integer(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_merges_only_equal_points() {
        let tol = <Ratio<i64> as Scalar>::breakpoint_tol(Ratio::new(3, 2));
        assert_eq!(tol, Ratio::from_integer(0));
    }

    #[test]
    fn float_tolerance_scales() {
        assert!(f64::breakpoint_tol(1e3) > f64::breakpoint_tol(1.0));
        assert_eq!(f64::breakpoint_tol(1e-3), f64::breakpoint_tol(1.0));
    }
}
