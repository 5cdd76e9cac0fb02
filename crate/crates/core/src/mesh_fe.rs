//! Uniform 1-D designs on `[0, 1]` and the P1 / P2 nodal finite-element bases.
//!
//! Node `i` (0-based) sits at `i / (n - 1)` for both families. P1 uses
//! `h = 1/(n-1)` and hat functions; P2 requires odd `n`, uses
//! `h = 2/(n-1)` (the element length) and alternates vertex functions
//! (even `i`) with bubble functions (odd `i`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::piecewise::PiecewisePoly;
use crate::poly::Poly;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("need at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("P2 elements need an odd node count, got {0}")]
    EvenNodeCount(usize),
    #[error("basis index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("nodal vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("unknown element family {0:?}")]
    UnknownFamily(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    P1,
    P2,
}

impl Family {
    /// Approximation order of the interpolant in L2.
    pub fn approximation_order(self) -> u32 {
        match self {
            Family::P1 => 2,
            Family::P2 => 3,
        }
    }

    /// Smallest admissible node count `>= n` (odd for P2).
    pub fn normalise_n(self, n: usize) -> usize {
        match self {
            Family::P2 if n.is_multiple_of(2) => n + 1,
            _ => n,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::P1 => f.write_str("P1"),
            Family::P2 => f.write_str("P2"),
        }
    }
}

impl FromStr for Family {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" => Ok(Family::P1),
            "P2" => Ok(Family::P2),
            _ => Err(MeshError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    family: Family,
    n: usize,
    h: T,
    nodes: Vec<T>,
}

impl<T: Scalar> Design<T> {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh parameter.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
}

pub fn build_design<T: Scalar>(family: Family, n: usize) -> Result<Design<T>, MeshError> {
    if n < 3 {
        return Err(MeshError::TooFewNodes(n));
    }
    if family == Family::P2 && n.is_multiple_of(2) {
        return Err(MeshError::EvenNodeCount(n));
    }
    let denom = T::from_usize_exact(n - 1);
    let h = match family {
        Family::P1 => T::one() / denom,
        Family::P2 => T::from_usize_exact(2) / denom,
    };
    let nodes = (0..n).map(|i| T::from_usize_exact(i) / denom).collect();
    Ok(Design {
        family,
        n,
        h,
        nodes,
    })
}

/// Values at the nodes of a design.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalVector<T>(pub Vec<T>);

impl<T: Scalar> NodalVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }
}

/// `values[i] = f(nodes[i])`.
pub fn sample<T: Scalar, F: Fn(T) -> T>(f: F, design: &Design<T>) -> NodalVector<T> {
    NodalVector(design.nodes.iter().map(|&x| f(x)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeBasis<T> {
    design: Design<T>,
}

impl<T: Scalar> FeBasis<T> {
    pub fn new(design: Design<T>) -> Self {
        Self { design }
    }

    pub fn build(family: Family, n: usize) -> Result<Self, MeshError> {
        build_design(family, n).map(Self::new)
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn family(&self) -> Family {
        self.design.family
    }

    pub fn n(&self) -> usize {
        self.design.n
    }

    pub fn h(&self) -> T {
        self.design.h
    }

    pub fn approximation_order(&self) -> u32 {
        self.design.family.approximation_order()
    }

    fn check_index(&self, i: usize) -> Result<(), MeshError> {
        if i >= self.n() {
            return Err(MeshError::IndexOutOfRange {
                index: i,
                n: self.n(),
            });
        }
        Ok(())
    }

    /// `φ_i(x)` from the shape-function formulas; zero outside `[0, 1]`.
    pub fn eval_basis(&self, i: usize, x: T) -> Result<T, MeshError> {
        self.check_index(i)?;
        Ok(self.phi(i, x))
    }

    fn phi(&self, i: usize, x: T) -> T {
        if x < T::zero() || x > T::one() {
            return T::zero();
        }
        let one = T::one();
        let two = T::from_usize_exact(2);
        // offset in units of the node spacing; avoids cancellation in x - x_i
        let spacing_inv = T::from_usize_exact(self.n() - 1);
        let mut scaled = x * spacing_inv;
        // points within rounding of a node are evaluated at the node
        let tol = T::breakpoint_tol(spacing_inv);
        if tol > T::zero() {
            let nearest = T::from_f64_lossy(scaled.to_f64().unwrap_or(0.0).round());
            if (scaled - nearest).abs() <= tol {
                scaled = nearest;
            }
        }
        let steps = (scaled - T::from_usize_exact(i)).abs();
        let t = match self.design.family {
            Family::P1 => steps,
            Family::P2 => steps / two,
        };
        match (self.design.family, i % 2) {
            (Family::P1, _) => {
                if t < one {
                    one - t
                } else {
                    T::zero()
                }
            }
            (Family::P2, 0) => {
                if t < one {
                    (one - t) * (one - two * t)
                } else {
                    T::zero()
                }
            }
            (Family::P2, _) => {
                let half = one / two;
                if t < half {
                    one - T::from_usize_exact(4) * t * t
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Indices of the basis functions that can be nonzero at `x`.
    fn active(&self, x: T) -> std::ops::RangeInclusive<usize> {
        let n = self.n();
        let scaled = (x * T::from_usize_exact(n - 1)).to_f64().unwrap_or(0.0);
        match self.design.family {
            Family::P1 => {
                let k = (scaled.floor().max(0.0) as usize).min(n - 2);
                k..=k + 1
            }
            Family::P2 => {
                let elems = (n - 1) / 2;
                let e = ((scaled / 2.0).floor().max(0.0) as usize).min(elems - 1);
                2 * e..=2 * e + 2
            }
        }
    }

    /// `Σ_i z_i φ_i(x)`, touching only the element containing `x`.
    pub fn reconstruct(&self, z: &NodalVector<T>, x: T) -> Result<T, MeshError> {
        if z.len() != self.n() {
            return Err(MeshError::LengthMismatch {
                got: z.len(),
                expected: self.n(),
            });
        }
        Ok(self
            .active(x)
            .fold(T::zero(), |acc, i| acc + z.0[i] * self.phi(i, x)))
    }

    /// Closed-form `φ_i` restricted to `[0, 1]`.
    pub fn basis_function(&self, i: usize) -> Result<PiecewisePoly<T>, MeshError> {
        self.check_index(i)?;
        let h = self.design.h;
        let xi = self.design.nodes[i];
        let one = T::one();
        let two = T::from_usize_exact(2);
        let four = T::from_usize_exact(4);
        let (breaks, pieces) = match (self.design.family, i % 2) {
            (Family::P1, _) => {
                let inv = one / h;
                (
                    vec![xi - h, xi, xi + h],
                    vec![Poly::new(vec![T::zero(), inv]), Poly::new(vec![one, -inv])],
                )
            }
            (Family::P2, 0) => {
                let inv = one / h;
                let inv2 = inv * inv;
                (
                    vec![xi - h, xi, xi + h],
                    vec![
                        Poly::new(vec![T::zero(), -inv, two * inv2]),
                        Poly::new(vec![one, -T::from_usize_exact(3) * inv, two * inv2]),
                    ],
                )
            }
            (Family::P2, _) => {
                let half = h / two;
                let inv = one / h;
                let inv2 = inv * inv;
                (
                    vec![xi - half, xi, xi + half],
                    vec![
                        Poly::new(vec![T::zero(), four * inv, -four * inv2]),
                        Poly::new(vec![one, T::zero(), -four * inv2]),
                    ],
                )
            }
        };
        let full = PiecewisePoly::new(breaks, pieces).expect("valid shape breakpoints");
        Ok(full
            .restricted(T::zero(), T::one())
            .expect("basis support meets [0, 1]"))
    }

    pub fn basis_functions(&self) -> Vec<PiecewisePoly<T>> {
        (0..self.n())
            .map(|i| self.basis_function(i).expect("index in range"))
            .collect()
    }

    /// Exact `‖φ_i‖_{L2(0,1)}` for every node.
    pub fn basis_l2_norms(&self) -> Vec<T>
    where
        T: num_traits::Float,
    {
        self.basis_functions()
            .iter()
            .map(|p| p.l2_norm_sq().sqrt())
            .collect()
    }

    /// Exact squared norms; works in any [`Scalar`].
    pub fn basis_l2_norms_sq(&self) -> Vec<T> {
        self.basis_functions()
            .iter()
            .map(PiecewisePoly::l2_norm_sq)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn basis(family: Family, n: usize) -> FeBasis<f64> {
        FeBasis::build(family, n).unwrap()
    }

    #[test]
    fn design_p1() {
        let d = build_design::<f64>(Family::P1, 11).unwrap();
        assert!((d.h() - 0.1).abs() < 1e-15);
        assert_eq!(d.nodes()[0], 0.0);
        assert_eq!(d.nodes()[10], 1.0);
        assert!((d.nodes()[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn design_p2() {
        let d = build_design::<f64>(Family::P2, 11).unwrap();
        assert!((d.h() - 0.2).abs() < 1e-15);
        assert!((d.nodes()[1] - 0.1).abs() < 1e-15);
        assert_eq!(d.nodes()[10], 1.0);
    }

    #[test]
    fn design_errors() {
        assert_eq!(
            build_design::<f64>(Family::P2, 10).unwrap_err(),
            MeshError::EvenNodeCount(10)
        );
        assert_eq!(
            build_design::<f64>(Family::P1, 2).unwrap_err(),
            MeshError::TooFewNodes(2)
        );
    }

    #[test]
    fn hat_values() {
        let b = basis(Family::P1, 11);
        assert_eq!(b.eval_basis(3, 0.3).unwrap(), 1.0);
        assert!((b.eval_basis(3, 0.35).unwrap() - 0.5).abs() < 1e-14);
        assert!(b.eval_basis(11, 0.3).is_err());
    }

    #[test]
    fn bubble_value() {
        // node 1 sits at 0.1; (0.15 - 0.1)/0.2 = 0.25 and 1 - 4 * 0.25^2 = 0.75
        let b = basis(Family::P2, 11);
        assert!((b.eval_basis(1, 0.15).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn reconstruct_constants_and_linear() {
        for fam in [Family::P1, Family::P2] {
            let b = basis(fam, 11);
            let ones = NodalVector(vec![1.0; 11]);
            let zeros = NodalVector::zeros(11);
            for k in 0..=100 {
                let x = k as f64 / 100.0;
                assert!((b.reconstruct(&ones, x).unwrap() - 1.0).abs() < 1e-14);
                assert_eq!(b.reconstruct(&zeros, x).unwrap(), 0.0);
            }
        }
        let b = basis(Family::P1, 11);
        let z = sample(|x| x, b.design());
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert!((b.reconstruct(&z, x).unwrap() - x).abs() < 1e-14);
        }
        assert!(b.reconstruct(&NodalVector::zeros(3), 0.5).is_err());
    }

    #[test]
    fn sample_test_function() {
        let f = |x: f64| (1.0 - x).powi(2) * (4.0 * x).sin().powi(2);
        let b = basis(Family::P1, 11);
        let z = sample(f, b.design());
        assert_eq!(z.values()[0], 0.0);
        assert_eq!(z.values()[10], 0.0);
        assert!((z.values()[5] - 0.25 * 2f64.sin().powi(2)).abs() < 1e-15);
        assert!((z.values()[5] - 0.206_705_5).abs() < 1e-7);
    }

    #[test]
    fn closed_form_matches_pointwise() {
        for fam in [Family::P1, Family::P2] {
            let b = basis(fam, 21);
            for i in 0..21 {
                let p = b.basis_function(i).unwrap();
                for k in 0..=1000 {
                    let x = k as f64 / 1000.0;
                    let diff = (p.eval(x) - b.eval_basis(i, x).unwrap()).abs();
                    assert!(diff < 1e-12, "{fam} i={i} x={x} diff={diff}");
                }
            }
        }
    }

    #[test]
    fn p1_norms() {
        let b = basis(Family::P1, 11);
        let sq = b.basis_l2_norms_sq();
        assert!((sq[0] - 0.1 / 3.0).abs() < 1e-15);
        assert!((sq[5] - 0.2 / 3.0).abs() < 1e-15);
        assert!((sq[10] - 0.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_in_rationals() {
        type Q = Ratio<i64>;
        let b = FeBasis::<Q>::build(Family::P2, 5).unwrap();
        let sq = b.basis_l2_norms_sq();
        // interior vertex: 2 * ∫_0^h ((1-s/h)(1-2s/h))^2 ds = 2h * 2/15 = 4h/15
        assert_eq!(sq[2], Ratio::new(4, 15) * b.h());
        // bubble: ∫ (1 - 4t^2)^2 over |t| < 1/2, scaled by h: 8h/15
        assert_eq!(sq[1], Ratio::new(8, 15) * b.h());
    }

    #[test]
    fn works_in_f32() {
        let b = FeBasis::<f32>::build(Family::P1, 11).unwrap();
        let ones = NodalVector(vec![1.0f32; 11]);
        assert!((b.reconstruct(&ones, 0.37).unwrap() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, p2 in any::<bool>()) {
            let fam = if p2 { Family::P2 } else { Family::P1 };
            let b = basis(fam, 101);
            let s: f64 = (0..101).map(|i| b.eval_basis(i, x).unwrap()).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn support_bound(x in 0.0f64..=1.0, i in 0usize..101, p2 in any::<bool>()) {
            let fam = if p2 { Family::P2 } else { Family::P1 };
            let b = basis(fam, 101);
            if (x - b.design().nodes()[i]).abs() >= 2.0 * b.h() {
                prop_assert_eq!(b.eval_basis(i, x).unwrap(), 0.0);
            }
        }
    }
}
