//! Dense univariate polynomials in a local variable.

use std::ops::{Add, Mul};

use crate::scalar::Scalar;

/// Polynomial `c[0] + c[1] t + c[2] t^2 + ...`.
///
/// Pieces of a [`PiecewisePoly`](crate::PiecewisePoly) store their
/// polynomial in the offset `t = x - left_breakpoint`, which keeps the
/// coefficients well scaled on short intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self {
            coeffs: vec![T::zero()],
        }
    }

    pub fn constant(c: T) -> Self {
        Self { coeffs: vec![c] }
    }

    /// The polynomial `t`.
    pub fn identity() -> Self {
        Self {
            coeffs: vec![T::zero(), T::one()],
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Formal degree (length of the coefficient list minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn eval(&self, t: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * t + c)
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * k).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), T::zero());
        }
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// Add `k * other` in place.
    pub fn add_scaled(&mut self, other: &Self, k: T) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), T::zero());
        }
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += k * b;
        }
    }

    pub fn mul_poly(&self, other: &Self) -> Self {
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// Returns `q` with `q(t) = p(t + s)` (Taylor shift).
    pub fn shifted(&self, s: T) -> Self {
        let mut c = self.coeffs.clone();
        if s.is_zero() {
            return Self { coeffs: c };
        }
        let d = c.len() - 1;
        for i in 0..d {
            for j in (i..d).rev() {
                let next = c[j + 1];
                c[j] += s * next;
            }
        }
        Self { coeffs: c }
    }

    /// Returns `q` with `q(t) = p(k t)`.
    pub fn dilated(&self, k: T) -> Self {
        let mut pow = T::one();
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                let v = c * pow;
                pow *= k;
                v
            })
            .collect();
        Self { coeffs }
    }

    /// Antiderivative vanishing at `t = 0`.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(T::zero());
        for (k, &c) in self.coeffs.iter().enumerate() {
            out.push(c / T::from_usize_exact(k + 1));
        }
        Self { coeffs: out }
    }

    /// `∫_0^len p(t) dt`.
    pub fn integral(&self, len: T) -> T {
        // Horner on the antiderivative without allocating.
        let mut acc = T::zero();
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * len + c / T::from_usize_exact(k + 1);
        }
        acc * len
    }

    /// Composition `p(c0 + c1 w)` as a polynomial in `w`.
    pub fn compose_linear(&self, c0: T, c1: T) -> Self {
        let lin = Self {
            coeffs: vec![c0, c1],
        };
        let mut rev = self.coeffs.iter().rev();
        let mut acc = Self::constant(*rev.next().expect("nonempty coefficients"));
        for &c in rev {
            acc = acc.mul_poly(&lin);
            acc.coeffs[0] += c;
        }
        acc
    }

    /// Drop trailing exact zeros, keeping at least one coefficient.
    pub fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        self
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: Self) -> Poly<T> {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: Self) -> Poly<T> {
        self.mul_poly(rhs)
    }
}

/// Binomial coefficient as a scalar.
pub(crate) fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    let mut acc = T::one();
    for j in 0..k {
        acc = acc * T::from_usize_exact(n - j) / T::from_usize_exact(j + 1);
    }
    acc
}
