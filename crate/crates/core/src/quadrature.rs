//! Composite Simpson quadrature and L2 distances on an interval.

use num_traits::Float;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("Simpson's rule needs an even subinterval count >= 2, got {0}")]
    InvalidSubintervals(usize),
    #[error("empty or reversed interval")]
    InvalidInterval,
}

/// `m` equal subintervals of `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    m: usize,
    a: T,
    b: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(m: usize, a: T, b: T) -> Result<Self, QuadratureError> {
        if m < 2 || m % 2 == 1 {
            return Err(QuadratureError::InvalidSubintervals(m));
        }
        if a >= b {
            return Err(QuadratureError::InvalidInterval);
        }
        Ok(Self { m, a, b })
    }

    pub fn unit(m: usize) -> Result<Self, QuadratureError> {
        Self::new(m, T::zero(), T::one())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn step(&self) -> T {
        (self.b - self.a) / T::from_usize_exact(self.m)
    }

    /// `k`-th node, `0 <= k <= m`.
    pub fn node(&self, k: usize) -> T {
        if k == self.m {
            return self.b;
        }
        self.a + self.step() * T::from_usize_exact(k)
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.m).map(move |k| self.node(k))
    }

    /// Simpson weight of node `k`.
    pub fn weight(&self, k: usize) -> T {
        let third = self.step() / T::from_usize_exact(3);
        if k == 0 || k == self.m {
            third
        } else if k % 2 == 1 {
            third * T::from_usize_exact(4)
        } else {
            third * T::from_usize_exact(2)
        }
    }

    pub fn weights(&self) -> Vec<T> {
        (0..=self.m).map(|k| self.weight(k)).collect()
    }
}

/// Composite Simpson approximation of `∫_a^b g`.
pub fn simpson<T: Scalar, G: Fn(T) -> T>(g: G, spec: &GridSpec<T>) -> T {
    let m = spec.m;
    let mut odd = T::zero();
    let mut even = T::zero();
    for k in 1..m {
        let v = g(spec.node(k));
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    combine(g(spec.a) + g(spec.b), odd, even, spec)
}

/// Simpson on values already sampled at the grid nodes. Bitwise identical
/// to [`simpson`] when `values[k] == g(spec.node(k))`.
pub fn simpson_values<T: Scalar>(values: &[T], spec: &GridSpec<T>) -> T {
    assert_eq!(values.len(), spec.m + 1, "one value per grid node");
    let m = spec.m;
    let mut odd = T::zero();
    let mut even = T::zero();
    for (k, &v) in values.iter().enumerate().take(m).skip(1) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    combine(values[0] + values[m], odd, even, spec)
}

fn combine<T: Scalar>(ends: T, odd: T, even: T, spec: &GridSpec<T>) -> T {
    let total = ends + T::from_usize_exact(4) * odd + T::from_usize_exact(2) * even;
    total * spec.step() / T::from_usize_exact(3)
}

/// Simpson with the subinterval count checked at the call.
pub fn simpson_checked<T: Scalar, G: Fn(T) -> T>(
    g: G,
    m: usize,
    a: T,
    b: T,
) -> Result<T, QuadratureError> {
    Ok(simpson(g, &GridSpec::new(m, a, b)?))
}

/// `sqrt(∫ (g1 - g2)^2)` by Simpson.
pub fn l2_distance<T, G1, G2>(g1: G1, g2: G2, spec: &GridSpec<T>) -> T
where
    T: Scalar + Float,
    G1: Fn(T) -> T,
    G2: Fn(T) -> T,
{
    simpson(
        |x| {
            let d = g1(x) - g2(x);
            d * d
        },
        spec,
    )
    .max(T::zero())
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn exact_for_cubics() {
        let s = GridSpec::unit(2).unwrap();
        assert_eq!(simpson(|x: f64| x * x * x, &s), 0.25);
        let q = GridSpec::<Ratio<i64>>::unit(2).unwrap();
        assert_eq!(simpson(|x| x * x * x, &q), Ratio::new(1, 4));
    }

    #[test]
    fn constants() {
        for m in [2, 10, 1000] {
            let s = GridSpec::unit(m).unwrap();
            assert!((simpson(|_| 1.0, &s) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_odd_m() {
        assert_eq!(
            GridSpec::<f64>::unit(3).unwrap_err(),
            QuadratureError::InvalidSubintervals(3)
        );
        assert!(GridSpec::new(4, 1.0, 0.0).is_err());
        assert!(simpson_checked(|x: f64| x, 5, 0.0, 1.0).is_err());
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = 0.5 - 8f64.sin() / 16.0;
        let errs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&m| {
                let s = GridSpec::unit(m).unwrap();
                (simpson(|x: f64| (4.0 * x).sin().powi(2), &s) - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 4.0).abs() < 0.3, "rate {rate}");
        }
    }

    #[test]
    fn l2_basic() {
        let s = GridSpec::unit(100).unwrap();
        assert_eq!(l2_distance(|x: f64| x.sin(), |x: f64| x.sin(), &s), 0.0);
        assert!((l2_distance(|_| 1.0, |_| 0.0, &s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampled_values_match_lazy() {
        let s = GridSpec::unit(50).unwrap();
        let g = |x: f64| (5.0 * x).sin() + x;
        let vals: Vec<f64> = s.nodes().map(g).collect();
        assert_eq!(simpson_values(&vals, &s), simpson(g, &s));
    }

    #[test]
    fn weights_sum_to_length() {
        let s = GridSpec::new(10, 0.5, 2.0).unwrap();
        let total: f64 = s.weights().iter().sum();
        assert!((total - 1.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn linear_in_integrand(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let s = GridSpec::unit(64).unwrap();
            let f = |x: f64| x.exp();
            let g = |x: f64| (3.0 * x).cos();
            let lhs = simpson(|x| a * f(x) + b * g(x), &s);
            let rhs = a * simpson(f, &s) + b * simpson(g, &s);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn monotone_for_nonnegative(c in 0.0f64..5.0) {
            let s = GridSpec::unit(32).unwrap();
            let base = simpson(|x: f64| x * x, &s);
            prop_assert!(simpson(|x: f64| x * x + c * (x * 7.0).sin().powi(2), &s) >= base);
        }
    }
}
