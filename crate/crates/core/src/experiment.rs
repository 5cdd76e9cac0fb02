//! Noise model, Monte Carlo reconstruction errors, the bandwidth rule and
//! the theory-predicted convergence rates.
//!
//! For a fixed design the squared error of a (possibly mollified)
//! reconstruction from `y = E_n f + σ ξ` is a quadratic in `ξ`:
//!
//! ```text
//! ‖R P_n y - f‖² = ‖b‖² + 2σ Σ_i ξ_i ⟨b, ψ_i⟩ + σ² Σ_ij ξ_i ξ_j ⟨ψ_i, ψ_j⟩
//! ```
//!
//! with `b = R P_n E_n f - f` and `ψ_i = R φ_i`. [`ErrorDecomposition`]
//! precomputes the three pieces once (bias by Simpson on the study grid,
//! Gram matrix exactly from the closed forms), after which each draw costs
//! `O(n · bandwidth)` instead of a full quadrature pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Kernel, MollifiedBasis};
use crate::mesh_fe::{sample, FeBasis, MeshError};
use crate::quadrature::{l2_distance, simpson_values, GridSpec, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("need at least one Monte Carlo draw")]
    NoDraws,
    #[error("noise level must be finite and nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("bandwidth must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// The smooth test function `(1 - x)^2 sin^2(4x)`, vanishing at both ends.
pub fn damped_sine(x: f64) -> f64 {
    let s = (4.0 * x).sin();
    (1.0 - x) * (1.0 - x) * s * s
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    #[default]
    DampedSine,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::DampedSine => damped_sine(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::DampedSine => "damped_sine",
        }
    }
}

/// Centred Gaussian noise of standard deviation `sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self, ExperimentError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(ExperimentError::InvalidSigma(sigma));
        }
        Ok(Self { sigma, seed })
    }
}

/// Standard-normal vector for one draw. `draw_index` picks an independent
/// ChaCha stream under the model's seed, so draws can run in any order.
pub fn gaussian_vector(model: &NoiseModel, n: usize, draw_index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(draw_index);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the substream addressed by `path` under `master`.
pub fn substream_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Orders and noise exponent of one regime (`σ ∼ h^λ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub s_a: u32,
    pub s_r: u32,
    pub d: u32,
    pub lambda: f64,
}

/// Classical bandwidth `σ^{2/(2s_r+d)} h^{d/(2s_r+d)}`.
pub fn beta_star(sigma: f64, h: f64, s_r: u32, d: u32) -> f64 {
    let denom = f64::from(2 * s_r + d);
    sigma.powf(2.0 / denom) * h.powf(f64::from(d) / denom)
}

/// Noise threshold `s_a + (d/2)(s_a/s_r - 1)` up to which the bandwidth
/// rule attains its rate.
pub fn lambda_max(s_a: u32, s_r: u32, d: u32) -> f64 {
    let (s_a, s_r, d) = (f64::from(s_a), f64::from(s_r), f64::from(d));
    s_a + 0.5 * d * (s_a / s_r - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RateBound {
    Exact(f64),
    /// Only `γ >= value` is established.
    LowerBoundOnly(f64),
}

impl RateBound {
    pub fn value(self) -> f64 {
        match self {
            RateBound::Exact(v) | RateBound::LowerBoundOnly(v) => v,
        }
    }

    pub fn is_lower_bound_only(self) -> bool {
        matches!(self, RateBound::LowerBoundOnly(_))
    }
}

/// Predicted `(γ_noreg, γ_reg)` against `n`.
pub fn predicted_gamma(p: &RegimeParams) -> (f64, RateBound) {
    let (s_a, s_r, d) = (f64::from(p.s_a), f64::from(p.s_r), f64::from(p.d));
    let noreg = p.lambda.min(s_a) / d;
    let reg = if p.lambda <= lambda_max(p.s_a, p.s_r, p.d) {
        RateBound::Exact((2.0 * p.lambda + d) / (2.0 * s_r + d) * s_r / d)
    } else {
        RateBound::LowerBoundOnly(s_a / d)
    };
    (noreg, reg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Regularise,
    DontRegularise,
    EitherRegularisePreferred,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Regularise => "regularise",
            Strategy::DontRegularise => "dont_regularise",
            Strategy::EitherRegularisePreferred => "either_regularise_preferred",
        }
    }
}

/// Whether smoothing at the bandwidth rule beats plain interpolation.
pub fn recommend_strategy(p: &RegimeParams) -> Strategy {
    let (s_a, s_r) = (f64::from(p.s_a), f64::from(p.s_r));
    let lam = p.lambda;
    if p.s_a <= p.s_r {
        if lam < s_a {
            Strategy::Regularise
        } else {
            Strategy::EitherRegularisePreferred
        }
    } else if lam < s_r {
        Strategy::Regularise
    } else if lam > s_r && lam < lambda_max(p.s_a, p.s_r, p.d) {
        Strategy::DontRegularise
    } else {
        Strategy::EitherRegularisePreferred
    }
}

/// Monte Carlo estimate of `E‖R P_n y - f‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub mean_sq: f64,
    /// Standard error of `mean_sq`.
    pub std_error: f64,
    pub draws: usize,
}

impl ErrorEstimate {
    /// `sqrt(mean_sq)`.
    pub fn error(&self) -> f64 {
        self.mean_sq.sqrt()
    }

    /// Delta-method standard error of [`error`](Self::error).
    pub fn error_std_error(&self) -> f64 {
        let e = self.error();
        if e > 0.0 {
            self.std_error / (2.0 * e)
        } else {
            0.0
        }
    }
}

/// Bias, cross and Gram terms of the squared error for one reconstruction
/// space and one grid.
#[derive(Clone, Debug)]
pub struct ErrorDecomposition {
    bias_sq: f64,
    cross: Vec<f64>,
    /// Row `i` holds `⟨ψ_i, ψ_j⟩` for `j = i, i+1, ...`.
    gram: Vec<Vec<f64>>,
}

impl ErrorDecomposition {
    pub fn new(
        f: &(dyn Fn(f64) -> f64 + Sync),
        basis: &FeBasis<f64>,
        space: &MollifiedBasis<f64>,
        grid: &GridSpec<f64>,
    ) -> Self {
        let funcs = space.functions();
        let n = funcs.len();
        let m = grid.m();
        let z = sample(f, basis.design());
        let nodes: Vec<f64> = grid.nodes().collect();
        let ranges: Vec<(usize, usize)> = funcs
            .iter()
            .map(|p| grid_range(p.support(), grid))
            .collect();

        let mut resid = vec![0.0; m + 1];
        for (i, p) in funcs.iter().enumerate() {
            let zi = z.0[i];
            if zi == 0.0 {
                continue;
            }
            let (lo, hi) = ranges[i];
            let mut sweep = p.sweep();
            for k in lo..=hi {
                resid[k] += zi * sweep.eval(nodes[k]);
            }
        }
        for (r, &x) in resid.iter_mut().zip(&nodes) {
            *r -= f(x);
        }
        let sq: Vec<f64> = resid.iter().map(|r| r * r).collect();
        let bias_sq = simpson_values(&sq, grid);

        let weights = grid.weights();
        let cross = funcs
            .par_iter()
            .zip(ranges.par_iter())
            .map(|(p, &(lo, hi))| {
                let mut sweep = p.sweep();
                (lo..=hi)
                    .map(|k| weights[k] * resid[k] * sweep.eval(nodes[k]))
                    .sum::<f64>()
            })
            .collect();

        let lefts: Vec<f64> = funcs.iter().map(|p| p.support().0).collect();
        let gram = (0..n)
            .into_par_iter()
            .map(|i| {
                let right = funcs[i].support().1;
                let end = i + lefts[i..].partition_point(|&l| l < right);
                (i..end.max(i + 1))
                    .map(|j| funcs[i].inner_product(&funcs[j], 0.0, 1.0))
                    .collect()
            })
            .collect();

        Self {
            bias_sq,
            cross,
            gram,
        }
    }

    /// `‖R P_n E_n f - f‖²` by Simpson.
    pub fn bias_sq(&self) -> f64 {
        self.bias_sq
    }

    /// `Σ_i ‖ψ_i‖²_{L2(Ω)}`, the variance per unit `σ²`.
    pub fn variance_trace(&self) -> f64 {
        self.gram.iter().map(|row| row[0]).sum()
    }

    /// `E‖R P_n y - f‖²` for noise level `sigma`.
    pub fn expected_sq(&self, sigma: f64) -> f64 {
        self.bias_sq + sigma * sigma * self.variance_trace()
    }

    /// Squared error for one standard-normal draw `xi`.
    pub fn squared_error(&self, sigma: f64, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.cross.len());
        if sigma == 0.0 {
            return self.bias_sq;
        }
        let lin: f64 = xi.iter().zip(&self.cross).map(|(x, c)| x * c).sum();
        let mut quad = 0.0;
        for (i, row) in self.gram.iter().enumerate() {
            let off: f64 = row[1..].iter().zip(&xi[i + 1..]).map(|(g, x)| g * x).sum();
            quad += xi[i] * (row[0] * xi[i] + 2.0 * off);
        }
        (self.bias_sq + 2.0 * sigma * lin + sigma * sigma * quad).max(0.0)
    }

    /// Monte Carlo estimate over `draws` substreams of `model`.
    pub fn monte_carlo(
        &self,
        model: &NoiseModel,
        draws: usize,
    ) -> Result<ErrorEstimate, ExperimentError> {
        if draws == 0 {
            return Err(ExperimentError::NoDraws);
        }
        if model.sigma == 0.0 {
            return Ok(ErrorEstimate {
                mean_sq: self.bias_sq,
                std_error: 0.0,
                draws,
            });
        }
        let n = self.cross.len();
        let values: Vec<f64> = (0..draws as u64)
            .into_par_iter()
            .map(|d| self.squared_error(model.sigma, &gaussian_vector(model, n, d)))
            .collect();
        // sequential sums keep the result independent of thread scheduling
        let mean = values.iter().sum::<f64>() / draws as f64;
        let std_error = if draws > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            (var / draws as f64).sqrt()
        } else {
            0.0
        };
        Ok(ErrorEstimate {
            mean_sq: mean,
            std_error,
            draws,
        })
    }
}

/// Grid index range `[lo, hi]` covering `support`, clipped to the grid.
fn grid_range((lo, hi): (f64, f64), grid: &GridSpec<f64>) -> (usize, usize) {
    let (a, step, m) = (grid.a(), grid.step(), grid.m());
    let clamp = |v: f64| v.max(0.0).min(m as f64) as usize;
    let first = clamp(((lo - a) / step).floor());
    let last = clamp(((hi - a) / step).ceil());
    (first, last.max(first))
}

/// Monte Carlo reconstruction error `E‖R_β P_n (E_n f + σξ) - f‖²`.
///
/// `kernel = None` and `beta = 0` both select the unregularised estimator.
pub fn mc_error(
    f: &(dyn Fn(f64) -> f64 + Sync),
    basis: &FeBasis<f64>,
    kernel: Option<&Kernel<f64>>,
    beta: f64,
    model: &NoiseModel,
    draws: usize,
    grid: &GridSpec<f64>,
) -> Result<ErrorEstimate, ExperimentError> {
    if draws == 0 {
        return Err(ExperimentError::NoDraws);
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(ExperimentError::InvalidBeta(beta));
    }
    let space = MollifiedBasis::new(basis, kernel, beta);
    ErrorDecomposition::new(f, basis, &space, grid).monte_carlo(model, draws)
}

/// `sqrt(σ² Σ‖φ_i‖² + ‖P_n E_n f - f‖²)`, the exact expectation without
/// regularisation (bias term by Simpson).
pub fn analytic_noreg_error(
    f: &(dyn Fn(f64) -> f64 + Sync),
    basis: &FeBasis<f64>,
    sigma: f64,
    grid: &GridSpec<f64>,
) -> f64 {
    let z = sample(f, basis.design());
    let bias = l2_distance(
        |x| basis.reconstruct(&z, x).expect("length matches"),
        f,
        grid,
    );
    let trace: f64 = basis.basis_l2_norms_sq().iter().sum();
    (sigma * sigma * trace + bias * bias).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::mesh_fe::Family;

    #[test]
    fn lambda_max_values() {
        assert_eq!(lambda_max(2, 1, 1), 2.5);
        assert_eq!(lambda_max(3, 2, 2), 3.5);
        assert_eq!(lambda_max(3, 2, 1), 3.25);
        assert_eq!(lambda_max(2, 2, 1), 2.0);
        assert_eq!(lambda_max(3, 1, 1), 4.0);
    }

    #[test]
    fn beta_star_values() {
        let h: f64 = 0.01;
        for s_r in 1..=3 {
            let sigma = h.powi(s_r as i32);
            assert!((beta_star(sigma, h, s_r, 1) - h).abs() < 1e-15);
        }
        assert!((beta_star(h * h, h, 1, 1) - 4.6416e-4).abs() < 1e-8);
        assert!((beta_star(1.0, 0.1, 2, 1) - 0.630_957).abs() < 1e-6);
    }

    #[test]
    fn predicted_rates() {
        let p = |lambda, s_a, s_r| RegimeParams {
            s_a,
            s_r,
            d: 1,
            lambda,
        };
        assert_eq!(predicted_gamma(&p(1.0, 2, 1)), (1.0, RateBound::Exact(1.0)));
        let (g, r) = predicted_gamma(&p(2.0, 3, 2));
        assert_eq!(g, 2.0);
        assert!((r.value() - 2.0).abs() < 1e-15 && !r.is_lower_bound_only());
        assert_eq!(
            predicted_gamma(&p(4.0, 3, 2)),
            (3.0, RateBound::LowerBoundOnly(3.0))
        );
    }

    #[test]
    fn strategies() {
        let p = |lambda, s_a, s_r| RegimeParams {
            s_a,
            s_r,
            d: 1,
            lambda,
        };
        assert_eq!(recommend_strategy(&p(0.5, 2, 1)), Strategy::Regularise);
        assert_eq!(recommend_strategy(&p(1.5, 2, 1)), Strategy::DontRegularise);
        assert_eq!(
            recommend_strategy(&p(3.0, 2, 2)),
            Strategy::EitherRegularisePreferred
        );
        assert_eq!(
            recommend_strategy(&p(1.0, 2, 1)),
            Strategy::EitherRegularisePreferred
        );
        assert_eq!(
            recommend_strategy(&p(2.5, 2, 1)),
            Strategy::EitherRegularisePreferred
        );
        assert_eq!(recommend_strategy(&p(1.0, 2, 2)), Strategy::Regularise);
    }

    #[test]
    fn maximal_gain_identity() {
        for (s_a, s_r) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
            for d in 1..=3 {
                let p = RegimeParams {
                    s_a,
                    s_r,
                    d,
                    lambda: f64::from(s_a),
                };
                let (noreg, reg) = predicted_gamma(&p);
                let gap = noreg - reg.value();
                let closed = f64::from(s_a - s_r) / f64::from(2 * s_r + d);
                assert!((gap - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noreg_prediction_monotone_and_capped() {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=40 {
            let p = RegimeParams {
                s_a: 3,
                s_r: 1,
                d: 1,
                lambda: k as f64 * 0.25,
            };
            let (g, _) = predicted_gamma(&p);
            assert!(g >= prev && g <= 3.0);
            prev = g;
        }
    }

    #[test]
    fn gaussian_determinism_and_moments() {
        let m = NoiseModel::new(1.0, 7).unwrap();
        assert_eq!(gaussian_vector(&m, 50, 3), gaussian_vector(&m, 50, 3));
        let v = gaussian_vector(&m, 1_000_000, 0);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.005);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn distinct_draws_uncorrelated() {
        let m = NoiseModel::new(1.0, 11).unwrap();
        let a = gaussian_vector(&m, 10_000, 0);
        let b = gaussian_vector(&m, 10_000, 1);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / 10_000.0;
        assert!(corr.abs() < 0.05);
    }

    #[test]
    fn substream_seeds_differ() {
        assert_ne!(substream_seed(42, &[0, 1]), substream_seed(42, &[1, 0]));
        assert_eq!(substream_seed(42, &[3, 2]), substream_seed(42, &[3, 2]));
    }

    #[test]
    fn noise_free_is_bias() {
        let b = FeBasis::build(Family::P1, 11).unwrap();
        let grid = GridSpec::unit(10_000).unwrap();
        let model = NoiseModel::new(0.0, 1).unwrap();
        let est = mc_error(&damped_sine, &b, None, 0.0, &model, 20, &grid).unwrap();
        let z = sample(damped_sine, b.design());
        let bias = l2_distance(|x| b.reconstruct(&z, x).unwrap(), damped_sine, &grid);
        assert_eq!(est.std_error, 0.0);
        assert!((est.mean_sq - bias * bias).abs() <= 1e-12 * bias * bias);
    }

    #[test]
    fn pure_noise_matches_trace() {
        let b = FeBasis::build(Family::P1, 11).unwrap();
        let grid = GridSpec::unit(1000).unwrap();
        let model = NoiseModel::new(1.0, 5).unwrap();
        let est = mc_error(&|_| 0.0, &b, None, 0.0, &model, 2000, &grid).unwrap();
        let expect: f64 = 9.0 * (2.0 * 0.1 / 3.0) + 2.0 * (0.1 / 3.0);
        assert!((expect - 0.666_667).abs() < 1e-6);
        assert!((est.mean_sq - expect).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn zero_beta_kernel_equals_plain() {
        let b = FeBasis::build(Family::P2, 21).unwrap();
        let grid = GridSpec::unit(2000).unwrap();
        let model = NoiseModel::new(0.05, 9).unwrap();
        let k = KernelKind::H.build();
        let a = mc_error(&damped_sine, &b, None, 0.0, &model, 50, &grid).unwrap();
        let c = mc_error(&damped_sine, &b, Some(&k), 0.0, &model, 50, &grid).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = FeBasis::build(Family::P1, 11).unwrap();
        let grid = GridSpec::unit(100).unwrap();
        let model = NoiseModel::new(0.1, 1).unwrap();
        assert_eq!(
            mc_error(&damped_sine, &b, None, 0.0, &model, 0, &grid),
            Err(ExperimentError::NoDraws)
        );
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }
}
