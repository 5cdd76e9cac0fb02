//! Log-log rate fitting and full noise-exponent sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{
    beta_star, predicted_gamma, recommend_strategy, substream_seed, ErrorDecomposition,
    ErrorEstimate, ExperimentError, NoiseModel, RateBound, RegimeParams, Strategy, TestFunction,
};
use crate::kernel::{KernelKind, MollifiedBasis};
use crate::mesh_fe::{Family, FeBasis};
use crate::quadrature::GridSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("error value {0} at n = {1} is not positive")]
    NonPositiveError(f64, usize),
    #[error("duplicate sample count n = {0}")]
    DuplicateN(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub n: usize,
    pub error: f64,
    pub std_error: f64,
}

/// Fitted decay `e ∼ n^{-γ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub gamma: f64,
    /// Largest absolute log10 residual of the fit.
    pub residual: f64,
    pub errors: Vec<ErrorPoint>,
}

/// Least-squares slope of `log e` against `log n`, negated.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateEstimate, RateError> {
    let pts: Vec<ErrorPoint> = points
        .iter()
        .map(|&(n, error)| ErrorPoint {
            n,
            error,
            std_error: 0.0,
        })
        .collect();
    fit_error_points(pts)
}

pub fn fit_error_points(points: Vec<ErrorPoint>) -> Result<RateEstimate, RateError> {
    if points.len() < 2 {
        return Err(RateError::TooFewPoints(points.len()));
    }
    for (k, p) in points.iter().enumerate() {
        if !p.error.is_finite() || p.error <= 0.0 {
            return Err(RateError::NonPositiveError(p.error, p.n));
        }
        if points[..k].iter().any(|q| q.n == p.n) {
            return Err(RateError::DuplicateN(p.n));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.log10()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (my + slope * (x - mx) - y).abs())
        .fold(0.0, f64::max);
    Ok(RateEstimate {
        gamma: -slope,
        residual,
        errors: points,
    })
}

pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_SIMPSON_M: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_N_VALUES: [usize; 3] = [11, 101, 1001];

/// `0, 0.25, ..., 5`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.25).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub family: Family,
    pub kernel: Option<KernelKind>,
    pub lambda_grid: Vec<f64>,
    pub n_values: Vec<usize>,
    pub draws: usize,
    pub seed: u64,
    pub simpson_m: usize,
    pub test_function: TestFunction,
    /// Sobolev-ball radius; recorded only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_radius: Option<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            family: Family::P1,
            kernel: None,
            lambda_grid: default_lambda_grid(),
            n_values: DEFAULT_N_VALUES.to_vec(),
            draws: DEFAULT_DRAWS,
            seed: DEFAULT_SEED,
            simpson_m: DEFAULT_SIMPSON_M,
            test_function: TestFunction::DampedSine,
            sobolev_radius: None,
        }
    }
}

impl StudyConfig {
    /// Rounds even `n` up to odd for P2; returns a note per change.
    pub fn normalise(&mut self) -> Vec<String> {
        let mut notes = Vec::new();
        for n in &mut self.n_values {
            let fixed = self.family.normalise_n(*n);
            if fixed != *n {
                notes.push(format!(
                    "{} needs odd n: using n = {fixed} instead of {n}",
                    self.family
                ));
                *n = fixed;
            }
        }
        notes
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |msg: String| Err(StudyError::Invalid(msg));
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid is empty".into());
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return bad("lambda_grid values must be finite and nonnegative".into());
        }
        if self.lambda_grid.windows(2).any(|w| w[0] > w[1]) {
            return bad("lambda_grid must be sorted".into());
        }
        if self.n_values.len() < 2 {
            return bad("need at least two n_values".into());
        }
        if self.n_values.iter().any(|&n| n < 3) {
            return bad("every n must be at least 3".into());
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_values must be strictly increasing".into());
        }
        if self.family == Family::P2 && self.n_values.iter().any(|n| n % 2 == 0) {
            return bad("P2 needs odd n_values".into());
        }
        if self.draws < 1 {
            return bad("draws must be at least 1".into());
        }
        if self.simpson_m < 2 || self.simpson_m % 2 == 1 {
            return bad(format!(
                "simpson_m must be even and >= 2, got {}",
                self.simpson_m
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub lambda: f64,
    pub noreg: RateEstimate,
    pub reg: Option<RateEstimate>,
    pub theory_noreg: f64,
    pub theory_reg: Option<RateBound>,
    pub regime: Option<Strategy>,
    /// Bandwidth used at each n (empty without a kernel).
    pub betas: Vec<f64>,
}

impl StudyRow {
    pub fn gamma_noreg(&self) -> f64 {
        self.noreg.gamma
    }

    pub fn gamma_reg(&self) -> Option<f64> {
        self.reg.as_ref().map(|r| r.gamma)
    }

    /// Measured error without regularisation at sample count `n`.
    pub fn noreg_error_at(&self, n: usize) -> Option<f64> {
        self.noreg.errors.iter().find(|p| p.n == n).map(|p| p.error)
    }

    pub fn reg_error_at(&self, n: usize) -> Option<f64> {
        self.reg
            .as_ref()?
            .errors
            .iter()
            .find(|p| p.n == n)
            .map(|p| p.error)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub notes: Vec<String>,
    pub rows: Vec<StudyRow>,
}

fn point(n: usize, est: &ErrorEstimate) -> ErrorPoint {
    ErrorPoint {
        n,
        error: est.error(),
        std_error: est.error_std_error(),
    }
}

/// Runs the full sweep: for each λ and n, `σ = h^λ`; the unregularised
/// error uses `β = 0` and the regularised one `β = β*(σ, h)`. Both share the
/// noise draws of substream `(seed, λ index, n index)`.
pub fn run_study(config: &StudyConfig) -> Result<StudyTable, StudyError> {
    let mut config = config.clone();
    let notes = config.normalise();
    config.validate()?;

    let grid = GridSpec::unit(config.simpson_m).map_err(ExperimentError::from)?;
    let f_kind = config.test_function;
    let f = move |x: f64| f_kind.eval(x);
    let bases: Vec<FeBasis<f64>> = config
        .n_values
        .iter()
        .map(|&n| FeBasis::build(config.family, n).map_err(ExperimentError::from))
        .collect::<Result<_, _>>()?;
    // the unregularised decomposition does not depend on λ
    let plain: Vec<ErrorDecomposition> = bases
        .iter()
        .map(|b| ErrorDecomposition::new(&f, b, &MollifiedBasis::new(b, None, 0.0), &grid))
        .collect();
    let kernel = config.kernel.map(|k| k.build::<f64>());
    let s_a = config.family.approximation_order();

    let rows = config
        .lambda_grid
        .par_iter()
        .enumerate()
        .map(|(li, &lambda)| -> Result<StudyRow, StudyError> {
            let mut noreg_pts = Vec::with_capacity(bases.len());
            let mut reg_pts = Vec::with_capacity(bases.len());
            let mut betas = Vec::new();
            for (ni, basis) in bases.iter().enumerate() {
                let h = basis.h();
                let sigma = h.powf(lambda);
                let model =
                    NoiseModel::new(sigma, substream_seed(config.seed, &[li as u64, ni as u64]))?;
                let est = plain[ni].monte_carlo(&model, config.draws)?;
                noreg_pts.push(point(basis.n(), &est));
                if let Some(k) = &kernel {
                    let beta = beta_star(sigma, h, k.order(), 1);
                    betas.push(beta);
                    let space = MollifiedBasis::new(basis, Some(k), beta);
                    let est = ErrorDecomposition::new(&f, basis, &space, &grid)
                        .monte_carlo(&model, config.draws)?;
                    reg_pts.push(point(basis.n(), &est));
                }
            }
            let noreg = fit_error_points(noreg_pts)?;
            let (theory_noreg, theory_reg, regime, reg) = match &kernel {
                Some(k) => {
                    let params = RegimeParams {
                        s_a,
                        s_r: k.order(),
                        d: 1,
                        lambda,
                    };
                    let (tn, tr) = predicted_gamma(&params);
                    (
                        tn,
                        Some(tr),
                        Some(recommend_strategy(&params)),
                        Some(fit_error_points(reg_pts)?),
                    )
                }
                None => (lambda.min(f64::from(s_a)), None, None, None),
            };
            Ok(StudyRow {
                lambda,
                noreg,
                reg,
                theory_noreg,
                theory_reg,
                regime,
                betas,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(StudyTable {
        config,
        notes,
        rows,
    })
}
