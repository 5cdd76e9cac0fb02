//! Invariant suites for the mesh, kernel, quadrature and experiment layers.
//!
//! Every check records the quantity it measured, so a failing line in the
//! log says by how much it failed. The measurement helpers are public so
//! integration tests can reuse them with their own thresholds.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::experiment::{
    analytic_noreg_error, beta_star, damped_sine, lambda_max, mc_error, predicted_gamma,
    ErrorDecomposition, NoiseModel, RateBound, RegimeParams,
};
use crate::kernel::{
    convolve_basis, convolve_oracle, convolve_oracle_split, Kernel, KernelKind, MollifiedBasis,
};
use crate::mesh_fe::{sample, Family, FeBasis, NodalVector};
use crate::quadrature::{l2_distance, simpson, simpson_values, GridSpec};
use crate::rates::{fit_rate, DEFAULT_SIMPSON_M};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(
        module: &'static str,
        name: impl Into<String>,
        passed: bool,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            module,
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.module, self.name, self.detail)
    }
}

pub const FAMILIES: [Family; 2] = [Family::P1, Family::P2];
pub const KERNELS: [KernelKind; 2] = [KernelKind::K, KernelKind::H];

/// All suites in module order.
pub fn run_all() -> Vec<Check> {
    let mut out = mesh_fe_suite();
    out.extend(kernel_suite());
    out.extend(quadrature_suite());
    out.extend(experiment_suite());
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let len = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / len;
    let my = ly.iter().sum::<f64>() / len;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

fn unit_grid(m: usize) -> GridSpec<f64> {
    GridSpec::unit(m).expect("even positive m")
}

fn basis(family: Family, n: usize) -> FeBasis<f64> {
    FeBasis::build(family, n).expect("valid node count")
}

// ---------------------------------------------------------------- mesh_fe

/// `‖P_n E_n f - f‖` for the damped sine at each `n`.
pub fn interpolation_errors(family: Family, ns: &[usize]) -> Vec<f64> {
    let grid = unit_grid(DEFAULT_SIMPSON_M);
    ns.iter()
        .map(|&n| {
            let b = basis(family, n);
            let z = sample(damped_sine, b.design());
            l2_distance(
                |x| b.reconstruct(&z, x).expect("length"),
                damped_sine,
                &grid,
            )
        })
        .collect()
}

/// Fitted decay rate of the interpolation error over `n ∈ {11, 101, 1001}`.
pub fn approximation_slope(family: Family) -> f64 {
    let ns = [11, 101, 1001];
    let errs = interpolation_errors(family, &ns);
    let pts: Vec<(usize, f64)> = ns.iter().copied().zip(errs).collect();
    fit_rate(&pts).expect("positive errors").gamma
}

pub fn mesh_fe_suite() -> Vec<Check> {
    const M: &str = "mesh_fe";
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    for family in FAMILIES {
        let mut worst = 0.0f64;
        for n in [11, 101] {
            let b = basis(family, n);
            let ones = NodalVector(vec![1.0; n]);
            for _ in 0..1000 {
                let x: f64 = rng.random();
                worst = worst.max((b.reconstruct(&ones, x).expect("length") - 1.0).abs());
            }
        }
        out.push(Check::new(
            M,
            format!("partition_of_unity[{family}]"),
            worst <= 1e-12,
            format!("max |sum - 1| = {worst:.3e}"),
        ));
    }

    for family in FAMILIES {
        let mut worst = 0.0f64;
        for n in [11, 101] {
            let b = basis(family, n);
            for i in 0..n {
                for (j, &xj) in b.design().nodes().iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((b.eval_basis(i, xj).expect("index") - want).abs());
                }
            }
        }
        out.push(Check::new(
            M,
            format!("lagrange[{family}]"),
            worst <= 1e-14,
            format!("max |phi_i(x_j) - delta_ij| = {worst:.3e}"),
        ));
    }

    for family in FAMILIES {
        let degree = match family {
            Family::P1 => 1,
            Family::P2 => 2,
        };
        let mut worst = 0.0f64;
        for n in [11, 101] {
            let b = basis(family, n);
            for k in 0..=degree {
                let p = |x: f64| 0.3 + x.powi(k);
                let z = sample(p, b.design());
                for j in 0..=5000 {
                    let x = j as f64 / 5000.0;
                    worst = worst.max((b.reconstruct(&z, x).expect("length") - p(x)).abs());
                }
            }
        }
        out.push(Check::new(
            M,
            format!("polynomial_reproduction[{family}]"),
            worst <= 1e-10,
            format!("degree <= {degree}, max error {worst:.3e}"),
        ));
    }

    for family in FAMILIES {
        let mut violations = 0usize;
        for n in [11, 101] {
            let b = basis(family, n);
            let h = b.h();
            for i in 0..n {
                let xi = b.design().nodes()[i];
                for j in 0..=2000 {
                    let x = j as f64 / 2000.0;
                    if (x - xi).abs() >= 2.0 * h && b.eval_basis(i, x).expect("index") != 0.0 {
                        violations += 1;
                    }
                }
            }
        }
        out.push(Check::new(
            M,
            format!("support[{family}]"),
            violations == 0,
            format!("{violations} nonzero values at |x - x_i| >= 2h"),
        ));
    }

    for family in FAMILIES {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for n in [11, 101, 1001] {
            let b = basis(family, n);
            let root_h = b.h().sqrt();
            for v in b.basis_l2_norms() {
                lo = lo.min(v / root_h);
                hi = hi.max(v / root_h);
            }
        }
        out.push(Check::new(
            M,
            format!("norm_equivalence[{family}]"),
            lo > 0.1 && hi < 2.0,
            format!("|phi_i|/sqrt(h) in [{lo:.6}, {hi:.6}] for n in {{11, 101, 1001}}"),
        ));
    }

    for family in FAMILIES {
        let s_a = f64::from(family.approximation_order());
        let slope = approximation_slope(family);
        out.push(Check::new(
            M,
            format!("approximation_order[{family}]"),
            (slope - s_a).abs() <= 0.15,
            format!("slope {slope:.4} vs s_a = {s_a}"),
        ));
    }
    out
}

// ----------------------------------------------------------------- kernel

/// `‖K_β * f - f‖_{L2(Ω)}` for the damped sine, with the convolution taken
/// over `Ω` only and evaluated by the quadrature oracle.
pub fn mollification_errors(kind: KernelKind, betas: &[f64]) -> Vec<f64> {
    let kernel = kind.build::<f64>();
    let grid = unit_grid(4000);
    betas
        .iter()
        .map(|&beta| {
            l2_distance(
                |x| convolve_oracle(&kernel, beta, damped_sine, x, 64),
                damped_sine,
                &grid,
            )
        })
        .collect()
}

pub const MOLLIFICATION_BETAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

pub fn mollification_slope(kind: KernelKind) -> f64 {
    loglog_slope(
        &MOLLIFICATION_BETAS,
        &mollification_errors(kind, &MOLLIFICATION_BETAS),
    )
}

/// Basis indices covering every distinct shape on a uniform mesh: the
/// boundary functions plus interior representatives of both parities.
pub fn representative_indices(n: usize) -> Vec<usize> {
    if n <= 21 {
        return (0..n).collect();
    }
    let mid = n / 2;
    let mut idx = vec![
        0,
        1,
        2,
        3,
        mid - 1,
        mid,
        mid + 1,
        n - 4,
        n - 3,
        n - 2,
        n - 1,
    ];
    idx.dedup();
    idx
}

/// Sup-grid gap between the closed-form `K_β * φ_i` and the Simpson oracle
/// over the indices `indices`, sampled at `points` per function.
pub fn oracle_discrepancy(
    kernel: &Kernel<f64>,
    basis: &FeBasis<f64>,
    beta: f64,
    indices: &[usize],
    points: usize,
) -> f64 {
    let mut worst = 0.0f64;
    for &i in indices {
        let closed = convolve_basis(kernel, beta, basis, i).expect("index in range");
        let phi = basis.basis_function(i).expect("index in range");
        let (a, b) = closed.support();
        let pad = 0.05 * (b - a);
        for k in 0..=points {
            let x = a - pad + (b - a + 2.0 * pad) * k as f64 / points as f64;
            let oracle = convolve_oracle_split(
                kernel,
                beta,
                |y| basis.eval_basis(i, y).expect("index in range"),
                phi.breakpoints(),
                x,
                4,
            );
            worst = worst.max((closed.eval(x) - oracle).abs());
        }
    }
    worst
}

pub fn kernel_suite() -> Vec<Check> {
    const M: &str = "kernel";
    let mut out = Vec::new();

    for (kind, want) in [(KernelKind::K, 1), (KernelKind::H, 2)] {
        let order = kind.build::<f64>().order();
        out.push(Check::new(
            M,
            format!("detected_order[{kind}]"),
            order == want,
            format!("order {order}, expected {want}"),
        ));
    }

    for kind in KERNELS {
        let kernel = kind.build::<f64>();
        let base_sq = kernel.shape().l2_norm_sq();
        let mut worst_mass = 0.0f64;
        let mut worst_norm = 0.0f64;
        for beta in [1.0, 0.1, 0.01] {
            let kb = kernel.scaled(beta);
            worst_mass = worst_mass.max((kb.integral() - 1.0).abs());
            worst_norm = worst_norm.max((kb.l2_norm_sq() * beta / base_sq - 1.0).abs());
        }
        out.push(Check::new(
            M,
            format!("scaling_identity[{kind}]"),
            worst_mass <= 1e-12 && worst_norm <= 1e-12,
            format!("mass dev {worst_mass:.3e}, rel norm dev {worst_norm:.3e}"),
        ));
    }

    for kind in KERNELS {
        let kernel = kind.build::<f64>();
        let mut worst = 0.0f64;
        for family in FAMILIES {
            let b = basis(family, 11);
            for beta in [0.01, 0.05, 0.3] {
                for i in 0..b.n() {
                    let phi = b.basis_function(i).expect("index");
                    let conv = convolve_basis(&kernel, beta, &b, i).expect("index");
                    worst = worst.max((conv.integral() - phi.integral()).abs());
                }
            }
        }
        out.push(Check::new(
            M,
            format!("mass_preservation[{kind}]"),
            worst <= 1e-12,
            format!("max |int(K*phi) - int(phi)| = {worst:.3e}"),
        ));
    }

    {
        let kernel = KernelKind::H.build::<f64>();
        let b = basis(Family::P1, 11);
        let h = b.h();
        let mut worst = 0.0f64;
        for frac in [0.25, 0.5, 1.0] {
            let beta = frac * h;
            let conv = convolve_basis(&kernel, beta, &b, 5).expect("index");
            worst = worst.max((conv.eval(0.5) - (1.0 - beta / (2.0 * h))).abs());
        }
        out.push(Check::new(
            M,
            "hat_peak[H]",
            worst <= 1e-12,
            format!("max |value - (1 - beta/2h)| = {worst:.3e}"),
        ));
    }

    for kind in KERNELS {
        let kernel = kind.build::<f64>();
        let mut worst = 0.0f64;
        for family in FAMILIES {
            for n in [11, 101] {
                let b = basis(family, n);
                let h = b.h();
                for beta in [h * h, 0.5 * h, h, 0.2] {
                    let idx = representative_indices(n);
                    worst = worst.max(oracle_discrepancy(&kernel, &b, beta, &idx, 200));
                }
            }
        }
        out.push(Check::new(
            M,
            format!("oracle_equivalence[{kind}]"),
            worst <= 1e-8,
            format!("sup-grid gap {worst:.3e}"),
        ));
    }

    for kind in KERNELS {
        let s_r = f64::from(kind.build::<f64>().order());
        let slope = mollification_slope(kind);
        out.push(Check::new(
            M,
            format!("mollification_slope[{kind}]"),
            (slope - s_r).abs() <= 0.15,
            format!("slope {slope:.4} vs s_r = {s_r}"),
        ));
    }
    out
}

// ------------------------------------------------------------- quadrature

pub fn quadrature_suite() -> Vec<Check> {
    const M: &str = "quadrature";
    let mut out = Vec::new();

    {
        let grid = GridSpec::new(2, -1.0, 2.0).expect("valid");
        let cubic = |x: f64| 2.0 * x * x * x - x * x + 3.0;
        let exact = 2.0 * (16.0 - 1.0) / 4.0 - (8.0 + 1.0) / 3.0 + 9.0;
        let err = (simpson(cubic, &grid) - exact).abs();
        out.push(Check::new(
            M,
            "cubic_exactness",
            err <= 1e-12,
            format!("error {err:.3e} with m = 2"),
        ));
    }

    {
        let grid = unit_grid(200);
        let g1 = |x: f64| x.sin();
        let g2 = |x: f64| (3.0 * x).exp();
        let (a, b) = (2.5, -0.75);
        let lhs = simpson(|x| a * g1(x) + b * g2(x), &grid);
        let rhs = a * simpson(g1, &grid) + b * simpson(g2, &grid);
        let lin = (lhs - rhs).abs();
        let mono = simpson(|x| x * x, &grid) <= simpson(|x| x * x + 0.1 * x, &grid)
            && simpson(|x: f64| (5.0 * x).cos().powi(2), &grid) >= 0.0;
        out.push(Check::new(
            M,
            "linear_and_monotone",
            lin <= 1e-12 && mono,
            format!("linearity gap {lin:.3e}, monotone {mono}"),
        ));
    }

    {
        // study-grade integrals: unregularised and mollified bias terms
        let b = basis(Family::P1, 101);
        let h = b.h();
        let kernel = KernelKind::K.build::<f64>();
        let mut worst = 0.0f64;
        for space in [
            MollifiedBasis::new(&b, None, 0.0),
            MollifiedBasis::new(&b, Some(&kernel), beta_star(h, h, 1, 1)),
        ] {
            let coarse =
                ErrorDecomposition::new(&damped_sine, &b, &space, &unit_grid(DEFAULT_SIMPSON_M))
                    .bias_sq();
            let fine = ErrorDecomposition::new(
                &damped_sine,
                &b,
                &space,
                &unit_grid(2 * DEFAULT_SIMPSON_M),
            )
            .bias_sq();
            worst = worst.max(((coarse - fine) / fine).abs());
        }
        out.push(Check::new(
            M,
            "doubling_m",
            worst < 1e-10,
            format!("max relative change {worst:.3e} from m = 1e5 to 2e5"),
        ));
    }

    {
        let b = basis(Family::P1, 101);
        let z = sample(damped_sine, b.design());
        let recon = |x: f64| b.reconstruct(&z, x).expect("length");
        let simpson_dist = l2_distance(recon, damped_sine, &unit_grid(DEFAULT_SIMPSON_M));
        let m = 1_000_000;
        let values: Vec<f64> = (0..=m)
            .map(|k| {
                let x = k as f64 / m as f64;
                (recon(x) - damped_sine(x)).powi(2)
            })
            .collect();
        let trap = ((values.iter().sum::<f64>() - 0.5 * (values[0] + values[m])) / m as f64).sqrt();
        let gap = (simpson_dist - trap).abs();
        out.push(Check::new(
            M,
            "trapezoid_oracle",
            gap <= 1e-8,
            format!("gap {gap:.3e}"),
        ));
    }

    {
        let g = |x: f64| (2.0 * x).exp() * x.cos();
        let exact = {
            // antiderivative e^{2x}(2 cos x + sin x)/5
            let f = |x: f64| (2.0 * x).exp() * (2.0 * x.cos() + x.sin()) / 5.0;
            f(1.0) - f(0.0)
        };
        let ms = [8.0, 16.0, 32.0, 64.0];
        let errs: Vec<f64> = ms
            .iter()
            .map(|&m| (simpson(g, &unit_grid(m as usize)) - exact).abs())
            .collect();
        let slope = -loglog_slope(&ms, &errs);
        let sampled = {
            let grid = unit_grid(64);
            let vals: Vec<f64> = grid.nodes().map(g).collect();
            simpson_values(&vals, &grid) == simpson(g, &grid)
        };
        out.push(Check::new(
            M,
            "fourth_order",
            (slope - 4.0).abs() < 0.1 && sampled,
            format!("error slope {slope:.4}, sampled == lazy {sampled}"),
        ));
    }
    out
}

// ------------------------------------------------------------- experiment

#[derive(Clone, Debug, PartialEq)]
pub struct BiasVarianceCase {
    pub family: Family,
    pub n: usize,
    pub sigma: f64,
    pub mc: f64,
    pub mc_std_error: f64,
    pub analytic: f64,
}

impl BiasVarianceCase {
    /// Discrepancy in units of the Monte Carlo standard error.
    pub fn z_score(&self) -> f64 {
        (self.mc - self.analytic).abs() / self.mc_std_error
    }
}

/// `count` randomized `(σ, n, family)` comparisons of the Monte Carlo error
/// against the closed-form unregularised expectation.
pub fn bias_variance_cases(count: usize, seed: u64, draws: usize) -> Vec<BiasVarianceCase> {
    const NS: [usize; 6] = [11, 21, 51, 101, 201, 1001];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = unit_grid(DEFAULT_SIMPSON_M);
    (0..count)
        .map(|c| {
            let family = FAMILIES[rng.random_range(0..2)];
            let n = NS[rng.random_range(0..NS.len())];
            let sigma = 10f64.powf(rng.random_range(-3.0..0.0));
            let b = basis(family, n);
            let model = NoiseModel::new(sigma, seed.wrapping_add(c as u64)).expect("valid sigma");
            let est =
                mc_error(&damped_sine, &b, None, 0.0, &model, draws, &grid).expect("valid inputs");
            BiasVarianceCase {
                family,
                n,
                sigma,
                mc: est.error(),
                mc_std_error: est.error_std_error(),
                analytic: analytic_noreg_error(&damped_sine, &b, sigma, &grid),
            }
        })
        .collect()
}

/// With `β = h²`: the noise floor `sqrt(Σ‖K_β * φ_i‖²)` (per unit `σ`) and
/// `min_i ‖K_β * φ_i‖ / sqrt(h)` for P1 at mesh size `1/(n-1)`.
pub fn appendix_b(kind: KernelKind, n: usize) -> (f64, f64) {
    let b = basis(Family::P1, n);
    let h = b.h();
    let kernel = kind.build::<f64>();
    let norms = MollifiedBasis::new(&b, Some(&kernel), h * h).norms();
    let floor = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    (floor, min / h.sqrt())
}

pub fn experiment_suite() -> Vec<Check> {
    const M: &str = "experiment";
    let mut out = Vec::new();

    {
        let cases = bias_variance_cases(10, 2024, 1000);
        let worst = cases
            .iter()
            .map(BiasVarianceCase::z_score)
            .fold(0.0, f64::max);
        out.push(Check::new(
            M,
            "bias_variance_agreement",
            worst <= 3.0,
            format!(
                "{} cases, max |mc - analytic| = {worst:.3} std errors",
                cases.len()
            ),
        ));
    }

    {
        let mut ok = true;
        for (s_a, s_r) in [(2, 1), (3, 1), (2, 2), (3, 2)] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=40 {
                let lambda = k as f64 * 0.125;
                let (g, _) = predicted_gamma(&RegimeParams {
                    s_a,
                    s_r,
                    d: 1,
                    lambda,
                });
                ok &= g >= prev && g <= f64::from(s_a);
                prev = g;
            }
        }
        out.push(Check::new(
            M,
            "noreg_prediction_monotone",
            ok,
            format!("nondecreasing and capped: {ok}"),
        ));
    }

    {
        let mut worst = 0.0f64;
        for (s_a, s_r) in [(2, 1), (3, 1), (3, 2)] {
            let lambda = f64::from(s_a);
            let p = RegimeParams {
                s_a,
                s_r,
                d: 1,
                lambda,
            };
            let (g_noreg, g_reg) = predicted_gamma(&p);
            let RateBound::Exact(g_reg) = g_reg else {
                worst = f64::INFINITY;
                continue;
            };
            let want = f64::from(s_a - s_r) / f64::from(2 * s_r + 1);
            worst = worst.max((g_noreg - g_reg - want).abs());
            debug_assert!(lambda <= lambda_max(s_a, s_r, 1));
        }
        out.push(Check::new(
            M,
            "maximal_gain_identity",
            worst <= 1e-12,
            format!("max closed-form gap {worst:.3e}"),
        ));
    }

    for kind in KERNELS {
        let mut worst_floor = f64::INFINITY;
        let (_, reference) = appendix_b(kind, 11);
        let mut worst_ratio = f64::INFINITY;
        for n in [11, 101] {
            let (floor, min_norm) = appendix_b(kind, n);
            worst_floor = worst_floor.min(floor);
            worst_ratio = worst_ratio.min(min_norm / reference);
        }
        out.push(Check::new(
            M,
            format!("noise_floor[{kind}]"),
            worst_floor >= 0.5 && worst_ratio >= 0.5,
            format!(
                "min sqrt(sum |K*phi|^2) = {worst_floor:.4} sigma, min norm ratio {worst_ratio:.4}"
            ),
        ));
    }

    {
        let b = basis(Family::P2, 101);
        let model = NoiseModel::new(0.05, 99).expect("valid");
        let kernel = KernelKind::K.build::<f64>();
        let grid = unit_grid(20_000);
        let run =
            || mc_error(&damped_sine, &b, Some(&kernel), 0.01, &model, 200, &grid).expect("valid");
        let (a, c) = (run(), run());
        let same = a.mean_sq.to_bits() == c.mean_sq.to_bits()
            && a.std_error.to_bits() == c.std_error.to_bits();
        out.push(Check::new(
            M,
            "deterministic_draws",
            same,
            format!("bitwise equal reruns: {same}"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn representative_indices_cover_boundaries() {
        let idx = representative_indices(101);
        assert_eq!(idx.first(), Some(&0));
        assert_eq!(idx.last(), Some(&100));
        assert!(idx.contains(&50) && idx.contains(&51));
        assert_eq!(representative_indices(11).len(), 11);
    }

    #[test]
    fn check_line_format() {
        let c = Check::new("kernel", "x", false, "gap 1");
        assert_eq!(c.to_string(), "FAIL kernel/x: gap 1");
    }
}
