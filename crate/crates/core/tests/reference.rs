//! Cross-checks of the fast paths against literal, slow reference
//! computations.

use approx::assert_relative_eq;
use mollifem::verify::{self, representative_indices};
use mollifem::{
    convolve_oracle_split, damped_sine, gaussian_vector, l2_distance, mc_error,
    mollified_reconstruct, sample, ErrorDecomposition, Family, FeBasis, GridSpec, KernelKind,
    MollifiedBasis, NodalVector, NoiseModel,
};

/// Per-draw `‖R_β P_n(E_n f + σξ) - f‖²` by blind Simpson on the mollified
/// reconstruction, exactly as the estimator is defined.
fn literal_squared_errors(
    basis: &FeBasis<f64>,
    kind: Option<KernelKind>,
    beta: f64,
    model: &NoiseModel,
    draws: u64,
    grid: &GridSpec<f64>,
) -> Vec<f64> {
    let z = sample(damped_sine, basis.design());
    let kernel = kind.map(|k| k.build::<f64>());
    let space = MollifiedBasis::new(basis, kernel.as_ref(), beta);
    (0..draws)
        .map(|d| {
            let xi = gaussian_vector(model, basis.n(), d);
            let y = NodalVector(
                z.0.iter()
                    .zip(&xi)
                    .map(|(a, e)| a + model.sigma * e)
                    .collect(),
            );
            l2_distance(
                |x| space.reconstruct(&y, x).expect("length"),
                damped_sine,
                grid,
            )
            .powi(2)
        })
        .collect()
}

#[test]
fn fast_monte_carlo_matches_literal_estimator() {
    let grid = GridSpec::unit(4000).unwrap();
    for (family, n) in [(Family::P1, 11), (Family::P2, 21)] {
        let basis = FeBasis::build(family, n).unwrap();
        for (kind, beta) in [
            (None, 0.0),
            (Some(KernelKind::K), 0.07),
            (Some(KernelKind::H), 0.03),
        ] {
            let model = NoiseModel::new(0.2, 5).unwrap();
            let literal = literal_squared_errors(&basis, kind, beta, &model, 40, &grid);
            let kernel = kind.map(|k| k.build::<f64>());
            let space = MollifiedBasis::new(&basis, kernel.as_ref(), beta);
            let dec = ErrorDecomposition::new(&damped_sine, &basis, &space, &grid);
            for (d, lit) in literal.iter().enumerate() {
                let fast = dec.squared_error(model.sigma, &gaussian_vector(&model, n, d as u64));
                assert_relative_eq!(fast, *lit, max_relative = 1e-6);
            }
            let est = mc_error(
                &damped_sine,
                &basis,
                kernel.as_ref(),
                beta,
                &model,
                40,
                &grid,
            )
            .unwrap();
            let mean = literal.iter().sum::<f64>() / literal.len() as f64;
            assert_relative_eq!(est.mean_sq, mean, max_relative = 1e-6);
        }
    }
}

#[test]
fn pointwise_mollified_reconstruction_matches_oracle() {
    for kind in [KernelKind::K, KernelKind::H] {
        let kernel = kind.build::<f64>();
        for family in [Family::P1, Family::P2] {
            let basis = FeBasis::build(family, 21).unwrap();
            let z = sample(damped_sine, basis.design());
            let breaks = basis.design().nodes().to_vec();
            for beta in [0.004, 0.05, 0.3] {
                let recon = |y: f64| basis.reconstruct(&z, y).unwrap();
                for k in 0..=150 {
                    let x = -0.2 + 1.4 * k as f64 / 150.0;
                    let closed = mollified_reconstruct(&basis, &z, &kernel, beta, x).unwrap();
                    // midpoints of P2 elements are nodes too, so the node list covers every kink
                    let oracle = convolve_oracle_split(&kernel, beta, recon, &breaks, x, 4);
                    assert!(
                        (closed - oracle).abs() <= 1e-8,
                        "{kind} {family} beta={beta} x={x}"
                    );
                }
            }
        }
    }
}

#[test]
fn oracle_equivalence_on_fine_meshes() {
    for kind in [KernelKind::K, KernelKind::H] {
        let kernel = kind.build::<f64>();
        for family in [Family::P1, Family::P2] {
            let basis = FeBasis::build(family, 1001).unwrap();
            let h = basis.h();
            for beta in [3e-11, h * h, 0.3 * h, 4.0 * h] {
                let gap = verify::oracle_discrepancy(
                    &kernel,
                    &basis,
                    beta,
                    &representative_indices(1001),
                    100,
                );
                assert!(gap <= 1e-10, "{kind} {family} beta={beta}: {gap:e}");
            }
        }
    }
}

#[test]
fn appendix_b_noise_floor() {
    for kind in [KernelKind::K, KernelKind::H] {
        for n in [11, 101] {
            let (floor, _) = verify::appendix_b(kind, n);
            assert!(floor >= 0.5, "{kind} n={n}: {floor}");
        }
    }
}

#[test]
fn all_invariant_suites_pass() {
    let failed: Vec<String> = verify::run_all()
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect();
    assert!(failed.is_empty(), "{failed:#?}");
}
