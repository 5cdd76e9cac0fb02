//! Reconstruction of smooth 1-D functions from noisy nodal samples with
//! P1 / P2 finite elements, optionally mollified by a compactly supported
//! piecewise-polynomial kernel, plus the machinery to measure how the
//! reconstruction error decays with the number of samples.
//!
//! The algebraic layers ([`poly`], [`piecewise`], [`mesh_fe`], [`kernel`],
//! [`quadrature`]) are generic over [`Scalar`] and run in `f32`, `f64` or
//! exact rationals. The statistical layers ([`experiment`], [`rates`]) are
//! `f64`-only. Aliases for the common instantiations live at the crate root.

pub mod experiment;
pub mod kernel;
pub mod mesh_fe;
pub mod piecewise;
pub mod poly;
pub mod quadrature;
pub mod rates;
pub mod scalar;
pub mod verify;

pub use experiment::{
    analytic_noreg_error, beta_star, damped_sine, gaussian_vector, lambda_max, mc_error,
    predicted_gamma, recommend_strategy, ErrorDecomposition, ErrorEstimate, ExperimentError,
    NoiseModel, RateBound, RegimeParams, Strategy, TestFunction,
};
pub use kernel::{
    convolve_basis, convolve_oracle, convolve_oracle_split, detect_order, mollified_norms,
    mollified_reconstruct, moment, Kernel, KernelError, KernelKind, MollifiedBasis, MollifiedCache,
};
pub use mesh_fe::{build_design, sample, Design, Family, FeBasis, MeshError, NodalVector};
pub use piecewise::{PiecewiseError, PiecewisePoly};
pub use poly::Poly;
pub use quadrature::{l2_distance, simpson, simpson_values, GridSpec, QuadratureError};
pub use rates::{fit_rate, run_study, RateEstimate, StudyConfig, StudyError, StudyRow, StudyTable};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type PiecewisePolyF64 = PiecewisePoly<f64>;
pub type PiecewisePolyF32 = PiecewisePoly<f32>;
pub type PiecewisePolyQ = PiecewisePoly<Rational>;

pub type FeBasisF64 = FeBasis<f64>;
pub type FeBasisF32 = FeBasis<f32>;
pub type FeBasisQ = FeBasis<Rational>;

pub type KernelF64 = Kernel<f64>;
pub type KernelF32 = Kernel<f32>;
pub type KernelQ = Kernel<Rational>;

pub type DesignF64 = Design<f64>;
pub type GridSpecF64 = GridSpec<f64>;
pub type NodalVectorF64 = NodalVector<f64>;
pub type MollifiedBasisF64 = MollifiedBasis<f64>;
