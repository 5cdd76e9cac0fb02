//! Mollifying kernels, moment-based order detection and exact convolution of
//! kernels with finite-element basis functions.
//!
//! Convolution is over `Ω = (0, 1)` only: basis functions are restricted to
//! `[0, 1]` before convolving, so `(K_β * φ_i)(x) = ∫_Ω K_β(x - y) φ_i(y) dy`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh_fe::{Family, FeBasis, MeshError, NodalVector};
use crate::piecewise::{PiecewiseError, PiecewisePoly};
use crate::quadrature::{simpson, GridSpec};
use crate::scalar::Scalar;

/// Highest moment order examined by [`detect_order`].
pub const ORDER_CAP: u32 = 10;
/// Moments at or below this magnitude count as vanishing.
pub const MOMENT_ZERO_TOL: f64 = 1e-12;
/// A moment must exceed this magnitude to fix the order.
pub const MOMENT_NONZERO_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel mass is {0}, expected 1")]
    NotAProbabilityWeight(f64),
    #[error("moments 1..={0} all vanish")]
    OrderCapExceeded(u32),
    #[error("moment of order {order} is {value:e}: neither zero nor clearly nonzero")]
    AmbiguousMoment { order: u32, value: f64 },
    #[error("unknown kernel {0:?} (expected K or H)")]
    UnknownKernel(String),
    #[error(transparent)]
    Shape(#[from] PiecewiseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// The two built-in kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// Indicator of `[0, 1]`.
    K,
    /// Half the indicator of `[-1, 1]`.
    H,
}

impl KernelKind {
    pub fn build<T: Scalar>(self) -> Kernel<T> {
        let one = T::one();
        let shape = match self {
            KernelKind::K => PiecewisePoly::indicator(T::zero(), one, one),
            KernelKind::H => PiecewisePoly::indicator(-one, one, one / T::from_usize_exact(2)),
        }
        .expect("valid built-in shape");
        Kernel::new(shape).expect("built-in kernels are valid")
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::K => f.write_str("K"),
            KernelKind::H => f.write_str("H"),
        }
    }
}

impl FromStr for KernelKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "K" | "k" => Ok(KernelKind::K),
            "H" | "h" => Ok(KernelKind::H),
            other => Err(KernelError::UnknownKernel(other.to_string())),
        }
    }
}

/// Compactly supported piecewise-polynomial kernel with unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    shape: PiecewisePoly<T>,
    order: u32,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(shape: PiecewisePoly<T>) -> Result<Self, KernelError> {
        let order = detect_order(&shape)?;
        Ok(Self { shape, order })
    }

    pub fn shape(&self) -> &PiecewisePoly<T> {
        &self.shape
    }

    /// Regularisation order: index of the first non-vanishing moment.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn moment(&self, r: usize) -> T {
        self.shape.moment(r)
    }

    /// `K_β(x) = K(x / β) / β`.
    pub fn scaled(&self, beta: T) -> PiecewisePoly<T> {
        self.shape.dilated(beta)
    }

    fn fingerprint(&self) -> Vec<u64> {
        let bits = |v: T| v.to_f64().unwrap_or(f64::NAN).to_bits();
        let mut out: Vec<u64> = self.shape.breakpoints().iter().map(|&b| bits(b)).collect();
        for p in self.shape.pieces() {
            out.push(u64::MAX);
            out.extend(p.coeffs().iter().map(|&c| bits(c)));
        }
        out
    }
}

/// `∫ x^r K(x) dx`.
pub fn moment<T: Scalar>(kernel: &Kernel<T>, r: usize) -> T {
    kernel.moment(r)
}

/// Smallest `r >= 1` whose moment does not vanish.
pub fn detect_order<T: Scalar>(shape: &PiecewisePoly<T>) -> Result<u32, KernelError> {
    let mass = shape.moment(0).to_f64().unwrap_or(f64::NAN);
    if !mass.is_finite() || (mass - 1.0).abs() > MOMENT_ZERO_TOL {
        return Err(KernelError::NotAProbabilityWeight(mass));
    }
    for r in 1..=ORDER_CAP {
        let m = shape.moment(r as usize).to_f64().unwrap_or(f64::NAN).abs();
        if m > MOMENT_NONZERO_TOL {
            return Ok(r);
        }
        if m > MOMENT_ZERO_TOL {
            return Err(KernelError::AmbiguousMoment { order: r, value: m });
        }
    }
    Err(KernelError::OrderCapExceeded(ORDER_CAP))
}

/// Closed-form `K_β * φ_i` on the real line.
pub fn convolve_basis<T: Scalar>(
    kernel: &Kernel<T>,
    beta: T,
    basis: &FeBasis<T>,
    i: usize,
) -> Result<PiecewisePoly<T>, KernelError> {
    let phi = basis.basis_function(i)?;
    Ok(kernel.scaled(beta).convolve(&phi))
}

/// Simpson approximation of `∫_Ω K_β(x - y) g(y) dy`.
///
/// The integration range is split at the kernel's (scaled) breakpoints and
/// clipped to `[0, 1]`; each resulting interval gets `m` subintervals.
pub fn convolve_oracle<T, G>(kernel: &Kernel<T>, beta: T, g: G, x: T, m: usize) -> T
where
    T: Scalar + Float,
    G: Fn(T) -> T,
{
    convolve_oracle_split(kernel, beta, g, &[], x, m)
}

/// As [`convolve_oracle`], additionally splitting at the points `g_breaks`
/// where `g` is known to be non-smooth.
pub fn convolve_oracle_split<T, G>(
    kernel: &Kernel<T>,
    beta: T,
    g: G,
    g_breaks: &[T],
    x: T,
    m: usize,
) -> T
where
    T: Scalar + Float,
    G: Fn(T) -> T,
{
    let scaled = kernel.scaled(beta);
    let kb = scaled.breakpoints();
    let mut total = T::zero();
    for (j, piece) in scaled.pieces().iter().enumerate() {
        // Integrate in u = x - y over the kernel piece, so the interval
        // width stays exact even when β is far below the spacing of floats
        // near x. y ∈ [0, 1] means u ∈ [x - 1, x].
        let lo = kb[j].max(x - T::one());
        let hi = kb[j + 1].min(x);
        if lo >= hi {
            continue;
        }
        let mut cuts = vec![lo];
        cuts.extend(
            g_breaks
                .iter()
                .map(|&b| x - b)
                .filter(|&u| u > lo && u < hi),
        );
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
        for w in cuts.windows(2) {
            let Ok(spec) = GridSpec::new(m, w[0], w[1]) else {
                continue;
            };
            total += simpson(|u| piece.eval(u - kb[j]) * g(x - u), &spec);
        }
    }
    total
}

/// The family `{K_β * φ_i}` (or `{φ_i}` when unregularised) for one basis.
#[derive(Clone, Debug)]
pub struct MollifiedBasis<T> {
    family: Family,
    n: usize,
    beta: T,
    funcs: Vec<PiecewisePoly<T>>,
    lefts: Vec<T>,
    rights: Vec<T>,
}

impl<T: Scalar> MollifiedBasis<T> {
    /// `kernel = None` or `beta = 0` give the plain basis (identity regulariser).
    pub fn new(basis: &FeBasis<T>, kernel: Option<&Kernel<T>>, beta: T) -> Self {
        let funcs: Vec<PiecewisePoly<T>> = match kernel {
            Some(k) if !beta.is_zero() => {
                let kb = k.scaled(beta);
                basis
                    .basis_functions()
                    .iter()
                    .map(|phi| kb.convolve(phi))
                    .collect()
            }
            _ => basis.basis_functions(),
        };
        let lefts = funcs.iter().map(|f| f.support().0).collect();
        let rights = funcs.iter().map(|f| f.support().1).collect();
        Self {
            family: basis.family(),
            n: basis.n(),
            beta: if kernel.is_some() { beta } else { T::zero() },
            funcs,
            lefts,
            rights,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn functions(&self) -> &[PiecewisePoly<T>] {
        &self.funcs
    }

    /// Index range of functions whose support contains `x`.
    pub fn active(&self, x: T) -> std::ops::Range<usize> {
        let first = self.rights.partition_point(|&r| r < x);
        let last = self.lefts.partition_point(|&l| l <= x);
        first..last.max(first)
    }

    /// `Σ_i z_i (K_β * φ_i)(x)`.
    pub fn reconstruct(&self, z: &NodalVector<T>, x: T) -> Result<T, MeshError> {
        if z.len() != self.n {
            return Err(MeshError::LengthMismatch {
                got: z.len(),
                expected: self.n,
            });
        }
        Ok(self
            .active(x)
            .fold(T::zero(), |acc, i| acc + z.0[i] * self.funcs[i].eval(x)))
    }

    /// Exact `‖K_β * φ_i‖_{L2(ℝ)}` for each `i`.
    pub fn norms(&self) -> Vec<T>
    where
        T: Float,
    {
        self.funcs.iter().map(|f| f.l2_norm_sq().sqrt()).collect()
    }
}

/// Regularised reconstruction at one point; `beta = 0` is the identity.
pub fn mollified_reconstruct<T: Scalar>(
    basis: &FeBasis<T>,
    z: &NodalVector<T>,
    kernel: &Kernel<T>,
    beta: T,
    x: T,
) -> Result<T, KernelError> {
    if beta.is_zero() {
        return Ok(basis.reconstruct(z, x)?);
    }
    if z.len() != basis.n() {
        return Err(MeshError::LengthMismatch {
            got: z.len(),
            expected: basis.n(),
        }
        .into());
    }
    // Only the φ_i within reach of x through the kernel support contribute.
    let kb = kernel.scaled(beta);
    let (klo, khi) = kb.support();
    let reach = T::from_usize_exact(2) * basis.h();
    let nodes = basis.design().nodes();
    let lo = x - khi - reach;
    let hi = x - klo + reach;
    let first = nodes.partition_point(|&xi| xi < lo);
    let last = nodes.partition_point(|&xi| xi <= hi);
    let mut acc = T::zero();
    for i in first..last {
        if z.0[i].is_zero() {
            continue;
        }
        let phi = basis.basis_function(i)?;
        acc += z.0[i] * kb.convolve(&phi).eval(x);
    }
    Ok(acc)
}

/// Exact `‖K_β * φ_i‖_{L2(ℝ)}` for every basis function.
pub fn mollified_norms<T: Scalar + Float>(
    basis: &FeBasis<T>,
    kernel: &Kernel<T>,
    beta: T,
) -> Vec<T> {
    MollifiedBasis::new(basis, Some(kernel), beta).norms()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    kernel: Option<Vec<u64>>,
    beta: u64,
    family: Family,
    n: usize,
}

/// Memo of mollified bases keyed by `(kernel, β, basis)`.
///
/// Readers share a lock; a miss builds outside the lock and the first insert
/// wins, so concurrent population is idempotent.
#[derive(Debug, Default)]
pub struct MollifiedCache<T> {
    map: RwLock<HashMap<CacheKey, Arc<MollifiedBasis<T>>>>,
}

impl<T: Scalar> MollifiedCache<T> {
    pub fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(
        &self,
        basis: &FeBasis<T>,
        kernel: Option<&Kernel<T>>,
        beta: T,
    ) -> Arc<MollifiedBasis<T>> {
        let regularised = kernel.is_some() && !beta.is_zero();
        let key = CacheKey {
            kernel: kernel.filter(|_| regularised).map(Kernel::fingerprint),
            beta: if regularised {
                beta.to_f64().unwrap_or(f64::NAN).to_bits()
            } else {
                0
            },
            family: basis.family(),
            n: basis.n(),
        };
        if let Some(hit) = self.map.read().expect("cache lock").get(&key) {
            return Arc::clone(hit);
        }
        let built = Arc::new(MollifiedBasis::new(basis, kernel, beta));
        let mut map = self.map.write().expect("cache lock");
        Arc::clone(map.entry(key).or_insert(built))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().expect("cache lock").clear();
    }
}
