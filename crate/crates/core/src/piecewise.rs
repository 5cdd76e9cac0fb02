//! Exact piecewise polynomials with compact support.
//!
//! A [`PiecewisePoly`] is zero outside `[breaks[0], breaks[last]]`. Each piece
//! is stored in the local offset from its left breakpoint, so short pieces
//! (a kernel scaled down to `1e-11`, say) keep full relative precision.

use thiserror::Error;

use crate::poly::{binomial, Poly};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PiecewiseError {
    #[error("need at least two breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoints must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("{pieces} pieces for {breaks} breakpoints")]
    CountMismatch { breaks: usize, pieces: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly<T> {
    breaks: Vec<T>,
    pieces: Vec<Poly<T>>,
}

/// A convolution contribution: polynomial in `x - start` on `[start, end]`.
struct Segment<T> {
    start: T,
    end: T,
    poly: Poly<T>,
}

impl<T: Scalar> PiecewisePoly<T> {
    /// Builds from breakpoints and per-piece polynomials in local offsets.
    pub fn new(breaks: Vec<T>, pieces: Vec<Poly<T>>) -> Result<Self, PiecewiseError> {
        if breaks.len() < 2 {
            return Err(PiecewiseError::TooFewBreakpoints(breaks.len()));
        }
        if pieces.len() + 1 != breaks.len() {
            return Err(PiecewiseError::CountMismatch {
                breaks: breaks.len(),
                pieces: pieces.len(),
            });
        }
        if let Some(i) = breaks.windows(2).position(|w| w[0] >= w[1]) {
            return Err(PiecewiseError::NotIncreasing(i + 1));
        }
        Ok(Self { breaks, pieces })
    }

    /// Builds from polynomials written in the global variable `x`.
    pub fn from_global(breaks: Vec<T>, pieces: Vec<Poly<T>>) -> Result<Self, PiecewiseError> {
        if breaks.len() < 2 || pieces.len() + 1 != breaks.len() {
            return Self::new(breaks, pieces);
        }
        let local = pieces
            .iter()
            .zip(&breaks)
            .map(|(p, &x0)| p.shifted(x0))
            .collect();
        Self::new(breaks, local)
    }

    /// `height` on `[a, b]`, zero elsewhere.
    pub fn indicator(a: T, b: T, height: T) -> Result<Self, PiecewiseError> {
        Self::new(vec![a, b], vec![Poly::constant(height)])
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Poly<T>] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn support(&self) -> (T, T) {
        (self.breaks[0], self.breaks[self.breaks.len() - 1])
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Piece containing `x`: left-closed, right-open, with the last piece
    /// right-closed. `None` outside the support.
    pub fn piece_index(&self, x: T) -> Option<usize> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return None;
        }
        if x == hi {
            return Some(self.pieces.len() - 1);
        }
        Some(self.breaks.partition_point(|&b| b <= x) - 1)
    }

    pub fn eval(&self, x: T) -> T {
        match self.piece_index(x) {
            Some(i) => self.pieces[i].eval(x - self.breaks[i]),
            None => T::zero(),
        }
    }

    /// Evaluator for nondecreasing query points.
    pub fn sweep(&self) -> Sweep<'_, T> {
        Sweep { f: self, idx: 0 }
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.scaled(k)).collect(),
        }
    }

    /// `x ↦ g(x / beta) / beta`, the mass-preserving dilation.
    pub fn dilated(&self, beta: T) -> Self {
        let inv = T::one() / beta;
        Self {
            breaks: self.breaks.iter().map(|&b| b * beta).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.dilated(inv).scaled(inv))
                .collect(),
        }
    }

    /// `∫ g` over the whole support.
    pub fn integral(&self) -> T {
        self.pieces
            .iter()
            .zip(self.breaks.windows(2))
            .fold(T::zero(), |acc, (p, w)| acc + p.integral(w[1] - w[0]))
    }

    /// `∫ x^r g(x) dx`, exact.
    pub fn moment(&self, r: usize) -> T {
        let mut total = T::zero();
        for (p, w) in self.pieces.iter().zip(self.breaks.windows(2)) {
            let x0 = w[0];
            // (x0 + t)^r expanded in t
            let mut xr = Vec::with_capacity(r + 1);
            let mut pow = T::one();
            let mut pows = vec![T::one(); r + 1];
            for slot in pows.iter_mut().skip(1) {
                pow *= x0;
                *slot = pow;
            }
            for j in 0..=r {
                xr.push(binomial::<T>(r, j) * pows[r - j]);
            }
            total += p.mul_poly(&Poly::new(xr)).integral(w[1] - w[0]);
        }
        total
    }

    /// Restriction to `[a, b]`; `None` when the supports do not overlap.
    pub fn restricted(&self, a: T, b: T) -> Option<Self> {
        let (lo, hi) = self.support();
        let a = a.max_of(lo);
        let b = b.min_of(hi);
        if a >= b {
            return None;
        }
        let mut breaks = vec![a];
        breaks.extend(self.breaks.iter().copied().filter(|&x| x > a && x < b));
        breaks.push(b);
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let mid = (w[0] + w[1]) / T::from_usize_exact(2);
                let i = self.piece_index(mid).expect("midpoint inside support");
                self.pieces[i].shifted(w[0] - self.breaks[i])
            })
            .collect();
        Some(Self { breaks, pieces })
    }

    /// Exact `∫_a^b f g`.
    pub fn inner_product(&self, other: &Self, a: T, b: T) -> T {
        let (l1, h1) = self.support();
        let (l2, h2) = other.support();
        let lo = a.max_of(l1).max_of(l2);
        let hi = b.min_of(h1).min_of(h2);
        if lo >= hi {
            return T::zero();
        }
        let mut cuts: Vec<T> = self
            .breaks
            .iter()
            .chain(&other.breaks)
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        sort_dedup(&mut cuts);
        let two = T::from_usize_exact(2);
        let mut total = T::zero();
        for w in cuts.windows(2) {
            let mid = (w[0] + w[1]) / two;
            let (Some(i), Some(j)) = (self.piece_index(mid), other.piece_index(mid)) else {
                continue;
            };
            let p = self.pieces[i].shifted(w[0] - self.breaks[i]);
            let q = other.pieces[j].shifted(w[0] - other.breaks[j]);
            total += p.mul_poly(&q).integral(w[1] - w[0]);
        }
        total
    }

    /// Squared L2 norm over the whole real line.
    pub fn l2_norm_sq(&self) -> T {
        let (lo, hi) = self.support();
        self.inner_product(self, lo, hi)
    }

    /// Exact convolution `(f * g)(x) = ∫ f(x - y) g(y) dy`.
    ///
    /// Output breakpoints are pairwise sums of input breakpoints; a piece of
    /// degree `p` against one of degree `q` contributes degree `p + q + 1`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut segments = Vec::new();
        for (pa, wa) in self.pieces.iter().zip(self.breaks.windows(2)) {
            for (pb, wb) in other.pieces.iter().zip(other.breaks.windows(2)) {
                let origin = wa[0] + wb[0];
                let (la, lb) = (wa[1] - wa[0], wb[1] - wb[0]);
                let pair = if la >= lb {
                    convolve_local(pa, la, pb, lb)
                } else {
                    convolve_local(pb, lb, pa, la)
                };
                segments.extend(pair.into_iter().map(|(s, e, poly)| Segment {
                    start: origin + s,
                    end: origin + e,
                    poly,
                }));
            }
        }
        assemble(segments)
    }
}

/// Evaluator that walks pieces left to right.
pub struct Sweep<'a, T> {
    f: &'a PiecewisePoly<T>,
    idx: usize,
}

impl<T: Scalar> Sweep<'_, T> {
    /// Value at `x`; calls must use nondecreasing `x`.
    pub fn eval(&mut self, x: T) -> T {
        let f = self.f;
        let (lo, hi) = f.support();
        if x < lo || x > hi {
            return T::zero();
        }
        let last = f.pieces.len() - 1;
        while self.idx < last && x >= f.breaks[self.idx + 1] {
            self.idx += 1;
        }
        f.pieces[self.idx].eval(x - f.breaks[self.idx])
    }
}

/// Convolution of a long piece `(long, ll)` with a short piece `(short, ls)`,
/// both in local coordinates on `[0, ll]` and `[0, ls]`, with `ls <= ll`.
///
/// Returns up to three segments `(start, end, poly in (w - start))` in the
/// offset `w` from the sum of the two left breakpoints. Integration runs over
/// the short piece's variable `u` and the long polynomial is re-centred at
/// each segment start, so no coefficient grows like `(ll / ls)^k`.
fn convolve_local<T: Scalar>(
    long: &Poly<T>,
    ll: T,
    short: &Poly<T>,
    ls: T,
) -> Vec<(T, T, Poly<T>)> {
    // q[j] = antiderivative of u^j short(u)
    let deg_long = long.degree();
    let q: Vec<Poly<T>> = (0..=deg_long)
        .map(|j| {
            let mut c = vec![T::zero(); j];
            c.extend_from_slice(short.coeffs());
            Poly::new(c).antiderivative()
        })
        .collect();

    let mut out = Vec::with_capacity(3);
    // (segment start, segment end, lower limit, upper limit); limits are
    // linear in the local offset tau as (c0, c1).
    let zero = T::zero();
    let one = T::one();
    let mut specs = vec![(zero, ls, (zero, zero), (zero, one))];
    if ll > ls {
        specs.push((ls, ll, (zero, zero), (ls, zero)));
    }
    specs.push((ll, ll + ls, (zero, one), (ls, zero)));

    for (ws, we, lo, hi) in specs {
        let shifted = long.shifted(ws);
        let b = shifted.coeffs();
        let mut acc = Poly::zero();
        for (j, qj) in q.iter().enumerate() {
            // A_j(tau) = (-1)^j sum_{k>=j} b_k C(k, j) tau^(k - j)
            let mut a = vec![T::zero(); deg_long - j + 1];
            for k in j..=deg_long {
                a[k - j] = b[k] * binomial::<T>(k, j);
            }
            let mut a = Poly::new(a);
            if j % 2 == 1 {
                a = a.scaled(-one);
            }
            let mut diff = qj.compose_linear(hi.0, hi.1);
            if !(lo.0.is_zero() && lo.1.is_zero()) {
                diff.add_scaled(&qj.compose_linear(lo.0, lo.1), -one);
            }
            acc.add_assign(&a.mul_poly(&diff));
        }
        out.push((ws, we, acc));
    }
    out
}

fn sort_dedup<T: Scalar>(xs: &mut Vec<T>) {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let scale = xs.iter().fold(T::zero(), |m, x| m.max_of(x.abs()));
    let tol = T::breakpoint_tol(scale);
    xs.dedup_by(|b, a| *b - *a <= tol);
}

fn assemble<T: Scalar>(segments: Vec<Segment<T>>) -> PiecewisePoly<T> {
    let mut breaks: Vec<T> = segments.iter().flat_map(|s| [s.start, s.end]).collect();
    sort_dedup(&mut breaks);
    let scale = breaks.iter().fold(T::zero(), |m, x| m.max_of(x.abs()));
    let tol = T::breakpoint_tol(scale);
    let mut pieces = vec![Poly::zero(); breaks.len() - 1];
    for seg in &segments {
        let first = breaks.partition_point(|&b| b < seg.start - tol);
        let last = breaks.partition_point(|&b| b < seg.end - tol);
        for p in first..last.min(pieces.len()) {
            let offset = (breaks[p] - seg.start).max_of(T::zero());
            pieces[p].add_assign(&seg.poly.shifted(offset));
        }
    }
    PiecewisePoly { breaks, pieces }
}
