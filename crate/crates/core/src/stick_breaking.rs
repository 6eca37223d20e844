//! The stick-breaking logistic map between `R^{K-1}` and the open `K`-simplex.
//!
//! `π_k = σ(ψ_k) Π_{j<k} σ(-ψ_j)` for `k < K` and the last coordinate takes the
//! leftover stick `Π_j σ(-ψ_j)`. The map is asymmetric in the category order;
//! nothing here permutes categories (see [`frequency_order`] for an explicit,
//! deterministic reordering helper).

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::{mvn_log_pdf, MvnParams};
use crate::scalar::{lit, softplus, Real};

/// `ψ` values are clamped to `±PSI_CLAMP` before the logistic function.
pub const PSI_CLAMP: f64 = 500.0;

/// Smallest remaining stick the inverse map accepts.
pub const MIN_STICK: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct StickCoords<T: Real> {
    psi: DVector<T>,
}

impl<T: Real> StickCoords<T> {
    pub fn new(psi: impl Into<DVector<T>>) -> Result<Self> {
        let psi = psi.into();
        if let Some(bad) = psi.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("stick coordinate {bad} is not finite")));
        }
        Ok(Self { psi })
    }

    pub fn from_slice(psi: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(psi))
    }

    pub fn as_slice(&self) -> &[T] {
        self.psi.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.psi
    }

    /// Number of categories `K` of the simplex this point maps to.
    pub fn num_categories(&self) -> usize {
        self.psi.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint<T: Real> {
    pi: DVector<T>,
}

impl<T: Real> SimplexPoint<T> {
    pub fn new(pi: impl Into<DVector<T>>) -> Result<Self> {
        let pi = pi.into();
        if pi.is_empty() {
            return Err(Error::Data("simplex point needs at least one coordinate".into()));
        }
        if pi.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::domain("simplex coordinates must lie in [0, 1]"));
        }
        let total = pi.iter().fold(T::zero(), |a, &b| a + b);
        let tol = lit::<T>(1e-12).max(T::eps() * lit(16.0 * pi.len() as f64));
        if (total - T::one()).abs() > tol {
            return Err(Error::domain(format!("simplex coordinates sum to {total}")));
        }
        Ok(Self { pi })
    }

    pub fn from_slice(pi: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(pi))
    }

    pub fn as_slice(&self) -> &[T] {
        self.pi.as_slice()
    }

    pub fn num_categories(&self) -> usize {
        self.pi.len()
    }
}

/// Multinomial observation with its total.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    x: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(x: Vec<u64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Data("count vector needs at least one category".into()));
        }
        let total = x.iter().sum();
        Ok(Self { x, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.x
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_categories(&self) -> usize {
        self.x.len()
    }
}

#[inline]
fn clamp_psi<T: Real>(x: T) -> T {
    let c = lit::<T>(PSI_CLAMP);
    x.max(-c).min(c)
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    let x = clamp_psi(x);
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln σ(x)`.
#[inline]
pub fn log_sigmoid<T: Real>(x: T) -> T {
    -softplus(-clamp_psi(x))
}

/// `σ⁻¹(p) = ln p - ln(1 - p)`.
#[inline]
pub fn logit<T: Real>(p: T) -> T {
    p.ln() - (-p).ln_1p()
}

/// Writes `π_SB(ψ)` into `out` (length `ψ.len() + 1`).
pub fn pi_sb_into<T: Real>(psi: &[T], out: &mut [T]) {
    assert_eq!(out.len(), psi.len() + 1, "output must have K = len(psi) + 1 entries");
    let mut rem = T::one();
    for (k, &v) in psi.iter().enumerate() {
        out[k] = rem * sigmoid(v);
        rem *= sigmoid(-v);
    }
    out[psi.len()] = rem;
}

pub fn pi_sb_vec<T: Real>(psi: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); psi.len() + 1];
    pi_sb_into(psi, &mut out);
    out
}

/// `ln π_SB(ψ)`, computed entirely in log space.
pub fn log_pi_sb<T: Real>(psi: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(psi.len() + 1);
    let mut log_rem = T::zero();
    for &v in psi {
        out.push(log_rem + log_sigmoid(v));
        log_rem += log_sigmoid(-v);
    }
    out.push(log_rem);
    out
}

pub fn pi_sb<T: Real>(psi: &StickCoords<T>) -> SimplexPoint<T> {
    SimplexPoint { pi: DVector::from_vec(pi_sb_vec(psi.as_slice())) }
}

/// Inverse map `ψ_k = σ⁻¹(π_k / (1 - Σ_{j<k} π_j))`.
///
/// The remaining stick is accumulated from the right as `Σ_{j>k} π_j` so small
/// trailing coordinates do not suffer cancellation.
pub fn pi_sb_inv<T: Real>(pi: &SimplexPoint<T>) -> Result<StickCoords<T>> {
    Ok(StickCoords { psi: DVector::from_vec(pi_sb_inv_slice(pi.as_slice())?) })
}

pub fn pi_sb_inv_slice<T: Real>(pi: &[T]) -> Result<Vec<T>> {
    let k = pi.len();
    if let Some(i) = pi.iter().position(|&p| p <= T::zero()) {
        return Err(Error::Boundary(format!("coordinate {i} is not strictly positive")));
    }
    let tails = suffix_sums(pi);
    let mut psi = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k.saturating_sub(1) {
        let rest = tails[i + 1];
        if tails[i] < lit(MIN_STICK) || rest < lit(MIN_STICK) {
            return Err(Error::Boundary(format!("remaining stick underflows at coordinate {i}")));
        }
        psi.push(pi[i].ln() - rest.ln());
    }
    Ok(psi)
}

/// `out[k] = Σ_{j>=k} x_j`, with `out[K] = 0`.
fn suffix_sums<T: Real>(x: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); x.len() + 1];
    for i in (0..x.len()).rev() {
        out[i] = out[i + 1] + x[i];
    }
    out
}

/// `N(x)`: trials remaining at each of the `K - 1` stick-breaking stages.
pub fn residual_counts(x: &CountVector) -> Vec<u64> {
    residual_counts_slice(x.counts())
}

pub fn residual_counts_slice(x: &[u64]) -> Vec<u64> {
    let total: u64 = x.iter().sum();
    let mut out = Vec::with_capacity(x.len().saturating_sub(1));
    let mut rem = total;
    for &xi in x.iter().take(x.len().saturating_sub(1)) {
        out.push(rem);
        rem -= xi;
    }
    out
}

/// `κ(x) = x_{1:K-1} - N(x) / 2`.
pub fn kappa<T: Real>(x: &CountVector) -> Vec<T> {
    kappa_slice(x.counts())
}

pub fn kappa_slice<T: Real>(x: &[u64]) -> Vec<T> {
    residual_counts_slice(x)
        .into_iter()
        .zip(x)
        .map(|(n, &xi)| lit::<T>(xi as f64) - lit::<T>(n as f64) * lit(0.5))
        .collect()
}

fn ln_choose<T: Real>(n: u64, k: u64) -> T {
    let f = |v: u64| lit::<T>(v as f64 + 1.0).log_gamma();
    f(n) - f(k) - f(n - k)
}

/// Multinomial log-pmf written as the product of `K - 1` binomials in `σ(ψ_k)`.
pub fn log_multinomial_sb<T: Real>(x: &CountVector, psi: &StickCoords<T>) -> T {
    log_multinomial_sb_slice(x.counts(), psi.as_slice())
}

pub fn log_multinomial_sb_slice<T: Real>(x: &[u64], psi: &[T]) -> T {
    assert_eq!(psi.len() + 1, x.len(), "psi must have K - 1 entries");
    let n = residual_counts_slice(x);
    let mut acc = T::zero();
    for k in 0..psi.len() {
        let (nk, xk) = (n[k], x[k]);
        acc += ln_choose::<T>(nk, xk);
        if xk > 0 {
            acc += lit::<T>(xk as f64) * log_sigmoid(psi[k]);
        }
        if nk > xk {
            acc += lit::<T>((nk - xk) as f64) * log_sigmoid(-psi[k]);
        }
    }
    acc
}

/// Standard multinomial log-pmf at a probability vector.
pub fn log_multinomial<T: Real>(x: &[u64], pi: &[T]) -> T {
    assert_eq!(x.len(), pi.len());
    let total: u64 = x.iter().sum();
    let mut acc = lit::<T>(total as f64 + 1.0).log_gamma();
    for (&xi, &p) in x.iter().zip(pi) {
        acc -= lit::<T>(xi as f64 + 1.0).log_gamma();
        if xi > 0 {
            acc += lit::<T>(xi as f64) * p.ln();
        }
    }
    acc
}

/// `ln |dψ/dπ|` with respect to the free coordinates `π_1..π_{K-1}`.
pub fn log_jacobian_inverse<T: Real>(pi: &SimplexPoint<T>) -> Result<T> {
    let p = pi.as_slice();
    if let Some(i) = p.iter().position(|&v| v <= T::zero()) {
        return Err(Error::Boundary(format!("coordinate {i} is not strictly positive")));
    }
    let tails = suffix_sums(p);
    let mut acc = T::zero();
    for k in 0..p.len() - 1 {
        // (1 - Σ_{j<k} π_j) / (π_k (1 - Σ_{j<=k} π_j))
        acc += tails[k].ln() - p[k].ln() - tails[k + 1].ln();
    }
    Ok(acc)
}

/// `ln |dπ/dψ| = Σ_k [ln σ(ψ_k) + Σ_{j<=k} ln σ(-ψ_j)]`.
pub fn log_jacobian_forward<T: Real>(psi: &StickCoords<T>) -> T {
    let mut acc = T::zero();
    let mut log_rem = T::zero();
    for &v in psi.as_slice() {
        log_rem += log_sigmoid(-v);
        acc += log_sigmoid(v) + log_rem;
    }
    acc
}

/// Log-density on the simplex of `π_SB(ψ)` when `ψ ~ N(mean, cov)`.
pub fn log_density_pi_given_gaussian<T: Real>(pi: &SimplexPoint<T>, gaussian: &MvnParams<T>) -> Result<T> {
    if gaussian.dim() + 1 != pi.num_categories() {
        return Err(Error::Data("Gaussian dimension must be K - 1".into()));
    }
    let psi = pi_sb_inv(pi)?;
    let log_n = mvn_log_pdf(psi.as_vector(), gaussian)?;
    Ok(log_n + log_jacobian_inverse(pi)?)
}

fn check_alpha<T: Real>(alpha: &[T]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::Data("concentration vector is empty".into()));
    }
    if let Some(a) = alpha.iter().find(|&&a| !(a > T::zero()) || !a.is_finite()) {
        return Err(Error::domain(format!("Dirichlet concentration {a} must be positive")));
    }
    Ok(())
}

fn ln_beta_fn<T: Real>(alpha: &[T]) -> T {
    let total = alpha.iter().fold(T::zero(), |a, &b| a + b);
    alpha.iter().fold(T::zero(), |acc, &a| acc + a.log_gamma()) - total.log_gamma()
}

/// Log-density of `ψ` when `π_SB(ψ) ~ Dirichlet(alpha)`:
/// `-ln B(α) + Σ_{k<K} [α_k ln σ(ψ_k) + (Σ_{j>k} α_j) ln σ(-ψ_k)]`.
pub fn log_density_psi_given_dirichlet<T: Real>(psi: &StickCoords<T>, alpha: &[T]) -> Result<T> {
    check_alpha(alpha)?;
    if alpha.len() != psi.num_categories() {
        return Err(Error::Data("alpha must have K entries".into()));
    }
    let tails = suffix_sums(alpha);
    let mut acc = -ln_beta_fn(alpha);
    for (k, &v) in psi.as_slice().iter().enumerate() {
        acc += alpha[k] * log_sigmoid(v) + tails[k + 1] * log_sigmoid(-v);
    }
    Ok(acc)
}

/// `ln g` for `g ~ Gamma(shape, 1)`, stable for small shapes.
fn log_gamma_draw<T: Real, R: Rng + ?Sized>(shape: T, rng: &mut R) -> T {
    if shape < T::one() {
        // Gamma(a) = Gamma(a + 1) · U^{1/a}
        T::draw_gamma(shape + T::one(), rng).ln() + T::open01(rng).ln() / shape
    } else {
        T::draw_gamma(shape, rng).ln()
    }
}

/// Draws `π ~ Dirichlet(alpha)` through normalized log-gamma variates.
pub fn sample_dirichlet<T: Real, R: Rng + ?Sized>(alpha: &[T], rng: &mut R) -> Vec<T> {
    let logs: Vec<T> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let norm = crate::scalar::log_sum_exp(&logs);
    logs.into_iter().map(|l| (l - norm).exp()).collect()
}

/// Monte Carlo mean and variance of `ψ = π_SB⁻¹(π)` under `π ~ Dirichlet(alpha)`.
///
/// Each `ψ_k` is computed directly from log-gamma draws as
/// `ln g_k - ln Σ_{j>k} g_j`, which never forms `π` and so never underflows.
pub fn moment_match_dirichlet<T: Real, R: Rng + ?Sized>(
    alpha: &[T],
    n_mc: usize,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    check_alpha(alpha)?;
    if n_mc < 2 {
        return Err(Error::domain("moment matching needs at least two samples"));
    }
    let k = alpha.len();
    let dim = k - 1;
    let mut mean = vec![T::zero(); dim];
    let mut m2 = vec![T::zero(); dim];
    let mut logs = vec![T::zero(); k];
    for s in 0..n_mc {
        for (l, &a) in logs.iter_mut().zip(alpha) {
            *l = log_gamma_draw(a, rng);
        }
        // running log Σ_{j>i} g_j from the right
        let mut log_tail = logs[k - 1];
        let count = lit::<T>((s + 1) as f64);
        for i in (0..dim).rev() {
            let psi = logs[i] - log_tail;
            let d = psi - mean[i];
            mean[i] += d / count;
            m2[i] += d * (psi - mean[i]);
            let (hi, lo) = if logs[i] > log_tail { (logs[i], log_tail) } else { (log_tail, logs[i]) };
            log_tail = hi + (lo - hi).exp().ln_1p();
        }
    }
    let denom = lit::<T>((n_mc - 1) as f64);
    Ok((mean, m2.into_iter().map(|v| v / denom).collect()))
}

/// Category permutation sorting by descending total count, ties by index.
///
/// `order[new] = old`. Applying it before fitting is an explicit
/// preprocessing choice; the model itself never reorders categories.
pub fn frequency_order(totals: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..totals.len()).collect();
    idx.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then(a.cmp(&b)));
    idx
}
