use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::augmentation::GaussianPotential;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// First jitter level, relative to the mean diagonal entry.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_CEILING: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MvnParams<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

impl<T: Real> MvnParams<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Data(format!(
                "covariance is {}x{} but mean has length {n}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: DVector::zeros(dim), cov: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = lit::<T>(0.5);
    for i in 0..n {
        for j in 0..i {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// Tries the matrix as given, then adds `1e-8 · mean(diag)` to the diagonal,
/// multiplying by ten on each failure up to `1e-4 · mean(diag)`.
pub fn cholesky_jittered<T: Real>(m: &DMatrix<T>, op: &'static str) -> Result<Cholesky<T, Dyn>> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    if let Some(ch) = Cholesky::new(sym.clone()) {
        return Ok(ch);
    }
    let n = sym.nrows();
    let mean_diag = if n == 0 {
        T::one()
    } else {
        (0..n).fold(T::zero(), |a, i| a + sym[(i, i)].abs()) / lit(n as f64)
    };
    let scale = if mean_diag > T::zero() { mean_diag } else { T::one() };
    let mut level = JITTER_START;
    while level <= JITTER_CEILING * 1.000_001 {
        let mut jittered = sym.clone();
        let add = scale * lit(level);
        for i in 0..n {
            jittered[(i, i)] += add;
        }
        if let Some(ch) = Cholesky::new(jittered) {
            return Ok(ch);
        }
        level *= 10.0;
    }
    Err(Error::linalg(op, format!("matrix of size {n} is not positive definite after jitter {JITTER_CEILING}")))
}

pub fn std_normal_vec<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::std_normal(rng))
}

/// Draws from `N(mean, cov)` through the (jittered) Cholesky factor.
pub fn mvn_sample<T: Real, R: Rng + ?Sized>(p: &MvnParams<T>, rng: &mut R) -> Result<DVector<T>> {
    let ch = cholesky_jittered(&p.cov, "mvn_sample")?;
    let eps = std_normal_vec(p.dim(), rng);
    Ok(&p.mean + ch.l() * eps)
}

/// Draws from the Gaussian with precision `L Lᵀ` and the given mean.
pub fn sample_from_precision_factor<T: Real, R: Rng + ?Sized>(
    mean: &DVector<T>,
    prec_factor: &Cholesky<T, Dyn>,
    rng: &mut R,
) -> DVector<T> {
    let eps = std_normal_vec(mean.len(), rng);
    let offset = prec_factor
        .l_dirty()
        .tr_solve_lower_triangular(&eps)
        .expect("cholesky factor has a nonzero diagonal");
    mean + offset
}

pub fn log_det_from_cholesky<T: Real>(ch: &Cholesky<T, Dyn>) -> T {
    let l = ch.l_dirty();
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * lit(2.0)
}

pub fn mvn_log_pdf<T: Real>(x: &DVector<T>, p: &MvnParams<T>) -> Result<T> {
    let ch = Cholesky::new({
        let mut c = p.cov.clone();
        symmetrize(&mut c);
        c
    })
    .ok_or_else(|| Error::linalg("mvn_log_pdf", "covariance is not positive definite"))?;
    let diff = x - &p.mean;
    let z = ch.l_dirty().solve_lower_triangular(&diff).expect("nonsingular factor");
    let n = lit::<T>(p.dim() as f64);
    Ok(-(n * lit::<T>(2.0 * std::f64::consts::PI).ln() + log_det_from_cholesky(&ch) + z.dot(&z)) * lit(0.5))
}

/// Conditions `N(mean, cov)` on diagonal Gaussian evidence in information form.
///
/// With `Ω = diag(precision)` and `κ = linear` the result has covariance
/// `(cov⁻¹ + Ω)⁻¹` and mean `(cov⁻¹ + Ω)⁻¹ (cov⁻¹ mean + κ)`. It is computed
/// as `cov - cov S B⁻¹ S cov` with `S = Ω^{1/2}` and `B = I + S cov S`, which
/// never inverts `cov` and returns the prior unchanged when `Ω = 0`.
pub fn condition_diag<T: Real>(prior: &MvnParams<T>, pot: &GaussianPotential<T>) -> Result<MvnParams<T>> {
    let n = prior.dim();
    if pot.len() != n {
        return Err(Error::Data(format!("potential has length {} but prior has dimension {n}", pot.len())));
    }
    let s = pot.precision.map(|w| w.sqrt());
    // residual κ - Ω μ
    let r = DVector::from_fn(n, |i, _| pot.linear[i] - pot.precision[i] * prior.mean[i]);
    if s.iter().all(|&v| v == T::zero()) {
        let mean = &prior.mean + &prior.cov * &r;
        return Ok(MvnParams { mean, cov: prior.cov.clone() });
    }
    let (cov, _) = shrink_by_evidence(&prior.cov, &s)?;
    let mean = &prior.mean + &cov * r;
    Ok(MvnParams { mean, cov })
}

/// Returns `cov - cov S B⁻¹ S cov` and the factor of `B = I + S cov S`.
pub(crate) fn shrink_by_evidence<T: Real>(
    cov: &DMatrix<T>,
    s: &DVector<T>,
) -> Result<(DMatrix<T>, Cholesky<T, Dyn>)> {
    let n = cov.nrows();
    let mut b = DMatrix::from_fn(n, n, |i, j| s[i] * cov[(i, j)] * s[j]);
    for i in 0..n {
        b[(i, i)] += T::one();
    }
    let ch = cholesky_jittered(&b, "condition_diag")?;
    // W = L⁻¹ S cov, so cov S B⁻¹ S cov = WᵀW
    let s_cov = DMatrix::from_fn(n, n, |i, j| s[i] * cov[(i, j)]);
    let w = ch.l_dirty().solve_lower_triangular(&s_cov).expect("nonsingular factor");
    let mut out = cov - w.tr_mul(&w);
    symmetrize(&mut out);
    Ok((out, ch))
}
