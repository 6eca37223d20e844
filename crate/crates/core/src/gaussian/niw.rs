use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mvn::{cholesky_jittered, symmetrize, MvnParams};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Normal-inverse-Wishart hyperparameters:
/// `Σ ~ IW(nu0, psi0)`, `μ | Σ ~ N(mean0, Σ / kappa0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct NiwParams<T: Real> {
    pub mean0: DVector<T>,
    pub kappa0: T,
    pub nu0: T,
    pub psi0: DMatrix<T>,
}

impl<T: Real> NiwParams<T> {
    /// `mean0 = 0`, `kappa0 = 1`, `nu0 = dim + 2`, `psi0 = I`.
    pub fn weak(dim: usize) -> Self {
        Self {
            mean0: DVector::zeros(dim),
            kappa0: T::one(),
            nu0: lit((dim + 2) as f64),
            psi0: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.kappa0 <= T::zero() {
            return Err(Error::domain("NIW kappa0 must be positive"));
        }
        if self.nu0 <= lit((d as f64) - 1.0) {
            return Err(Error::domain(format!("NIW nu0 must exceed dim - 1 = {}", d as f64 - 1.0)));
        }
        if self.psi0.nrows() != d || self.psi0.ncols() != d {
            return Err(Error::Data("NIW scale matrix has the wrong shape".into()));
        }
        Ok(())
    }

    /// Conjugate update from sufficient statistics (count, Σx, Σxxᵀ).
    ///
    /// Counts may be fractional, which is how stochastic variational updates
    /// feed rescaled minibatch statistics through the same formula.
    pub fn posterior_from_stats(&self, n: T, sum: &DVector<T>, sum_outer: &DMatrix<T>) -> Self {
        let kappa_n = self.kappa0 + n;
        let nu_n = self.nu0 + n;
        let mean_n = (&self.mean0 * self.kappa0 + sum) / kappa_n;
        let mut psi_n = &self.psi0 + sum_outer + &self.mean0 * self.mean0.transpose() * self.kappa0
            - &mean_n * mean_n.transpose() * kappa_n;
        symmetrize(&mut psi_n);
        Self { mean0: mean_n, kappa0: kappa_n, nu0: nu_n, psi0: psi_n }
    }

    pub fn posterior(&self, data: &[DVector<T>]) -> Self {
        let d = self.dim();
        let mut sum = DVector::zeros(d);
        let mut outer = DMatrix::zeros(d, d);
        for x in data {
            sum += x;
            outer += x * x.transpose();
        }
        self.posterior_from_stats(lit(data.len() as f64), &sum, &outer)
    }

    /// `E[Σ⁻¹] = nu · psi⁻¹`.
    pub fn expected_precision(&self) -> Result<DMatrix<T>> {
        let ch = cholesky_jittered(&self.psi0, "niw_expected_precision")?;
        Ok(ch.inverse() * self.nu0)
    }

    /// `E[Σ] = psi / (nu - dim - 1)`, defined for `nu > dim + 1`.
    pub fn expected_covariance(&self) -> Option<DMatrix<T>> {
        let denom = self.nu0 - lit((self.dim() + 1) as f64);
        (denom > T::zero()).then(|| &self.psi0 / denom)
    }
}

/// Draws a `Wishart(nu, scale)` matrix by the Bartlett decomposition.
pub fn sample_wishart<T: Real, R: Rng + ?Sized>(nu: T, scale: &DMatrix<T>, rng: &mut R) -> Result<DMatrix<T>> {
    let d = scale.nrows();
    if nu <= lit((d as f64) - 1.0) {
        return Err(Error::domain(format!("Wishart degrees of freedom {nu} too small for dimension {d}")));
    }
    let l = cholesky_jittered(scale, "sample_wishart")?.l();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        // chi-square with nu - i degrees of freedom
        let shape = (nu - lit(i as f64)) * lit(0.5);
        a[(i, i)] = (T::draw_gamma(shape, rng) * lit(2.0)).sqrt();
        for j in 0..i {
            a[(i, j)] = T::std_normal(rng);
        }
    }
    let la = l * a;
    let mut w = &la * la.transpose();
    symmetrize(&mut w);
    Ok(w)
}

/// Draws `Σ ~ IW(nu, psi)` as the inverse of a `Wishart(nu, psi⁻¹)` draw.
pub fn sample_inverse_wishart<T: Real, R: Rng + ?Sized>(nu: T, psi: &DMatrix<T>, rng: &mut R) -> Result<DMatrix<T>> {
    let psi_inv = cholesky_jittered(psi, "sample_inverse_wishart")?.inverse();
    let w = sample_wishart(nu, &psi_inv, rng)?;
    let mut sigma = cholesky_jittered(&w, "sample_inverse_wishart")?.inverse();
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Draws `(μ, Σ)` from an NIW distribution.
pub fn sample_niw<T: Real, R: Rng + ?Sized>(p: &NiwParams<T>, rng: &mut R) -> Result<MvnParams<T>> {
    p.validate()?;
    let sigma = sample_inverse_wishart(p.nu0, &p.psi0, rng)?;
    let mean_cov = &sigma / p.kappa0;
    let mean = super::mvn::mvn_sample(&MvnParams { mean: p.mean0.clone(), cov: mean_cov }, rng)?;
    Ok(MvnParams { mean, cov: sigma })
}

/// Draws `(μ, Σ)` from the NIW posterior given observed vectors.
pub fn niw_posterior_sample<T: Real, R: Rng + ?Sized>(
    prior: &NiwParams<T>,
    data: &[DVector<T>],
    rng: &mut R,
) -> Result<MvnParams<T>> {
    prior.validate()?;
    sample_niw(&prior.posterior(data), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::mvn::mvn_sample;
    use crate::rng::lane_rng;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn empty_data_draws_from_prior() {
        let mut rng = lane_rng(5, 0, 0, 0);
        let prior = NiwParams { mean0: dvector![1.0, -2.0], ..NiwParams::weak(2) };
        let n = 20_000;
        let mut acc = DVector::zeros(2);
        for _ in 0..n {
            acc += niw_posterior_sample(&prior, &[], &mut rng).unwrap().mean;
        }
        acc /= n as f64;
        assert!((&acc - dvector![1.0, -2.0]).amax() < 0.05, "{acc}");
    }

    #[test]
    fn many_points_concentrate_on_truth() {
        let mut rng = lane_rng(6, 0, 0, 0);
        let truth = MvnParams::new(dvector![0.5, -1.0], dmatrix![1.0, 0.6; 0.6, 2.0]).unwrap();
        let data: Vec<_> = (0..10_000).map(|_| mvn_sample(&truth, &mut rng).unwrap()).collect();
        let prior = NiwParams::weak(2);
        for _ in 0..20 {
            let draw = niw_posterior_sample(&prior, &data, &mut rng).unwrap();
            assert!((&draw.mean - &truth.mean).amax() < 0.05);
            assert!((&draw.cov - &truth.cov).amax() < 0.15);
        }
    }

    #[test]
    fn dominant_prior_pins_mean() {
        let mut rng = lane_rng(7, 0, 0, 0);
        let prior = NiwParams::<f64> { mean0: dvector![3.0], kappa0: 1e9, ..NiwParams::weak(1) };
        let draw = niw_posterior_sample(&prior, &[dvector![-50.0]], &mut rng).unwrap();
        assert!((draw.mean[0] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn wishart_mean_is_nu_times_scale() {
        let mut rng = lane_rng(8, 0, 0, 0);
        let scale = dmatrix![1.0, 0.3; 0.3, 0.5];
        let nu = 5.0;
        let n = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            acc += sample_wishart(nu, &scale, &mut rng).unwrap();
        }
        acc /= n as f64;
        assert!((acc - scale * nu).amax() < 0.05);
    }

    #[test]
    fn inverse_wishart_mean() {
        let mut rng = lane_rng(9, 0, 0, 0);
        let psi = dmatrix![2.0, 0.5; 0.5, 1.0];
        let nu = 8.0;
        let n = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            acc += sample_inverse_wishart(nu, &psi, &mut rng).unwrap();
        }
        acc /= n as f64;
        let expected = psi / (nu - 3.0);
        assert!((acc - expected).amax() < 0.02);
    }

    #[test]
    fn stats_update_matches_batch_update() {
        let prior = NiwParams::<f64>::weak(2);
        let data = [dvector![1.0, 2.0], dvector![-0.5, 0.3], dvector![0.2, 0.2]];
        let batch = prior.posterior(&data);
        let mut sum = DVector::zeros(2);
        let mut outer = DMatrix::zeros(2, 2);
        for x in &data {
            sum += x;
            outer += x * x.transpose();
        }
        let from_stats = prior.posterior_from_stats(3.0, &sum, &outer);
        assert!((batch.psi0 - &from_stats.psi0).amax() < 1e-14);
        // centred-scatter form of the same update
        let xbar = &sum / 3.0;
        let scatter: DMatrix<f64> = data.iter().map(|x| (x - &xbar) * (x - &xbar).transpose()).sum();
        let dev = &xbar - &prior.mean0;
        let psi_n = &prior.psi0 + scatter + &dev * dev.transpose() * (prior.kappa0 * 3.0 / (prior.kappa0 + 3.0));
        assert!((from_stats.psi0 - psi_n).amax() < 1e-12);
    }

    #[test]
    fn validate_rejects_bad_hyperparameters() {
        let mut p = NiwParams::<f64>::weak(3);
        p.nu0 = 1.5;
        assert!(p.validate().is_err());
        let mut p = NiwParams::<f64>::weak(3);
        p.kappa0 = 0.0;
        assert!(p.validate().is_err());
    }
}
