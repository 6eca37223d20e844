//! Pólya-gamma auxiliaries for stick-breaking multinomial observations and the
//! diagonal Gaussian evidence they induce on `ψ`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::polya_gamma::sample_pg_int;
use crate::scalar::{lit, Real};
use crate::stick_breaking::{kappa_slice, residual_counts_slice, CountVector, StickCoords};

/// `ω`, one auxiliary per stick-breaking coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PgAuxiliaries<T: Real> {
    pub omega: DVector<T>,
}

impl<T: Real> PgAuxiliaries<T> {
    pub fn new(omega: DVector<T>) -> Result<Self> {
        if omega.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::domain("Pólya-gamma auxiliaries must be finite and nonnegative"));
        }
        Ok(Self { omega })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Diagonal Gaussian evidence `exp(linearᵀψ - ½ ψᵀ diag(precision) ψ)`.
///
/// A zero precision entry means the coordinate carries no evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPotential<T: Real> {
    pub precision: DVector<T>,
    pub linear: DVector<T>,
}

impl<T: Real> GaussianPotential<T> {
    pub fn new(precision: DVector<T>, linear: DVector<T>) -> Result<Self> {
        if precision.len() != linear.len() {
            return Err(Error::Data(format!(
                "precision has length {} but linear term has length {}",
                precision.len(),
                linear.len()
            )));
        }
        if precision.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::domain("potential precision must be finite and nonnegative"));
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("potential linear term must be finite"));
        }
        Ok(Self { precision, linear })
    }

    pub fn zeros(n: usize) -> Self {
        Self { precision: DVector::zeros(n), linear: DVector::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.precision.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precision.is_empty()
    }

    /// Elementwise sum of two potentials on the same coordinates.
    pub fn combine(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Data("cannot combine potentials of different lengths".into()));
        }
        Ok(Self { precision: &self.precision + &other.precision, linear: &self.linear + &other.linear })
    }
}

/// `ω_k ~ PG(N_k(x), ψ_k)` on raw slices; `ω_k = 0` where `N_k = 0`.
pub fn sample_aux_slice<T: Real, R: Rng + ?Sized>(x: &[u64], psi: &[T], rng: &mut R) -> Vec<T> {
    assert_eq!(psi.len() + 1, x.len(), "psi must have K - 1 entries");
    residual_counts_slice(x)
        .into_iter()
        .zip(psi)
        .map(|(n, &c)| if n == 0 { T::zero() } else { lit(sample_pg_int(n, c.as_f64(), rng)) })
        .collect()
}

pub fn sample_aux<T: Real, R: Rng + ?Sized>(x: &CountVector, psi: &StickCoords<T>, rng: &mut R) -> PgAuxiliaries<T> {
    PgAuxiliaries { omega: DVector::from_vec(sample_aux_slice(x.counts(), psi.as_slice(), rng)) }
}

/// Evidence on `ψ` with precision `ω` and linear term `κ(x)`.
pub fn evidence<T: Real>(x: &CountVector, aux: &PgAuxiliaries<T>) -> Result<GaussianPotential<T>> {
    if aux.len() + 1 != x.num_categories() {
        return Err(Error::Data(format!(
            "{} auxiliaries for {} categories",
            aux.len(),
            x.num_categories()
        )));
    }
    Ok(evidence_slice(x.counts(), aux.omega.as_slice()))
}

pub fn evidence_slice<T: Real>(x: &[u64], omega: &[T]) -> GaussianPotential<T> {
    assert_eq!(omega.len() + 1, x.len());
    GaussianPotential {
        precision: DVector::from_column_slice(omega),
        linear: DVector::from_vec(kappa_slice(x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{condition_diag, MvnParams};
    use crate::rng::lane_rng;
    use nalgebra::{dmatrix, dvector};

    fn cv(v: &[u64]) -> CountVector {
        CountVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_counts_give_zero_auxiliaries() {
        let mut rng = lane_rng(1, 0, 0, 0);
        let psi = StickCoords::from_slice(&[0.3, -2.0]).unwrap();
        assert_eq!(sample_aux(&cv(&[0, 0, 0]), &psi, &mut rng).omega, dvector![0.0, 0.0]);
        let none = StickCoords::<f64>::from_slice(&[]).unwrap();
        assert!(sample_aux(&cv(&[5]), &none, &mut rng).is_empty());
    }

    #[test]
    fn zero_only_where_residual_count_vanishes() {
        let mut rng = lane_rng(2, 0, 0, 0);
        let psi = StickCoords::from_slice(&[0.1, 0.1, 0.1]).unwrap();
        let aux = sample_aux(&cv(&[4, 0, 0, 0]), &psi, &mut rng);
        assert!(aux.omega[0] > 0.0);
        assert_eq!(aux.omega.rows(1, 2), dvector![0.0, 0.0]);
    }

    #[test]
    fn auxiliary_means_at_zero_tilt() {
        let mut rng = lane_rng(3, 0, 0, 0);
        let psi = StickCoords::from_slice(&[0.0, 0.0]).unwrap();
        let x = cv(&[3, 2, 1]);
        let n = 100_000;
        let (mut s, mut s2) = ([0.0; 2], [0.0; 2]);
        for _ in 0..n {
            let w = sample_aux(&x, &psi, &mut rng).omega;
            for k in 0..2 {
                s[k] += w[k];
                s2[k] += w[k] * w[k];
            }
        }
        for (k, want) in [6.0 / 4.0, 3.0 / 4.0].into_iter().enumerate() {
            let mean = s[k] / n as f64;
            let se = ((s2[k] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - want).abs() < 4.0 * se, "k={k}: {mean} vs {want}");
        }
    }

    #[test]
    fn evidence_examples() {
        let pot = evidence(&cv(&[1, 0]), &PgAuxiliaries::new(dvector![0.25_f64]).unwrap()).unwrap();
        let post = condition_diag(&MvnParams::<f64>::standard(1), &pot).unwrap();
        assert!((post.mean[0] - 0.4).abs() < 1e-14);
        assert!((post.cov[(0, 0)] - 0.8).abs() < 1e-14);

        let pot = evidence(&cv(&[3, 2, 1]), &PgAuxiliaries::new(dvector![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(pot.linear, dvector![0.0, 0.5]);
        let post = condition_diag(&MvnParams::standard(2), &pot).unwrap();
        assert!((post.mean - dvector![0.0, 0.25]).amax() < 1e-14);
        assert!((post.cov - dmatrix![0.5, 0.0; 0.0, 0.5]).amax() < 1e-14);
    }

    #[test]
    fn zero_auxiliaries_leave_prior_unchanged() {
        let prior = MvnParams::new(dvector![0.4, -0.1], dmatrix![1.0, 0.3; 0.3, 2.0]).unwrap();
        let pot = evidence(&cv(&[0, 0, 0]), &PgAuxiliaries::new(dvector![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(condition_diag(&prior, &pot).unwrap(), prior);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let aux = PgAuxiliaries::new(dvector![1.0]).unwrap();
        assert!(evidence(&cv(&[1, 2, 3]), &aux).is_err());
        assert!(GaussianPotential::new(dvector![1.0], dvector![1.0, 2.0]).is_err());
        assert!(GaussianPotential::new(dvector![-1.0], dvector![1.0]).is_err());
    }
}
