use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mvn::{cholesky_jittered, shrink_by_evidence, symmetrize, MvnParams};
use crate::augmentation::GaussianPotential;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Covariance function over `D`-dimensional inputs. Hyperparameters are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel<T> {
    /// `variance · exp(-½ Σ_d (a_d - b_d)² / ℓ_d²)`.
    SquaredExponential { variance: T, lengthscales: Vec<T> },
    /// `variance · 1[a = b]`: every input is independent.
    WhiteNoise { variance: T },
}

impl<T: Real> Kernel<T> {
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        match self {
            Kernel::SquaredExponential { variance, lengthscales } => {
                let r2 = a
                    .iter()
                    .zip(b)
                    .zip(lengthscales)
                    .fold(T::zero(), |acc, ((&x, &y), &l)| acc + (x - y) * (x - y) / (l * l));
                *variance * (-r2 * lit(0.5)).exp()
            }
            Kernel::WhiteNoise { variance } => {
                if a == b {
                    *variance
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        match self {
            Kernel::SquaredExponential { variance, lengthscales } => {
                if *variance <= T::zero() {
                    return Err(Error::domain("kernel variance must be positive"));
                }
                if lengthscales.len() != input_dim {
                    return Err(Error::Data(format!(
                        "kernel has {} lengthscales but inputs have {input_dim} columns",
                        lengthscales.len()
                    )));
                }
                if lengthscales.iter().any(|&l| l <= T::zero()) {
                    return Err(Error::domain("lengthscales must be positive"));
                }
            }
            Kernel::WhiteNoise { variance } => {
                if *variance <= T::zero() {
                    return Err(Error::domain("kernel variance must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// GP prior shared by all outputs: kernel, training inputs (`M × D`) and a
/// constant prior mean per output.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSpec<T: Real> {
    pub kernel: Kernel<T>,
    pub inputs: DMatrix<T>,
    pub mean: Vec<T>,
}

impl<T: Real> GpSpec<T> {
    pub fn new(kernel: Kernel<T>, inputs: DMatrix<T>, mean: Vec<T>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Data("GP needs at least one input".into()));
        }
        kernel.validate(inputs.ncols())?;
        Ok(Self { kernel, inputs, mean })
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.nrows()
    }

    fn row(m: &DMatrix<T>, i: usize) -> Vec<T> {
        m.row(i).iter().copied().collect()
    }

    pub fn cross_gram(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
        let ra: Vec<_> = (0..a.nrows()).map(|i| Self::row(a, i)).collect();
        let rb: Vec<_> = (0..b.nrows()).map(|i| Self::row(b, i)).collect();
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| self.kernel.eval(&ra[i], &rb[j]))
    }

    pub fn gram(&self) -> DMatrix<T> {
        let mut g = self.cross_gram(&self.inputs, &self.inputs);
        symmetrize(&mut g);
        g
    }

    /// Prior `N(μ_k 1, C)` over output `k` at the training inputs.
    pub fn prior(&self, k: usize) -> MvnParams<T> {
        let m = self.num_inputs();
        MvnParams { mean: DVector::from_element(m, self.mean[k]), cov: self.gram() }
    }
}

/// Conditional of `ψ_{:,k}` given diagonal evidence at every training input:
/// covariance `(C⁻¹ + Ω_k)⁻¹`, mean `(C⁻¹ + Ω_k)⁻¹ (C⁻¹ μ_k + κ_k)`.
pub fn gp_conditional<T: Real>(spec: &GpSpec<T>, k: usize, pot: &GaussianPotential<T>) -> Result<MvnParams<T>> {
    gp_conditional_with_gram(spec, k, &spec.gram(), pot)
}

/// Same as [`gp_conditional`] with a precomputed Gram matrix.
pub fn gp_conditional_with_gram<T: Real>(
    spec: &GpSpec<T>,
    k: usize,
    gram: &DMatrix<T>,
    pot: &GaussianPotential<T>,
) -> Result<MvnParams<T>> {
    let prior = MvnParams { mean: DVector::from_element(spec.num_inputs(), spec.mean[k]), cov: gram.clone() };
    super::mvn::condition_diag(&prior, pot)
}

/// Predictive Gaussian at `test_inputs` given evidence at the training inputs,
/// with the training latents integrated out analytically.
pub fn gp_predict_marginal<T: Real>(
    spec: &GpSpec<T>,
    k: usize,
    pot: &GaussianPotential<T>,
    test_inputs: &DMatrix<T>,
) -> Result<MvnParams<T>> {
    let m = spec.num_inputs();
    if pot.len() != m {
        return Err(Error::Data(format!("potential has length {} but GP has {m} inputs", pot.len())));
    }
    let mu = spec.mean[k];
    let c = spec.gram();
    let c_star = spec.cross_gram(test_inputs, &spec.inputs);
    let mut c_ss = spec.cross_gram(test_inputs, test_inputs);
    symmetrize(&mut c_ss);
    let n_test = test_inputs.nrows();

    let s = pot.precision.map(|w| w.sqrt());
    // r = κ - Ω μ
    let r = DVector::from_fn(m, |i, _| pot.linear[i] - pot.precision[i] * mu);
    if s.iter().all(|&v| v == T::zero()) {
        let mean = DVector::from_element(n_test, mu) + &c_star * r;
        return Ok(MvnParams { mean, cov: c_ss });
    }
    let (_, ch) = shrink_by_evidence(&c, &s)?;
    // (C⁻¹ + Ω)⁻¹ C⁻¹ ... expressed as v = (I - S B⁻¹ S C) r
    let scr = s.component_mul(&(&c * &r));
    let v = &r - s.component_mul(&ch.solve(&scr));
    let mean = DVector::from_element(n_test, mu) + &c_star * v;
    // C** - C*t S B⁻¹ S Ct*
    let sc = DMatrix::from_fn(m, n_test, |i, j| s[i] * c_star[(j, i)]);
    let w = ch.l_dirty().solve_lower_triangular(&sc).expect("nonsingular factor");
    let mut cov = c_ss - w.tr_mul(&w);
    symmetrize(&mut cov);
    Ok(MvnParams { mean, cov })
}

/// Predictive Gaussian at `test_inputs` given the latent values at the
/// training inputs: mean `μ + C*ᵀ C⁻¹ (ψ - μ)`, covariance `C** - C*ᵀ C⁻¹ C*`.
pub fn gp_predict_given_latent<T: Real>(
    spec: &GpSpec<T>,
    k: usize,
    psi_train: &DVector<T>,
    test_inputs: &DMatrix<T>,
) -> Result<MvnParams<T>> {
    let m = spec.num_inputs();
    if psi_train.len() != m {
        return Err(Error::Data(format!("latent vector has length {} but GP has {m} inputs", psi_train.len())));
    }
    let mu = spec.mean[k];
    let ch = cholesky_jittered(&spec.gram(), "gp_predict_given_latent")?;
    let c_star = spec.cross_gram(test_inputs, &spec.inputs);
    let mut c_ss = spec.cross_gram(test_inputs, test_inputs);
    symmetrize(&mut c_ss);
    let resid = psi_train.map(|v| v - mu);
    let mean = DVector::from_element(test_inputs.nrows(), mu) + &c_star * ch.solve(&resid);
    let w = ch.l_dirty().solve_lower_triangular(&c_star.transpose()).expect("nonsingular factor");
    let mut cov = c_ss - w.tr_mul(&w);
    symmetrize(&mut cov);
    Ok(MvnParams { mean, cov })
}
