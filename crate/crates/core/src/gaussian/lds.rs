//! Linear-Gaussian state space machinery with diagonal observation potentials.
//!
//! The state follows `z_1 ~ N(mu0, sigma0)`, `z_{t+1} ~ N(A z_t, B)`, and each
//! step carries evidence `exp(κ_tᵀ ψ_t - ½ ψ_tᵀ Ω_t ψ_t)` on `ψ_t = C z_t` with
//! diagonal `Ω_t`. Evidence enters the filter in information form as
//! `Cᵀ Ω_t C` and `Cᵀ κ_t`, which costs `O(D² K)` per step without forming
//! any `K × K` matrix; the remaining work per step is `O(D³)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mvn::{cholesky_jittered, log_det_from_cholesky, sample_from_precision_factor, symmetrize};
use super::niw::sample_inverse_wishart;
use crate::augmentation::GaussianPotential;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct LdsParams<T: Real> {
    /// Dynamics, `D × D`.
    pub a: DMatrix<T>,
    /// State noise covariance, `D × D`.
    pub b: DMatrix<T>,
    /// Emission, `(K - 1) × D`.
    pub c_emit: DMatrix<T>,
    pub mu0: DVector<T>,
    pub sigma0: DMatrix<T>,
}

impl<T: Real> LdsParams<T> {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn emission_dim(&self) -> usize {
        self.c_emit.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.state_dim();
        let ok = self.a.ncols() == d
            && self.b.shape() == (d, d)
            && self.c_emit.ncols() == d
            && self.mu0.len() == d
            && self.sigma0.shape() == (d, d);
        if !ok {
            return Err(Error::Data("inconsistent LDS parameter shapes".into()));
        }
        Ok(())
    }
}

/// Filtered information-form beliefs for one time step.
#[derive(Debug, Clone)]
pub struct FilteredStep<T: Real> {
    pub precision: DMatrix<T>,
    pub linear: DVector<T>,
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct FilterOutput<T: Real> {
    pub steps: Vec<FilteredStep<T>>,
    /// `log ∫ p(z) Π_t exp(κ_tᵀ C z_t - ½ z_tᵀ Cᵀ Ω_t C z_t) dz`.
    pub log_evidence: T,
}

fn check_potentials<T: Real>(params: &LdsParams<T>, potentials: &[GaussianPotential<T>]) -> Result<()> {
    params.validate()?;
    let k = params.emission_dim();
    for (t, p) in potentials.iter().enumerate() {
        if p.len() != k {
            return Err(Error::Data(format!("potential at step {t} has width {} but emission has {k} rows", p.len())));
        }
    }
    Ok(())
}

/// `Cᵀ κ` over the rows that carry evidence.
fn project_linear<T: Real>(c: &DMatrix<T>, pot: &GaussianPotential<T>) -> DVector<T> {
    let mut h = DVector::zeros(c.ncols());
    for i in 0..c.nrows() {
        let k = pot.linear[i];
        if k != T::zero() {
            h.axpy(k, &c.row(i).transpose(), T::one());
        }
    }
    h
}

/// `(Cᵀ Ω C, Cᵀ κ)` in `O(D² K)`.
pub fn project_potential<T: Real>(c: &DMatrix<T>, pot: &GaussianPotential<T>) -> (DMatrix<T>, DVector<T>) {
    let d = c.ncols();
    let mut j = DMatrix::zeros(d, d);
    let mut h = DVector::zeros(d);
    // rows with zero evidence contribute nothing; sparse one-hot data leaves most of them empty
    for i in 0..c.nrows() {
        let (w, k) = (pot.precision[i], pot.linear[i]);
        if w == T::zero() && k == T::zero() {
            continue;
        }
        let row = c.row(i);
        for a in 0..d {
            let wa = w * row[a];
            h[a] += k * row[a];
            for b in 0..=a {
                j[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            j[(b, a)] = j[(a, b)];
        }
    }
    (j, h)
}

fn factor<T: Real>(m: &DMatrix<T>, t: usize) -> Result<Cholesky<T, Dyn>> {
    cholesky_jittered(m, "lds_filter").map_err(|e| match e {
        Error::LinAlg { detail, .. } => Error::linalg("lds_filter", format!("step {t}: {detail}")),
        other => other,
    })
}

/// Forward pass: covariance-form prediction, information-form evidence.
pub fn lds_filter<T: Real>(params: &LdsParams<T>, potentials: &[GaussianPotential<T>]) -> Result<FilterOutput<T>> {
    check_potentials(params, potentials)?;
    let half = lit::<T>(0.5);
    let mut m_pred = params.mu0.clone();
    let mut p_pred = params.sigma0.clone();
    let mut steps = Vec::with_capacity(potentials.len());
    let mut log_ev = T::zero();
    // Cᵀ Ω C is reused while consecutive steps share Ω (shared observation noise)
    let mut cached: Option<(&DVector<T>, DMatrix<T>)> = None;
    for (t, pot) in potentials.iter().enumerate() {
        let ch_pred = factor(&p_pred, t)?;
        let j_pred = ch_pred.inverse();
        let h_pred = &j_pred * &m_pred;
        let (j_obs, h_obs) = match &cached {
            Some((prec, j)) if *prec == &pot.precision => (j.clone(), project_linear(&params.c_emit, pot)),
            _ => {
                let (j, h) = project_potential(&params.c_emit, pot);
                cached = Some((&pot.precision, j.clone()));
                (j, h)
            }
        };
        let precision = &j_pred + j_obs;
        let linear = &h_pred + h_obs;
        let ch_f = factor(&precision, t)?;
        let mean = ch_f.solve(&linear);
        let cov = ch_f.inverse();
        log_ev += half * (linear.dot(&mean) - h_pred.dot(&m_pred))
            - half * (log_det_from_cholesky(&ch_pred) + log_det_from_cholesky(&ch_f));
        m_pred = &params.a * &mean;
        p_pred = &params.a * &cov * params.a.transpose() + &params.b;
        symmetrize(&mut p_pred);
        steps.push(FilteredStep { precision, linear, mean, cov });
    }
    Ok(FilterOutput { steps, log_evidence: log_ev })
}

/// Log normalizer of the state-space model times its potentials.
pub fn lds_log_evidence<T: Real>(params: &LdsParams<T>, potentials: &[GaussianPotential<T>]) -> Result<T> {
    Ok(lds_filter(params, potentials)?.log_evidence)
}

/// Exact joint draw of `z_{1:T}` (rows of the result) given the potentials.
pub fn lds_ffbs<T: Real, R: Rng + ?Sized>(
    params: &LdsParams<T>,
    potentials: &[GaussianPotential<T>],
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let filt = lds_filter(params, potentials)?;
    let n = potentials.len();
    let d = params.state_dim();
    let mut states = DMatrix::zeros(n, d);
    if n == 0 {
        return Ok(states);
    }
    let last = &filt.steps[n - 1];
    let ch = factor(&last.precision, n - 1)?;
    let mut next = sample_from_precision_factor(&last.mean, &ch, rng);
    states.set_row(n - 1, &next.transpose());
    if n == 1 {
        return Ok(states);
    }
    let b_inv = cholesky_jittered(&params.b, "lds_ffbs")?.inverse();
    let at_binv = params.a.transpose() * &b_inv;
    let at_binv_a = &at_binv * &params.a;
    for t in (0..n - 1).rev() {
        let step = &filt.steps[t];
        let precision = &step.precision + &at_binv_a;
        let linear = &step.linear + &at_binv * &next;
        let ch = factor(&precision, t)?;
        let mean = ch.solve(&linear);
        next = sample_from_precision_factor(&mean, &ch, rng);
        states.set_row(t, &next.transpose());
    }
    Ok(states)
}

/// Conjugate priors for the LDS parameters.
///
/// `A | B ~ MN(0, B, dyn_row_cov)` with `B ~ IW(b_nu, b_psi)`; each emission row
/// `c_k ~ N(0, emission_var · I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct LdsPriors<T: Real> {
    pub dyn_mean: DMatrix<T>,
    pub dyn_row_cov: DMatrix<T>,
    pub b_nu: T,
    pub b_psi: DMatrix<T>,
    pub emission_var: T,
}

impl<T: Real> LdsPriors<T> {
    /// Identity row covariances and `IW(D + 2, I)` noise.
    pub fn weak(d: usize) -> Self {
        Self {
            dyn_mean: DMatrix::zeros(d, d),
            dyn_row_cov: DMatrix::identity(d, d),
            b_nu: lit((d + 2) as f64),
            b_psi: DMatrix::identity(d, d),
            emission_var: T::one(),
        }
    }
}

/// Draws `(A, B)` from the matrix-normal-inverse-Wishart posterior given the
/// transitions `z_t → z_{t+1}` in `states` (one state per row).
pub fn sample_dynamics<T: Real, R: Rng + ?Sized>(
    states: &DMatrix<T>,
    prior: &LdsPriors<T>,
    rng: &mut R,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let d = states.ncols();
    let n = states.nrows();
    let v0_inv = cholesky_jittered(&prior.dyn_row_cov, "sample_dynamics")?.inverse();
    let mut sxx = v0_inv.clone();
    let mut syx = &prior.dyn_mean * &v0_inv;
    let mut syy = &prior.dyn_mean * &v0_inv * prior.dyn_mean.transpose();
    for t in 0..n.saturating_sub(1) {
        let x = states.row(t).transpose();
        let y = states.row(t + 1).transpose();
        sxx += &x * x.transpose();
        syx += &y * x.transpose();
        syy += &y * y.transpose();
    }
    let ch_xx = cholesky_jittered(&sxx, "sample_dynamics")?;
    let vn = ch_xx.inverse();
    let mn = &syx * &vn;
    let mut psi_n = &prior.b_psi + &syy - &mn * syx.transpose();
    symmetrize(&mut psi_n);
    let nu_n = prior.b_nu + lit(n.saturating_sub(1) as f64);
    let b = sample_inverse_wishart(nu_n, &psi_n, rng)?;
    let lb = cholesky_jittered(&b, "sample_dynamics")?.l();
    let lv = cholesky_jittered(&vn, "sample_dynamics")?.l();
    let e = DMatrix::from_fn(d, d, |_, _| T::std_normal(rng));
    let a = mn + lb * e * lv.transpose();
    Ok((a, b))
}

/// Draws each emission row from its Gaussian posterior, treating the
/// potentials as known-noise observations of `c_kᵀ z_t`.
pub fn sample_emission<T: Real, R: Rng + ?Sized>(
    states: &DMatrix<T>,
    potentials: &[GaussianPotential<T>],
    prior: &LdsPriors<T>,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let d = states.ncols();
    let k = potentials.first().map_or(0, |p| p.len());
    let prior_prec = T::one() / prior.emission_var;
    let rows: Vec<DVector<T>> = (0..states.nrows()).map(|t| states.row(t).transpose()).collect();
    let mut c = DMatrix::zeros(k, d);
    for row in 0..k {
        let mut prec = DMatrix::identity(d, d) * prior_prec;
        let mut lin = DVector::zeros(d);
        for (z, pot) in rows.iter().zip(potentials) {
            let w = pot.precision[row];
            let kap = pot.linear[row];
            if w == T::zero() && kap == T::zero() {
                continue;
            }
            prec.ger(w, z, z, T::one());
            lin.axpy(kap, z, T::one());
        }
        let ch = cholesky_jittered(&prec, "sample_emission")?;
        let mean = ch.solve(&lin);
        let draw = sample_from_precision_factor(&mean, &ch, rng);
        c.set_row(row, &draw.transpose());
    }
    Ok(c)
}

/// One conditional draw of `(A, B, C_emit)`; `mu0` and `sigma0` are carried over.
pub fn lds_param_posterior_sample<T: Real, R: Rng + ?Sized>(
    current: &LdsParams<T>,
    states: &DMatrix<T>,
    potentials: &[GaussianPotential<T>],
    priors: &LdsPriors<T>,
    rng: &mut R,
) -> Result<LdsParams<T>> {
    let (a, b) = sample_dynamics(states, priors, rng)?;
    let c_emit = sample_emission(states, potentials, priors, rng)?;
    Ok(LdsParams { a, b, c_emit, mu0: current.mu0.clone(), sigma0: current.sigma0.clone() })
}
