//! Stick-breaking multinomial linear dynamical system and a Gaussian LDS
//! baseline fit directly to the observation vectors.
//!
//! The latent state follows the linear-Gaussian dynamics of [`LdsParams`] and
//! emits `ψ_t = C z_t + d`, with `x_t ~ Mult(N_t, π_SB(ψ_t))`. Given the
//! Pólya-gamma auxiliaries the states are a Gaussian LDS and are drawn jointly
//! by FFBS.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::augmentation::{sample_aux_slice, GaussianPotential};
use crate::error::{Error, Result};
use crate::gaussian::mvn::sample_from_precision_factor;
use crate::gaussian::{cholesky_jittered, lds_ffbs, LdsParams, LdsPriors};
use crate::gaussian::lds::{sample_dynamics, sample_emission};
use crate::mult_gp::{sample_multinomial, smoothed_logit_frequencies};
use crate::rng::Lanes;
use crate::scalar::{lit, log_sum_exp, Real};
use crate::stick_breaking::{kappa_slice, log_pi_sb, pi_sb_vec};

const BLOCK_STATES: u64 = 31;
const BLOCK_PARAMS: u64 = 32;
const BLOCK_OMEGA: u64 = 33;
const BLOCK_ROLLOUT: u64 = 34;
const BLOCK_NOISE: u64 = 35;

fn lane(block: u64, idx: usize) -> u64 {
    (block << 40) | idx as u64
}

/// A `T × K` count sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceData {
    pub counts: Vec<Vec<u64>>,
}

impl SequenceData {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.first().map_or(0, Vec::len);
        if k == 0 || counts.iter().any(|c| c.len() != k) {
            return Err(Error::Data("every step needs the same positive number of categories".into()));
        }
        Ok(Self { counts })
    }

    /// One-hot rows for a categorical token stream.
    pub fn from_tokens(tokens: &[u32], categories: usize) -> Result<Self> {
        if let Some(&bad) = tokens.iter().find(|&&w| w as usize >= categories) {
            return Err(Error::Data(format!("token {bad} outside {categories} categories")));
        }
        Self::new(
            tokens
                .iter()
                .map(|&w| {
                    let mut row = vec![0u64; categories];
                    row[w as usize] = 1;
                    row
                })
                .collect(),
        )
    }

    /// Reads a CSV of counts; a first line that does not parse as counts is a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: std::result::Result<Vec<u64>, _> = line.split(',').map(|c| c.trim().parse::<u64>()).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if i == 0 => continue,
                Err(_) => return Err(Error::Data(format!("line {}: expected nonnegative integer counts", i + 1))),
            }
        }
        Self::new(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            out.push_str(&row.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.counts[0].len()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn split_at(&self, t: usize) -> Result<(Self, Self)> {
        if t == 0 || t >= self.len() {
            return Err(Error::Data(format!("cannot split {} steps at {t}", self.len())));
        }
        Ok((Self { counts: self.counts[..t].to_vec() }, Self { counts: self.counts[t..].to_vec() }))
    }

    /// Pooled category frequencies.
    pub fn mean_frequencies(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.num_categories()];
        for row in &self.counts {
            for (a, &c) in acc.iter_mut().zip(row) {
                *a += c as f64;
            }
        }
        let total: f64 = acc.iter().sum();
        acc.into_iter().map(|a| a / total.max(1.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultLdsState<T: Real> {
    pub params: LdsParams<T>,
    /// Emission offset `d`, length `K - 1`.
    pub bias: DVector<T>,
    /// Prior mean of the offset; its prior is `N(bias_mean, emission_var · I)`.
    pub bias_mean: DVector<T>,
    /// `T × D`.
    pub states: DMatrix<T>,
    /// `T × (K - 1)`.
    pub omega: DMatrix<T>,
}

impl<T: Real> MultLdsState<T> {
    /// Stable diagonal dynamics, small random emissions, and an offset at the
    /// stick coordinates of the smoothed pooled frequencies.
    pub fn init(data: &SequenceData, state_dim: usize, lanes: &Lanes) -> Result<Self> {
        let k = data.num_categories() - 1;
        let mut rng = lanes.rng(0, lane(BLOCK_PARAMS, 0));
        let mut pooled = vec![0u64; data.num_categories()];
        for row in &data.counts {
            for (p, c) in pooled.iter_mut().zip(row) {
                *p += c;
            }
        }
        let bias = DVector::from_iterator(k, smoothed_logit_frequencies(&pooled).into_iter().map(lit));
        let params = LdsParams {
            a: DMatrix::identity(state_dim, state_dim) * lit::<T>(0.9),
            b: DMatrix::identity(state_dim, state_dim) * lit::<T>(0.1),
            c_emit: DMatrix::from_fn(k, state_dim, |_, _| lit::<T>(0.1) * T::std_normal(&mut rng)),
            mu0: DVector::zeros(state_dim),
            sigma0: DMatrix::identity(state_dim, state_dim),
        };
        let mut state = Self { params, bias_mean: bias.clone(), bias, states: DMatrix::zeros(data.len(), state_dim), omega: DMatrix::zeros(data.len(), k) };
        resample_omega(&mut state, data, lanes, 0);
        Ok(state)
    }

    /// `ψ_t = C z_t + d`.
    pub fn psi(&self, t: usize) -> Vec<T> {
        let z = self.states.row(t).transpose();
        (&self.params.c_emit * z + &self.bias).iter().copied().collect()
    }

    /// Per-step evidence on `ψ_t`, before removing the offset.
    fn raw_potentials(&self, data: &SequenceData) -> Vec<GaussianPotential<T>> {
        data.counts
            .iter()
            .enumerate()
            .map(|(t, x)| GaussianPotential {
                precision: self.omega.row(t).transpose(),
                linear: DVector::from_vec(kappa_slice::<T>(x)),
            })
            .collect()
    }
}

/// Evidence on `C z_t` once the offset is absorbed: `(ω, κ - ω ∘ d)`.
fn shifted<T: Real>(pots: &[GaussianPotential<T>], bias: &DVector<T>) -> Vec<GaussianPotential<T>> {
    pots.iter()
        .map(|p| GaussianPotential { precision: p.precision.clone(), linear: &p.linear - p.precision.component_mul(bias) })
        .collect()
}

/// States with a trailing column of ones, so the emission update learns `[C d]`.
fn with_ones<T: Real>(states: &DMatrix<T>) -> DMatrix<T> {
    let (n, d) = states.shape();
    DMatrix::from_fn(n, d + 1, |t, j| if j < d { states[(t, j)] } else { T::one() })
}

fn split_emission<T: Real>(ce: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
    let d = ce.ncols() - 1;
    (ce.columns(0, d).into_owned(), ce.column(d).into_owned())
}

/// Emission rows under Gaussian noise that is constant over time: every row
/// shares the design Gram matrix `XᵀX`.
fn gaussian_emission<T: Real, R: Rng + ?Sized>(
    design: &DMatrix<T>,
    y: &[DVector<T>],
    offset: &DVector<T>,
    noise: &DVector<T>,
    priors: &LdsPriors<T>,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let p = design.ncols();
    let gram = design.tr_mul(design);
    let yc = DMatrix::from_fn(y.len(), offset.len(), |t, j| y[t][j] - offset[j]);
    let cross = design.tr_mul(&yc);
    let prior_prec = T::one() / priors.emission_var;
    let mut out = DMatrix::zeros(offset.len(), p);
    for j in 0..offset.len() {
        let w = T::one() / noise[j];
        let prec = DMatrix::identity(p, p) * prior_prec + &gram * w;
        let ch = cholesky_jittered(&prec, "raw_lds_emission")?;
        let mean = ch.solve(&(cross.column(j) * w));
        let draw = sample_from_precision_factor(&mean, &ch, rng);
        out.set_row(j, &draw.transpose());
    }
    Ok(out)
}

/// `ω_{t,k} ~ PG(N_k(x_t), ψ_{t,k})` for every step.
pub fn resample_omega<T: Real>(state: &mut MultLdsState<T>, data: &SequenceData, lanes: &Lanes, sweep: u64) {
    let rows: Vec<Vec<T>> = (0..data.len())
        .into_par_iter()
        .map(|t| sample_aux_slice(&data.counts[t], &state.psi(t), &mut lanes.rng(sweep, lane(BLOCK_OMEGA, t))))
        .collect();
    for (t, row) in rows.into_iter().enumerate() {
        for (k, w) in row.into_iter().enumerate() {
            state.omega[(t, k)] = w;
        }
    }
}

/// One Gibbs sweep: states by FFBS, then `(A, B, C, d)` when `update_params`, then `ω`.
pub fn sbmlds_gibbs_sweep<T: Real>(
    state: &mut MultLdsState<T>,
    data: &SequenceData,
    priors: &LdsPriors<T>,
    update_params: bool,
    lanes: &Lanes,
    sweep: u64,
) -> Result<()> {
    if data.len() != state.states.nrows() {
        return Err(Error::Data("state length does not match the sequence".into()));
    }
    let raw = state.raw_potentials(data);
    state.states = lds_ffbs(&state.params, &shifted(&raw, &state.bias), &mut lanes.rng(sweep, lane(BLOCK_STATES, 0)))?;
    if update_params {
        let mut rng = lanes.rng(sweep, lane(BLOCK_PARAMS, 0));
        let (a, b) = sample_dynamics(&state.states, priors, &mut rng)?;
        let centered = shifted(&raw, &state.bias_mean);
        let (c, delta) = split_emission(&sample_emission(&with_ones(&state.states), &centered, priors, &mut rng)?);
        state.params.a = a;
        state.params.b = b;
        state.params.c_emit = c;
        state.bias = &state.bias_mean + delta;
    }
    resample_omega(state, data, lanes, sweep);
    Ok(())
}

/// Draws a state path and counts with the given per-step totals.
pub fn sbmlds_generate<T: Real, R: Rng + ?Sized>(
    params: &LdsParams<T>,
    bias: &DVector<T>,
    totals: &[u64],
    rng: &mut R,
) -> Result<(SequenceData, DMatrix<T>)> {
    params.validate()?;
    if bias.len() != params.emission_dim() {
        return Err(Error::Data("offset length does not match the emission".into()));
    }
    let d = params.state_dim();
    let lb = cholesky_jittered(&params.b, "sbmlds_generate")?.l();
    let l0 = cholesky_jittered(&params.sigma0, "sbmlds_generate")?.l();
    let mut states = DMatrix::zeros(totals.len(), d);
    let mut z = &params.mu0 + l0 * DVector::from_fn(d, |_, _| T::std_normal(rng));
    let mut counts = Vec::with_capacity(totals.len());
    for (t, &n) in totals.iter().enumerate() {
        if t > 0 {
            z = &params.a * &z + &lb * DVector::from_fn(d, |_, _| T::std_normal(rng));
        }
        states.set_row(t, &z.transpose());
        let psi: Vec<T> = (&params.c_emit * &z + bias).iter().copied().collect();
        counts.push(sample_multinomial(n, &pi_sb_vec(&psi), rng));
    }
    Ok((SequenceData::new(counts)?, states))
}

/// `log Mult(x | exp(log_p))`; `-∞` if a positive count meets zero probability.
pub fn log_multinomial_logp(x: &[u64], log_p: &[f64]) -> f64 {
    let n: u64 = x.iter().sum();
    let mut acc = Real::log_gamma(n as f64 + 1.0);
    for (&c, &lp) in x.iter().zip(log_p) {
        if c > 0 {
            acc += c as f64 * lp - Real::log_gamma(c as f64 + 1.0);
        }
    }
    acc
}

/// Total log predictive likelihood when step `h` is scored by the
/// equal-weight mixture whose members assign log-likelihoods `member_lls[h]`.
pub fn mixture_log_likelihood(member_lls: &[Vec<f64>]) -> f64 {
    member_lls.iter().map(|lls| log_sum_exp(lls) - (lls.len() as f64).ln()).sum()
}

/// Member log-likelihoods of the training-mean multinomial, one member per step.
pub fn baseline_member_lls(train_freq: &[f64], future: &SequenceData) -> Vec<Vec<f64>> {
    let lp: Vec<f64> = train_freq.iter().map(|p| p.ln()).collect();
    future.counts.iter().map(|x| vec![log_multinomial_logp(x, &lp)]).collect()
}

/// `(log L_model - log L_baseline) / Σ future counts`, where the baseline is a
/// multinomial at the training-mean frequencies.
pub fn normalized_ll(member_lls: &[Vec<f64>], future: &SequenceData, train_freq: &[f64]) -> Result<f64> {
    if member_lls.len() != future.len() || member_lls.iter().any(Vec::is_empty) {
        return Err(Error::Data("one nonempty forecast ensemble per future step is required".into()));
    }
    let total = future.total_counts();
    if total == 0 {
        return Err(Error::Data("future steps contain no counts".into()));
    }
    let base_ll = mixture_log_likelihood(&baseline_member_lls(train_freq, future));
    if !base_ll.is_finite() {
        return Err(Error::Data("a future category never occurs in training; the mean baseline gives it zero probability".into()));
    }
    let model_ll = mixture_log_likelihood(member_lls);
    if model_ll.is_nan() {
        return Err(Error::domain("model predictive likelihood is NaN"));
    }
    Ok((model_ll - base_ll) / total as f64)
}

/// Retained posterior draw needed for forecasting.
#[derive(Debug, Clone, PartialEq)]
pub struct LdsSample<T: Real> {
    pub params: LdsParams<T>,
    pub bias: DVector<T>,
    pub last_state: DVector<T>,
}

impl<T: Real> LdsSample<T> {
    pub fn from_state(state: &MultLdsState<T>) -> Self {
        let n = state.states.nrows();
        Self { params: state.params.clone(), bias: state.bias.clone(), last_state: state.states.row(n - 1).transpose() }
    }
}

/// From every sample, `rollouts` simulated dynamics paths over the future;
/// each path contributes the log-likelihood of `x_{T+h}` under `π_SB(C z_{T+h} + d)`.
/// Returns the member log-likelihoods per future step.
pub fn sbmlds_forecast_lls<T: Real>(samples: &[LdsSample<T>], future: &SequenceData, rollouts: usize, lanes: &Lanes) -> Result<Vec<Vec<f64>>> {
    let per_sample: Result<Vec<Vec<Vec<f64>>>> = samples
        .par_iter()
        .enumerate()
        .map(|(s, sample)| {
            let d = sample.params.state_dim();
            let lb = cholesky_jittered(&sample.params.b, "sbmlds_forecast")?.l();
            let mut paths = Vec::with_capacity(rollouts);
            for r in 0..rollouts {
                let mut rng = lanes.rng(s as u64, lane(BLOCK_ROLLOUT, r));
                let mut z = sample.last_state.clone();
                let mut lls = Vec::with_capacity(future.len());
                for x in &future.counts {
                    z = &sample.params.a * &z + &lb * DVector::from_fn(d, |_, _| T::std_normal(&mut rng));
                    let psi: Vec<T> = (&sample.params.c_emit * &z + &sample.bias).iter().copied().collect();
                    let lp: Vec<f64> = log_pi_sb(&psi).into_iter().map(|v| v.as_f64()).collect();
                    lls.push(log_multinomial_logp(x, &lp));
                }
                paths.push(lls);
            }
            Ok(paths)
        })
        .collect();
    let per_sample = per_sample?;
    Ok((0..future.len()).map(|h| per_sample.iter().flatten().map(|path| path[h]).collect()).collect())
}

/// Normalized predictive log-likelihood of `future` under the SBM-LDS posterior samples.
pub fn sbmlds_predictive_ll<T: Real>(
    samples: &[LdsSample<T>],
    future: &SequenceData,
    train_freq: &[f64],
    rollouts: usize,
    lanes: &Lanes,
) -> Result<f64> {
    if samples.is_empty() || rollouts == 0 {
        return Err(Error::domain("prediction needs posterior samples and rollouts"));
    }
    normalized_ll(&sbmlds_forecast_lls(samples, future, rollouts, lanes)?, future, train_freq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmLdsOptions {
    pub state_dim: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for SbmLdsOptions {
    fn default() -> Self {
        Self { state_dim: 3, sweeps: 200, burn_in: 100, thin: 10 }
    }
}

/// Runs the full Gibbs chain and returns the retained forecasting samples.
/// `on_sweep` sees every state, e.g. for diagnostics.
pub fn sbmlds_fit<T: Real>(
    train: &SequenceData,
    priors: &LdsPriors<T>,
    opts: &SbmLdsOptions,
    lanes: &Lanes,
    mut on_sweep: impl FnMut(usize, &MultLdsState<T>),
) -> Result<Vec<LdsSample<T>>> {
    if opts.sweeps <= opts.burn_in {
        return Err(Error::domain("sweeps must exceed burn-in"));
    }
    let mut state = MultLdsState::init(train, opts.state_dim, lanes)?;
    let thin = opts.thin.max(1);
    let mut out = Vec::new();
    for s in 1..=opts.sweeps {
        sbmlds_gibbs_sweep(&mut state, train, priors, true, lanes, s as u64)?;
        on_sweep(s, &state);
        if s > opts.burn_in && (s - opts.burn_in).is_multiple_of(thin) {
            out.push(LdsSample::from_state(&state));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawLdsOptions {
    pub state_dim: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Inverse-gamma shape and scale on each observation-noise variance.
    pub noise_shape: f64,
    pub noise_scale: f64,
    /// Smallest probability a clamped forecast may assign.
    pub floor: f64,
}

impl Default for RawLdsOptions {
    fn default() -> Self {
        Self { state_dim: 3, sweeps: 200, burn_in: 100, thin: 10, noise_shape: 1.0, noise_scale: 0.1, floor: 1e-8 }
    }
}

/// Gaussian LDS on the frequency vectors `x_t / N_t` with diagonal noise,
/// fit by Gibbs. Forecast means are clamped at `floor` and renormalized.
pub fn raw_lds_fit_predict<T: Real>(
    train: &SequenceData,
    future: &SequenceData,
    priors: &LdsPriors<T>,
    opts: &RawLdsOptions,
    lanes: &Lanes,
) -> Result<f64> {
    if opts.sweeps <= opts.burn_in {
        return Err(Error::domain("sweeps must exceed burn-in"));
    }
    let k = train.num_categories();
    let d = opts.state_dim;
    let y: Vec<DVector<T>> = train
        .counts
        .iter()
        .map(|x| {
            let n: u64 = x.iter().sum();
            DVector::from_iterator(k, x.iter().map(|&c| lit::<T>(c as f64 / n.max(1) as f64)))
        })
        .collect();
    let mean = train.mean_frequencies();
    let mut rng0 = lanes.rng(0, lane(BLOCK_PARAMS, 1));
    let mut params = LdsParams {
        a: DMatrix::identity(d, d) * lit::<T>(0.9),
        b: DMatrix::identity(d, d) * lit::<T>(0.1),
        c_emit: DMatrix::from_fn(k, d, |_, _| lit::<T>(0.1) * T::std_normal(&mut rng0)),
        mu0: DVector::zeros(d),
        sigma0: DMatrix::identity(d, d),
    };
    let bias_mean = DVector::from_iterator(k, mean.iter().map(|&m| lit::<T>(m)));
    let mut bias = bias_mean.clone();
    let mut noise = DVector::from_element(k, lit::<T>(0.1));
    let thin = opts.thin.max(1);
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); future.len()];
    for s in 1..=opts.sweeps {
        let sweep = s as u64;
        let raw: Vec<GaussianPotential<T>> = y
            .iter()
            .map(|yt| {
                let prec = noise.map(|r| T::one() / r);
                GaussianPotential { linear: yt.component_mul(&prec), precision: prec }
            })
            .collect();
        let states = lds_ffbs(&params, &shifted(&raw, &bias), &mut lanes.rng(sweep, lane(BLOCK_STATES, 1)))?;
        let mut rng = lanes.rng(sweep, lane(BLOCK_PARAMS, 1));
        let (a, b) = sample_dynamics(&states, priors, &mut rng)?;
        let (c, delta) = split_emission(&gaussian_emission(&with_ones(&states), &y, &bias_mean, &noise, priors, &mut rng)?);
        params.a = a;
        params.b = b;
        params.c_emit = c;
        bias = &bias_mean + delta;
        let mut nrng = lanes.rng(sweep, lane(BLOCK_NOISE, 0));
        let fitted = &states * params.c_emit.transpose();
        for j in 0..k {
            let sse: T = (0..y.len())
                .map(|t| {
                    let r = y[t][j] - fitted[(t, j)] - bias[j];
                    r * r
                })
                .fold(T::zero(), |a, b| a + b);
            let shape = lit::<T>(opts.noise_shape + y.len() as f64 / 2.0);
            let scale = lit::<T>(opts.noise_scale) + sse / lit(2.0);
            noise[j] = scale / T::draw_gamma(shape, &mut nrng);
        }
        if s > opts.burn_in && (s - opts.burn_in).is_multiple_of(thin) {
            let mut z = states.row(states.nrows() - 1).transpose();
            for (step, x) in members.iter_mut().zip(&future.counts) {
                z = &params.a * &z;
                let f = &params.c_emit * &z + &bias;
                let clamped: Vec<f64> = f.iter().map(|v| v.as_f64().max(opts.floor)).collect();
                let total: f64 = clamped.iter().sum();
                let lp: Vec<f64> = clamped.iter().map(|v| (v / total).ln()).collect();
                step.push(log_multinomial_logp(x, &lp));
            }
        }
    }
    normalized_ll(&members, future, &mean)
}
