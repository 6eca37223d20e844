use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use crate::augmentation::sample_aux_slice;
use crate::error::{Error, Result};
use crate::gaussian::mvn::{cholesky_jittered, mvn_sample, sample_from_precision_factor};
use crate::gaussian::{sample_niw, MvnParams, NiwParams};
use crate::rng::Lanes;
use crate::scalar::{lit, Real};
use crate::stick_breaking::{kappa_slice, pi_sb_vec, sample_dirichlet};

const BLOCK_Z: u64 = 1;
const BLOCK_BETA: u64 = 2;
const BLOCK_OMEGA: u64 = 3;
const BLOCK_PSI: u64 = 4;
const BLOCK_GLOBAL: u64 = 5;
const BLOCK_INIT: u64 = 6;

pub(crate) fn lane(block: u64, idx: usize) -> u64 {
    (block << 40) | idx as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct CtmHyper<T: Real> {
    /// Symmetric Dirichlet concentration of each topic's word distribution.
    pub alpha_beta: T,
    /// Prior on the logistic-normal document prior `(μ, Σ)`.
    pub niw: NiwParams<T>,
}

impl<T: Real> CtmHyper<T> {
    pub fn default_for(num_topics: usize) -> Self {
        Self { alpha_beta: lit(0.1), niw: NiwParams::weak(num_topics.saturating_sub(1)) }
    }
}

/// Full Gibbs state of the stick-breaking correlated topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmState<T: Real> {
    /// `T × V`, rows on the simplex.
    pub topics: DMatrix<T>,
    /// Per-document stick coordinates, each of length `T - 1`.
    pub psi: Vec<Vec<T>>,
    pub omega: Vec<Vec<T>>,
    pub z: Vec<Vec<u32>>,
    /// `counts[d][t]` is the number of tokens of document `d` assigned to `t`.
    pub counts: Vec<Vec<u64>>,
    pub prior: MvnParams<T>,
    pub hyper: CtmHyper<T>,
}

impl<T: Real> CtmState<T> {
    pub fn num_topics(&self) -> usize {
        self.topics.nrows()
    }

    /// Uniform random assignments, topics drawn from their conditional,
    /// `ψ = 0` and a standard normal document prior.
    pub fn init(corpus: &Corpus, num_topics: usize, hyper: CtmHyper<T>, lanes: &Lanes) -> Result<Self> {
        if num_topics == 0 {
            return Err(Error::domain("need at least one topic"));
        }
        if hyper.niw.dim() + 1 != num_topics {
            return Err(Error::Data("NIW dimension must be T - 1".into()));
        }
        hyper.niw.validate()?;
        let mut rng = lanes.rng(0, lane(BLOCK_INIT, 0));
        let z: Vec<Vec<u32>> = corpus
            .docs()
            .iter()
            .map(|doc| doc.iter().map(|_| rng.random_range(0..num_topics as u32)).collect())
            .collect();
        let dim = num_topics - 1;
        let mut state = Self {
            topics: DMatrix::from_element(num_topics, corpus.vocab_size(), T::one() / lit(corpus.vocab_size() as f64)),
            psi: vec![vec![T::zero(); dim]; corpus.num_docs()],
            omega: vec![vec![T::zero(); dim]; corpus.num_docs()],
            counts: Vec::new(),
            z,
            prior: MvnParams::standard(dim),
            hyper,
        };
        state.recount(num_topics);
        state.topics = sample_topics(&state, corpus, lanes, 0)?;
        Ok(state)
    }

    fn recount(&mut self, num_topics: usize) {
        self.counts = self
            .z
            .iter()
            .map(|zd| {
                let mut c = vec![0u64; num_topics];
                for &t in zd {
                    c[t as usize] += 1;
                }
                c
            })
            .collect();
    }

    /// `θ_d = π_SB(ψ_d)`.
    pub fn theta(&self, d: usize) -> Vec<T> {
        pi_sb_vec(&self.psi[d])
    }

    /// Topic-word counts `n_{t,v}` implied by the assignments.
    pub fn topic_word_counts(&self, corpus: &Corpus) -> Vec<Vec<u64>> {
        let mut n = vec![vec![0u64; corpus.vocab_size()]; self.num_topics()];
        for (doc, zd) in corpus.docs().iter().zip(&self.z) {
            for (&w, &t) in doc.iter().zip(zd) {
                n[t as usize][w as usize] += 1;
            }
        }
        n
    }

    /// Checks the count, simplex and auxiliary invariants.
    pub fn check(&self, corpus: &Corpus) -> Result<()> {
        let k = self.num_topics();
        for (d, doc) in corpus.docs().iter().enumerate() {
            let total: u64 = self.counts[d].iter().sum();
            if total as usize != doc.len() || self.z[d].len() != doc.len() {
                return Err(Error::Data(format!("counts of document {d} disagree with its length")));
            }
            let mut recount = vec![0u64; k];
            for &t in &self.z[d] {
                recount[t as usize] += 1;
            }
            if recount != self.counts[d] {
                return Err(Error::Data(format!("counts of document {d} disagree with assignments")));
            }
        }
        for t in 0..k {
            let s = self.topics.row(t).iter().fold(T::zero(), |a, &b| a + b);
            if (s - T::one()).abs() > lit(1e-6) {
                return Err(Error::Data(format!("topic {t} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// Ground-truth settings for [`ctm_generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CtmGenSpec<T: Real> {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_docs: usize,
    pub doc_len: usize,
    pub hyper: CtmHyper<T>,
    /// Document prior; drawn from the NIW hyperprior when absent.
    pub prior: Option<MvnParams<T>>,
}

/// Samples a corpus and its latent variables from the generative model.
pub fn ctm_generate<T: Real, R: Rng + ?Sized>(spec: &CtmGenSpec<T>, rng: &mut R) -> Result<(Corpus, CtmState<T>)> {
    let (nt, v) = (spec.num_topics, spec.vocab_size);
    if nt == 0 || v == 0 {
        return Err(Error::domain("topic and vocabulary sizes must be positive"));
    }
    let dim = nt - 1;
    let prior = match &spec.prior {
        Some(p) if p.dim() != dim => return Err(Error::Data("document prior must have dimension T - 1".into())),
        Some(p) => p.clone(),
        None if dim == 0 => MvnParams::standard(0),
        None => sample_niw(&spec.hyper.niw, rng)?,
    };
    let mut topics = DMatrix::zeros(nt, v);
    let alpha = vec![spec.hyper.alpha_beta; v];
    for t in 0..nt {
        let row = sample_dirichlet(&alpha, rng);
        for (j, p) in row.into_iter().enumerate() {
            topics[(t, j)] = p;
        }
    }
    let mut docs = Vec::with_capacity(spec.num_docs);
    let mut psi = Vec::with_capacity(spec.num_docs);
    let mut z = Vec::with_capacity(spec.num_docs);
    for _ in 0..spec.num_docs {
        let p: Vec<T> = if dim == 0 { Vec::new() } else { mvn_sample(&prior, rng)?.iter().copied().collect() };
        let theta = pi_sb_vec(&p);
        let mut doc = Vec::with_capacity(spec.doc_len);
        let mut zd = Vec::with_capacity(spec.doc_len);
        for _ in 0..spec.doc_len {
            let t = sample_categorical(&theta, rng);
            let w = sample_categorical_row(&topics, t, rng);
            zd.push(t as u32);
            doc.push(w as u32);
        }
        docs.push(doc);
        psi.push(p);
        z.push(zd);
    }
    let corpus = Corpus::new(docs, v)?;
    let mut state = CtmState {
        topics,
        omega: vec![vec![T::zero(); dim]; spec.num_docs],
        psi,
        z,
        counts: Vec::new(),
        prior,
        hyper: spec.hyper.clone(),
    };
    state.recount(nt);
    Ok((corpus, state))
}

/// Index drawn with probability proportional to `weights`.
pub fn sample_categorical<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total = weights.iter().fold(T::zero(), |a, &b| a + b);
    let mut u = T::open01(rng) * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding left a sliver past the last bin: take the last positive weight
    weights.iter().rposition(|&w| w > T::zero()).unwrap_or(weights.len() - 1)
}

fn sample_categorical_row<T: Real, R: Rng + ?Sized>(m: &DMatrix<T>, row: usize, rng: &mut R) -> usize {
    let w: Vec<T> = m.row(row).iter().copied().collect();
    sample_categorical(&w, rng)
}

fn sample_topics<T: Real>(state: &CtmState<T>, corpus: &Corpus, lanes: &Lanes, sweep: u64) -> Result<DMatrix<T>> {
    let n = state.topic_word_counts(corpus);
    let v = corpus.vocab_size();
    let rows: Vec<Vec<T>> = (0..state.num_topics())
        .into_par_iter()
        .map(|t| {
            let mut rng = lanes.rng(sweep, lane(BLOCK_BETA, t));
            let alpha: Vec<T> = n[t].iter().map(|&c| state.hyper.alpha_beta + lit(c as f64)).collect();
            sample_dirichlet(&alpha, &mut rng)
        })
        .collect();
    Ok(DMatrix::from_fn(state.num_topics(), v, |t, j| rows[t][j]))
}

/// Redraws the assignments of one document given `θ_d` and the topics.
pub(crate) fn resample_assignments<T: Real, R: Rng + ?Sized>(
    doc: &[u32],
    zd: &mut [u32],
    counts: &mut [u64],
    theta: &[T],
    topics: &DMatrix<T>,
    rng: &mut R,
) {
    let k = theta.len();
    let mut w = vec![T::zero(); k];
    counts.iter_mut().for_each(|c| *c = 0);
    for (n, &word) in doc.iter().enumerate() {
        for t in 0..k {
            w[t] = theta[t] * topics[(t, word as usize)];
        }
        let t = sample_categorical(&w, rng);
        zd[n] = t as u32;
        counts[t] += 1;
    }
}

/// Draws `ψ_d` from `N(ψ | μ̃, Σ̃)` with `Σ̃⁻¹ = Σ⁻¹ + Ω_d` and
/// `μ̃ = Σ̃ (Σ⁻¹μ + κ(c_d))`.
pub(crate) fn resample_psi<T: Real, R: Rng + ?Sized>(
    prior_prec: &DMatrix<T>,
    prior_lin: &DVector<T>,
    omega: &[T],
    counts: &[u64],
    rng: &mut R,
) -> Result<Vec<T>> {
    let mut prec = prior_prec.clone();
    for (i, &w) in omega.iter().enumerate() {
        prec[(i, i)] += w;
    }
    let kap = kappa_slice::<T>(counts);
    let lin = prior_lin + DVector::from_vec(kap);
    let ch = cholesky_jittered(&prec, "ctm_resample_psi")?;
    let mean = ch.solve(&lin);
    Ok(sample_from_precision_factor(&mean, &ch, rng).iter().copied().collect())
}

/// Precision and precision-times-mean of a Gaussian.
pub(crate) fn information_form<T: Real>(p: &MvnParams<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let prec = cholesky_jittered(&p.cov, "information_form")?.inverse();
    let lin = &prec * &p.mean;
    Ok((prec, lin))
}

/// One sweep over `z`, `β`, `ω`, `ψ` and `(μ, Σ)`.
///
/// `z` is drawn with `ω` integrated out and `ω` is refreshed immediately
/// afterwards, so the pair is a joint block draw and `ψ` always conditions on
/// auxiliaries that match the current counts.
pub fn ctm_gibbs_sweep<T: Real>(state: &mut CtmState<T>, corpus: &Corpus, lanes: &Lanes, sweep: u64) -> Result<()> {
    let nt = state.num_topics();
    let dim = nt - 1;

    // z | w, β, ψ
    {
        let topics = &state.topics;
        let psi = &state.psi;
        state
            .z
            .par_iter_mut()
            .zip(state.counts.par_iter_mut())
            .enumerate()
            .for_each(|(d, (zd, cd))| {
                let mut rng = lanes.rng(sweep, lane(BLOCK_Z, d));
                let theta = pi_sb_vec(&psi[d]);
                resample_assignments(corpus.doc(d), zd, cd, &theta, topics, &mut rng);
            });
    }

    // β | z, w
    state.topics = sample_topics(state, corpus, lanes, sweep)?;

    if dim == 0 {
        return Ok(());
    }

    // ω | ψ, c
    {
        let psi = &state.psi;
        let counts = &state.counts;
        state.omega.par_iter_mut().enumerate().for_each(|(d, od)| {
            let mut rng = lanes.rng(sweep, lane(BLOCK_OMEGA, d));
            *od = sample_aux_slice(&counts[d], &psi[d], &mut rng);
        });
    }

    // ψ | c, ω, μ, Σ
    {
        let (prec, lin) = information_form(&state.prior)?;
        let counts = &state.counts;
        let omega = &state.omega;
        let draws: Result<Vec<Vec<T>>> = (0..corpus.num_docs())
            .into_par_iter()
            .map(|d| {
                let mut rng = lanes.rng(sweep, lane(BLOCK_PSI, d));
                resample_psi(&prec, &lin, &omega[d], &counts[d], &mut rng)
            })
            .collect();
        state.psi = draws?;
    }

    // (μ, Σ) | ψ
    let data: Vec<DVector<T>> = state.psi.iter().map(|p| DVector::from_column_slice(p)).collect();
    let mut rng = lanes.rng(sweep, lane(BLOCK_GLOBAL, 0));
    state.prior = sample_niw(&state.hyper.niw.posterior(&data), &mut rng)?;
    Ok(())
}

/// Posterior correlation matrix of `θ = π_SB(ψ)` under `ψ ~ N(μ, Σ)`,
/// estimated from `n_mc` draws.
pub fn topic_correlation<T: Real, R: Rng + ?Sized>(prior: &MvnParams<T>, n_mc: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let k = prior.dim() + 1;
    let mut sum = DVector::<f64>::zeros(k);
    let mut outer = DMatrix::<f64>::zeros(k, k);
    for _ in 0..n_mc {
        let psi: Vec<T> = if k == 1 { Vec::new() } else { mvn_sample(prior, rng)?.iter().copied().collect() };
        let theta = DVector::from_iterator(k, pi_sb_vec(&psi).into_iter().map(|v| v.as_f64()));
        sum += &theta;
        outer += &theta * theta.transpose();
    }
    let n = n_mc as f64;
    let mean = &sum / n;
    let cov = outer / n - &mean * mean.transpose();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        let denom = (cov[(i, i)] * cov[(j, j)]).sqrt();
        if denom > 0.0 {
            cov[(i, j)] / denom
        } else if i == j {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::lane_rng;
    use nalgebra::{dmatrix, dvector};

    fn gen(nt: usize, v: usize, d: usize, len: usize, prior: Option<MvnParams<f64>>, seed: u64) -> (Corpus, CtmState<f64>) {
        let spec = CtmGenSpec { num_topics: nt, vocab_size: v, num_docs: d, doc_len: len, hyper: CtmHyper::default_for(nt), prior };
        ctm_generate(&spec, &mut lane_rng(seed, 0, 0, 0)).unwrap()
    }

    #[test]
    fn single_topic_generation_and_sweep() {
        let (corpus, truth) = gen(1, 6, 5, 8, None, 1);
        assert!(truth.z.iter().flatten().all(|&t| t == 0));
        assert!(truth.psi.iter().all(|p| p.is_empty()));
        let lanes = Lanes::new(3, 0);
        let mut state = CtmState::<f64>::init(&corpus, 1, CtmHyper::default_for(1), &lanes).unwrap();
        ctm_gibbs_sweep(&mut state, &corpus, &lanes, 1).unwrap();
        state.check(&corpus).unwrap();
        assert_eq!(state.theta(0), vec![1.0]);
    }

    #[test]
    fn degenerate_prior_pins_theta() {
        let mu = dvector![0.5, -0.3];
        let prior = MvnParams::new(mu.clone(), DMatrix::identity(2, 2) * 1e-10).unwrap();
        let (_, truth) = gen(3, 10, 20, 5, Some(prior), 2);
        let want = pi_sb_vec(mu.as_slice());
        for d in 0..20 {
            for (a, b) in truth.theta(d).iter().zip(&want) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn correlated_prior_shows_in_generated_proportions() {
        let prior = MvnParams::new(dvector![0.0, 0.0], dmatrix![2.0, 1.8; 1.8, 2.0]).unwrap();
        let mut rng = lane_rng(4, 0, 0, 0);
        let corr = topic_correlation(&prior, 100_000, &mut rng).unwrap();
        let (_, truth) = gen(3, 10, 4000, 1, Some(prior), 4);
        let thetas: Vec<Vec<f64>> = (0..4000).map(|d| truth.theta(d)).collect();
        let emp = |i: usize, j: usize| {
            let n = thetas.len() as f64;
            let mi = thetas.iter().map(|t| t[i]).sum::<f64>() / n;
            let mj = thetas.iter().map(|t| t[j]).sum::<f64>() / n;
            let c = thetas.iter().map(|t| (t[i] - mi) * (t[j] - mj)).sum::<f64>() / n;
            let vi = thetas.iter().map(|t| (t[i] - mi).powi(2)).sum::<f64>() / n;
            let vj = thetas.iter().map(|t| (t[j] - mj).powi(2)).sum::<f64>() / n;
            c / (vi * vj).sqrt()
        };
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(emp(i, j).signum(), corr[(i, j)].signum(), "pair ({i},{j})");
            assert!((emp(i, j) - corr[(i, j)]).abs() < 0.05);
        }
    }

    #[test]
    fn sweep_preserves_invariants() {
        let (corpus, _) = gen(4, 12, 15, 10, None, 5);
        let lanes = Lanes::new(9, 0);
        let mut state = CtmState::<f64>::init(&corpus, 4, CtmHyper::default_for(4), &lanes).unwrap();
        for s in 1..20 {
            ctm_gibbs_sweep(&mut state, &corpus, &lanes, s).unwrap();
            state.check(&corpus).unwrap();
            for (c, o) in state.counts.iter().zip(&state.omega) {
                let n = crate::stick_breaking::residual_counts_slice(c);
                for (nk, ok) in n.iter().zip(o) {
                    assert_eq!(*nk == 0, *ok == 0.0);
                }
            }
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let (corpus, _) = gen(3, 8, 10, 6, None, 6);
        let run = || {
            let lanes = Lanes::new(17, 2);
            let mut s = CtmState::<f64>::init(&corpus, 3, CtmHyper::default_for(3), &lanes).unwrap();
            for i in 1..5 {
                ctm_gibbs_sweep(&mut s, &corpus, &lanes, i).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn categorical_handles_zero_weights() {
        let mut rng = lane_rng(7, 0, 0, 0);
        for _ in 0..1000 {
            let i = sample_categorical(&[0.0, 2.0, 0.0, 1.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
