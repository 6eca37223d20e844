use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::corpus::Corpus;
use super::gibbs::{lane, CtmHyper};
use super::heldout::{DocPrior, TopicSample};
use crate::error::{Error, Result};
use crate::gaussian::mvn::{cholesky_jittered, mvn_sample};
use crate::gaussian::{MvnParams, NiwParams};
use crate::polya_gamma::tanh_half_over;
use crate::rng::Lanes;
use crate::scalar::{lit, Real};
use crate::stick_breaking::log_pi_sb;

const BLOCK_LOCAL: u64 = 11;
const BLOCK_SVI_INIT: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SviOptions {
    /// Local coordinate-ascent rounds per document per step.
    pub inner_iters: usize,
    /// Monte Carlo draws used for `E[log θ]`.
    pub mc_draws: usize,
    /// Gauss-Hermite nodes for `E[tanh(ψ/2)/ψ]`.
    pub quad_nodes: usize,
}

impl Default for SviOptions {
    fn default() -> Self {
        Self { inner_iters: 5, mc_draws: 20, quad_nodes: 32 }
    }
}

/// Global variational factors: `q(β_t) = Dir(λ_t)` and an NIW `q(μ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmVarState<T: Real> {
    /// `T × V` Dirichlet parameters.
    pub lambda: DMatrix<T>,
    pub niw: NiwParams<T>,
    pub hyper: CtmHyper<T>,
}

/// Expected global sufficient statistics, already scaled to corpus size.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats<T: Real> {
    pub topic_word: DMatrix<T>,
    pub n: T,
    pub sum_psi: DVector<T>,
    pub sum_outer: DMatrix<T>,
}

impl<T: Real> SuffStats<T> {
    fn zeros(nt: usize, v: usize) -> Self {
        let dim = nt - 1;
        Self { topic_word: DMatrix::zeros(nt, v), n: T::zero(), sum_psi: DVector::zeros(dim), sum_outer: DMatrix::zeros(dim, dim) }
    }

    fn add(&mut self, other: &Self) {
        self.topic_word += &other.topic_word;
        self.n += other.n;
        self.sum_psi += &other.sum_psi;
        self.sum_outer += &other.sum_outer;
    }

    fn scale(&mut self, s: T) {
        self.topic_word *= s;
        self.n *= s;
        self.sum_psi *= s;
        self.sum_outer *= s;
    }
}

/// Gaussian `q(ψ_d)` and the expectations that define the other local factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub expected_counts: Vec<T>,
    pub expected_omega: Vec<T>,
}

/// Probabilists' Gauss-Hermite rule (weight `exp(-x²/2)/√(2π)`), by Golub-Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::<f64>::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E[ω_t] = ½ E[N_t] E[tanh(ψ_t/2)/ψ_t]` for `ψ_t ~ N(mean_t, var_t)` and
/// `E[N_t] = N - Σ_{j<t} E[c_j]`.
pub fn expected_omega<T: Real>(expected_counts: &[T], mean: &[T], var: &[T], nodes: &(Vec<f64>, Vec<f64>)) -> Vec<T> {
    let total = expected_counts.iter().fold(T::zero(), |a, &b| a + b);
    let mut rem = total;
    let mut out = Vec::with_capacity(mean.len());
    for t in 0..mean.len() {
        let (m, sd) = (mean[t].as_f64(), var[t].as_f64().max(0.0).sqrt());
        // tanh_half_over(c) = tanh(c/2)/(2c), so ½·E[tanh(ψ/2)/ψ] is its expectation
        let e: f64 = nodes.0.iter().zip(&nodes.1).map(|(&x, &w)| w * tanh_half_over(m + sd * x)).sum();
        out.push(rem.max(T::zero()) * lit(e));
        rem -= expected_counts[t];
    }
    out
}

fn expected_log_topics<T: Real>(lambda: &DMatrix<T>) -> DMatrix<T> {
    let mut out = lambda.map(|l| l.digamma());
    for t in 0..lambda.nrows() {
        let s = lambda.row(t).iter().fold(T::zero(), |a, &b| a + b).digamma();
        for v in 0..lambda.ncols() {
            out[(t, v)] -= s;
        }
    }
    out
}

impl<T: Real> CtmVarState<T> {
    /// Random `λ` near the prior with a small per-entry perturbation, NIW at the prior.
    pub fn init(corpus: &Corpus, num_topics: usize, hyper: CtmHyper<T>, lanes: &Lanes) -> Result<Self> {
        if num_topics == 0 {
            return Err(Error::domain("need at least one topic"));
        }
        if hyper.niw.dim() + 1 != num_topics {
            return Err(Error::Data("NIW dimension must be T - 1".into()));
        }
        hyper.niw.validate()?;
        let mut rng = lanes.rng(0, lane(BLOCK_SVI_INIT, 0));
        let scale = corpus.total_tokens().max(1) as f64 / (num_topics * corpus.vocab_size()) as f64;
        let lambda =
            DMatrix::from_fn(num_topics, corpus.vocab_size(), |_, _| hyper.alpha_beta + T::exp1(&mut rng) * lit(scale));
        Ok(Self { lambda, niw: hyper.niw.clone(), hyper })
    }

    pub fn num_topics(&self) -> usize {
        self.lambda.nrows()
    }

    /// `E[β]` and the document prior at `(E[μ], E[Σ])`.
    pub fn point_estimate(&self) -> Result<TopicSample<T>> {
        let mut topics = self.lambda.clone();
        for mut row in topics.row_iter_mut() {
            let s = row.iter().fold(T::zero(), |a, &b| a + b);
            row /= s;
        }
        let cov = self
            .niw
            .expected_covariance()
            .ok_or_else(|| Error::domain("q(Σ) has no finite mean yet (nu <= dim + 1)"))?;
        Ok(TopicSample { topics, doc_prior: DocPrior::StickBreaking(MvnParams::new(self.niw.mean0.clone(), cov)?) })
    }

    /// Fits the local factors of one document with the global factors fixed.
    pub fn fit_local(&self, doc: &[u32], opts: &SviOptions, elog_beta: &DMatrix<T>, lanes: &Lanes, step: u64, d: usize) -> Result<(LocalFit<T>, DMatrix<T>)> {
        let nt = self.num_topics();
        let dim = nt - 1;
        let mut rng = lanes.rng(step, lane(BLOCK_LOCAL, d));
        let nodes = gauss_hermite(opts.quad_nodes);
        let prec0 = if dim == 0 { DMatrix::zeros(0, 0) } else { self.niw.expected_precision()? };
        let lin0 = &prec0 * &self.niw.mean0;
        let mut mean = self.niw.mean0.clone();
        let mut cov = if dim == 0 { DMatrix::zeros(0, 0) } else { cholesky_jittered(&prec0, "svi_local")?.inverse() };
        let mut phi = DMatrix::zeros(doc.len(), nt);
        let mut e_counts = vec![T::zero(); nt];
        let mut e_omega = vec![T::zero(); dim];
        for _ in 0..opts.inner_iters.max(1) {
            // E[log θ] by Monte Carlo through the stick-breaking map
            let mut elog_theta = vec![T::zero(); nt];
            let draws = if dim == 0 { 1 } else { opts.mc_draws.max(1) };
            let q = MvnParams { mean: mean.clone(), cov: cov.clone() };
            for _ in 0..draws {
                let psi: Vec<T> = if dim == 0 { Vec::new() } else { mvn_sample(&q, &mut rng)?.iter().copied().collect() };
                for (e, l) in elog_theta.iter_mut().zip(log_pi_sb(&psi)) {
                    *e += l / lit(draws as f64);
                }
            }
            e_counts.iter_mut().for_each(|c| *c = T::zero());
            let mut logits = vec![T::zero(); nt];
            for (n, &w) in doc.iter().enumerate() {
                for t in 0..nt {
                    logits[t] = elog_theta[t] + elog_beta[(t, w as usize)];
                }
                let lse = crate::scalar::log_sum_exp(&logits);
                for t in 0..nt {
                    let p = (logits[t] - lse).exp();
                    phi[(n, t)] = p;
                    e_counts[t] += p;
                }
            }
            if dim == 0 {
                break;
            }
            let var: Vec<T> = (0..dim).map(|i| cov[(i, i)]).collect();
            e_omega = expected_omega(&e_counts, mean.as_slice(), &var, &nodes);
            let mut rem = e_counts.iter().fold(T::zero(), |a, &b| a + b);
            let mut e_kappa = DVector::zeros(dim);
            for t in 0..dim {
                e_kappa[t] = e_counts[t] - rem * lit(0.5);
                rem -= e_counts[t];
            }
            let mut prec = prec0.clone();
            for t in 0..dim {
                prec[(t, t)] += e_omega[t];
            }
            let ch = cholesky_jittered(&prec, "svi_local")?;
            mean = ch.solve(&(&lin0 + e_kappa));
            cov = ch.inverse();
        }
        let mut topic_word = DMatrix::zeros(nt, self.lambda.ncols());
        for (n, &w) in doc.iter().enumerate() {
            for t in 0..nt {
                topic_word[(t, w as usize)] += phi[(n, t)];
            }
        }
        Ok((LocalFit { mean, cov, expected_counts: e_counts, expected_omega: e_omega }, topic_word))
    }

    /// Expected sufficient statistics of a minibatch scaled by `D / |batch|`.
    pub fn minibatch_stats(&self, corpus: &Corpus, batch: &[usize], opts: &SviOptions, lanes: &Lanes, step: u64) -> Result<SuffStats<T>> {
        if batch.is_empty() {
            return Err(Error::domain("minibatch is empty"));
        }
        let nt = self.num_topics();
        let elog_beta = expected_log_topics(&self.lambda);
        let per_doc: Result<Vec<SuffStats<T>>> = batch
            .par_iter()
            .map(|&d| {
                let (fit, topic_word) = self.fit_local(corpus.doc(d), opts, &elog_beta, lanes, step, d)?;
                let outer = &fit.cov + &fit.mean * fit.mean.transpose();
                Ok(SuffStats { topic_word, n: T::one(), sum_psi: fit.mean, sum_outer: outer })
            })
            .collect();
        let mut stats = SuffStats::zeros(nt, corpus.vocab_size());
        for s in per_doc? {
            stats.add(&s);
        }
        stats.scale(lit(corpus.num_docs() as f64 / batch.len() as f64));
        Ok(stats)
    }

    /// Moves the global factors a fraction `step_size` of the way to the
    /// optimum implied by `stats`, in natural parameters.
    pub fn apply(&mut self, stats: &SuffStats<T>, step_size: T) -> Result<()> {
        if !(step_size > T::zero() && step_size <= T::one()) {
            return Err(Error::domain("step size must lie in (0, 1]"));
        }
        let keep = T::one() - step_size;
        let target = stats.topic_word.map(|c| c + self.hyper.alpha_beta);
        self.lambda = &self.lambda * keep + target * step_size;
        if self.num_topics() > 1 {
            let hat = self.hyper.niw.posterior_from_stats(stats.n, &stats.sum_psi, &stats.sum_outer);
            let cur = &self.niw;
            let kappa = cur.kappa0 * keep + hat.kappa0 * step_size;
            let km = &cur.mean0 * (cur.kappa0 * keep) + &hat.mean0 * (hat.kappa0 * step_size);
            let outer = (&cur.psi0 + &cur.mean0 * cur.mean0.transpose() * cur.kappa0) * keep
                + (&hat.psi0 + &hat.mean0 * hat.mean0.transpose() * hat.kappa0) * step_size;
            let mean = km / kappa;
            let mut psi = outer - &mean * mean.transpose() * kappa;
            crate::gaussian::mvn::symmetrize(&mut psi);
            self.niw = NiwParams { mean0: mean, kappa0: kappa, nu0: cur.nu0 * keep + hat.nu0 * step_size, psi0: psi };
        }
        Ok(())
    }
}

/// One stochastic variational step on `batch`.
pub fn ctm_svi_step<T: Real>(
    var: &mut CtmVarState<T>,
    corpus: &Corpus,
    batch: &[usize],
    step_size: T,
    opts: &SviOptions,
    lanes: &Lanes,
    step: u64,
) -> Result<()> {
    let stats = var.minibatch_stats(corpus, batch, opts, lanes, step)?;
    var.apply(&stats, step_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Corpus {
        Corpus::new(vec![vec![0, 1, 1, 2], vec![3, 3, 2], vec![0, 4, 4, 4, 1]], 5).unwrap()
    }

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        let (x, w) = gauss_hermite(20);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn single_topic_full_batch_is_exact_posterior() {
        let corpus = tiny();
        let lanes = Lanes::new(1, 0);
        let mut var = CtmVarState::<f64>::init(&corpus, 1, CtmHyper::default_for(1), &lanes).unwrap();
        ctm_svi_step(&mut var, &corpus, &[0, 1, 2], 1.0, &SviOptions::default(), &lanes, 1).unwrap();
        let counts = [2.0, 3.0, 2.0, 2.0, 3.0];
        for (v, c) in counts.iter().enumerate() {
            assert!((var.lambda[(0, v)] - (0.1 + c)).abs() < 1e-12);
        }
    }

    #[test]
    fn minibatch_statistics_are_unbiased() {
        let corpus = tiny();
        let lanes = Lanes::new(2, 0);
        let var = CtmVarState::<f64>::init(&corpus, 3, CtmHyper::default_for(3), &lanes).unwrap();
        let opts = SviOptions::default();
        let full = var.minibatch_stats(&corpus, &[0, 1, 2], &opts, &lanes, 7).unwrap();
        let mut avg = SuffStats::zeros(3, 5);
        for d in 0..3 {
            avg.add(&var.minibatch_stats(&corpus, &[d], &opts, &lanes, 7).unwrap());
        }
        avg.scale(1.0 / 3.0);
        assert!((full.topic_word - avg.topic_word).amax() < 1e-12);
        assert!((full.n - avg.n).abs() < 1e-12);
        assert!((full.sum_psi - avg.sum_psi).amax() < 1e-12);
        assert!((full.sum_outer - avg.sum_outer).amax() < 1e-12);
    }

    #[test]
    fn expected_omega_matches_enumeration_and_quadrature() {
        // q(z) over three tokens with fixed responsibilities, T = 3
        let phi = [[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.3, 0.3, 0.4]];
        let e_counts: Vec<f64> = (0..3).map(|t| phi.iter().map(|p| p[t]).sum()).collect();
        let mean = [0.4, -1.1];
        let var = [0.7, 2.5];
        let got = expected_omega(&e_counts, &mean, &var, &gauss_hermite(32));
        // E[N_t] by enumerating every assignment
        let mut e_n = [0.0; 2];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let p = phi[0][a] * phi[1][b] * phi[2][c];
                    let z = [a, b, c];
                    e_n[0] += p * 3.0;
                    e_n[1] += p * z.iter().filter(|&&t| t != 0).count() as f64;
                }
            }
        }
        for t in 0..2 {
            // trapezoid rule on a wide grid for E[tanh(ψ/2)/ψ]
            let sd: f64 = var[t].sqrt();
            let h = 1e-3;
            let mut e = 0.0;
            let mut x = mean[t] - 12.0 * sd;
            while x <= mean[t] + 12.0 * sd {
                let dens = (-0.5 * ((x - mean[t]) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                let f = if x.abs() < 1e-12 { 0.5 } else { (x / 2.0).tanh() / x };
                e += dens * f * h;
                x += h;
            }
            let want = 0.5 * e_n[t] * e;
            assert!(((got[t] - want) / want).abs() < 1e-3, "t={t}: {} vs {want}", got[t]);
        }
    }

    #[test]
    fn apply_rejects_bad_step() {
        let corpus = tiny();
        let lanes = Lanes::new(3, 0);
        let mut var = CtmVarState::<f64>::init(&corpus, 2, CtmHyper::default_for(2), &lanes).unwrap();
        let stats = var.minibatch_stats(&corpus, &[0], &SviOptions::default(), &lanes, 1).unwrap();
        assert!(var.apply(&stats, 0.0).is_err());
        assert!(var.apply(&stats, 1.5).is_err());
        assert!(var.minibatch_stats(&corpus, &[], &SviOptions::default(), &lanes, 1).is_err());
    }
}
