use rand::Rng;

use super::corpus::Corpus;
use super::gibbs::sample_categorical;
use super::heldout::{topics_from_counts, DocPrior, TopicSample};
use crate::error::{Error, Result};
use crate::rng::Lanes;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaOptions {
    pub topics: usize,
    pub alpha_theta: f64,
    pub alpha_beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

/// Collapsed Gibbs state: assignments plus the count tables they imply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaState {
    pub z: Vec<Vec<u32>>,
    pub n_dt: Vec<Vec<u64>>,
    pub n_tv: Vec<Vec<u64>>,
    pub n_t: Vec<u64>,
}

impl LdaState {
    pub fn from_assignments(corpus: &Corpus, topics: usize, z: Vec<Vec<u32>>) -> Self {
        let mut n_dt = vec![vec![0u64; topics]; corpus.num_docs()];
        let mut n_tv = vec![vec![0u64; corpus.vocab_size()]; topics];
        let mut n_t = vec![0u64; topics];
        for (d, (doc, zd)) in corpus.docs().iter().zip(&z).enumerate() {
            for (&w, &t) in doc.iter().zip(zd) {
                n_dt[d][t as usize] += 1;
                n_tv[t as usize][w as usize] += 1;
                n_t[t as usize] += 1;
            }
        }
        Self { z, n_dt, n_tv, n_t }
    }

    pub fn random<R: Rng + ?Sized>(corpus: &Corpus, topics: usize, rng: &mut R) -> Self {
        let z = corpus.docs().iter().map(|doc| doc.iter().map(|_| rng.random_range(0..topics as u32)).collect()).collect();
        Self::from_assignments(corpus, topics, z)
    }
}

/// One systematic-scan sweep of `z_{n,d} | z_{-(n,d)}, w` with `θ` and `β` integrated out.
pub fn lda_sweep<R: Rng + ?Sized>(state: &mut LdaState, corpus: &Corpus, alpha_theta: f64, alpha_beta: f64, rng: &mut R) {
    let k = state.n_t.len();
    let vb = corpus.vocab_size() as f64 * alpha_beta;
    let mut p = vec![0.0; k];
    for (d, doc) in corpus.docs().iter().enumerate() {
        for (n, &w) in doc.iter().enumerate() {
            let w = w as usize;
            let old = state.z[d][n] as usize;
            state.n_dt[d][old] -= 1;
            state.n_tv[old][w] -= 1;
            state.n_t[old] -= 1;
            for t in 0..k {
                p[t] = (state.n_dt[d][t] as f64 + alpha_theta) * (state.n_tv[t][w] as f64 + alpha_beta)
                    / (state.n_t[t] as f64 + vb);
            }
            let t = sample_categorical(&p, rng);
            state.z[d][n] = t as u32;
            state.n_dt[d][t] += 1;
            state.n_tv[t][w] += 1;
            state.n_t[t] += 1;
        }
    }
}

/// Runs collapsed Gibbs and returns the retained samples as topic point
/// estimates with a symmetric Dirichlet document prior.
pub fn lda_collapsed_gibbs<T: Real>(corpus: &Corpus, opts: &LdaOptions, lanes: &Lanes) -> Result<Vec<TopicSample<T>>> {
    if opts.topics == 0 {
        return Err(Error::domain("need at least one topic"));
    }
    if !(opts.alpha_theta > 0.0 && opts.alpha_beta > 0.0) {
        return Err(Error::domain("LDA concentrations must be positive"));
    }
    if opts.sweeps <= opts.burn_in {
        return Err(Error::domain("sweeps must exceed burn-in"));
    }
    let mut state = LdaState::random(corpus, opts.topics, &mut lanes.rng(0, 0));
    let thin = opts.thin.max(1);
    let mut out = Vec::new();
    for s in 1..=opts.sweeps {
        lda_sweep(&mut state, corpus, opts.alpha_theta, opts.alpha_beta, &mut lanes.rng(s as u64, 0));
        if s > opts.burn_in && (s - opts.burn_in).is_multiple_of(thin) {
            out.push(TopicSample {
                topics: topics_from_counts(&state.n_tv, T::from_f64(opts.alpha_beta).expect("finite")),
                doc_prior: DocPrior::Dirichlet(T::from_f64(opts.alpha_theta).expect("finite")),
            });
        }
    }
    Ok(out)
}
