use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::corpus::Corpus;
use super::gibbs::{information_form, resample_assignments, resample_psi, sample_categorical};
use crate::augmentation::sample_aux_slice;
use crate::error::{Error, Result};
use crate::gaussian::MvnParams;
use crate::rng::lane_rng;
use crate::scalar::{lit, Real};
use crate::stick_breaking::pi_sb_vec;

/// How a model generates per-document topic proportions.
#[derive(Debug, Clone, PartialEq)]
pub enum DocPrior<T: Real> {
    /// `θ = π_SB(ψ)` with `ψ ~ N(μ, Σ)`.
    StickBreaking(MvnParams<T>),
    /// `θ ~ Dirichlet(alpha · 1)`.
    Dirichlet(T),
}

/// One posterior draw of the global variables of a topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSample<T: Real> {
    /// `T × V`.
    pub topics: DMatrix<T>,
    pub doc_prior: DocPrior<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldoutOptions {
    /// Seed of the observed/held-out split and of the fold-in chains.
    pub seed: u64,
    /// Fraction of each document's tokens treated as observed.
    pub split_ratio: f64,
    pub burn_in: usize,
    /// Fold-in draws averaged per posterior sample.
    pub draws: usize,
}

impl Default for HeldoutOptions {
    fn default() -> Self {
        Self { seed: 0x4E1D, split_ratio: 0.5, burn_in: 20, draws: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldoutResult {
    pub per_token: f64,
    pub tokens: usize,
}

/// Randomly splits a document into observed and held-out tokens.
pub fn split_document(doc: &[u32], ratio: f64, seed: u64, d: usize) -> (Vec<u32>, Vec<u32>) {
    let mut rng = lane_rng(seed, 0, 0, d as u64);
    let mut idx: Vec<usize> = (0..doc.len()).collect();
    idx.shuffle(&mut rng);
    let n_obs = (doc.len() as f64 * ratio).round() as usize;
    let mut obs: Vec<usize> = idx[..n_obs].to_vec();
    let mut held: Vec<usize> = idx[n_obs..].to_vec();
    obs.sort_unstable();
    held.sort_unstable();
    (obs.into_iter().map(|i| doc[i]).collect(), held.into_iter().map(|i| doc[i]).collect())
}

/// Averaged `θ` draws for one document after folding in its observed tokens
/// with the topics held fixed.
fn fold_in<T: Real>(
    sample: &TopicSample<T>,
    observed: &[u32],
    opts: &HeldoutOptions,
    chain: u64,
    d: usize,
) -> Result<Vec<f64>> {
    let k = sample.topics.nrows();
    let mut rng = lane_rng(opts.seed, chain + 1, 0, d as u64);
    let mut z = vec![0u32; observed.len()];
    let mut counts = vec![0u64; k];
    let mut theta_sum = vec![0.0; k];
    match &sample.doc_prior {
        DocPrior::StickBreaking(prior) => {
            let (prec, lin) = information_form(prior)?;
            let mut psi: Vec<T> = prior.mean.iter().copied().collect();
            for it in 0..opts.burn_in + opts.draws {
                let theta = pi_sb_vec(&psi);
                resample_assignments(observed, &mut z, &mut counts, &theta, &sample.topics, &mut rng);
                if k > 1 {
                    let omega = sample_aux_slice(&counts, &psi, &mut rng);
                    psi = resample_psi(&prec, &lin, &omega, &counts, &mut rng)?;
                }
                if it >= opts.burn_in {
                    for (s, t) in theta_sum.iter_mut().zip(pi_sb_vec(&psi)) {
                        *s += t.as_f64();
                    }
                }
            }
        }
        DocPrior::Dirichlet(alpha) => {
            let alpha = alpha.as_f64();
            let n_obs = observed.len() as f64;
            let mut w = vec![0.0; k];
            let uniform = vec![1.0; k];
            for n in 0..observed.len() {
                let t = sample_categorical(&uniform, &mut rng);
                z[n] = t as u32;
                counts[t] += 1;
            }
            for it in 0..opts.burn_in + opts.draws {
                for (n, &word) in observed.iter().enumerate() {
                    counts[z[n] as usize] -= 1;
                    for t in 0..k {
                        w[t] = (counts[t] as f64 + alpha) * sample.topics[(t, word as usize)].as_f64();
                    }
                    let t = sample_categorical(&w, &mut rng);
                    z[n] = t as u32;
                    counts[t] += 1;
                }
                if it >= opts.burn_in {
                    for t in 0..k {
                        theta_sum[t] += (counts[t] as f64 + alpha) / (n_obs + alpha * k as f64);
                    }
                }
            }
        }
    }
    Ok(theta_sum.into_iter().map(|s| s / opts.draws as f64).collect())
}

/// Per-token log predictive probability of held-out halves of `test` documents.
///
/// For each document the observed half is folded in under every posterior
/// sample; predictive word probabilities `Σ_t θ_t β_{t,w}` are averaged over
/// fold-in draws and posterior samples before taking logs.
pub fn heldout_predictive_ll<T: Real>(samples: &[TopicSample<T>], test: &Corpus, opts: &HeldoutOptions) -> Result<HeldoutResult> {
    if samples.is_empty() {
        return Err(Error::domain("held-out evaluation needs at least one posterior sample"));
    }
    if opts.draws == 0 {
        return Err(Error::domain("held-out evaluation needs at least one fold-in draw"));
    }
    for s in samples {
        if s.topics.ncols() != test.vocab_size() {
            return Err(Error::Data("topic width does not match the test vocabulary".into()));
        }
    }
    let per_doc: Result<Vec<(f64, usize)>> = (0..test.num_docs())
        .into_par_iter()
        .map(|d| {
            let (observed, held) = split_document(test.doc(d), opts.split_ratio, opts.seed, d);
            if held.is_empty() {
                return Ok((0.0, 0));
            }
            let mut probs = vec![0.0; held.len()];
            for (si, sample) in samples.iter().enumerate() {
                let theta = fold_in(sample, &observed, opts, si as u64, d)?;
                for (p, &w) in probs.iter_mut().zip(&held) {
                    *p += theta.iter().enumerate().map(|(t, th)| th * sample.topics[(t, w as usize)].as_f64()).sum::<f64>();
                }
            }
            let n = samples.len() as f64;
            Ok((probs.iter().map(|p| (p / n).ln()).sum(), held.len()))
        })
        .collect();
    let per_doc = per_doc?;
    let tokens: usize = per_doc.iter().map(|x| x.1).sum();
    if tokens == 0 {
        return Err(Error::Data("test documents contain no held-out tokens".into()));
    }
    let total: f64 = per_doc.iter().map(|x| x.0).sum();
    Ok(HeldoutResult { per_token: total / tokens as f64, tokens })
}

/// Point estimate of the topic matrix from topic-word counts.
pub fn topics_from_counts<T: Real>(n: &[Vec<u64>], alpha_beta: T) -> DMatrix<T> {
    let v = n.first().map_or(0, Vec::len);
    DMatrix::from_fn(n.len(), v, |t, w| {
        let total: u64 = n[t].iter().sum();
        (lit::<T>(n[t][w] as f64) + alpha_beta) / (lit::<T>(total as f64) + alpha_beta * lit(v as f64))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_topics_give_log_inverse_vocab() {
        let test = Corpus::new(vec![vec![0, 1, 2, 3, 4, 5], vec![7, 7, 7, 1]], 8).unwrap();
        let samples = vec![
            TopicSample { topics: DMatrix::from_element(3, 8, 0.125), doc_prior: DocPrior::StickBreaking(MvnParams::standard(2)) },
            TopicSample { topics: DMatrix::from_element(3, 8, 0.125), doc_prior: DocPrior::Dirichlet(0.5) },
        ];
        let r = heldout_predictive_ll(&samples, &test, &HeldoutOptions::default()).unwrap();
        assert!((r.per_token - 0.125f64.ln()).abs() < 1e-12);
        assert_eq!(r.tokens, 5);
    }

    #[test]
    fn split_is_deterministic_and_complete() {
        let doc: Vec<u32> = (0..11).collect();
        let (a, b) = split_document(&doc, 0.5, 3, 0);
        assert_eq!(split_document(&doc, 0.5, 3, 0), (a.clone(), b.clone()));
        assert_eq!(a.len() + b.len(), 11);
        let mut all = [a, b].concat();
        all.sort();
        assert_eq!(all, doc);
    }

    #[test]
    fn single_topic_matches_unigram_entropy() {
        use crate::ctm::{ctm_gibbs_sweep, CtmHyper, CtmState};
        use crate::rng::Lanes;
        // every document has the exact frequencies (1/2, 1/4, 1/8, 1/8)
        let doc = vec![0, 0, 0, 0, 1, 1, 2, 3];
        let train = Corpus::new(vec![doc.clone(); 200], 4).unwrap();
        let test = Corpus::new(vec![doc; 400], 4).unwrap();
        let lanes = Lanes::new(5, 0);
        let mut state = CtmState::<f64>::init(&train, 1, CtmHyper::default_for(1), &lanes).unwrap();
        let mut samples = Vec::new();
        for s in 1..=10 {
            ctm_gibbs_sweep(&mut state, &train, &lanes, s).unwrap();
            samples.push(TopicSample { topics: state.topics.clone(), doc_prior: DocPrior::StickBreaking(state.prior.clone()) });
        }
        let r = heldout_predictive_ll(&samples, &test, &HeldoutOptions::default()).unwrap();
        let entropy: f64 = -[0.5_f64, 0.25, 0.125, 0.125].iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((r.per_token + entropy).abs() < 0.05, "{} vs {}", r.per_token, -entropy);
    }

    #[test]
    fn empty_documents_are_skipped() {
        let test = Corpus::new(vec![vec![], vec![1, 0]], 2).unwrap();
        let s = TopicSample { topics: DMatrix::from_element(1, 2, 0.5), doc_prior: DocPrior::Dirichlet(1.0) };
        let r = heldout_predictive_ll(&[s], &test, &HeldoutOptions::default()).unwrap();
        assert_eq!(r.tokens, 1);
    }
}
