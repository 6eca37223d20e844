//! Model runs behind `pgmult run`: each driver loads its data, runs the
//! sampler, records diagnostics and returns the results document.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use pgmult::ctm::{
    ctm_gibbs_sweep, ctm_svi_step, heldout_predictive_ll, lda_sweep, parse_vocab, topic_correlation, Corpus, CtmHyper,
    CtmState, CtmVarState, DocPrior, HeldoutOptions, LdaState, SviOptions, TopicSample,
};
use pgmult::gaussian::{LdsPriors, MvnParams};
use pgmult::mult_gp::{
    multgp_gibbs_sweep, multgp_predict, raw_gp_baseline, static_baseline, thin_counts, topk_eval, GpCountData, MultGpState,
    PredictOptions, SimplexSummary,
};
use pgmult::mult_lds::{
    log_multinomial_logp, raw_lds_fit_predict, sbmlds_fit, sbmlds_predictive_ll, RawLdsOptions, SbmLdsOptions, SequenceData,
};
use pgmult::rng::Lanes;
use pgmult::stick_breaking::{frequency_order, log_pi_sb};
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, GpRun, HeldoutConfig, LdsRun, SequenceSource, SviRun, TopicRun};
use crate::error::{ctx, CliError, CliResult};
use crate::output::Diagnostics;

const BATCH_LANE: u64 = 97 << 40;
const THIN_LANE: u64 = 98 << 40;
const SUMMARY_LANE: u64 = 99 << 40;

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn check_schedule(sweeps: usize, burn_in: usize, thin: usize) -> CliResult<()> {
    if sweeps < burn_in + thin.max(1) {
        return Err(CliError::Config(format!("sweeps ({sweeps}) must be at least burn_in ({burn_in}) + thin ({thin}) to keep a sample")));
    }
    Ok(())
}

/// `order[new] = old`, applied to every row.
fn permute_columns(rows: &mut [Vec<u64>], order: &[usize]) {
    for r in rows {
        *r = order.iter().map(|&o| r[o]).collect();
    }
}

/// Descending training-count order, or the identity when not requested.
fn category_order(enabled: bool, rows: &[Vec<u64>], k: usize) -> Vec<usize> {
    if !enabled {
        return (0..k).collect();
    }
    let totals: Vec<u64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    frequency_order(&totals)
}

fn retained(s: usize, burn_in: usize, thin: usize) -> bool {
    s > burn_in && (s - burn_in).is_multiple_of(thin.max(1))
}

/// Train and test corpora over a shared vocabulary, plus the words if known.
pub fn load_corpora(base: &Path, train: &Path, test: &Path, vocab: Option<&Path>) -> CliResult<(Corpus, Corpus, Option<Vec<String>>)> {
    let words = match vocab {
        Some(p) => Some(parse_vocab(&read_text(&config::input(base, p)?)?)),
        None => None,
    };
    let parse = |p: &Path| -> CliResult<Corpus> {
        Corpus::parse(&read_text(&config::input(base, p)?)?, words.as_ref().map(Vec::len)).map_err(ctx("ctm", "corpus_parse"))
    };
    let (a, b) = (parse(train)?, parse(test)?);
    let v = a.vocab_size().max(b.vocab_size());
    let widen = |c: Corpus| Corpus::new(c.docs().to_vec(), v).map_err(ctx("ctm", "corpus_parse"));
    Ok((widen(a)?, widen(b)?, words))
}

fn heldout_opts(seed: u64, h: &HeldoutConfig) -> CliResult<HeldoutOptions> {
    if !(h.split_ratio > 0.0 && h.split_ratio < 1.0) || h.draws == 0 {
        return Err(CliError::Config("heldout needs split_ratio in (0, 1) and at least one draw".into()));
    }
    Ok(HeldoutOptions { seed, split_ratio: h.split_ratio, burn_in: h.burn_in, draws: h.draws })
}

/// Per-token log-likelihood of the training tokens given `θ_d` and `β`.
pub fn train_ll_per_token(corpus: &Corpus, thetas: &[Vec<f64>], topics: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (doc, theta) in corpus.docs().iter().zip(thetas) {
        for &w in doc {
            let p: f64 = theta.iter().enumerate().map(|(t, th)| th * topics[(t, w as usize)]).sum();
            total += p.ln();
        }
    }
    total / corpus.total_tokens().max(1) as f64
}

fn top_words(topics: &DMatrix<f64>, words: Option<&[String]>, n: usize) -> Value {
    let rows: Vec<Value> = (0..topics.nrows())
        .map(|t| {
            let mut idx: Vec<usize> = (0..topics.ncols()).collect();
            idx.sort_by(|&a, &b| topics[(t, b)].total_cmp(&topics[(t, a)]).then(a.cmp(&b)));
            idx.truncate(n);
            match words {
                Some(w) => json!(idx.iter().map(|&i| w.get(i).cloned().unwrap_or_else(|| i.to_string())).collect::<Vec<_>>()),
                None => json!(idx),
            }
        })
        .collect();
    Value::Array(rows)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn metric(chains: usize, chain: usize, name: &str) -> String {
    if chains > 1 {
        format!("chain{chain}/{name}")
    } else {
        name.to_string()
    }
}

struct CtmChain {
    samples: Vec<TopicSample<f64>>,
    priors: Vec<MvnParams<f64>>,
    diag: Diagnostics,
}

fn ctm_chain(train: &Corpus, cfg: &TopicRun, seed: u64, chain: usize, start: Instant) -> CliResult<CtmChain> {
    let lanes = Lanes::new(seed, chain as u64);
    let mut hyper = CtmHyper::default_for(cfg.topics);
    hyper.alpha_beta = cfg.alpha_beta;
    let mut state = CtmState::<f64>::init(train, cfg.topics, hyper, &lanes).map_err(ctx("ctm", "init"))?;
    let mut out = CtmChain { samples: Vec::new(), priors: Vec::new(), diag: Diagnostics::new(start) };
    for s in 1..=cfg.sweeps {
        ctm_gibbs_sweep(&mut state, train, &lanes, s as u64).map_err(ctx("ctm", "ctm_gibbs_sweep"))?;
        let thetas: Vec<Vec<f64>> = (0..train.num_docs()).map(|d| state.theta(d)).collect();
        out.diag.record(s, metric(cfg.chains, chain, "train_ll_per_token"), train_ll_per_token(train, &thetas, &state.topics));
        if retained(s, cfg.burn_in, cfg.thin) {
            out.samples.push(TopicSample { topics: state.topics.clone(), doc_prior: DocPrior::StickBreaking(state.prior.clone()) });
            out.priors.push(state.prior.clone());
        }
    }
    Ok(out)
}

/// Per-chain summaries; topic labels are not comparable across chains.
#[derive(Debug, Serialize)]
struct ChainSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_cov: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    topic_correlation: Option<Vec<Vec<f64>>>,
    top_words: Value,
}

#[derive(Debug, Serialize)]
struct TopicResults {
    model: &'static str,
    topics: usize,
    vocab_size: usize,
    train_docs: usize,
    test_docs: usize,
    retained_samples: usize,
    heldout_ll_per_token: f64,
    heldout_tokens: usize,
    chains: Vec<ChainSummary>,
}

fn mean_topics(samples: &[TopicSample<f64>]) -> DMatrix<f64> {
    let mut acc = samples[0].topics.clone() * 0.0;
    for s in samples {
        acc += &s.topics;
    }
    acc / samples.len() as f64
}

pub fn run_ctm(base: &Path, cfg: &TopicRun, seed: u64, start: Instant) -> CliResult<(Value, Diagnostics)> {
    check_schedule(cfg.sweeps, cfg.burn_in, cfg.thin)?;
    if cfg.topics == 0 || cfg.chains == 0 {
        return Err(CliError::Config("topics and chains must be positive".into()));
    }
    let (train, test, words) = load_corpora(base, &cfg.train, &cfg.test, cfg.vocab.as_deref())?;
    let chains: Vec<CtmChain> = (0..cfg.chains).into_par_iter().map(|c| ctm_chain(&train, cfg, seed, c, start)).collect::<CliResult<_>>()?;
    let mut diag = Diagnostics::new(start);
    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    let k = cfg.topics - 1;
    for (c, chain) in chains.into_iter().enumerate() {
        let n = chain.priors.len() as f64;
        let mut mean = DVector::<f64>::zeros(k);
        let mut cov = DMatrix::<f64>::zeros(k, k);
        let mut corr = DMatrix::<f64>::zeros(cfg.topics, cfg.topics);
        for (i, p) in chain.priors.iter().enumerate() {
            mean += &p.mean;
            cov += &p.cov;
            let mut rng = Lanes::new(seed, c as u64).rng(i as u64, SUMMARY_LANE);
            corr += topic_correlation(p, 500, &mut rng).map_err(ctx("ctm", "topic_correlation"))?;
        }
        summaries.push(ChainSummary {
            prior_mean: Some((mean / n).iter().copied().collect()),
            prior_cov: Some(matrix_rows(&(cov / n))),
            topic_correlation: Some(matrix_rows(&(corr / n))),
            top_words: top_words(&mean_topics(&chain.samples), words.as_deref(), 10),
        });
        diag.extend(chain.diag);
        samples.extend(chain.samples);
    }
    let held = heldout_predictive_ll(&samples, &test, &heldout_opts(seed, &cfg.heldout)?).map_err(ctx("ctm", "heldout_predictive_ll"))?;
    diag.record(cfg.sweeps, "heldout_ll_per_token", held.per_token);
    let results = TopicResults {
        model: "ctm",
        topics: cfg.topics,
        vocab_size: train.vocab_size(),
        train_docs: train.num_docs(),
        test_docs: test.num_docs(),
        retained_samples: samples.len(),
        heldout_ll_per_token: held.per_token,
        heldout_tokens: held.tokens,
        chains: summaries,
    };
    Ok((serde_json::to_value(results).expect("serializable"), diag))
}

pub fn run_lda(base: &Path, cfg: &TopicRun, seed: u64, start: Instant) -> CliResult<(Value, Diagnostics)> {
    check_schedule(cfg.sweeps, cfg.burn_in, cfg.thin)?;
    if cfg.topics == 0 || cfg.chains == 0 || !(cfg.alpha_theta > 0.0 && cfg.alpha_beta > 0.0) {
        return Err(CliError::Config("lda needs positive topics, chains and concentrations".into()));
    }
    let (train, test, words) = load_corpora(base, &cfg.train, &cfg.test, cfg.vocab.as_deref())?;
    let chains: Vec<(Vec<TopicSample<f64>>, Diagnostics)> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let lanes = Lanes::new(seed, c as u64);
            let mut state = LdaState::random(&train, cfg.topics, &mut lanes.rng(0, 0));
            let mut diag = Diagnostics::new(start);
            let mut samples = Vec::new();
            for s in 1..=cfg.sweeps {
                lda_sweep(&mut state, &train, cfg.alpha_theta, cfg.alpha_beta, &mut lanes.rng(s as u64, 0));
                let topics = pgmult::ctm::topics_from_counts(&state.n_tv, cfg.alpha_beta);
                let kt = cfg.topics as f64 * cfg.alpha_theta;
                let thetas: Vec<Vec<f64>> = state
                    .n_dt
                    .iter()
                    .map(|n| {
                        let total: u64 = n.iter().sum();
                        n.iter().map(|&c| (c as f64 + cfg.alpha_theta) / (total as f64 + kt)).collect()
                    })
                    .collect();
                diag.record(s, metric(cfg.chains, c, "train_ll_per_token"), train_ll_per_token(&train, &thetas, &topics));
                if retained(s, cfg.burn_in, cfg.thin) {
                    samples.push(TopicSample { topics, doc_prior: DocPrior::Dirichlet(cfg.alpha_theta) });
                }
            }
            (samples, diag)
        })
        .collect();
    let mut diag = Diagnostics::new(start);
    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    for (s, d) in chains {
        summaries.push(ChainSummary { prior_mean: None, prior_cov: None, topic_correlation: None, top_words: top_words(&mean_topics(&s), words.as_deref(), 10) });
        samples.extend(s);
        diag.extend(d);
    }
    let held = heldout_predictive_ll(&samples, &test, &heldout_opts(seed, &cfg.heldout)?).map_err(ctx("lda", "heldout_predictive_ll"))?;
    diag.record(cfg.sweeps, "heldout_ll_per_token", held.per_token);
    let results = TopicResults {
        model: "lda",
        topics: cfg.topics,
        vocab_size: train.vocab_size(),
        train_docs: train.num_docs(),
        test_docs: test.num_docs(),
        retained_samples: samples.len(),
        heldout_ll_per_token: held.per_token,
        heldout_tokens: held.tokens,
        chains: summaries,
    };
    Ok((serde_json::to_value(results).expect("serializable"), diag))
}

pub fn run_ctm_svi(base: &Path, cfg: &SviRun, seed: u64, start: Instant) -> CliResult<(Value, Diagnostics)> {
    if cfg.topics == 0 || cfg.steps == 0 || cfg.batch_size == 0 {
        return Err(CliError::Config("ctm-svi needs positive topics, steps and batch_size".into()));
    }
    if !(cfg.kappa > 0.5 && cfg.kappa <= 1.0 && cfg.tau0 >= 0.0) {
        return Err(CliError::Config("step sizes need kappa in (0.5, 1] and tau0 >= 0".into()));
    }
    let (train, test, words) = load_corpora(base, &cfg.train, &cfg.test, cfg.vocab.as_deref())?;
    let lanes = Lanes::new(seed, 0);
    let mut hyper = CtmHyper::default_for(cfg.topics);
    hyper.alpha_beta = cfg.alpha_beta;
    let mut var = CtmVarState::<f64>::init(&train, cfg.topics, hyper, &lanes).map_err(ctx("ctm", "svi_init"))?;
    let opts = SviOptions { inner_iters: cfg.inner_iters, mc_draws: cfg.mc_draws, ..SviOptions::default() };
    let held_opts = heldout_opts(seed, &cfg.heldout)?;
    let d = train.num_docs();
    let mut diag = Diagnostics::new(start);
    let evaluate = |var: &CtmVarState<f64>| -> CliResult<f64> {
        let point = var.point_estimate().map_err(ctx("ctm", "svi_point_estimate"))?;
        Ok(heldout_predictive_ll(&[point], &test, &held_opts).map_err(ctx("ctm", "heldout_predictive_ll"))?.per_token)
    };
    for t in 1..=cfg.steps {
        let batch: Vec<usize> = if cfg.batch_size >= d {
            (0..d).collect()
        } else {
            let mut b = sample_indices(&mut lanes.rng(t as u64, BATCH_LANE), d, cfg.batch_size).into_vec();
            b.sort_unstable();
            b
        };
        let rho = (cfg.tau0 + t as f64).powf(-cfg.kappa).min(1.0);
        ctm_svi_step(&mut var, &train, &batch, rho, &opts, &lanes, t as u64).map_err(ctx("ctm", "ctm_svi_step"))?;
        diag.record(t, "step_size", rho);
        if cfg.eval_every > 0 && t % cfg.eval_every == 0 && t < cfg.steps {
            diag.record(t, "heldout_ll_per_token", evaluate(&var)?);
        }
    }
    let final_ll = evaluate(&var)?;
    diag.record(cfg.steps, "heldout_ll_per_token", final_ll);
    let point = var.point_estimate().map_err(ctx("ctm", "svi_point_estimate"))?;
    let prior = match &point.doc_prior {
        DocPrior::StickBreaking(p) => p.clone(),
        DocPrior::Dirichlet(_) => unreachable!("svi point estimates use the stick-breaking prior"),
    };
    let results = json!({
        "model": "ctm-svi",
        "topics": cfg.topics,
        "vocab_size": train.vocab_size(),
        "train_docs": d,
        "test_docs": test.num_docs(),
        "steps": cfg.steps,
        "heldout_ll_per_token": final_ll,
        "prior_mean": prior.mean.iter().copied().collect::<Vec<f64>>(),
        "prior_cov": matrix_rows(&prior.cov),
        "top_words": top_words(&point.topics, words.as_deref(), 10),
    });
    Ok((results, diag))
}

#[derive(Debug, Serialize)]
struct GpPrediction {
    input: Vec<f64>,
    #[serde(flatten)]
    summary: SimplexSummary,
    top_hits: usize,
    bottom_hits: usize,
}

fn gp_method(preds: &[SimplexSummary], test: &GpCountData<f64>, k: usize) -> CliResult<(Vec<GpPrediction>, usize, usize)> {
    let mut out = Vec::new();
    let (mut top, mut bottom) = (0, 0);
    for (m, p) in preds.iter().enumerate() {
        let (t, b) = topk_eval(&p.mean, &test.counts[m], k).map_err(|e| CliError::Config(format!("top_k: {e}")))?;
        top += t;
        bottom += b;
        out.push(GpPrediction { input: test.inputs.row(m).iter().copied().collect(), summary: p.clone(), top_hits: t, bottom_hits: b });
    }
    Ok((out, top, bottom))
}

pub fn run_multgp(base: &Path, cfg: &GpRun, seed: u64, start: Instant) -> CliResult<(Value, Diagnostics)> {
    check_schedule(cfg.sweeps, cfg.burn_in, cfg.thin)?;
    let load = |p: &Path| GpCountData::<f64>::parse_csv(&read_text(&config::input(base, p)?)?, cfg.input_dim).map_err(ctx("mult_gp", "parse_csv"));
    let mut train = load(&cfg.train)?;
    let test = load(&cfg.test)?;
    if train.categories != test.categories {
        return Err(CliError::Data("train and test CSVs name different categories".into()));
    }
    cfg.kernel.validate(cfg.input_dim).map_err(|e| CliError::Config(format!("kernel: {e}")))?;
    let order = category_order(cfg.reorder_categories, &train.counts, train.categories.len());
    let mut test = test;
    permute_columns(&mut train.counts, &order);
    permute_columns(&mut test.counts, &order);
    train.categories = order.iter().map(|&o| train.categories[o].clone()).collect();
    test.categories = train.categories.clone();
    let lanes = Lanes::new(seed, 0);
    if let Some(n) = cfg.thin_to {
        for (m, row) in train.counts.iter_mut().enumerate() {
            *row = thin_counts(row, n, &mut lanes.rng(0, THIN_LANE | m as u64));
        }
    }
    let mut state = MultGpState::init(&train, cfg.kernel.clone()).map_err(ctx("mult_gp", "init"))?;
    let mut diag = Diagnostics::new(start);
    let mut omegas = Vec::new();
    let total: u64 = train.counts.iter().flatten().sum();
    for s in 1..=cfg.sweeps {
        multgp_gibbs_sweep(&mut state, &train, &lanes, s as u64).map_err(ctx("mult_gp", "multgp_gibbs_sweep"))?;
        let ll: f64 = (0..train.num_inputs())
            .map(|m| {
                let psi: Vec<f64> = state.psi.row(m).iter().copied().collect();
                log_multinomial_logp(&train.counts[m], &log_pi_sb(&psi))
            })
            .sum();
        diag.record(s, "train_ll_per_count", ll / total.max(1) as f64);
        if retained(s, cfg.burn_in, cfg.thin) {
            omegas.push(state.omega.clone());
        }
    }
    let opts = PredictOptions { draws_per_sample: cfg.draws_per_sample, k: cfg.top_k };
    let pred = multgp_predict(&state.spec, &train, &omegas, &test.inputs, &opts, &lanes).map_err(ctx("mult_gp", "multgp_predict"))?;
    let (per_input, top, bottom) = gp_method(&pred, &test, cfg.top_k)?;
    let (_, st_top, st_bottom) = gp_method(&static_baseline(&train, &test.inputs, cfg.top_k), &test, cfg.top_k)?;
    let raw = raw_gp_baseline(&train, cfg.kernel.clone(), &test.inputs, cfg.top_k).map_err(ctx("mult_gp", "raw_gp_baseline"))?;
    let (_, raw_top, raw_bottom) = gp_method(&raw, &test, cfg.top_k)?;
    let results = json!({
        "model": "multgp",
        "categories": train.categories,
        "category_order": order,
        "train_inputs": train.num_inputs(),
        "retained_samples": omegas.len(),
        "k": cfg.top_k,
        "predictions": per_input,
        "hits": {
            "multgp": {"top": top, "bottom": bottom},
            "static": {"top": st_top, "bottom": st_bottom},
            "raw_gp": {"top": raw_top, "bottom": raw_bottom},
        },
    });
    Ok((results, diag))
}

/// Loads a sequence; token sources are concatenated across records.
pub fn load_sequence(base: &Path, src: &SequenceSource) -> CliResult<SequenceData> {
    match src {
        SequenceSource::Tokens { path, vocab } => {
            let k = parse_vocab(&read_text(&config::input(base, vocab)?)?).len();
            let corpus = Corpus::parse(&read_text(&config::input(base, path)?)?, Some(k)).map_err(ctx("mult_lds", "load_tokens"))?;
            let tokens: Vec<u32> = corpus.docs().concat();
            SequenceData::from_tokens(&tokens, k).map_err(ctx("mult_lds", "load_tokens"))
        }
        SequenceSource::Csv { path } => SequenceData::parse_csv(&read_text(&config::input(base, path)?)?).map_err(ctx("mult_lds", "parse_csv")),
    }
}

pub fn run_lds(base: &Path, cfg: &LdsRun, seed: u64, with_sbm: bool, start: Instant) -> CliResult<(Value, Diagnostics)> {
    check_schedule(cfg.sweeps, cfg.burn_in, cfg.thin)?;
    if cfg.state_dim == 0 || cfg.rollouts == 0 {
        return Err(CliError::Config("state_dim and rollouts must be positive".into()));
    }
    let data = load_sequence(base, &cfg.data)?;
    let (mut train, mut future) = data.split_at(cfg.holdout.train_len(data.len())?).map_err(ctx("mult_lds", "split"))?;
    let order = category_order(cfg.reorder_categories, &train.counts, train.num_categories());
    permute_columns(&mut train.counts, &order);
    permute_columns(&mut future.counts, &order);
    let freq = train.mean_frequencies();
    let priors = LdsPriors::<f64>::weak(cfg.state_dim);
    let lanes = Lanes::new(seed, 0);
    let mut diag = Diagnostics::new(start);
    let mut methods = serde_json::Map::new();
    if with_sbm {
        let opts = SbmLdsOptions { state_dim: cfg.state_dim, sweeps: cfg.sweeps, burn_in: cfg.burn_in, thin: cfg.thin };
        let total = train.total_counts().max(1) as f64;
        let mut rows = Vec::new();
        let samples = sbmlds_fit(&train, &priors, &opts, &lanes, |s, state| {
            let ll: f64 = (0..train.len()).map(|t| log_multinomial_logp(&train.counts[t], &log_pi_sb(&state.psi(t)))).sum();
            rows.push((s, ll / total));
        })
        .map_err(ctx("mult_lds", "sbmlds_gibbs_sweep"))?;
        for (s, v) in rows {
            diag.record(s, "train_ll_per_count", v);
        }
        let v = sbmlds_predictive_ll(&samples, &future, &freq, cfg.rollouts, &lanes).map_err(ctx("mult_lds", "sbmlds_predictive_ll"))?;
        diag.record(cfg.sweeps, "sbmlds_normalized_ll", v);
        methods.insert("sbmlds".into(), json!({"normalized_ll": v, "retained_samples": samples.len()}));
    }
    if !with_sbm || cfg.raw_baseline {
        let opts = RawLdsOptions { state_dim: cfg.state_dim, sweeps: cfg.sweeps, burn_in: cfg.burn_in, thin: cfg.thin, ..RawLdsOptions::default() };
        let v = raw_lds_fit_predict(&train, &future, &priors, &opts, &Lanes::new(seed, 1)).map_err(ctx("mult_lds", "raw_lds_fit_predict"))?;
        diag.record(cfg.sweeps, "rawlds_normalized_ll", v);
        methods.insert("rawlds".into(), json!({"normalized_ll": v}));
    }
    let results = json!({
        "model": if with_sbm { "sbmlds" } else { "rawlds" },
        "categories": train.num_categories(),
        "category_order": order,
        "train_steps": train.len(),
        "test_steps": future.len(),
        "test_counts": future.total_counts(),
        "state_dim": cfg.state_dim,
        "normalized_predictive_ll": methods,
    });
    Ok((results, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reordering_sorts_by_training_count() {
        let mut rows = vec![vec![1, 5, 0], vec![0, 3, 4]];
        let order = category_order(true, &rows, 3);
        assert_eq!(order, vec![1, 2, 0]);
        permute_columns(&mut rows, &order);
        assert_eq!(rows, vec![vec![5, 0, 1], vec![3, 4, 0]]);
        assert_eq!(category_order(false, &rows, 3), vec![0, 1, 2]);
    }
}
