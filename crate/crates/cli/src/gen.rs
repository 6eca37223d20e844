//! Synthetic and tokenized datasets behind `pgmult gen`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use pgmult::ctm::{build_vocab, ctm_generate, encode_words, tokenize_words, Corpus, CtmGenSpec, CtmHyper};
use pgmult::gaussian::{GpSpec, LdsParams, MvnParams};
use pgmult::mult_gp::multgp_generate;
use pgmult::mult_lds::sbmlds_generate;
use pgmult::rng::Lanes;
use pgmult::Real;
use serde_json::json;

use crate::config::{self, CtmGen, GenKind, GpGen, LdsGen, TextGen};
use crate::error::{ctx, CliError, CliResult};
use crate::output::{to_json, write_file};

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Writes the dataset for `kind` into `dir` and returns the files written.
pub fn generate(kind: &GenKind, base: &Path, dir: &Path, seed: u64) -> CliResult<Vec<PathBuf>> {
    let lanes = Lanes::new(seed, 0);
    match kind {
        GenKind::Ctm(c) => gen_ctm(c, dir, &lanes),
        GenKind::Multgp(g) => gen_multgp(g, dir, &lanes),
        GenKind::Sbmlds(l) => gen_sbmlds(l, dir, &lanes),
        GenKind::Text(t) => gen_text(t, base, dir),
    }
}

fn gen_ctm(c: &CtmGen, dir: &Path, lanes: &Lanes) -> CliResult<Vec<PathBuf>> {
    if c.topics == 0 || c.vocab_size == 0 || c.docs == 0 || c.test_docs == 0 {
        return Err(CliError::Config("ctm generation needs positive topics, vocab_size, docs and test_docs".into()));
    }
    let k = c.topics - 1;
    let prior = match (&c.prior_mean, &c.prior_cov) {
        (Some(m), Some(s)) => {
            if m.len() != k || s.len() != k || s.iter().any(|r| r.len() != k) {
                return Err(CliError::Config(format!("prior_mean and prior_cov must have dimension topics - 1 = {k}")));
            }
            let cov = DMatrix::from_fn(k, k, |i, j| s[i][j]);
            Some(MvnParams::new(DVector::from_vec(m.clone()), cov).map_err(|e| CliError::Config(format!("prior: {e}")))?)
        }
        (None, None) => None,
        _ => return Err(CliError::Config("give both prior_mean and prior_cov or neither".into())),
    };
    let mut hyper = CtmHyper::default_for(c.topics);
    hyper.alpha_beta = c.alpha_beta;
    let spec = CtmGenSpec { num_topics: c.topics, vocab_size: c.vocab_size, num_docs: c.docs + c.test_docs, doc_len: c.doc_len, hyper, prior };
    let (corpus, truth) = ctm_generate(&spec, &mut lanes.rng(0, 0)).map_err(ctx("ctm", "ctm_generate"))?;
    let (train, test) = corpus.split_at(c.docs);
    let files = [dir.join("train.txt"), dir.join("test.txt"), dir.join("truth.json")];
    write_file(&files[0], train.to_text())?;
    write_file(&files[1], test.to_text())?;
    let truth_json = json!({
        "topics": matrix_rows(&truth.topics),
        "prior_mean": truth.prior.mean.iter().copied().collect::<Vec<_>>(),
        "prior_cov": matrix_rows(&truth.prior.cov),
    });
    write_file(&files[2], to_json(&truth_json))?;
    Ok(files.to_vec())
}

fn gen_multgp(g: &GpGen, dir: &Path, lanes: &Lanes) -> CliResult<Vec<PathBuf>> {
    if g.categories < 2 || g.train_inputs.is_empty() || g.test_inputs.is_empty() {
        return Err(CliError::Config("multgp generation needs at least two categories and some train and test inputs".into()));
    }
    g.kernel.validate(1).map_err(|e| CliError::Config(format!("kernel: {e}")))?;
    let all: Vec<f64> = g.train_inputs.iter().chain(&g.test_inputs).copied().collect();
    let inputs = DMatrix::from_column_slice(all.len(), 1, &all);
    let spec = GpSpec::new(g.kernel.clone(), inputs, vec![0.0; g.categories - 1]).map_err(|e| CliError::Config(format!("{e}")))?;
    let names: Vec<String> = (0..g.categories).map(|k| format!("c{k}")).collect();
    let (data, psi) = multgp_generate(&spec, &vec![g.total; all.len()], names, &mut lanes.rng(0, 0)).map_err(ctx("mult_gp", "multgp_generate"))?;
    let n = g.train_inputs.len();
    let train = data.select(&(0..n).collect::<Vec<_>>());
    let test = data.select(&(n..all.len()).collect::<Vec<_>>());
    let header = vec!["x".to_string()];
    let files = [dir.join("train.csv"), dir.join("test.csv"), dir.join("truth.json")];
    write_file(&files[0], train.to_csv(&header))?;
    write_file(&files[1], test.to_csv(&header))?;
    write_file(&files[2], to_json(&json!({ "inputs": all, "psi": matrix_rows(&psi) })))?;
    Ok(files.to_vec())
}

/// Block-diagonal `decay · R(angle)` on coordinate pairs; a trailing odd
/// coordinate decays without rotating.
pub fn rotation_dynamics(d: usize, angle: f64, decay: f64) -> DMatrix<f64> {
    let mut a = DMatrix::identity(d, d) * decay;
    for p in 0..d / 2 {
        let (i, j) = (2 * p, 2 * p + 1);
        a[(i, i)] = decay * angle.cos();
        a[(i, j)] = -decay * angle.sin();
        a[(j, i)] = decay * angle.sin();
        a[(j, j)] = decay * angle.cos();
    }
    a
}

fn gen_sbmlds(l: &LdsGen, dir: &Path, lanes: &Lanes) -> CliResult<Vec<PathBuf>> {
    if l.categories < 2 || l.state_dim == 0 || l.steps == 0 {
        return Err(CliError::Config("sbmlds generation needs categories >= 2 and positive state_dim and steps".into()));
    }
    if !(l.state_noise > 0.0 && l.initial_var > 0.0) {
        return Err(CliError::Config("state_noise and initial_var must be positive".into()));
    }
    let d = l.state_dim;
    let mut rng = lanes.rng(0, 0);
    let c = DMatrix::from_fn(l.categories - 1, d, |_, _| l.emission_scale * f64::std_normal(&mut rng));
    let params = LdsParams {
        a: rotation_dynamics(d, l.angle, l.decay),
        b: DMatrix::identity(d, d) * l.state_noise,
        c_emit: c,
        mu0: DVector::zeros(d),
        sigma0: DMatrix::identity(d, d) * l.initial_var,
    };
    let bias = DVector::zeros(l.categories - 1);
    let (data, states) = sbmlds_generate(&params, &bias, &vec![l.total; l.steps], &mut rng).map_err(ctx("mult_lds", "sbmlds_generate"))?;
    let files = [dir.join("sequence.csv"), dir.join("truth.json")];
    write_file(&files[0], data.to_csv())?;
    write_file(&files[1], to_json(&json!({ "params": params, "states": matrix_rows(&states) })))?;
    Ok(files.to_vec())
}

fn gen_text(t: &TextGen, base: &Path, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let path = config::input(base, &t.text)?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let words = tokenize_words(&text);
    if t.holdout_tokens >= words.len() {
        return Err(CliError::Data(format!("text has {} words, fewer than the {} held out", words.len(), t.holdout_tokens)));
    }
    let vocab = build_vocab(&words[..words.len() - t.holdout_tokens], t.vocab_size, &t.oov).map_err(ctx("ctm", "build_vocab"))?;
    let ids = encode_words(&words, &vocab, &t.oov).map_err(ctx("ctm", "encode_words"))?;
    let corpus = Corpus::new(vec![ids], vocab.len()).map_err(ctx("ctm", "encode_words"))?;
    let files = [dir.join("tokens.txt"), dir.join("vocab.txt")];
    write_file(&files[0], corpus.to_text())?;
    write_file(&files[1], vocab.join("\n") + "\n")?;
    Ok(files.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_blocks_are_orthogonal_times_decay() {
        let a = rotation_dynamics(3, 0.4, 0.9);
        let g = a.transpose() * &a;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.81 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
