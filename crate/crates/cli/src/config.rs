//! JSON configuration for `run` and `gen`.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use pgmult::gaussian::Kernel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub model: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelConfig {
    Ctm(TopicRun),
    CtmSvi(SviRun),
    Lda(TopicRun),
    Multgp(GpRun),
    Sbmlds(LdsRun),
    Rawlds(LdsRun),
    Selfcheck {},
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Ctm(_) => "ctm",
            ModelConfig::CtmSvi(_) => "ctm-svi",
            ModelConfig::Lda(_) => "lda",
            ModelConfig::Multgp(_) => "multgp",
            ModelConfig::Sbmlds(_) => "sbmlds",
            ModelConfig::Rawlds(_) => "rawlds",
            ModelConfig::Selfcheck {} => "selfcheck",
        }
    }
}

fn one() -> usize {
    1
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeldoutConfig {
    #[serde(default = "half")]
    pub split_ratio: f64,
    #[serde(default = "twenty")]
    pub burn_in: usize,
    #[serde(default = "thirty")]
    pub draws: usize,
}

fn half() -> f64 {
    0.5
}

fn twenty() -> usize {
    20
}

fn thirty() -> usize {
    30
}

impl Default for HeldoutConfig {
    fn default() -> Self {
        Self { split_ratio: half(), burn_in: twenty(), draws: thirty() }
    }
}

/// Gibbs-based topic models (`ctm`, `lda`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicRun {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub topics: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "tenth")]
    pub alpha_beta: f64,
    /// Document-topic concentration; used by `lda` only.
    #[serde(default = "tenth")]
    pub alpha_theta: f64,
    #[serde(default)]
    pub heldout: HeldoutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SviRun {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub topics: usize,
    pub steps: usize,
    pub batch_size: usize,
    /// Step size `(tau0 + t)^(-kappa)`.
    #[serde(default = "one_f")]
    pub tau0: f64,
    #[serde(default = "kappa_default")]
    pub kappa: f64,
    #[serde(default = "tenth")]
    pub alpha_beta: f64,
    #[serde(default = "five")]
    pub inner_iters: usize,
    #[serde(default = "twenty")]
    pub mc_draws: usize,
    /// Held-out evaluation period in steps; 0 evaluates only at the end.
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default)]
    pub heldout: HeldoutConfig,
}

fn one_f() -> f64 {
    1.0
}

fn kappa_default() -> f64 {
    0.7
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpRun {
    pub train: PathBuf,
    pub test: PathBuf,
    pub input_dim: usize,
    pub kernel: Kernel<f64>,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "ten")]
    pub thin: usize,
    #[serde(default = "two_hundred")]
    pub draws_per_sample: usize,
    #[serde(default = "ten")]
    pub top_k: usize,
    /// Thin every training row to this many counts before fitting.
    #[serde(default)]
    pub thin_to: Option<u64>,
    /// Sort categories by descending training count before fitting.
    #[serde(default)]
    pub reorder_categories: bool,
}

fn ten() -> usize {
    10
}

fn two_hundred() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSource {
    /// Corpus token-id records, concatenated and one-hot encoded.
    Tokens { path: PathBuf, vocab: PathBuf },
    /// `T × K` counts.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Holdout {
    /// The final `n` steps.
    Steps(usize),
    /// The final fraction of steps.
    Fraction(f64),
}

impl Holdout {
    pub fn train_len(&self, total: usize) -> CliResult<usize> {
        let held = match *self {
            Holdout::Steps(n) => n,
            Holdout::Fraction(f) if f > 0.0 && f < 1.0 => (total as f64 * f).round() as usize,
            Holdout::Fraction(f) => return Err(CliError::Config(format!("holdout fraction {f} is not in (0, 1)"))),
        };
        if held == 0 || held >= total {
            return Err(CliError::Config(format!("holdout of {held} steps leaves no training or test data out of {total}")));
        }
        Ok(total - held)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdsRun {
    pub data: SequenceSource,
    pub holdout: Holdout,
    pub state_dim: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "ten")]
    pub thin: usize,
    #[serde(default = "hundred")]
    pub rollouts: usize,
    /// Also fit the raw Gaussian LDS baseline (`sbmlds` only).
    #[serde(default = "yes")]
    pub raw_baseline: bool,
    /// Sort categories by descending training count before fitting.
    #[serde(default)]
    pub reorder_categories: bool,
}

fn hundred() -> usize {
    100
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub kind: GenKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GenKind {
    Ctm(CtmGen),
    Multgp(GpGen),
    Sbmlds(LdsGen),
    Text(TextGen),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmGen {
    pub topics: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub test_docs: usize,
    pub doc_len: usize,
    #[serde(default = "tenth")]
    pub alpha_beta: f64,
    /// Logistic-normal prior on stick coordinates; drawn from the weak NIW when absent.
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpGen {
    /// One-dimensional training inputs.
    pub train_inputs: Vec<f64>,
    pub test_inputs: Vec<f64>,
    pub categories: usize,
    pub total: u64,
    pub kernel: Kernel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdsGen {
    pub steps: usize,
    pub state_dim: usize,
    pub categories: usize,
    pub total: u64,
    /// Dynamics `decay · R(angle)` acting on consecutive coordinate pairs.
    #[serde(default = "angle_default")]
    pub angle: f64,
    #[serde(default = "decay_default")]
    pub decay: f64,
    #[serde(default = "noise_default")]
    pub state_noise: f64,
    #[serde(default = "one_f")]
    pub initial_var: f64,
    #[serde(default = "one_f")]
    pub emission_scale: f64,
}

fn angle_default() -> f64 {
    0.15
}

fn decay_default() -> f64 {
    0.99
}

fn noise_default() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextGen {
    pub text: PathBuf,
    pub vocab_size: usize,
    /// Final tokens excluded when choosing the vocabulary.
    pub holdout_tokens: usize,
    #[serde(default = "oov_default")]
    pub oov: String,
}

fn oov_default() -> String {
    "<unk>".into()
}

/// Raw config bytes plus the directory relative paths resolve against.
pub struct Loaded<C> {
    pub config: C,
    pub bytes: Vec<u8>,
    pub base: PathBuf,
}

pub fn load<C: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Loaded<C>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, bytes, base })
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Resolves a referenced input file and checks that it exists.
pub fn input(base: &Path, p: &Path) -> CliResult<PathBuf> {
    let full = resolve(base, p);
    if !full.is_file() {
        return Err(CliError::Config(format!("referenced file {} does not exist", full.display())));
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lds_run() {
        let text = r#"{"model":"sbmlds","seed":3,"output_dir":"out","data":{"format":"csv","path":"x.csv"},
            "holdout":{"steps":10},"state_dim":2,"sweeps":20,"burn_in":10}"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.seed, 3);
        match c.model {
            ModelConfig::Sbmlds(r) => {
                assert_eq!(r.holdout, Holdout::Steps(10));
                assert_eq!(r.rollouts, 100);
                assert!(r.raw_baseline);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"model":"selfcheck","output_dir":"o"}"#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"model":"lda","seed":1,"output_dir":"o","train":"a","test":"b","topics":2,"sweeps":5,"burn_in":1,"typo":1}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn holdout_lengths() {
        assert_eq!(Holdout::Steps(10).train_len(100).unwrap(), 90);
        assert_eq!(Holdout::Fraction(0.2).train_len(300).unwrap(), 240);
        assert!(Holdout::Steps(100).train_len(100).is_err());
        assert!(Holdout::Fraction(1.5).train_len(100).is_err());
    }
}
