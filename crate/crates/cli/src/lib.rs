//! Library behind the `pgmult` binary.

pub mod config;
pub mod drivers;
pub mod error;
pub mod gen;
pub mod output;
pub mod selfcheck;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::{GenConfig, ModelConfig, RunConfig};
use error::{CliError, CliResult};
use output::{create_dir, sha256_hex, to_json, write_file, write_manifest, Diagnostics, Manifest};

pub const THREADS_ENV: &str = "PGMULT_THREADS";

/// Sizes the global worker pool from `PGMULT_THREADS` when set.
pub fn configure_threads() -> CliResult<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v} is not a positive integer")))?;
        // a pool built earlier in this process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn selfcheck_results() -> CliResult<serde_json::Value> {
    let checks = selfcheck::run_checks();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let value = serde_json::json!({ "model": "selfcheck", "passed": failed.is_empty(), "checks": checks });
    if !failed.is_empty() {
        return Err(CliError::Numerical { module: "selfcheck", op: "run_checks", detail: format!("failed: {}", failed.join(", ")) });
    }
    Ok(value)
}

/// Executes a run config and returns the results path.
pub fn run(config_path: &Path) -> CliResult<PathBuf> {
    let threads = configure_threads()?;
    let loaded = config::load::<RunConfig>(config_path)?;
    let cfg = &loaded.config;
    let base = &loaded.base;
    let dir = config::resolve(base, &cfg.output_dir);
    let start = Instant::now();
    let (results, diag) = match &cfg.model {
        ModelConfig::Ctm(c) => drivers::run_ctm(base, c, cfg.seed, start)?,
        ModelConfig::Lda(c) => drivers::run_lda(base, c, cfg.seed, start)?,
        ModelConfig::CtmSvi(c) => drivers::run_ctm_svi(base, c, cfg.seed, start)?,
        ModelConfig::Multgp(c) => drivers::run_multgp(base, c, cfg.seed, start)?,
        ModelConfig::Sbmlds(c) => drivers::run_lds(base, c, cfg.seed, true, start)?,
        ModelConfig::Rawlds(c) => drivers::run_lds(base, c, cfg.seed, false, start)?,
        ModelConfig::Selfcheck {} => (selfcheck_results()?, Diagnostics::new(start)),
    };
    create_dir(&dir)?;
    let results_path = dir.join("results.json");
    let diag_path = dir.join("diagnostics.csv");
    write_file(&results_path, to_json(&results))?;
    write_file(&diag_path, diag.to_csv())?;
    write_manifest(
        &dir,
        &Manifest {
            command: "run",
            config_path: config_path.display().to_string(),
            config_sha256: sha256_hex(&loaded.bytes),
            seed: cfg.seed,
            model: cfg.model.name(),
            version: env!("CARGO_PKG_VERSION"),
            threads,
            outputs: vec!["results.json".into(), "diagnostics.csv".into()],
        },
    )?;
    Ok(results_path)
}

/// Executes a gen config and returns the files written.
pub fn gen(config_path: &Path) -> CliResult<Vec<PathBuf>> {
    let threads = configure_threads()?;
    let loaded = config::load::<GenConfig>(config_path)?;
    let cfg = &loaded.config;
    let dir = config::resolve(&loaded.base, &cfg.output_dir);
    create_dir(&dir)?;
    let files = gen::generate(&cfg.kind, &loaded.base, &dir, cfg.seed)?;
    let model = match cfg.kind {
        config::GenKind::Ctm(_) => "ctm",
        config::GenKind::Multgp(_) => "multgp",
        config::GenKind::Sbmlds(_) => "sbmlds",
        config::GenKind::Text(_) => "text",
    };
    write_manifest(
        &dir,
        &Manifest {
            command: "gen",
            config_path: config_path.display().to_string(),
            config_sha256: sha256_hex(&loaded.bytes),
            seed: cfg.seed,
            model,
            version: env!("CARGO_PKG_VERSION"),
            threads,
            outputs: files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        },
    )?;
    Ok(files)
}

/// Runs the invariant suite and returns its report as JSON text.
pub fn selfcheck() -> CliResult<String> {
    configure_threads()?;
    Ok(to_json(&selfcheck_results()?))
}
