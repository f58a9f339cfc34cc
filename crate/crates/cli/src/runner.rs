use std::path::{Path, PathBuf};

use serde_json::json;
use vrm_core::VERSION;

use crate::config::{ExperimentId, RunConfig, Stamp};
use crate::error::CliError;
use crate::experiments::{self, Artifacts};

/// What a run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    pub failed_assertions: Vec<String>,
    pub failed_findings: Vec<String>,
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn save(id: ExperimentId, a: &Artifacts, dir: &Path, hash: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let header = format!("# vrm {VERSION} config_sha256={hash}\n");
    for (name, csv) in &a.tables {
        write(dir.join(name), &format!("{header}{csv}"), files)?;
    }
    let report = json!({
        "experiment": id.name(),
        "version": VERSION,
        "config_hash": hash,
        "summary": a.summary,
        "assertions": a.assertions,
        "findings": a.findings,
    });
    write(dir.join(format!("{}.json", id.name())), &pretty(&report), files)
}

/// Runs the configured experiment (every experiment for `all`) on a pool of
/// `workers` threads and writes the resolved config, one JSON report per
/// experiment and its CSV tables. Outputs do not depend on the worker count.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let hash = cfg.hash();
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io { path: out_dir.clone(), source })?;

    let mut files = Vec::new();
    let mut stamped = cfg.clone();
    stamped.stamp = Some(Stamp { version: VERSION.into(), config_hash: hash.clone() });
    write(
        out_dir.join("config.json"),
        &pretty(&serde_json::to_value(&stamped).expect("config serializes")),
        &mut files,
    )?;

    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;

    let ids: Vec<ExperimentId> =
        if cfg.experiment == ExperimentId::All { ExperimentId::SEQUENCE.to_vec() } else { vec![cfg.experiment] };
    let mut failed_assertions = Vec::new();
    let mut failed_findings = Vec::new();
    for id in ids {
        let a = pool.install(|| experiments::run(id, cfg))?;
        save(id, &a, &out_dir, &hash, &mut files)?;
        failed_assertions.extend(a.assertions.iter().filter(|c| !c.passed).map(|c| format!("{id}: {}", c.name)));
        failed_findings.extend(a.findings.iter().filter(|c| !c.passed).map(|c| format!("{id}: {}", c.name)));
    }
    Ok(RunSummary { out_dir, config_hash: hash, files, failed_assertions, failed_findings })
}
