//! Report bundles: per-round metrics, trust trajectories and a JSON summary.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use kets::metrics::compute_metrics;
use kets::{run_experiment, ExperimentRun};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{ConfigError, Settings};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRUST_FILE: &str = "trust.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment setup failed: {0}")]
    Setup(#[from] kets::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Paths of the three files written for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub metrics: PathBuf,
    pub trust: PathBuf,
    pub summary: PathBuf,
}

impl ReportBundle {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            metrics: dir.join(METRICS_FILE),
            trust: dir.join(TRUST_FILE),
            summary: dir.join(SUMMARY_FILE),
        }
    }
}

pub fn metrics_csv(run: &ExperimentRun) -> String {
    let mut out = String::from("round,accuracy,n_selected,n_honest,n_excluded_total\n");
    for r in &run.reports {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{}",
            r.round,
            r.accuracy,
            r.selected.len(),
            r.honest.len(),
            r.excluded.len()
        );
    }
    out
}

pub fn trust_csv(run: &ExperimentRun) -> String {
    let mut out = String::from("round,client_id,trust,is_attacker\n");
    for r in &run.reports {
        for (id, trust) in &r.trust {
            let attacker = u8::from(run.attackers.contains(id));
            let _ = writeln!(out, "{},{id},{trust:.6},{attacker}", r.round);
        }
    }
    out
}

pub fn summary_json(settings: &Settings, run: &ExperimentRun) -> String {
    let s = compute_metrics(&run.reports, &run.attackers, run.n_clients);
    let exclusion: Map<String, Value> = s
        .rounds_to_exclusion
        .iter()
        .map(|(id, round)| (id.to_string(), json!(round)))
        .collect();
    let summary = json!({
        "final_accuracy": s.final_accuracy,
        "mean_accuracy": s.mean_accuracy,
        "tpr": s.tpr,
        "fpr": s.fpr,
        "rounds_completed": run.reports.len(),
        "attackers": run.attackers,
        "rounds_to_exclusion": exclusion,
        "aborted": run.aborted.as_ref().map(|e| e.to_string()),
        "config": settings.echo(),
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("json values always serialize");
    text.push('\n');
    text
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_bundle(out_dir: &Path, settings: &Settings, run: &ExperimentRun) -> Result<ReportBundle, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let bundle = ReportBundle::in_dir(out_dir);
    write_atomic(&bundle.metrics, &metrics_csv(run))?;
    write_atomic(&bundle.trust, &trust_csv(run))?;
    write_atomic(&bundle.summary, &summary_json(settings, run))?;
    Ok(bundle)
}

/// Runs the configured experiment and writes its bundle. A run cut short by
/// a round failure still writes the rounds it completed; the caller sees
/// the failure in `ExperimentRun::aborted`.
pub fn run_and_report(settings: &Settings, out_dir: &Path) -> Result<(ReportBundle, ExperimentRun), ReportError> {
    let cfg = settings.validate()?;
    let run = run_experiment(&cfg)?;
    let bundle = write_bundle(out_dir, settings, &run)?;
    Ok((bundle, run))
}
