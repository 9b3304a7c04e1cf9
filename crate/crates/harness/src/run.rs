//! Running a configured study and persisting everything it produced.

use std::path::{Path, PathBuf};

use log::info;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::experiments::{run_study, Artifact};
use crate::formats::encode_tensor;
use crate::results::{summarize, to_csv, ResultRow, TimingRow, RESULTS_SCHEMA, SUMMARY_SCHEMA, TIMINGS_SCHEMA};

pub const MANIFEST_SCHEMA: &str = "graphprop-manifest v1";

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub manifest: Value,
    pub artifacts: Vec<Artifact>,
    /// A post-run check failed; outputs are still worth writing.
    pub failure: Option<String>,
}

/// Validates `cfg` and runs its study.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let kind = cfg.kind()?;
    info!("running {} with seed {}", kind.name(), cfg.seed);
    let study = run_study(cfg)?;
    let config = serde_json::to_value(cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    let manifest = json!({
        "schema": MANIFEST_SCHEMA,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "experiment": kind.name(),
        "seed": cfg.seed,
        "repeats": cfg.repeats(),
        "config": config,
        "warnings": study.warnings,
        "failure": study.failure,
        "tasks": study.tasks,
        "files": output_files(kind, &study.artifacts),
    });
    Ok(ExperimentOutput {
        kind,
        rows: study.rows,
        timings: study.timings,
        manifest,
        artifacts: study.artifacts,
        failure: study.failure,
    })
}

fn output_files(kind: ExperimentKind, artifacts: &[Artifact]) -> Vec<String> {
    let k = kind.name();
    let mut files = vec![
        format!("{k}_results.csv"),
        format!("{k}_summary.csv"),
        format!("{k}_timings.csv"),
        format!("{k}_manifest.json"),
    ];
    files.extend(artifacts.iter().map(|a| a.name().to_string()));
    files
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("json value serializes");
    b.push(b'\n');
    b
}

/// Writes the result, summary and timing tables, the manifest and any
/// artifacts into `dir`, returning the written paths.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let k = out.kind.name();
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put(format!("{k}_results.csv"), to_csv(RESULTS_SCHEMA, &out.rows)?)?;
    put(
        format!("{k}_summary.csv"),
        to_csv(SUMMARY_SCHEMA, &summarize(&out.rows))?,
    )?;
    put(format!("{k}_timings.csv"), to_csv(TIMINGS_SCHEMA, &out.timings)?)?;
    put(format!("{k}_manifest.json"), json_bytes(&out.manifest))?;
    for a in &out.artifacts {
        match a {
            Artifact::Json(name, v) => put(name.clone(), json_bytes(v))?,
            Artifact::Tensor(name, t) => put(name.clone(), encode_tensor(t))?,
        }
    }
    Ok(written)
}
