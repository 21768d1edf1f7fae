//! Artifact plumbing: directories, seed-mean tables and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{write_csv, Divergence, MetricsRecord};
use crate::numeric::NeumaierSum;

use super::{ExperimentConfig, HarnessError};

pub const MANIFEST_FILE: &str = "manifest.toml";

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn metrics_csv(records: &[MetricsRecord], divergence: Option<&Divergence>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records, divergence).expect("writing to memory");
    buf
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>, n: usize) -> Option<f64> {
    let mut s = NeumaierSum::default();
    for v in values {
        s.add(v?);
    }
    Some(s.total() / n as f64)
}

/// Seed mean at every logged iteration present in all runs. Optional
/// fields are averaged only when every run has them.
pub fn mean_records(runs: &[&[MetricsRecord]]) -> Vec<MetricsRecord> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len();
    let mut out = Vec::with_capacity(first.len());
    for r0 in first.iter() {
        let at: Option<Vec<&MetricsRecord>> = runs
            .iter()
            .map(|run| run.iter().find(|r| r.t == r0.t))
            .collect();
        let Some(at) = at else { break };
        let mean = |f: fn(&MetricsRecord) -> f64| {
            at.iter().map(|r| f(r)).collect::<NeumaierSum>().total() / n as f64
        };
        out.push(MetricsRecord {
            t: r0.t,
            err_x: mean_opt(at.iter().map(|r| r.err_x), n),
            err_x_agent_max: mean_opt(at.iter().map(|r| r.err_x_agent_max), n),
            cost: mean(|r| r.cost),
            gap_f: mean_opt(at.iter().map(|r| r.gap_f), n),
            grad_norm_sq: mean(|r| r.grad_norm_sq),
            psi_consensus: mean(|r| r.psi_consensus),
            y_consensus: mean(|r| r.y_consensus),
            grad_est_err: mean(|r| r.grad_est_err),
            weighted_avg_gap: mean_opt(at.iter().map(|r| r.weighted_avg_gap), n),
            weighted_avg_grad: mean(|r| r.weighted_avg_grad),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    /// SHA-256 of the canonical config text below.
    pub config_hash: String,
    /// Input path to SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256 of its content.
    pub artifacts: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub config: String,
}

/// Hashes the inputs and every artifact already in `dir`, then writes
/// the manifest next to them.
pub fn write_manifest(
    config: &ExperimentConfig,
    dir: &Path,
    artifacts: &[PathBuf],
    notes: Vec<String>,
) -> Result<Manifest, HarnessError> {
    let mut inputs = BTreeMap::new();
    for path in config.input_files() {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        inputs.insert(path.display().to_string(), sha256_hex(&bytes));
    }
    let mut hashes = BTreeMap::new();
    for rel in artifacts {
        let path = dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        hashes.insert(rel.display().to_string().replace('\\', "/"), sha256_hex(&bytes));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind.to_string(),
        config_hash: config.hash(),
        inputs,
        artifacts: hashes,
        notes,
        config: config.to_toml(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}
