//! Experiment orchestration: config-driven pipelines and reproducible
//! artifact directories (`data.csv`, `summary.json`, `manifest.json`).

pub mod config;
pub mod pipelines;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;

pub use config::{Experiment, ExperimentConfig, ExperimentKind};
pub use pipelines::run_experiment;
pub use report::{ks_report, Check, KsReport, Relation, Report, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_sha256: String,
    pub code_version: String,
    pub seed: u64,
    pub rng: String,
    /// `(file, sha256)` of every data file.
    pub files: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Read and validate an experiment file.
pub fn load_experiment(path: &Path) -> Result<(Experiment, String)> {
    let text = fs::read_to_string(path)?;
    let exp = ExperimentConfig::parse(&text)?.validate()?;
    Ok((exp, text))
}

/// Run an experiment file and write its artifact directory; `out` overrides
/// the `output` field of the file.
pub fn run(config_path: &Path, out: Option<&Path>) -> Result<(PathBuf, Report)> {
    let (exp, text) = load_experiment(config_path)?;
    let dir = match (out, &exp.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => return Err(Error::config("output", "missing (or pass --out)")),
    };
    let report = run_experiment(&exp)?;
    write_artifacts(&dir, &exp, &text, &report)?;
    Ok((dir, report))
}

pub fn write_artifacts(dir: &Path, exp: &Experiment, config_text: &str, report: &Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut tables = vec![("data.csv".to_string(), &report.data)];
    tables.extend(report.extra.iter().map(|(name, t)| (name.clone(), t)));
    for (name, table) in tables {
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        fs::write(dir.join(&name), &buf)?;
        files.push((name, sha256_hex(&buf)));
    }
    let summary = serde_json::to_vec_pretty(report).map_err(|e| Error::numerical(e.to_string()))?;
    fs::write(dir.join("summary.json"), summary)?;
    let manifest = Manifest {
        kind: exp.kind.name().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: exp.seed,
        rng: RNG_ALGORITHM.into(),
        files,
    };
    let m = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::numerical(e.to_string()))?;
    fs::write(dir.join("manifest.json"), m)?;
    Ok(())
}

/// Load `summary.json` from an artifact directory.
pub fn read_summary(dir: &Path) -> Result<Report> {
    let text = fs::read_to_string(dir.join("summary.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::config("summary.json", e.to_string()))
}

/// Human-readable rendering of a summary.
pub fn render_summary(report: &Report) -> String {
    let mut out = format!("experiment: {}\nstatus: {:?}\n", report.kind, report.status);
    if report.conjectural {
        out.push_str("note: the target law is conjectural\n");
    }
    for c in &report.checks {
        let value = c.value.map_or("non-finite".to_string(), |v| format!("{v:.6e}"));
        out.push_str(&format!(
            "  [{:?}] {}: {} {} {:e}",
            c.status,
            c.name,
            value,
            c.relation.symbol(),
            c.threshold
        ));
        if let Some(n) = &c.note {
            out.push_str(&format!("  ({n})"));
        }
        out.push('\n');
    }
    for (k, v) in &report.statistics {
        out.push_str(&format!("  {k} = {v}\n"));
    }
    out
}
