//! Result files: CSV or JSON lines rows, plus a JSON metadata sidecar.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ScenarioConfig;
use super::sweep::{Derived, SweepResult, SweepRow};
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonlines,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonlines => "jsonl",
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "scenario", "strategy", "x1", "x2", "mean_gain", "std_gain", "trials", "seed",
];

pub fn write_rows(path: &Path, rows: &[SweepRow], format: Format) -> Result<(), ExperimentError> {
    let file = BufWriter::new(fs::File::create(path)?);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.scenario.clone(),
                    r.strategy.clone(),
                    r.x1.to_string(),
                    r.x2.map(|v| v.to_string()).unwrap_or_default(),
                    r.mean_gain.to_string(),
                    r.std_gain.to_string(),
                    r.trials.to_string(),
                    r.seed.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Jsonlines => {
            let mut w = file;
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_csv_rows(path: &Path) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, ExperimentError> {
            rec[i]
                .parse()
                .map_err(|_| ExperimentError::Config(format!("bad number {:?} in {}", &rec[i], path.display())))
        };
        rows.push(SweepRow {
            scenario: rec[0].to_string(),
            strategy: rec[1].to_string(),
            x1: num(2)?,
            x2: if rec[3].is_empty() { None } else { Some(num(3)?) },
            mean_gain: num(4)?,
            std_gain: num(5)?,
            trials: num(6)? as usize,
            seed: rec[7]
                .parse()
                .map_err(|_| ExperimentError::Config(format!("bad seed {:?}", &rec[7])))?,
        });
    }
    Ok(rows)
}

/// SHA-256 of the resolved TOML, hex encoded.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    pub rows: usize,
    pub config_hash: String,
    pub derived: Vec<Derived>,
    pub config: ScenarioConfig,
}

impl Metadata {
    pub fn new(cfg: &ScenarioConfig, result: &SweepResult) -> Self {
        Self {
            tool: "gdbf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: cfg.scenario.name().into(),
            seed: cfg.seed,
            trials: cfg.trials,
            rows: result.rows.len(),
            config_hash: config_hash(cfg),
            derived: result.derived.clone(),
            config: cfg.clone(),
        }
    }
}

/// Files written for one scenario run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub results: std::path::PathBuf,
    pub meta: std::path::PathBuf,
    pub config: std::path::PathBuf,
}

/// Writes `<stem>.<ext>`, `<stem>.meta.json` and `<stem>.config.toml` in `dir`.
pub fn write_result(
    dir: &Path,
    stem: &str,
    cfg: &ScenarioConfig,
    result: &SweepResult,
    format: Format,
) -> Result<Written, ExperimentError> {
    fs::create_dir_all(dir)?;
    let results = dir.join(format!("{stem}.{}", format.extension()));
    let meta = dir.join(format!("{stem}.meta.json"));
    let config = dir.join(format!("{stem}.config.toml"));
    write_rows(&results, &result.rows, format)?;
    let mut text = serde_json::to_string_pretty(&Metadata::new(cfg, result))?;
    text.push('\n');
    fs::write(&meta, text)?;
    fs::write(&config, cfg.to_toml())?;
    Ok(Written { results, meta, config })
}
