//! Machine-readable run outputs: training logs, evaluation reports and the
//! run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use pal_core::trainer::{EpochLog, EvalReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{PalError, Result};

pub const TRAINING_LOG_HEADER: [&str; 6] = ["epoch", "lr", "loss_meta", "loss_pcc", "loss_total", "val_acc"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with one row per epoch; absent values are empty fields.
pub fn training_log_csv(logs: &[EpochLog]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAINING_LOG_HEADER).expect("in-memory write");
    for l in logs {
        w.write_record([
            l.epoch.to_string(),
            l.lr.to_string(),
            opt(l.loss_meta),
            opt(l.loss_pcc),
            l.loss_total.to_string(),
            opt(l.val_acc),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| PalError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("records serialize");
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| PalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PalError::parse(path, e))
}

/// Evaluation result as written by `pal eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub way: usize,
    pub shot: usize,
    pub query: usize,
    pub seed: u64,
    pub checkpoint_fingerprint: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Choices the method description leaves open, recorded with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub pcc_mode: String,
    pub cosine_scale: f64,
    pub queries_per_class: usize,
    pub lambda: f64,
    pub attention: String,
    pub head: String,
    pub model_selection: String,
}

impl Decisions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let h = &cfg.model.head;
        Decisions {
            pcc_mode: cfg.meta.pcc_mode.name().into(),
            cosine_scale: cfg.model.cosine_scale,
            queries_per_class: cfg.episode.query,
            lambda: cfg.meta.lambda,
            attention: if cfg.meta.hal { "hybrid" } else { "bypass" }.into(),
            head: format!(
                "{}linear, bias {}, output {}",
                h.hidden.map(|w| format!("hidden {w} rectified, ")).unwrap_or_default(),
                h.bias,
                h.activation.name()
            ),
            model_selection: if cfg.meta.val_episodes > 0 {
                format!("best meta-val accuracy over {} episodes per epoch", cfg.meta.val_episodes)
            } else {
                "last epoch".into()
            },
        }
    }
}

/// Written before any work starts and never modified; completion goes into
/// a separate [`Completion`] record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub started_at: String,
    pub seeds: Vec<u64>,
    pub config: RunConfig,
    pub config_fingerprint: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub decisions: Decisions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub finished_at: String,
    pub status: String,
}

pub fn now() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .expect("UTC timestamps format")
}

pub fn fingerprint_hex(fp: u64) -> String {
    format!("{fp:016x}")
}
