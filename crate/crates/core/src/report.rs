//! Evaluation results and their JSON, CSV and plain-text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sequence::DistributionKind;
use crate::stream::AxisMode;

/// One result line, keyed by tokenizer, dataset, distribution and BPE use.
///
/// Point errors are in degrees (MAE, DTW) or squared degrees (MSE). The
/// accumulative columns are only set for velocity rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub tokenizer: String,
    pub dataset: String,
    pub distribution: DistributionKind,
    pub axis_mode: AxisMode,
    pub bpe: bool,
    pub mse: f64,
    pub mae: f64,
    pub acc_mse: Option<f64>,
    pub acc_mae: Option<f64>,
    /// Mean over test recordings.
    pub dtw: f64,
    pub jsd: f64,
    pub vel_jsd: f64,
    pub vocab_size: u32,
    pub tokens: usize,
    pub baseline_tokens: usize,
    pub ratio: f64,
    pub space_saving: f64,
    pub bpe_ratio: f64,
}

/// Rows plus the fully resolved configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<C> {
    pub config: C,
    pub train_recordings: Vec<String>,
    pub test_recordings: Vec<String>,
    pub dropped_rows: usize,
    pub rows: Vec<EvalRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl<C: Serialize> EvalReport<C> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "tokenizer,dataset,distribution,axis_mode,bpe,mse,mae,acc_mse,acc_mae,dtw,jsd,vel_jsd,\
             vocab_size,tokens,baseline_tokens,ratio,space_saving,bpe_ratio\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tokenizer,
                r.dataset,
                r.distribution,
                r.axis_mode.as_str(),
                r.bpe,
                r.mse,
                r.mae,
                opt(r.acc_mse),
                opt(r.acc_mae),
                r.dtw,
                r.jsd,
                r.vel_jsd,
                r.vocab_size,
                r.tokens,
                r.baseline_tokens,
                r.ratio,
                r.space_saving,
                r.bpe_ratio
            );
        }
        out
    }

    /// Fixed-width summary in the layout of the usual reconstruction and
    /// compression tables.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<12} {:<9} {:<4} {:>10} {:>10} {:>10} {:>10} {:>12} {:>8} {:>8} {:>8} {:>9}",
            "tokenizer", "dataset", "dist", "bpe", "mse", "mae", "acc_mse", "acc_mae", "dtw", "jsd", "vel_jsd",
            "ratio", "saving"
        );
        let acc = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:<12} {:<9} {:<4} {:>10.3} {:>10.3} {:>10} {:>10} {:>12.3} {:>8.3} {:>8.3} {:>8.2} {:>8.2}%",
                r.tokenizer,
                r.dataset,
                r.distribution.as_str(),
                if r.bpe { "yes" } else { "no" },
                r.mse,
                r.mae,
                acc(r.acc_mse),
                acc(r.acc_mae),
                r.dtw,
                r.jsd,
                r.vel_jsd,
                r.ratio,
                r.space_saving * 100.0
            );
        }
        out
    }
}

/// Serializes plot-data rows as CSV with a header line.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
