//! Score rounding, RMSE and the per-method evaluation report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How raw real-valued predictions become integer ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    /// Round half-up to the nearest integer, then clamp into 1..=5.
    Nearest,
    /// Floor, then clamp into 1..=5.
    Floor,
}

impl RoundingMode {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "nearest" => Ok(RoundingMode::Nearest),
            "floor" => Ok(RoundingMode::Floor),
            other => Err(Error::Config(format!(
                "rounding mode {other:?} not recognized (use nearest or floor)"
            ))),
        }
    }
}

impl std::fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RoundingMode::Nearest => "nearest",
            RoundingMode::Floor => "floor",
        })
    }
}

/// Maps a raw prediction to the final integer rating under the given mode.
pub fn round_clamp_mode(raw: f64, mode: RoundingMode) -> Result<u8> {
    if !raw.is_finite() {
        return Err(Error::NonFinite(format!("prediction {raw}")));
    }
    let rounded = match mode {
        // floor(x + 0.5) is round-half-up: 4.5 -> 5, -2.5 -> -2
        RoundingMode::Nearest => (raw + 0.5).floor(),
        RoundingMode::Floor => raw.floor(),
    };
    Ok(rounded.clamp(1.0, 5.0) as u8)
}

/// Round-half-up then clamp into 1..=5.
pub fn round_clamp(raw: f64) -> Result<u8> {
    round_clamp_mode(raw, RoundingMode::Nearest)
}

/// sqrt((1/N) * sum (truth - pred)^2) over integer ratings.
pub fn rmse(truth: &[u8], pred: &[u8]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("rmse over zero samples".into()));
    }
    let sum_sq: f64 = truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            let d = t as f64 - p as f64;
            d * d
        })
        .sum();
    Ok((sum_sq / truth.len() as f64).sqrt())
}

/// One evaluated test record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEval {
    pub review_id: String,
    pub true_score: u8,
    /// Unrounded prediction after denormalization.
    pub raw: f64,
    #[serde(rename = "final")]
    pub final_score: u8,
    /// True when a cold-start fallback supplied the user statistics.
    pub fallback: bool,
}

/// Evaluation of one (method, feature) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub feature: String,
    pub ngram: u32,
    pub rmse: f64,
    pub n_test: usize,
    pub records: Vec<RecordEval>,
}

impl EvalReport {
    pub const TSV_HEADER: &'static str = "method\tfeature\tngram\trmse\tn_test";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.6}\t{}",
            self.method, self.feature, self.ngram, self.rmse, self.n_test
        )
    }

    /// Per-record dump as canonical JSON lines.
    pub fn dump_jsonl<W: std::io::Write>(&self, writer: &mut W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *writer, r)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}
