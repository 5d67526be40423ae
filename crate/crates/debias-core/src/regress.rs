//! Least-squares linear regression trained by SGD.
//!
//! This single global regressor maps document feature vectors to normalized
//! score targets. The solver is plain per-sample SGD with an L2 penalty on
//! the weights (intercept unregularized), a 1/sqrt(t) step decay and a
//! seeded shuffle per epoch. The weight vector is kept as `scale * v` so the
//! L2 shrink costs O(1) per sample instead of touching all 25K coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressConfig {
    pub l2_lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            epochs: 10,
            learning_rate: 0.05,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_lambda: f64,
}

impl LinearRegressor {
    /// Minimizes (1/N) sum (w.x_i + b - y_i)^2 + lambda * ||w||^2.
    pub fn fit(x: &FeatureMatrix, y: &[f64], cfg: &RegressConfig) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyInput("regression needs at least one sample".into()));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("regression target {bad}")));
        }
        if cfg.epochs < 1 {
            return Err(Error::Config("regression epochs must be >= 1".into()));
        }
        if 2.0 * cfg.learning_rate * cfg.l2_lambda >= 1.0 {
            return Err(Error::Config(
                "learning_rate * l2_lambda too large; shrink factor would go non-positive".into(),
            ));
        }

        let n = x.n_rows();
        let dim = x.n_cols;
        let mut v = vec![0.0f64; dim];
        let mut scale = 1.0f64;
        let mut intercept = 0.0f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut t: u64 = 0;

        for _ in 0..cfg.epochs {
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for &idx in &order {
                t += 1;
                let eta = cfg.learning_rate / (t as f64).sqrt();
                let row = &x.rows[idx];
                let pred = scale * row.dot_dense(&v) + intercept;
                let err = pred - y[idx];

                // L2 shrink applied through the scale factor
                if cfg.l2_lambda > 0.0 {
                    scale *= 1.0 - 2.0 * eta * cfg.l2_lambda;
                }
                for (col, val) in row.iter() {
                    v[col as usize] -= 2.0 * eta * err * val / scale;
                }
                intercept -= 2.0 * eta * err;

                if scale.abs() < 1e-9 {
                    for w in &mut v {
                        *w *= scale;
                    }
                    scale = 1.0;
                }
            }
        }

        let weights: Vec<f64> = v.iter().map(|w| w * scale).collect();
        if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
            return Err(Error::NonFinite("regression diverged; lower the learning rate".into()));
        }
        Ok(Self {
            weights,
            intercept,
            l2_lambda: cfg.l2_lambda,
        })
    }

    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        if let Some(max) = x.max_column() {
            if max as usize >= self.weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.weights.len(),
                    got: max as usize + 1,
                });
            }
        }
        Ok(x.dot_dense(&self.weights) + self.intercept)
    }

    /// Serialized form: little-endian u32 header length, JSON header, then
    /// the weights as little-endian f64.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&RegressorHeader {
            format_version: 1,
            dim: self.weights.len() as u64,
            intercept: self.intercept,
            l2_lambda: self.l2_lambda,
        })?;
        let mut out = Vec::with_capacity(4 + header.len() + self.weights.len() * 8);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Bundle(format!("regressor blob: {msg}"));
        if bytes.len() < 4 {
            return Err(bad("truncated"));
        }
        let header_len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() < 4 + header_len {
            return Err(bad("truncated header"));
        }
        let header: RegressorHeader = serde_json::from_slice(&bytes[4..4 + header_len])?;
        if header.format_version != 1 {
            return Err(bad("unsupported version"));
        }
        let body = &bytes[4 + header_len..];
        if body.len() != header.dim as usize * 8 {
            return Err(bad("weight block has wrong length"));
        }
        let weights = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            weights,
            intercept: header.intercept,
            l2_lambda: header.l2_lambda,
        })
    }

    /// The value the solver minimizes, for convergence checks.
    pub fn objective(&self, x: &FeatureMatrix, y: &[f64]) -> f64 {
        let n = x.n_rows() as f64;
        let sse: f64 = x
            .rows
            .iter()
            .zip(y)
            .map(|(row, target)| {
                let err = row.dot_dense(&self.weights) + self.intercept - target;
                err * err
            })
            .sum();
        let penalty: f64 = self.weights.iter().map(|w| w * w).sum::<f64>() * self.l2_lambda;
        sse / n + penalty
    }
}

#[derive(Serialize, Deserialize)]
struct RegressorHeader {
    format_version: u32,
    dim: u64,
    intercept: f64,
    l2_lambda: f64,
}
