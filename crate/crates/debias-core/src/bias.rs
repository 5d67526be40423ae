//! Per-user and per-product rating statistics and the two user-bias removal
//! transforms.
//!
//! The first transform z-normalizes each score against the user's own mean
//! and population standard deviation. The second subtracts the user's net
//! bias, defined as the average gap between the user's scores and the mean
//! score of each reviewed product. Both are exactly invertible, which is how
//! predictions are mapped back onto the 1..5 scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};

/// Compensated (Kahan) summation; keeps fitted statistics stable against
/// record reordering to well below 1e-9.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean, population standard deviation and review count for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub mean: f64,
    pub std: f64,
    pub count: u64,
}

/// Mean score and review count for one product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductStats {
    pub mean: f64,
    pub count: u64,
}

/// A user's net bias: average of (own score - product mean) over the
/// products the user reviewed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserBias {
    pub net_bias: f64,
    pub count: u64,
}

fn mean_and_pop_std(scores: &[u8]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mut sum = KahanSum::default();
    for &s in scores {
        sum.add(s as f64);
    }
    let mean = sum.value() / n;
    let mut sq = KahanSum::default();
    for &s in scores {
        let d = s as f64 - mean;
        sq.add(d * d);
    }
    // population variance: divisor n, no Bessel correction
    let var = (sq.value() / n).max(0.0);
    (mean, var.sqrt())
}

/// Per-user mean and population standard deviation over the training set.
pub fn fit_user_stats(train: &Dataset) -> BTreeMap<String, UserStats> {
    let mut grouped: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for r in &train.records {
        grouped.entry(&r.user_id).or_default().push(r.score);
    }
    grouped
        .into_iter()
        .map(|(user, scores)| {
            let (mean, std) = mean_and_pop_std(&scores);
            (
                user.to_owned(),
                UserStats {
                    mean,
                    std,
                    count: scores.len() as u64,
                },
            )
        })
        .collect()
}

/// Per-product mean score over the training set.
pub fn fit_product_stats(train: &Dataset) -> BTreeMap<String, ProductStats> {
    let mut grouped: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for r in &train.records {
        grouped.entry(&r.product_id).or_default().push(r.score);
    }
    grouped
        .into_iter()
        .map(|(product, scores)| {
            let (mean, _) = mean_and_pop_std(&scores);
            (
                product.to_owned(),
                ProductStats {
                    mean,
                    count: scores.len() as u64,
                },
            )
        })
        .collect()
}

/// Per-user net bias against fitted product means. `pstats` must come from
/// the same training set.
pub fn fit_user_net_bias(
    train: &Dataset,
    pstats: &BTreeMap<String, ProductStats>,
) -> Result<BTreeMap<String, UserBias>> {
    let mut grouped: BTreeMap<&str, (KahanSum, u64)> = BTreeMap::new();
    for r in &train.records {
        let product_mean = pstats
            .get(&r.product_id)
            .ok_or_else(|| {
                Error::Data(format!(
                    "product {} missing from product stats; fit them on the same training set",
                    r.product_id
                ))
            })?
            .mean;
        let entry = grouped.entry(&r.user_id).or_default();
        entry.0.add(r.score as f64 - product_mean);
        entry.1 += 1;
    }
    Ok(grouped
        .into_iter()
        .map(|(user, (sum, count))| {
            (
                user.to_owned(),
                UserBias {
                    net_bias: sum.value() / count as f64,
                    count,
                },
            )
        })
        .collect())
}

/// z-normalizes a score against the user's statistics; a zero standard
/// deviation (constant-score user) maps everything to zero.
pub fn ubr1_normalize(score: u8, stats: &UserStats) -> f64 {
    if stats.std == 0.0 {
        0.0
    } else {
        (score as f64 - stats.mean) / stats.std
    }
}

/// Inverts [`ubr1_normalize`]: predicted normalized score back to the user's
/// scale, unrounded.
pub fn ubr1_denormalize(pnr: f64, stats: &UserStats) -> f64 {
    pnr * stats.std + stats.mean
}

/// Subtracts the user's net bias from a score.
pub fn ubr2_normalize(score: u8, bias: &UserBias) -> f64 {
    score as f64 - bias.net_bias
}

/// Inverts [`ubr2_normalize`], unrounded.
pub fn ubr2_denormalize(pnr: f64, bias: &UserBias) -> f64 {
    pnr + bias.net_bias
}

/// All statistics fitted from one training set, with global fallbacks for
/// users that never appeared in training.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    pub user_stats: BTreeMap<String, UserStats>,
    pub product_stats: BTreeMap<String, ProductStats>,
    pub user_bias: BTreeMap<String, UserBias>,
    pub global_mean: f64,
    pub global_std: f64,
    pub n_train: u64,
}

impl BiasTable {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("cannot fit bias table on empty data".into()));
        }
        let scores: Vec<u8> = train.records.iter().map(|r| r.score).collect();
        let (global_mean, global_std) = mean_and_pop_std(&scores);
        let user_stats = fit_user_stats(train);
        let product_stats = fit_product_stats(train);
        let user_bias = fit_user_net_bias(train, &product_stats)?;
        Ok(Self {
            user_stats,
            product_stats,
            user_bias,
            global_mean,
            global_std,
            n_train: train.len() as u64,
        })
    }

    /// (mean, std) to use for a user at prediction time plus a flag that is
    /// true when the user was unseen and global statistics were substituted.
    pub fn ubr1_params(&self, user_id: &str) -> (f64, f64, bool) {
        match self.user_stats.get(user_id) {
            Some(s) => (s.mean, s.std, false),
            None => (self.global_mean, self.global_std, true),
        }
    }

    /// Net bias to use for a user at prediction time; unseen users fall back
    /// to zero bias.
    pub fn ubr2_params(&self, user_id: &str) -> (f64, bool) {
        match self.user_bias.get(user_id) {
            Some(b) => (b.net_bias, false),
            None => (0.0, true),
        }
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let users = self
            .user_stats
            .iter()
            .map(|(id, stats)| {
                let bias = self.user_bias.get(id).copied().unwrap_or(UserBias {
                    net_bias: 0.0,
                    count: stats.count,
                });
                (
                    id.clone(),
                    UserEntry {
                        mean: stats.mean,
                        std: stats.std,
                        count: stats.count,
                        net_bias: bias.net_bias,
                    },
                )
            })
            .collect();
        let doc = BiasTableDoc {
            format_version: FORMAT_VERSION,
            global: GlobalEntry {
                mean: self.global_mean,
                std: self.global_std,
                count: self.n_train,
            },
            users,
            products: self.product_stats.clone(),
        };
        Ok(serde_json::to_vec(&doc)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let doc: BiasTableDoc = serde_json::from_slice(bytes)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported bias table format_version {}",
                doc.format_version
            )));
        }
        let mut user_stats = BTreeMap::new();
        let mut user_bias = BTreeMap::new();
        for (id, e) in doc.users {
            user_stats.insert(
                id.clone(),
                UserStats {
                    mean: e.mean,
                    std: e.std,
                    count: e.count,
                },
            );
            user_bias.insert(
                id,
                UserBias {
                    net_bias: e.net_bias,
                    count: e.count,
                },
            );
        }
        Ok(Self {
            user_stats,
            product_stats: doc.products,
            user_bias,
            global_mean: doc.global.mean,
            global_std: doc.global.std,
            n_train: doc.global.count,
        })
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct UserEntry {
    mean: f64,
    std: f64,
    count: u64,
    net_bias: f64,
}

#[derive(Serialize, Deserialize)]
struct GlobalEntry {
    mean: f64,
    std: f64,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct BiasTableDoc {
    format_version: u32,
    global: GlobalEntry,
    users: BTreeMap<String, UserEntry>,
    products: BTreeMap<String, ProductStats>,
}
