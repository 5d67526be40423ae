//! Reference predictors that do not model user bias: five statistical
//! lookups and four text classifiers evaluated as ordinal score predictors.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, ReviewRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SparseVector};

/// Most frequent score; ties resolved toward the smaller score.
fn score_mode(counts: &[u64; 5]) -> u8 {
    let mut best = 0usize;
    for s in 1..5 {
        if counts[s] > counts[best] {
            best = s;
        }
    }
    best as u8 + 1
}

fn count_scores<'a, I: Iterator<Item = &'a u8>>(scores: I) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for &s in scores {
        counts[(s - 1) as usize] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Majority,
    UserMean,
    UserMode,
    ProductMean,
    ProductMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggKind {
    Mean,
    Mode,
}

/// Lookup-table baseline: constant, per-user or per-product score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatBaselineModel {
    pub kind: StatKind,
    pub lookup: BTreeMap<String, f64>,
    pub global_fallback: f64,
}

impl StatBaselineModel {
    pub fn fit_majority(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("majority baseline needs training data".into()));
        }
        let counts = count_scores(train.records.iter().map(|r| &r.score));
        Ok(Self {
            kind: StatKind::Majority,
            lookup: BTreeMap::new(),
            global_fallback: score_mode(&counts) as f64,
        })
    }

    pub fn fit_user(train: &Dataset, agg: AggKind) -> Result<Self> {
        Self::fit_grouped(train, agg, true)
    }

    pub fn fit_product(train: &Dataset, agg: AggKind) -> Result<Self> {
        Self::fit_grouped(train, agg, false)
    }

    fn fit_grouped(train: &Dataset, agg: AggKind, by_user: bool) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("statistical baseline needs training data".into()));
        }
        let mut grouped: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
        for r in &train.records {
            let key = if by_user { &r.user_id } else { &r.product_id };
            grouped.entry(key).or_default().push(r.score);
        }
        let aggregate = |scores: &[u8]| -> f64 {
            match agg {
                AggKind::Mean => scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64,
                AggKind::Mode => score_mode(&count_scores(scores.iter())) as f64,
            }
        };
        let lookup = grouped
            .iter()
            .map(|(k, scores)| ((*k).to_owned(), aggregate(scores)))
            .collect();
        let all: Vec<u8> = train.records.iter().map(|r| r.score).collect();
        let global_fallback = aggregate(&all);
        let kind = match (by_user, agg) {
            (true, AggKind::Mean) => StatKind::UserMean,
            (true, AggKind::Mode) => StatKind::UserMode,
            (false, AggKind::Mean) => StatKind::ProductMean,
            (false, AggKind::Mode) => StatKind::ProductMode,
        };
        Ok(Self {
            kind,
            lookup,
            global_fallback,
        })
    }

    /// Raw (pre-rounding) prediction plus a flag for the global fallback path.
    pub fn predict(&self, record: &ReviewRecord) -> (f64, bool) {
        let key = match self.kind {
            StatKind::Majority => return (self.global_fallback, false),
            StatKind::UserMean | StatKind::UserMode => &record.user_id,
            StatKind::ProductMean | StatKind::ProductMode => &record.product_id,
        };
        match self.lookup.get(key) {
            Some(v) => (*v, false),
            None => (self.global_fallback, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-5,
            epochs: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per tree, chosen by training-matrix nonzero count.
    /// `None` searches every feature.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 20,
            max_features: Some(1000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u8,
    },
}

/// Multi-class text classifiers; predictions are classes in 1..=5 used
/// directly as numeric scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierModel {
    LinearSvmOvr {
        classes: Vec<u8>,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    MultinomialNb {
        classes: Vec<u8>,
        log_priors: Vec<f64>,
        feature_log_prob: Vec<Vec<f64>>,
    },
    BernoulliNb {
        classes: Vec<u8>,
        log_priors: Vec<f64>,
        log_p: Vec<Vec<f64>>,
        log_not_p: Vec<Vec<f64>>,
        absent_base: Vec<f64>,
    },
    DecisionTree {
        nodes: Vec<TreeNode>,
    },
}

fn distinct_classes(y: &[u8]) -> Result<Vec<u8>> {
    if y.is_empty() {
        return Err(Error::EmptyInput("classifier needs at least one label".into()));
    }
    if let Some(bad) = y.iter().find(|&&c| !(1..=5).contains(&c)) {
        return Err(Error::Data(format!("label {bad} outside 1..=5")));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    Ok(classes)
}

fn check_rows(x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Argmax over per-class scores; ties go to the smaller class.
fn argmax_class(classes: &[u8], scores: &[f64]) -> u8 {
    let mut best = 0usize;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    classes[best]
}

impl ClassifierModel {
    /// One-vs-rest linear SVM trained per class with Pegasos updates:
    /// step 1/(lambda*t), shrink (1 - 1/t), unregularized bias moved only on
    /// margin violations.
    pub fn fit_linear_svm_ovr(x: &FeatureMatrix, y: &[u8], cfg: &SvmConfig) -> Result<Self> {
        check_rows(x, y)?;
        let classes = distinct_classes(y)?;
        if cfg.epochs < 1 || cfg.lambda <= 0.0 {
            return Err(Error::Config("svm needs epochs >= 1 and lambda > 0".into()));
        }
        let n = x.n_rows();
        let dim = x.n_cols;
        let mut weights = Vec::with_capacity(classes.len());
        let mut biases = Vec::with_capacity(classes.len());

        for (ci, &class) in classes.iter().enumerate() {
            let mut v = vec![0.0f64; dim];
            let mut scale = 1.0f64;
            let mut bias = 0.0f64;
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(ci as u64));
            let mut t: u64 = 0;

            for _ in 0..cfg.epochs {
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    order.swap(i, j);
                }
                for &idx in &order {
                    t += 1;
                    let eta = 1.0 / (cfg.lambda * t as f64);
                    let label = if y[idx] == class { 1.0 } else { -1.0 };
                    let row = &x.rows[idx];
                    let margin = label * (scale * row.dot_dense(&v) + bias);
                    let shrink = 1.0 - 1.0 / t as f64;
                    if shrink == 0.0 {
                        // first step zeroes the weights entirely
                        v.iter_mut().for_each(|w| *w = 0.0);
                        scale = 1.0;
                    } else {
                        scale *= shrink;
                    }
                    if margin < 1.0 {
                        for (col, val) in row.iter() {
                            v[col as usize] += eta * label * val / scale;
                        }
                        bias += eta * label;
                    }
                    if scale.abs() < 1e-9 {
                        for w in &mut v {
                            *w *= scale;
                        }
                        scale = 1.0;
                    }
                }
            }
            weights.push(v.iter().map(|w| w * scale).collect());
            biases.push(bias);
        }
        Ok(ClassifierModel::LinearSvmOvr {
            classes,
            weights,
            biases,
        })
    }

    /// Multinomial Naive Bayes over nonnegative counts with Laplace
    /// smoothing.
    pub fn fit_multinomial_nb(x_counts: &FeatureMatrix, y: &[u8], alpha: f64) -> Result<Self> {
        check_rows(x_counts, y)?;
        let classes = distinct_classes(y)?;
        if alpha <= 0.0 {
            return Err(Error::Config("nb smoothing alpha must be > 0".into()));
        }
        let dim = x_counts.n_cols;
        let n = y.len() as f64;
        let class_index: BTreeMap<u8, usize> =
            classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut class_counts = vec![0f64; classes.len()];
        let mut feature_counts = vec![vec![0f64; dim]; classes.len()];
        let mut feature_totals = vec![0f64; classes.len()];
        for (row, &label) in x_counts.rows.iter().zip(y) {
            let ci = class_index[&label];
            class_counts[ci] += 1.0;
            for (col, val) in row.iter() {
                if val < 0.0 {
                    return Err(Error::Data(format!(
                        "multinomial NB requires nonnegative features, got {val}"
                    )));
                }
                feature_counts[ci][col as usize] += val;
                feature_totals[ci] += val;
            }
        }
        let log_priors = class_counts.iter().map(|c| (c / n).ln()).collect();
        let feature_log_prob = feature_counts
            .iter()
            .zip(&feature_totals)
            .map(|(counts, total)| {
                let denom = total + alpha * dim as f64;
                counts.iter().map(|c| ((c + alpha) / denom).ln()).collect()
            })
            .collect();
        Ok(ClassifierModel::MultinomialNb {
            classes,
            log_priors,
            feature_log_prob,
        })
    }

    /// Bernoulli Naive Bayes over binarized presence (value > 0).
    pub fn fit_bernoulli_nb(x: &FeatureMatrix, y: &[u8], alpha: f64) -> Result<Self> {
        check_rows(x, y)?;
        let classes = distinct_classes(y)?;
        if alpha <= 0.0 {
            return Err(Error::Config("nb smoothing alpha must be > 0".into()));
        }
        let dim = x.n_cols;
        let n = y.len() as f64;
        let class_index: BTreeMap<u8, usize> =
            classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut class_counts = vec![0f64; classes.len()];
        let mut present_counts = vec![vec![0f64; dim]; classes.len()];
        for (row, &label) in x.rows.iter().zip(y) {
            let ci = class_index[&label];
            class_counts[ci] += 1.0;
            for (col, val) in row.iter() {
                if val > 0.0 {
                    present_counts[ci][col as usize] += 1.0;
                }
            }
        }
        let log_priors: Vec<f64> = class_counts.iter().map(|c| (c / n).ln()).collect();
        let mut log_p = Vec::with_capacity(classes.len());
        let mut log_not_p = Vec::with_capacity(classes.len());
        let mut absent_base = Vec::with_capacity(classes.len());
        for (ci, counts) in present_counts.iter().enumerate() {
            let denom = class_counts[ci] + 2.0 * alpha;
            let lp: Vec<f64> = counts.iter().map(|c| ((c + alpha) / denom).ln()).collect();
            let lnp: Vec<f64> = counts
                .iter()
                .map(|c| ((class_counts[ci] - c + alpha) / denom).ln())
                .collect();
            absent_base.push(lnp.iter().sum());
            log_p.push(lp);
            log_not_p.push(lnp);
        }
        Ok(ClassifierModel::BernoulliNb {
            classes,
            log_priors,
            log_p,
            log_not_p,
            absent_base,
        })
    }

    /// CART with Gini impurity and deterministic tie-breaking (lowest
    /// feature id, then lowest threshold).
    pub fn fit_decision_tree(x: &FeatureMatrix, y: &[u8], cfg: &TreeConfig) -> Result<Self> {
        check_rows(x, y)?;
        distinct_classes(y)?;
        if cfg.min_leaf < 1 {
            return Err(Error::Config("tree min_leaf must be >= 1".into()));
        }

        // candidate features ranked by nonzero count, ties toward lower id
        let mut nnz_per_col = vec![0u64; x.n_cols];
        for row in &x.rows {
            for (col, _) in row.iter() {
                nnz_per_col[col as usize] += 1;
            }
        }
        let mut candidates: Vec<u32> = (0..x.n_cols as u32).collect();
        if let Some(limit) = cfg.max_features {
            candidates.sort_by(|&a, &b| {
                nnz_per_col[b as usize]
                    .cmp(&nnz_per_col[a as usize])
                    .then(a.cmp(&b))
            });
            candidates.truncate(limit);
            candidates.sort_unstable();
        }

        let mut nodes = Vec::new();
        let samples: Vec<usize> = (0..x.n_rows()).collect();
        build_tree_node(x, y, cfg, &candidates, samples, 0, &mut nodes);
        Ok(ClassifierModel::DecisionTree { nodes })
    }

    /// Per-class decision scores: margins for the SVM, unnormalized log
    /// posteriors for the Bayes models. Trees have no score surface.
    pub fn class_scores(&self, x: &SparseVector) -> Result<Vec<(u8, f64)>> {
        match self {
            ClassifierModel::LinearSvmOvr {
                classes,
                weights,
                biases,
            } => {
                if let Some(max) = x.max_column() {
                    if max as usize >= weights[0].len() {
                        return Err(Error::DimensionMismatch {
                            expected: weights[0].len(),
                            got: max as usize + 1,
                        });
                    }
                }
                Ok(classes
                    .iter()
                    .zip(weights.iter().zip(biases))
                    .map(|(&c, (w, b))| (c, x.dot_dense(w) + b))
                    .collect())
            }
            ClassifierModel::MultinomialNb {
                classes,
                log_priors,
                feature_log_prob,
            } => Ok(classes
                .iter()
                .zip(log_priors.iter().zip(feature_log_prob))
                .map(|(&c, (prior, logp))| {
                    let s = prior
                        + x.iter()
                            .map(|(col, val)| val * logp[col as usize])
                            .sum::<f64>();
                    (c, s)
                })
                .collect()),
            ClassifierModel::BernoulliNb {
                classes,
                log_priors,
                log_p,
                log_not_p,
                absent_base,
            } => Ok((0..classes.len())
                .map(|ci| {
                    let mut s = log_priors[ci] + absent_base[ci];
                    for (col, val) in x.iter() {
                        if val > 0.0 {
                            let j = col as usize;
                            s += log_p[ci][j] - log_not_p[ci][j];
                        }
                    }
                    (classes[ci], s)
                })
                .collect()),
            ClassifierModel::DecisionTree { .. } => Err(Error::Config(
                "decision trees do not expose per-class scores".into(),
            )),
        }
    }

    /// Predicted class for one feature vector; always in 1..=5.
    pub fn predict(&self, x: &SparseVector) -> Result<u8> {
        if let ClassifierModel::DecisionTree { nodes } = self {
            let mut at = 0usize;
            loop {
                match &nodes[at] {
                    TreeNode::Leaf { class } => return Ok(*class),
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        at = if x.get(*feature) <= *threshold {
                            *left
                        } else {
                            *right
                        };
                    }
                }
            }
        }
        let scored = self.class_scores(x)?;
        let classes: Vec<u8> = scored.iter().map(|(c, _)| *c).collect();
        let scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
        Ok(argmax_class(&classes, &scores))
    }
}

fn gini_from_counts(counts: &[u64; 5], total: f64) -> f64 {
    let mut g = 1.0;
    for &c in counts {
        let p = c as f64 / total;
        g -= p * p;
    }
    g
}

fn majority_leaf(y: &[u8], samples: &[usize]) -> TreeNode {
    let counts = count_scores(samples.iter().map(|&i| &y[i]));
    TreeNode::Leaf {
        class: score_mode(&counts),
    }
}

/// Builds one node; returns its index in `nodes`.
fn build_tree_node(
    x: &FeatureMatrix,
    y: &[u8],
    cfg: &TreeConfig,
    candidates: &[u32],
    samples: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let counts = count_scores(samples.iter().map(|&i| &y[i]));
    let n = samples.len() as f64;
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= cfg.max_depth || samples.len() < 2 * cfg.min_leaf {
        nodes.push(majority_leaf(y, &samples));
        return nodes.len() - 1;
    }

    let parent_gini = gini_from_counts(&counts, n);
    let mut best: Option<(f64, u32, f64)> = None; // (weighted impurity, feature, threshold)

    let mut values: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
    for &feature in candidates {
        values.clear();
        for &i in &samples {
            values.push((x.rows[i].get(feature), i));
        }
        values.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let mut left_counts = [0u64; 5];
        let mut left_n = 0usize;
        for k in 0..values.len() - 1 {
            let (val, idx) = values[k];
            left_counts[(y[idx] - 1) as usize] += 1;
            left_n += 1;
            let next_val = values[k + 1].0;
            if next_val == val {
                continue;
            }
            let right_n = samples.len() - left_n;
            if left_n < cfg.min_leaf || right_n < cfg.min_leaf {
                continue;
            }
            let mut right_counts = [0u64; 5];
            for c in 0..5 {
                right_counts[c] = counts[c] - left_counts[c];
            }
            let weighted = (left_n as f64 / n) * gini_from_counts(&left_counts, left_n as f64)
                + (right_n as f64 / n) * gini_from_counts(&right_counts, right_n as f64);
            // strict improvement; scan order makes ties deterministic
            if weighted + 1e-12 < parent_gini && best.is_none_or(|(b, _, _)| weighted < b) {
                let threshold = val + (next_val - val) / 2.0;
                best = Some((weighted, feature, threshold));
            }
        }
    }

    match best {
        None => {
            nodes.push(majority_leaf(y, &samples));
            nodes.len() - 1
        }
        Some((_, feature, threshold)) => {
            let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&i| x.rows[i].get(feature) <= threshold);
            let at = nodes.len();
            nodes.push(TreeNode::Leaf { class: 1 }); // placeholder
            let left = build_tree_node(x, y, cfg, candidates, left_samples, depth + 1, nodes);
            let right = build_tree_node(x, y, cfg, candidates, right_samples, depth + 1, nodes);
            nodes[at] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            };
            at
        }
    }
}
