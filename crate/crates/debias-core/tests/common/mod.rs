#![allow(clippy::needless_range_loop)]

//! Independent oracles shared by the integration and acceptance suites.
//! Everything here recomputes results from first principles, separate from
//! the library's production code paths.

#![allow(dead_code)]

use debias_core::features::FeatureMatrix;

/// Solves the ridge least-squares problem exactly through the normal
/// equations (intercept unregularized), using dense Gaussian elimination
/// with partial pivoting. Only suitable for small instances.
pub fn ridge_normal_equations(x: &FeatureMatrix, y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.n_rows();
    let d = x.n_cols;
    let nf = n as f64;

    // dense copy of X
    let mut dense = vec![vec![0.0f64; d]; n];
    for (i, row) in x.rows.iter().enumerate() {
        for (c, v) in row.iter() {
            dense[i][c as usize] = v;
        }
    }

    // augmented system over [w; b]
    let m = d + 1;
    let mut a = vec![vec![0.0f64; m]; m];
    let mut rhs = vec![0.0f64; m];
    for i in 0..n {
        for j in 0..d {
            for k in 0..d {
                a[j][k] += dense[i][j] * dense[i][k] / nf;
            }
            a[j][d] += dense[i][j] / nf;
            rhs[j] += dense[i][j] * y[i] / nf;
        }
        rhs[d] += y[i] / nf;
    }
    for j in 0..d {
        a[j][j] += lambda;
        a[d][j] = a[j][d];
    }
    a[d][d] = 1.0;

    let solution = solve_linear_system(a, rhs);
    let (weights, intercept) = solution.split_at(d);
    (weights.to_vec(), intercept[0])
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear_system(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-12, "singular system");
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// The ridge objective evaluated from scratch.
pub fn ridge_objective(x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.n_rows() as f64;
    let sse: f64 = x
        .rows
        .iter()
        .zip(y)
        .map(|(row, target)| {
            let pred: f64 = row.iter().map(|(c, v)| v * w[c as usize]).sum::<f64>() + b;
            (pred - target) * (pred - target)
        })
        .sum();
    sse / n + lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Brute-force multinomial Naive Bayes posterior, computed in probability
/// space straight from the training matrix. Returns (class, P(class|x)).
pub fn nb_bruteforce_posterior(
    x_train: &FeatureMatrix,
    y_train: &[u8],
    alpha: f64,
    query: &[f64],
) -> Vec<(u8, f64)> {
    let mut classes: Vec<u8> = y_train.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let d = x_train.n_cols;

    let mut joint = Vec::new();
    for &c in &classes {
        let rows: Vec<usize> = (0..y_train.len()).filter(|&i| y_train[i] == c).collect();
        let prior = rows.len() as f64 / y_train.len() as f64;
        let mut feature_sum = vec![0.0f64; d];
        let mut total = 0.0f64;
        for &i in &rows {
            for (col, v) in x_train.rows[i].iter() {
                feature_sum[col as usize] += v;
                total += v;
            }
        }
        let mut likelihood = 1.0f64;
        for (j, &q) in query.iter().enumerate() {
            let p = (feature_sum[j] + alpha) / (total + alpha * d as f64);
            likelihood *= p.powf(q);
        }
        joint.push((c, prior * likelihood));
    }
    let z: f64 = joint.iter().map(|(_, p)| p).sum();
    joint.into_iter().map(|(c, p)| (c, p / z)).collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Value at the given percentile (0..=100) of a sample, nearest-rank.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

/// Purity of a 2-topic, 2-word count table under the best topic-to-word
/// matching.
pub fn two_topic_purity(counts: &[u64], vocab_size: usize) -> f64 {
    assert!(vocab_size >= 2);
    let cell = |t: usize, w: usize| counts[t * vocab_size + w] as f64;
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let straight = cell(0, 0) + cell(1, 1);
    let crossed = cell(0, 1) + cell(1, 0);
    straight.max(crossed) / total
}

/// Best achievable training accuracy of any depth<=2 axis-aligned decision
/// tree, found by exhaustive search.
pub fn best_depth2_tree_accuracy(x: &FeatureMatrix, y: &[u8]) -> f64 {
    let all: Vec<usize> = (0..y.len()).collect();
    let correct = best_subtree_correct(x, y, &all, 2);
    correct as f64 / y.len() as f64
}

fn majority_count(y: &[u8], samples: &[usize]) -> usize {
    let mut counts = [0usize; 5];
    for &i in samples {
        counts[(y[i] - 1) as usize] += 1;
    }
    counts.into_iter().max().unwrap()
}

fn thresholds_for(x: &FeatureMatrix, samples: &[usize], feature: u32) -> Vec<f64> {
    let mut vals: Vec<f64> = samples.iter().map(|&i| x.rows[i].get(feature)).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
}

fn best_subtree_correct(x: &FeatureMatrix, y: &[u8], samples: &[usize], depth: usize) -> usize {
    let mut best = majority_count(y, samples);
    if depth == 0 || samples.len() < 2 {
        return best;
    }
    for feature in 0..x.n_cols as u32 {
        for threshold in thresholds_for(x, samples, feature) {
            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&i| x.rows[i].get(feature) <= threshold);
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let correct = best_subtree_correct(x, y, &left, depth - 1)
                + best_subtree_correct(x, y, &right, depth - 1);
            best = best.max(correct);
        }
    }
    best
}
