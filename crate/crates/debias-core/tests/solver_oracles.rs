//! Solver correctness against independent oracles: closed-form ridge,
//! brute-force Bayes posteriors, finite-difference gradients, and an
//! exhaustive small decision tree.

mod common;

use debias_core::baselines::{ClassifierModel, TreeConfig};
use debias_core::features::{FeatureMatrix, SparseVector};
use debias_core::pvdbow::{ns_gradients, ns_loss};
use debias_core::regress::{LinearRegressor, RegressConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dense_matrix(
    rng: &mut ChaCha8Rng,
    n_rows: usize,
    n_cols: usize,
) -> (FeatureMatrix, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = (0..n_rows)
        .map(|_| (0..n_cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (
        FeatureMatrix::from_dense_rows(&rows, n_cols).unwrap(),
        rows,
    )
}

fn sgd_vs_closed_form(rng: &mut ChaCha8Rng, n_rows: usize, n_cols: usize, lambda: f64) -> (f64, f64) {
    let (x, dense) = random_dense_matrix(rng, n_rows, n_cols);
    // noisy linear target so the optimum is bounded away from zero
    let true_w: Vec<f64> = (0..n_cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y: Vec<f64> = dense
        .iter()
        .map(|row| {
            row.iter().zip(&true_w).map(|(a, b)| a * b).sum::<f64>()
                + 0.5
                + rng.gen_range(-0.5..0.5)
        })
        .collect();

    let cfg = RegressConfig {
        l2_lambda: lambda,
        epochs: 3000,
        learning_rate: 0.1,
        seed: rng.gen(),
    };
    let model = LinearRegressor::fit(&x, &y, &cfg).unwrap();
    let sgd_objective = model.objective(&x, &y);

    let (w_star, b_star) = common::ridge_normal_equations(&x, &y, lambda);
    let optimal = common::ridge_objective(&x, &y, &w_star, b_star, lambda);
    (sgd_objective, optimal)
}

#[test]
fn sgd_matches_normal_equations_on_20x5() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (sgd, optimal) = sgd_vs_closed_form(&mut rng, 20, 5, 1e-3);
    let gap = (sgd - optimal) / optimal;
    assert!(gap >= -1e-9, "sgd beat the exact optimum: {sgd} vs {optimal}");
    assert!(gap < 1e-3, "relative objective gap {gap}");
}

#[test]
fn sgd_matches_normal_equations_on_50_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        // mostly small instances, a few up to 100 features
        let n_cols = if trial % 10 == 9 {
            rng.gen_range(50..=100)
        } else {
            rng.gen_range(1..=15)
        };
        let n_rows = 3 * n_cols + rng.gen_range(5..=30);
        let lambda = [0.0, 1e-4, 1e-3, 1e-2][trial % 4];
        let (sgd, optimal) = sgd_vs_closed_form(&mut rng, n_rows, n_cols, lambda);
        let gap = (sgd - optimal) / optimal;
        assert!(
            (-1e-9..1e-3).contains(&gap),
            "trial {trial} ({n_rows}x{n_cols}, lambda {lambda}): gap {gap}"
        );
        worst = worst.max(gap);
    }
    assert!(worst < 1e-3);
}

#[test]
fn perfect_fit_prediction_matches_target() {
    // interpolating instance: prediction on a training point equals its target
    let x = FeatureMatrix::from_dense_rows(&[vec![1.0], vec![2.0]], 1).unwrap();
    let y = vec![2.0, 4.0];
    let cfg = RegressConfig {
        l2_lambda: 0.0,
        epochs: 120_000,
        learning_rate: 0.15,
        seed: 5,
    };
    let model = LinearRegressor::fit(&x, &y, &cfg).unwrap();
    for (row, target) in x.rows.iter().zip(&y) {
        assert!((model.predict(row).unwrap() - target).abs() < 1e-3);
    }
    // closed form on the same instance: w = 2, b = 0
    let (w, b) = common::ridge_normal_equations(&x, &y, 0.0);
    assert!((w[0] - 2.0).abs() < 1e-9);
    assert!(b.abs() < 1e-9);
}

#[test]
fn nb_log_posteriors_match_bruteforce_probabilities() {
    // 3-word instance with fractional and integer counts
    let rows = vec![
        vec![2.0, 0.0, 1.0],
        vec![0.0, 3.0, 0.0],
        vec![1.0, 1.0, 0.0],
        vec![0.0, 0.0, 2.0],
        vec![2.0, 1.0, 0.0],
    ];
    let x = FeatureMatrix::from_dense_rows(&rows, 3).unwrap();
    let y = vec![1u8, 3, 3, 5, 1];
    let alpha = 1.0;
    let model = ClassifierModel::fit_multinomial_nb(&x, &y, alpha).unwrap();

    let queries = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 2.0, 1.0],
        vec![3.0, 1.0, 2.0],
        vec![0.0, 0.0, 0.0],
    ];
    for q in queries {
        let sparse = SparseVector::from_dense(&q);
        let log_scores = model.class_scores(&sparse).unwrap();
        // softmax-normalize the model's log posteriors
        let max = log_scores.iter().map(|(_, s)| *s).fold(f64::MIN, f64::max);
        let exp: Vec<(u8, f64)> = log_scores.iter().map(|(c, s)| (*c, (s - max).exp())).collect();
        let z: f64 = exp.iter().map(|(_, e)| e).sum();
        let model_posterior: Vec<(u8, f64)> = exp.into_iter().map(|(c, e)| (c, e / z)).collect();

        let oracle = common::nb_bruteforce_posterior(&x, &y, alpha, &q);
        assert_eq!(model_posterior.len(), oracle.len());
        for ((c1, p1), (c2, p2)) in model_posterior.iter().zip(&oracle) {
            assert_eq!(c1, c2);
            assert!(
                (p1 - p2).abs() < 1e-9,
                "class {c1}: model {p1} vs brute force {p2}"
            );
        }
    }
}

#[test]
fn pvdbow_gradients_match_central_finite_differences() {
    // 3-word vocabulary, 2 documents, dim 4
    let docs = [
        vec![0.12f64, -0.31, 0.25, 0.08],
        vec![-0.05, 0.17, -0.22, 0.3],
    ];
    let words = [
        vec![0.21f64, 0.05, -0.17, 0.32],
        vec![-0.28, 0.13, 0.4, -0.09],
        vec![0.02, -0.35, 0.11, 0.24],
    ];
    let eps = 1e-5;
    let rel_err = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1e-8);

    for (doc_idx, target_idx, negs_idx) in [(0usize, 0usize, [1usize, 2]), (1, 2, [0, 1])] {
        let doc = docs[doc_idx].clone();
        let target = words[target_idx].clone();
        let negs: Vec<Vec<f64>> = negs_idx.iter().map(|&i| words[i].clone()).collect();
        let grads = ns_gradients(&doc, &target, &negs);

        // finite differences on the document vector
        for i in 0..doc.len() {
            let mut plus = doc.clone();
            plus[i] += eps;
            let mut minus = doc.clone();
            minus[i] -= eps;
            let fd = (ns_loss(&plus, &target, &negs) - ns_loss(&minus, &target, &negs)) / (2.0 * eps);
            assert!(
                rel_err(fd, grads.doc[i]) < 1e-4,
                "doc[{i}]: fd {fd} vs analytic {}",
                grads.doc[i]
            );
        }
        // on the target word vector
        for i in 0..target.len() {
            let mut plus = target.clone();
            plus[i] += eps;
            let mut minus = target.clone();
            minus[i] -= eps;
            let fd = (ns_loss(&doc, &plus, &negs) - ns_loss(&doc, &minus, &negs)) / (2.0 * eps);
            assert!(
                rel_err(fd, grads.target[i]) < 1e-4,
                "target[{i}]: fd {fd} vs analytic {}",
                grads.target[i]
            );
        }
        // on every negative vector
        for (j, neg) in negs.iter().enumerate() {
            for i in 0..neg.len() {
                let mut plus = negs.clone();
                plus[j][i] += eps;
                let mut minus = negs.clone();
                minus[j][i] -= eps;
                let fd =
                    (ns_loss(&doc, &target, &plus) - ns_loss(&doc, &target, &minus)) / (2.0 * eps);
                assert!(
                    rel_err(fd, grads.negatives[j][i]) < 1e-4,
                    "neg[{j}][{i}]: fd {fd} vs analytic {}",
                    grads.negatives[j][i]
                );
            }
        }
    }
}

#[test]
fn greedy_tree_beats_exhaustive_depth2_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (x, _) = random_dense_matrix(&mut rng, 30, 4);
    let y: Vec<u8> = (0..30).map(|_| rng.gen_range(1..=5)).collect();

    let cfg = TreeConfig {
        max_depth: 8,
        min_leaf: 1,
        max_features: None,
    };
    let model = ClassifierModel::fit_decision_tree(&x, &y, &cfg).unwrap();
    let tree_correct = x
        .rows
        .iter()
        .zip(&y)
        .filter(|(row, &label)| model.predict(row).unwrap() == label)
        .count();
    let tree_accuracy = tree_correct as f64 / y.len() as f64;
    let oracle_accuracy = common::best_depth2_tree_accuracy(&x, &y);
    assert!(
        tree_accuracy >= oracle_accuracy,
        "greedy {tree_accuracy} < exhaustive depth-2 {oracle_accuracy}"
    );
}
