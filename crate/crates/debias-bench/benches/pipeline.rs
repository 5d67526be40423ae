use criterion::{black_box, criterion_group, criterion_main, Criterion};
use debias_bench::{bench_corpus, bench_docs, bench_split};
use debias_core::bias::BiasTable;
use debias_core::features::{NgramMode, Vocabulary};
use debias_core::lda::{LdaConfig, LdaModel};
use debias_core::pipeline::{evaluate_pipeline, FeatureKind, Method, PipelineConfig};
use debias_core::regress::{LinearRegressor, RegressConfig};

fn bias_table_fit(c: &mut Criterion) {
    let data = bench_corpus(5000);
    c.bench_function("bias_table_fit_5k", |b| {
        b.iter(|| BiasTable::fit(black_box(&data)).unwrap())
    });
}

fn tfidf_vectorize(c: &mut Criterion) {
    let data = bench_corpus(5000);
    let docs = bench_docs(&data);
    let vocab = Vocabulary::build(&docs, NgramMode::UnigramBigram, 25_000).unwrap();
    c.bench_function("vocab_build_5k_bigram", |b| {
        b.iter(|| Vocabulary::build(black_box(&docs), NgramMode::UnigramBigram, 25_000).unwrap())
    });
    c.bench_function("tfidf_vectorize_5k", |b| {
        b.iter(|| {
            for doc in &docs {
                black_box(vocab.tfidf_vector(doc));
            }
        })
    });
}

fn lda_sweeps(c: &mut Criterion) {
    let data = bench_corpus(2000);
    let docs = bench_docs(&data);
    let vocab = Vocabulary::build(&docs, NgramMode::Unigram, 25_000).unwrap();
    let id_docs: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.column(t)).collect())
        .collect();
    c.bench_function("lda_10_sweeps_2k_docs_20_topics", |b| {
        b.iter(|| {
            LdaModel::fit(
                black_box(&id_docs),
                vocab.len(),
                &LdaConfig {
                    n_topics: 20,
                    alpha: None,
                    beta: 0.01,
                    iters: 10,
                    seed: 3,
                },
            )
            .unwrap()
        })
    });
}

fn regressor_fit(c: &mut Criterion) {
    let (train, _) = bench_split(5000);
    let docs = bench_docs(&train);
    let vocab = Vocabulary::build(&docs, NgramMode::Unigram, 25_000).unwrap();
    let rows: Vec<_> = docs.iter().map(|d| vocab.tfidf_vector(d)).collect();
    let x = debias_core::features::FeatureMatrix::new(rows, vocab.len()).unwrap();
    let y: Vec<f64> = train.records.iter().map(|r| r.score as f64).collect();
    c.bench_function("sgd_regressor_10_epochs_4k_rows", |b| {
        b.iter(|| {
            LinearRegressor::fit(black_box(&x), &y, &RegressConfig::default()).unwrap()
        })
    });
}

fn full_pipeline(c: &mut Criterion) {
    let (train, test) = bench_split(2000);
    let cfg = PipelineConfig {
        method: Method::Ubr1,
        feature: FeatureKind::Tfidf,
        ..PipelineConfig::default()
    };
    c.bench_function("ubr1_tfidf_pipeline_2k", |b| {
        b.iter(|| evaluate_pipeline(black_box(&train), &test, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bias_table_fit, tfidf_vectorize, lda_sweeps, regressor_fit, full_pipeline
}
criterion_main!(benches);
