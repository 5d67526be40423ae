//! Review score prediction with user-bias removal.
//!
//! The library covers the full pipeline: corpus ingestion and splitting,
//! per-user bias statistics and the two invertible debias transforms,
//! tf-idf / topic-model / paragraph-vector text features, a sparse SGD
//! ridge regressor, the non-debiasing baselines, RMSE evaluation, a
//! synthetic biased-corpus generator, and a deterministic model bundle
//! container.

pub mod baselines;
pub mod bias;
pub mod bundle;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod features;
pub mod lda;
pub mod pipeline;
pub mod pvdbow;
pub mod regress;
pub mod synth;

pub use baselines::{AggKind, ClassifierModel, StatBaselineModel, StatKind, SvmConfig, TreeConfig};
pub use bias::{
    fit_product_stats, fit_user_net_bias, fit_user_stats, ubr1_denormalize, ubr1_normalize,
    ubr2_denormalize, ubr2_normalize, BiasTable, ProductStats, UserBias, UserStats,
};
pub use corpus::{
    parse_csv, parse_jsonl, read_corpus_file, train_test_split, write_canonical, Dataset,
    ParseReport, ReviewRecord, SplitSpec,
};
pub use error::{Error, Result};
pub use evalkit::{rmse, round_clamp, round_clamp_mode, EvalReport, RecordEval, RoundingMode};
pub use features::{tokenize, FeatureMatrix, NgramMode, SparseVector, Vocabulary};
pub use lda::{LdaConfig, LdaModel};
pub use pipeline::{
    derive_seed, evaluate_pipeline, BaselineKind, FeatureKind, Method, PipelineConfig,
    PipelineModel, Prediction, Predictor,
};
pub use pvdbow::{ns_gradients, ns_loss, PvdbowConfig, PvdbowModel};
pub use regress::{LinearRegressor, RegressConfig};
pub use synth::{generate, SynthSpec, SynthTruth};
