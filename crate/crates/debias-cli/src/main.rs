//! Command-line front end for review score prediction with user-bias
//! removal.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "debias",
    version,
    about = "Predict 1-5 review scores from text with per-user bias removal"
)]
struct Cli {
    /// INI-style config file (flat key=value); defaults to $DEBIAS_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. -S seed=7. Repeatable; wins over the file.
    #[arg(short = 'S', long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw CSV/JSONL review dump into the canonical corpus format.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Input schema: the Fine Food CSV layout or SNAP-style JSON lines.
        #[arg(long, value_parser = ["csv", "jsonl"])]
        format: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Seeded train/test split of a canonical corpus.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Train fraction as a decimal ("0.8") or rational ("4/5").
        #[arg(long, default_value = "0.8")]
        ratio: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Fit a pipeline on a training corpus and write a model bundle.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// ubr1 | ubr2 | none | majority | user-mean | user-mode |
        /// product-mean | product-mode | linear-svm | multinomial-nb |
        /// bernoulli-nb | decision-tree
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "tfidf", value_parser = ["tfidf", "lda", "pvdbow"])]
        features: String,
        /// 1 = unigrams, 2 = unigrams+bigrams (tf-idf only).
        #[arg(long)]
        ngrams: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a corpus through a bundle, emitting raw and final scores.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score bundles (or a freshly trained grid) on a test corpus.
    Evaluate {
        /// Bundle file; repeatable.
        #[arg(long)]
        bundle: Vec<PathBuf>,
        /// Train and evaluate a method x feature grid instead of bundles.
        #[arg(long)]
        grid: bool,
        /// Training corpus (grid mode).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Comma-separated method list (grid mode; default: all).
        #[arg(long)]
        methods: Option<String>,
        /// Comma-separated feature list (grid mode; default: all).
        #[arg(long)]
        features: Option<String>,
        /// Comma-separated ngram orders (grid mode; default: config value).
        #[arg(long)]
        ngrams: Option<String>,
        #[arg(long)]
        test: PathBuf,
        /// Also write the TSV table here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-record JSONL dumps, one file per table row.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Generate a synthetic biased corpus with ground truth.
    Synth {
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        products: usize,
        #[arg(long, default_value_t = 5000)]
        reviews: usize,
        #[arg(long, default_value_t = -1.5)]
        bias_min: f64,
        #[arg(long, default_value_t = 1.5)]
        bias_max: f64,
        #[arg(long, default_value_t = 1.0)]
        scale_min: f64,
        #[arg(long, default_value_t = 1.0)]
        scale_max: f64,
        #[arg(long, default_value_t = 0.25)]
        noise_std: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON sidecar with per-user bias/scale and per-review latent scores.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<debias_core::Error>() {
            return match core {
                debias_core::Error::Config(_) => 1,
                debias_core::Error::Data(_)
                | debias_core::Error::TooManyBadRecords { .. }
                | debias_core::Error::EmptyInput(_)
                | debias_core::Error::Io(_)
                | debias_core::Error::Json(_) => 2,
                debias_core::Error::Bundle(_)
                | debias_core::Error::NonFinite(_)
                | debias_core::Error::DimensionMismatch { .. } => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let run_config = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Ingest {
            input,
            format,
            output,
        } => commands::ingest(&input, &format, &output),
        Command::Split {
            input,
            ratio,
            seed,
            train_out,
            test_out,
        } => commands::split(&input, &ratio, seed, &train_out, &test_out),
        Command::Train {
            input,
            method,
            features,
            ngrams,
            out,
        } => {
            let ngrams = match ngrams {
                Some(n) => n,
                None => run_config.ngrams()?,
            };
            commands::train(&input, &method, &features, ngrams, &out, &run_config)
        }
        Command::Predict { bundle, input, out } => commands::predict(&bundle, &input, &out),
        Command::Evaluate {
            bundle,
            grid,
            train,
            methods,
            features,
            ngrams,
            test,
            out,
            dump,
        } => commands::evaluate(
            &commands::EvaluateArgs {
                bundles: bundle,
                grid,
                train,
                methods,
                features,
                ngrams,
                test,
                out,
                dump,
            },
            &run_config,
        ),
        Command::Synth {
            users,
            products,
            reviews,
            bias_min,
            bias_max,
            scale_min,
            scale_max,
            noise_std,
            seed,
            out,
            truth_out,
        } => commands::synth(
            users,
            products,
            reviews,
            bias_min,
            bias_max,
            scale_min,
            scale_max,
            noise_std,
            seed,
            &out,
            truth_out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, anything else a usage error
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
