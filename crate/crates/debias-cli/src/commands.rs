//! The six subcommands: ingest, split, train, predict, evaluate, synth.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use debias_core::bundle;
use debias_core::corpus::{self, Dataset, SplitSpec};
use debias_core::evalkit::EvalReport;
use debias_core::pipeline::{evaluate_pipeline, FeatureKind, Method, PipelineModel};
use debias_core::synth::{generate, SynthSpec};

use crate::config::RunConfig;

fn read_corpus(path: &Path) -> Result<Dataset> {
    let dataset = corpus::read_corpus_file(path)
        .with_context(|| format!("reading corpus {}", path.display()))?;
    if dataset.is_empty() {
        bail!(debias_core::Error::EmptyInput(format!(
            "corpus {} holds no records",
            path.display()
        )));
    }
    Ok(dataset)
}

fn write_corpus(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    corpus::write_canonical(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn ingest(input: &Path, format: &str, output: &Path) -> Result<()> {
    let file =
        File::open(input).with_context(|| format!("opening input {}", input.display()))?;
    let reader = BufReader::new(file);
    let tag = input.display().to_string();
    let (dataset, report) = match format {
        "csv" => corpus::parse_csv(reader, &tag)?,
        "jsonl" => corpus::parse_jsonl(reader, &tag)?,
        other => bail!(debias_core::Error::Config(format!(
            "unknown input format {other:?}"
        ))),
    };
    if dataset.is_empty() {
        bail!(debias_core::Error::Data(format!(
            "no records parsed from {}",
            input.display()
        )));
    }
    for err in report.errors.iter().take(10) {
        eprintln!("line {}: skipped: {}", err.line, err.reason);
    }
    if report.skipped > report.errors.len() {
        eprintln!("... and {} more skipped rows", report.skipped - report.errors.len());
    }
    write_corpus(&dataset, output)?;
    eprintln!(
        "ingested {} records ({} skipped) -> {}",
        report.parsed,
        report.skipped,
        output.display()
    );
    Ok(())
}

pub fn split(
    input: &Path,
    ratio: &str,
    seed: u64,
    train_out: &Path,
    test_out: &Path,
) -> Result<()> {
    let dataset = read_corpus(input)?;
    let spec = SplitSpec::parse_ratio(ratio, seed)?;
    let (train, test) = corpus::train_test_split(&dataset, &spec)?;
    write_corpus(&train, train_out)?;
    write_corpus(&test, test_out)?;
    eprintln!(
        "split {} records into {} train / {} test (ratio {}, seed {})",
        dataset.len(),
        train.len(),
        test.len(),
        ratio,
        seed
    );
    Ok(())
}

pub fn train(
    input: &Path,
    method: &str,
    features: &str,
    ngrams: u32,
    out: &Path,
    run_config: &RunConfig,
) -> Result<()> {
    let method = Method::parse(method)?;
    let feature = FeatureKind::parse(features)?;
    let cfg = run_config.to_pipeline(method, feature, ngrams)?;
    cfg.validate()?;
    eprintln!(
        "train method={method} features={feature} ngrams={ngrams} {}",
        run_config.render()
    );
    let dataset = read_corpus(input)?;
    let model = PipelineModel::fit(&dataset, &cfg)?;
    let mut writer = BufWriter::new(
        File::create(out).with_context(|| format!("creating {}", out.display()))?,
    );
    bundle::save(&model, &mut writer)?;
    writer.flush()?;
    eprintln!("wrote bundle {}", out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct PredictionLine<'a> {
    review_id: &'a str,
    user_id: &'a str,
    product_id: &'a str,
    true_score: u8,
    raw: f64,
    #[serde(rename = "final")]
    final_score: u8,
    fallback: bool,
}

pub fn predict(bundle_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = bundle::load_file(bundle_path)
        .with_context(|| format!("loading bundle {}", bundle_path.display()))?;
    let dataset = read_corpus(input)?;
    let mut writer = BufWriter::new(
        File::create(out).with_context(|| format!("creating {}", out.display()))?,
    );
    let mut fallbacks = 0usize;
    for record in &dataset.records {
        let p = model.predict_record(record)?;
        fallbacks += p.fallback as usize;
        serde_json::to_writer(
            &mut writer,
            &PredictionLine {
                review_id: &record.review_id,
                user_id: &record.user_id,
                product_id: &record.product_id,
                true_score: record.score,
                raw: p.raw,
                final_score: p.final_score,
                fallback: p.fallback,
            },
        )?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    eprintln!(
        "predicted {} records ({} cold-start fallbacks) -> {}",
        dataset.len(),
        fallbacks,
        out.display()
    );
    Ok(())
}

pub struct EvaluateArgs {
    pub bundles: Vec<PathBuf>,
    pub grid: bool,
    pub train: Option<PathBuf>,
    pub methods: Option<String>,
    pub features: Option<String>,
    pub ngrams: Option<String>,
    pub test: PathBuf,
    pub out: Option<PathBuf>,
    pub dump: Option<PathBuf>,
}

const ALL_METHODS: &[&str] = &[
    "majority",
    "user-mean",
    "user-mode",
    "product-mean",
    "product-mode",
    "linear-svm",
    "multinomial-nb",
    "bernoulli-nb",
    "decision-tree",
    "ubr1",
    "ubr2",
    "none",
];

pub fn evaluate(args: &EvaluateArgs, run_config: &RunConfig) -> Result<()> {
    let test = read_corpus(&args.test)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut failures = 0usize;

    if args.grid {
        if !args.bundles.is_empty() {
            bail!(debias_core::Error::Config(
                "--grid and --bundle are mutually exclusive".into()
            ));
        }
        let train_path = args
            .train
            .as_ref()
            .ok_or_else(|| debias_core::Error::Config("--grid needs --train".into()))?;
        let train = read_corpus(train_path)?;

        let methods: Vec<Method> = match &args.methods {
            Some(list) => list
                .split(',')
                .map(|m| Method::parse(m.trim()))
                .collect::<debias_core::Result<_>>()?,
            None => ALL_METHODS
                .iter()
                .map(|m| Method::parse(m).unwrap())
                .collect(),
        };
        let features: Vec<FeatureKind> = match &args.features {
            Some(list) => list
                .split(',')
                .map(|f| FeatureKind::parse(f.trim()))
                .collect::<debias_core::Result<_>>()?,
            None => vec![FeatureKind::Tfidf, FeatureKind::Lda, FeatureKind::Pvdbow],
        };
        let ngram_list: Vec<u32> = match &args.ngrams {
            Some(list) => list
                .split(',')
                .map(|n| n.trim().parse::<u32>().context("bad --ngrams entry"))
                .collect::<Result<_>>()?,
            None => vec![run_config.ngrams()?],
        };

        eprintln!("evaluate grid {}", run_config.render());
        for &ngram in &ngram_list {
            for &method in &methods {
                for &feature in &features {
                    // bigrams only exist for the tf-idf backend
                    if ngram > 1 && feature != FeatureKind::Tfidf && method.uses_features() {
                        eprintln!("skip {method} x {feature} (ngram {ngram}): not applicable");
                        continue;
                    }
                    let cfg = run_config.to_pipeline(method, feature, ngram)?;
                    match evaluate_pipeline(&train, &test, &cfg) {
                        Ok((_, report)) => reports.push(report),
                        Err(e) => {
                            failures += 1;
                            eprintln!("error {method} x {feature} (ngram {ngram}): {e}");
                        }
                    }
                }
            }
        }
    } else {
        if args.bundles.is_empty() {
            bail!(debias_core::Error::Config(
                "evaluate needs --bundle files or --grid".into()
            ));
        }
        for path in &args.bundles {
            let model = bundle::load_file(path)
                .with_context(|| format!("loading bundle {}", path.display()))?;
            reports.push(model.evaluate(&test)?);
        }
    }

    if reports.is_empty() {
        bail!(debias_core::Error::Data(format!(
            "no evaluations succeeded ({failures} failed)"
        )));
    }

    let mut table = String::from(EvalReport::TSV_HEADER);
    table.push('\n');
    for report in &reports {
        table.push_str(&report.tsv_row());
        table.push('\n');
    }
    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }

    if args.grid && reports.len() > 1 {
        print_matrix(&reports);
    }

    if let Some(dir) = &args.dump {
        std::fs::create_dir_all(dir)?;
        for report in &reports {
            let name = format!("{}_{}_{}.jsonl", report.method, report.feature, report.ngram);
            let mut writer = BufWriter::new(File::create(dir.join(&name))?);
            report.dump_jsonl(&mut writer)?;
            writer.flush()?;
        }
        eprintln!("wrote per-record dumps to {}", dir.display());
    }
    Ok(())
}

/// Human-readable matrix on stderr: rows = method (bigram rows suffixed),
/// columns = feature backends.
fn print_matrix(reports: &[EvalReport]) {
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in reports {
        let row = if r.ngram > 1 {
            format!("{} (bi)", r.method)
        } else {
            r.method.clone()
        };
        if !columns.contains(&r.feature) {
            columns.push(r.feature.clone());
        }
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        cells.insert((row, r.feature.clone()), r.rmse);
    }
    let mut out = String::from("\nmethod");
    for c in &columns {
        out.push_str(&format!("\t{c}"));
    }
    out.push('\n');
    for row in &rows {
        out.push_str(row);
        for c in &columns {
            match cells.get(&(row.clone(), c.clone())) {
                Some(v) => out.push_str(&format!("\t{v:.3}")),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    eprint!("{out}");
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    users: usize,
    products: usize,
    reviews: usize,
    bias_min: f64,
    bias_max: f64,
    scale_min: f64,
    scale_max: f64,
    noise_std: f64,
    seed: u64,
    out: &Path,
    truth_out: Option<&Path>,
) -> Result<()> {
    let spec = SynthSpec {
        n_users: users,
        n_products: products,
        n_reviews: reviews,
        bias_range: (bias_min, bias_max),
        scale_range: (scale_min, scale_max),
        noise_std,
        seed,
        ..SynthSpec::default()
    };
    let (dataset, truth) = generate(&spec)?;
    write_corpus(&dataset, out)?;
    if let Some(truth_path) = truth_out {
        let json = serde_json::to_vec_pretty(&truth)?;
        std::fs::write(truth_path, json)?;
    }
    eprintln!(
        "generated {} reviews for {} users x {} products (seed {}) -> {}",
        reviews,
        users,
        products,
        seed,
        out.display()
    );
    Ok(())
}
