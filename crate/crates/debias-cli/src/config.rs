//! Run configuration: defaults, an INI-style config file, and -S key=value
//! overrides. Flags win over the file; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use debias_core::baselines::{SvmConfig, TreeConfig};
use debias_core::evalkit::RoundingMode;
use debias_core::pipeline::{FeatureKind, Method, PipelineConfig};
use debias_core::pvdbow::PvdbowConfig;
use debias_core::regress::RegressConfig;

/// Every tunable of every stage, as flat key-value pairs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

const KEYS: &[(&str, &str)] = &[
    ("vocab_cap", "25000"),
    ("ngrams", "1"),
    ("lda_topics", "100"),
    ("lda_alpha", "auto"),
    ("lda_beta", "0.01"),
    ("lda_iters", "500"),
    ("lda_burn", "50"),
    ("lda_samples", "20"),
    ("pv_dim", "100"),
    ("pv_negative", "5"),
    ("pv_epochs", "20"),
    ("pv_lr_start", "0.025"),
    ("pv_lr_end", "0.0001"),
    ("pv_min_count", "2"),
    ("pv_infer_steps", "20"),
    ("reg_lambda", "0.0001"),
    ("reg_epochs", "10"),
    ("reg_lr", "0.05"),
    ("svm_lambda", "0.00001"),
    ("svm_epochs", "5"),
    ("nb_alpha", "1.0"),
    ("tree_max_depth", "12"),
    ("tree_min_leaf", "20"),
    ("tree_max_features", "1000"),
    ("tree_full_search", "false"),
    ("rounding", "nearest"),
    ("seed", "42"),
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    /// Loads the base config: defaults, then the file named by `--config` or
    /// the DEBIAS_CONFIG environment variable, then `-S key=value` overrides.
    pub fn load(config_path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        let env_path = std::env::var("DEBIAS_CONFIG").ok();
        let path = config_path.map(Path::to_path_buf).or_else(|| {
            env_path.as_ref().map(std::path::PathBuf::from)
        });
        if let Some(path) = path {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (line_no, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .with_context(|| format!("{}:{}: expected key=value", path.display(), line_no + 1))?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("override {item:?}: expected key=value"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.keys().find(|k| **k == key) {
            Some(&k) => {
                self.values.insert(k, value.to_string());
                Ok(())
            }
            None => bail!("unknown config key {key:?}"),
        }
    }

    fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .parse()
            .map_err(|e| anyhow::anyhow!("config key {key}={:?}: {e}", self.get(key)))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn ngrams(&self) -> Result<u32> {
        self.parse("ngrams")
    }

    /// One line per key, used to log the fully-resolved configuration.
    pub fn render(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_pipeline(&self, method: Method, feature: FeatureKind, ngram: u32) -> Result<PipelineConfig> {
        let lda_alpha = match self.get("lda_alpha") {
            "auto" => None,
            other => Some(
                other
                    .parse::<f64>()
                    .map_err(|e| anyhow::anyhow!("config key lda_alpha: {e}"))?,
            ),
        };
        let tree_max_features = if self.parse::<bool>("tree_full_search")? {
            None
        } else {
            Some(self.parse::<usize>("tree_max_features")?)
        };
        Ok(PipelineConfig {
            method,
            feature,
            ngram,
            vocab_cap: self.parse("vocab_cap")?,
            lda_topics: self.parse("lda_topics")?,
            lda_alpha,
            lda_beta: self.parse("lda_beta")?,
            lda_iters: self.parse("lda_iters")?,
            lda_burn: self.parse("lda_burn")?,
            lda_samples: self.parse("lda_samples")?,
            pv: PvdbowConfig {
                dim: self.parse("pv_dim")?,
                negative_k: self.parse("pv_negative")?,
                epochs: self.parse("pv_epochs")?,
                lr_start: self.parse("pv_lr_start")?,
                lr_end: self.parse("pv_lr_end")?,
                min_count: self.parse("pv_min_count")?,
                infer_steps: self.parse("pv_infer_steps")?,
                seed: 0, // derived from the master seed at fit time
            },
            reg: RegressConfig {
                l2_lambda: self.parse("reg_lambda")?,
                epochs: self.parse("reg_epochs")?,
                learning_rate: self.parse("reg_lr")?,
                seed: 0,
            },
            svm: SvmConfig {
                lambda: self.parse("svm_lambda")?,
                epochs: self.parse("svm_epochs")?,
                seed: 0,
            },
            nb_alpha: self.parse("nb_alpha")?,
            tree: TreeConfig {
                max_depth: self.parse("tree_max_depth")?,
                min_leaf: self.parse("tree_min_leaf")?,
                max_features: tree_max_features,
            },
            rounding: RoundingMode::parse(self.get("rounding"))
                .map_err(|e| anyhow::anyhow!("{e}"))?,
            seed: self.seed()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key() {
        let cfg = RunConfig::default();
        let pipeline = cfg
            .to_pipeline(Method::Ubr1, FeatureKind::Tfidf, 1)
            .unwrap();
        assert_eq!(pipeline.vocab_cap, 25_000);
        assert_eq!(pipeline.lda_topics, 100);
        assert_eq!(pipeline.pv.dim, 100);
        assert_eq!(pipeline.seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("not_a_key", "1").is_err());
        assert!(cfg.set("vocab_cap", "100").is_ok());
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::load(None, &["seed=7".into(), "ngrams=2".into()]).unwrap();
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.ngrams().unwrap(), 2);
    }
}
