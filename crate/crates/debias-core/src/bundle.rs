//! Single-file model container: a JSON manifest followed by the serialized
//! component blobs, each checksummed.
//!
//! The layout is byte-deterministic for a given (training data, config)
//! pair: no timestamps, sorted maps everywhere, and every float written
//! either in binary or through serde_json's round-trippable formatting.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::baselines::{ClassifierModel, StatBaselineModel};
use crate::bias::BiasTable;
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::lda::LdaModel;
use crate::pipeline::{FeatureKind, Method, PipelineConfig, PipelineModel, Predictor};
use crate::pvdbow::PvdbowModel;
use crate::regress::LinearRegressor;

const MAGIC: &[u8; 8] = b"DBIASML1";
const FORMAT_VERSION: u32 = 1;

/// FNV-1a 64-bit, used to pin blob integrity inside the manifest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    len: u64,
    checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    tool: String,
    method: String,
    feature: String,
    ngram: u32,
    config: PipelineConfig,
    blobs: Vec<BlobEntry>,
}

#[derive(Serialize, Deserialize)]
struct PredictorDoc<T> {
    format_version: u32,
    model: T,
}

fn predictor_blob(predictor: &Predictor) -> Result<Vec<u8>> {
    match predictor {
        Predictor::Linear(model) => model.to_bytes(),
        Predictor::Stat(model) => Ok(serde_json::to_vec(&PredictorDoc {
            format_version: 1,
            model,
        })?),
        Predictor::Classifier(model) => Ok(serde_json::to_vec(&PredictorDoc {
            format_version: 1,
            model,
        })?),
    }
}

fn predictor_from_blob(method: Method, bytes: &[u8]) -> Result<Predictor> {
    match method {
        Method::Ubr1 | Method::Ubr2 | Method::NoDebias => {
            Ok(Predictor::Linear(LinearRegressor::from_bytes(bytes)?))
        }
        Method::Baseline(kind) if kind.is_statistical() => {
            let doc: PredictorDoc<StatBaselineModel> = serde_json::from_slice(bytes)?;
            Ok(Predictor::Stat(doc.model))
        }
        Method::Baseline(_) => {
            let doc: PredictorDoc<ClassifierModel> = serde_json::from_slice(bytes)?;
            Ok(Predictor::Classifier(doc.model))
        }
    }
}

/// Serializes a fitted pipeline into the container format.
pub fn save_to_bytes(model: &PipelineModel) -> Result<Vec<u8>> {
    let mut blobs: Vec<(String, Vec<u8>)> = Vec::new();
    blobs.push(("bias_table".into(), model.bias_table.to_json_bytes()?));
    if let Some(vocab) = &model.vocab {
        blobs.push(("vocab".into(), vocab.to_json_bytes()?));
    }
    if let Some(lda) = &model.lda_model {
        blobs.push(("lda".into(), lda.to_bytes()));
    }
    if let Some(pv) = &model.pv_model {
        blobs.push(("pvdbow".into(), pv.to_bytes()));
    }
    blobs.push(("predictor".into(), predictor_blob(&model.predictor)?));

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool: format!("debias-core {}", env!("CARGO_PKG_VERSION")),
        method: model.config.method.name().to_owned(),
        feature: model.config.feature.name().to_owned(),
        ngram: model.config.ngram,
        config: model.config.clone(),
        blobs: blobs
            .iter()
            .map(|(name, bytes)| BlobEntry {
                name: name.clone(),
                len: bytes.len() as u64,
                checksum: format!("{:016x}", fnv1a64(bytes)),
            })
            .collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    for (_, bytes) in &blobs {
        out.extend_from_slice(bytes);
    }
    Ok(out)
}

pub fn load_from_bytes(bytes: &[u8]) -> Result<PipelineModel> {
    let bad = |msg: &str| Error::Bundle(msg.to_owned());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a model bundle (bad magic)"));
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + manifest_len {
        return Err(bad("truncated manifest"));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[16..16 + manifest_len])?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(bad(&format!(
            "unsupported bundle format_version {}",
            manifest.format_version
        )));
    }

    let mut at = 16 + manifest_len;
    let mut blob_of = std::collections::BTreeMap::new();
    for entry in &manifest.blobs {
        let len = entry.len as usize;
        if bytes.len() < at + len {
            return Err(bad(&format!("truncated blob {}", entry.name)));
        }
        let blob = &bytes[at..at + len];
        let checksum = format!("{:016x}", fnv1a64(blob));
        if checksum != entry.checksum {
            return Err(bad(&format!(
                "checksum mismatch for blob {} (manifest {}, actual {})",
                entry.name, entry.checksum, checksum
            )));
        }
        blob_of.insert(entry.name.as_str(), blob);
        at += len;
    }
    if at != bytes.len() {
        return Err(bad("trailing bytes after final blob"));
    }

    let config = manifest.config;
    let required = |name: &str| {
        blob_of
            .get(name)
            .copied()
            .ok_or_else(|| Error::Bundle(format!("bundle is missing blob {name}")))
    };

    let bias_table = BiasTable::from_json_bytes(required("bias_table")?)?;
    let vocab = match blob_of.get("vocab") {
        Some(b) => Some(Vocabulary::from_json_bytes(b)?),
        None => None,
    };
    let lda_model = match blob_of.get("lda") {
        Some(b) => Some(LdaModel::from_bytes(b)?),
        None => None,
    };
    let pv_model = match blob_of.get("pvdbow") {
        Some(b) => Some(PvdbowModel::from_bytes(b)?),
        None => None,
    };
    let predictor = predictor_from_blob(config.method, required("predictor")?)?;

    // a features-using method must carry its feature model
    if config.method.uses_features() && vocab.is_none() {
        return Err(bad("bundle is missing its vocabulary"));
    }
    if config.method.uses_features() && config.feature == FeatureKind::Lda && lda_model.is_none() {
        return Err(bad("bundle is missing its topic model"));
    }
    if config.method.uses_features() && config.feature == FeatureKind::Pvdbow && pv_model.is_none()
    {
        return Err(bad("bundle is missing its embedding model"));
    }

    Ok(PipelineModel {
        config,
        bias_table,
        vocab,
        lda_model,
        pv_model,
        predictor,
    })
}

pub fn save<W: Write>(model: &PipelineModel, writer: &mut W) -> Result<()> {
    let bytes = save_to_bytes(model)?;
    writer.write_all(&bytes)?;
    Ok(())
}

pub fn load<R: Read>(reader: &mut R) -> Result<PipelineModel> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    load_from_bytes(&bytes)
}

pub fn load_file(path: &std::path::Path) -> Result<PipelineModel> {
    let bytes = std::fs::read(path)?;
    load_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{train_test_split, SplitSpec};
    use crate::pipeline::{BaselineKind, FeatureKind, Method, PipelineConfig, PipelineModel};
    use crate::pvdbow::PvdbowConfig;
    use crate::synth::{generate, SynthSpec};

    fn fitted(method: Method, feature: FeatureKind) -> (PipelineModel, crate::corpus::Dataset) {
        let spec = SynthSpec {
            n_users: 15,
            n_products: 8,
            n_reviews: 150,
            seed: 3,
            ..SynthSpec::default()
        };
        let (data, _) = generate(&spec).unwrap();
        let (train, test) = train_test_split(&data, &SplitSpec::new(4, 5, 9).unwrap()).unwrap();
        let cfg = PipelineConfig {
            method,
            feature,
            vocab_cap: 100,
            lda_topics: 4,
            lda_iters: 10,
            lda_burn: 3,
            lda_samples: 2,
            pv: PvdbowConfig {
                dim: 6,
                epochs: 2,
                ..PvdbowConfig::default()
            },
            ..PipelineConfig::default()
        };
        (PipelineModel::fit(&train, &cfg).unwrap(), test)
    }

    #[test]
    fn round_trip_reproduces_predictions_bit_exactly() {
        for (method, feature) in [
            (Method::Ubr1, FeatureKind::Tfidf),
            (Method::Ubr2, FeatureKind::Lda),
            (Method::NoDebias, FeatureKind::Pvdbow),
            (Method::Baseline(BaselineKind::UserMean), FeatureKind::Tfidf),
            (Method::Baseline(BaselineKind::BernoulliNb), FeatureKind::Tfidf),
        ] {
            let (model, test) = fitted(method, feature);
            let bytes = save_to_bytes(&model).unwrap();
            let back = load_from_bytes(&bytes).unwrap();
            assert_eq!(model, back);
            for r in test.records.iter().take(20) {
                let a = model.predict_record(r).unwrap();
                let b = back.predict_record(r).unwrap();
                assert_eq!(a.raw.to_bits(), b.raw.to_bits());
                assert_eq!(a.final_score, b.final_score);
            }
        }
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let (model, _) = fitted(Method::Ubr1, FeatureKind::Tfidf);
        assert_eq!(save_to_bytes(&model).unwrap(), save_to_bytes(&model).unwrap());
    }

    #[test]
    fn corrupted_blob_is_rejected() {
        let (model, _) = fitted(Method::Ubr1, FeatureKind::Tfidf);
        let mut bytes = save_to_bytes(&model).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        let err = load_from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        assert!(load_from_bytes(b"NOTABNDL").is_err());
        assert!(load_from_bytes(b"").is_err());
    }
}
