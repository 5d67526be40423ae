//! Paragraph vectors in the distributed bag-of-words flavor, trained with
//! negative sampling.
//!
//! Each document vector is trained to score its own words above `k`
//! negatives drawn from the unigram distribution raised to 0.75. Parameters
//! are stored as f32 (and serialized that way); the gradient arithmetic runs
//! in f64. Training is single-threaded and fully determined by the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PvdbowConfig {
    pub dim: usize,
    pub negative_k: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Tokens rarer than this in the training corpus are ignored.
    pub min_count: u64,
    pub infer_steps: usize,
    pub seed: u64,
}

impl Default for PvdbowConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            negative_k: 5,
            epochs: 20,
            lr_start: 0.025,
            lr_end: 1e-4,
            min_count: 2,
            infer_steps: 20,
            seed: 42,
        }
    }
}

/// Cumulative sampling table over words weighted by freq^0.75.
#[derive(Debug, Clone, PartialEq)]
struct UnigramTable {
    word_ids: Vec<u32>,
    cumulative: Vec<f64>,
}

impl UnigramTable {
    fn build(freqs: &[u64], min_count: u64) -> Self {
        let mut word_ids = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (w, &f) in freqs.iter().enumerate() {
            if f >= min_count && f > 0 {
                total += (f as f64).powf(0.75);
                word_ids.push(w as u32);
                cumulative.push(total);
            }
        }
        Self {
            word_ids,
            cumulative,
        }
    }

    fn distinct(&self) -> usize {
        self.word_ids.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cumulative.last().expect("table is never sampled when empty");
        let draw = rng.gen::<f64>() * total;
        let at = self.cumulative.partition_point(|&c| c <= draw);
        self.word_ids[at.min(self.word_ids.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvdbowModel {
    pub dim: usize,
    pub n_docs: usize,
    pub vocab_size: usize,
    /// Row-major n_docs x dim trained document vectors.
    pub doc_vectors: Vec<f32>,
    /// Row-major vocab_size x dim output word vectors.
    pub word_out_vectors: Vec<f32>,
    pub token_freqs: Vec<u64>,
    pub negative_k: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: u64,
    pub seed: u64,
    table: UnigramTable,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable ln(sigmoid(x)).
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -((-x).exp() + 1.0).ln()
    } else {
        x - (x.exp() + 1.0).ln()
    }
}

/// Loss of one (document, word) pair given drawn negatives:
/// -ln s(d.v_w) - sum_j ln s(-d.v_nj).
pub fn ns_loss(doc: &[f64], target: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = -ln_sigmoid(dot(doc, target));
    for neg in negatives {
        loss -= ln_sigmoid(-dot(doc, neg));
    }
    loss
}

/// Analytic gradients of [`ns_loss`] with respect to every parameter block.
pub struct NsGradients {
    pub loss: f64,
    pub doc: Vec<f64>,
    pub target: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn ns_gradients(doc: &[f64], target: &[f64], negatives: &[Vec<f64>]) -> NsGradients {
    let dim = doc.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut grad_doc = vec![0.0; dim];
    let sig_t = sigmoid(dot(doc, target));
    let coef_t = sig_t - 1.0;
    let grad_target: Vec<f64> = doc.iter().map(|d| coef_t * d).collect();
    for i in 0..dim {
        grad_doc[i] += coef_t * target[i];
    }
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let coef = sigmoid(dot(doc, neg));
        grad_negs.push(doc.iter().map(|d| coef * d).collect());
        for i in 0..dim {
            grad_doc[i] += coef * neg[i];
        }
    }
    NsGradients {
        loss: ns_loss(doc, target, negatives),
        doc: grad_doc,
        target: grad_target,
        negatives: grad_negs,
    }
}

/// One SGD step on a (document, target word, negatives) sample. Word vectors
/// stay untouched when `freeze_words` is set (inference mode).
#[allow(clippy::too_many_arguments)]
fn ns_step(
    doc: &mut [f32],
    words: &mut [f32],
    dim: usize,
    target: u32,
    negatives: &[u32],
    lr: f64,
    neu1e: &mut [f64],
    freeze_words: bool,
) {
    neu1e.iter_mut().for_each(|v| *v = 0.0);
    let apply = |word: u32, label: f64, doc: &mut [f32], words: &mut [f32], neu1e: &mut [f64]| {
        let row = word as usize * dim;
        let mut dot = 0.0f64;
        for i in 0..dim {
            dot += doc[i] as f64 * words[row + i] as f64;
        }
        let g = (label - sigmoid(dot)) * lr;
        for i in 0..dim {
            neu1e[i] += g * words[row + i] as f64;
        }
        if !freeze_words {
            for i in 0..dim {
                words[row + i] = (words[row + i] as f64 + g * doc[i] as f64) as f32;
            }
        }
    };
    apply(target, 1.0, doc, words, neu1e);
    for &neg in negatives {
        apply(neg, 0.0, doc, words, neu1e);
    }
    for i in 0..dim {
        doc[i] = (doc[i] as f64 + neu1e[i]) as f32;
    }
}

fn draw_negatives(
    table: &UnigramTable,
    k: usize,
    target: u32,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<u32>,
) {
    out.clear();
    if table.distinct() < 2 {
        return;
    }
    for _ in 0..k {
        loop {
            let neg = table.sample(rng);
            if neg != target {
                out.push(neg);
                break;
            }
        }
    }
}

fn small_uniform_init(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<f32> {
    (0..len)
        .map(|_| ((rng.gen::<f64>() - 0.5) / dim as f64) as f32)
        .collect()
}

impl PvdbowModel {
    pub fn fit(docs: &[Vec<u32>], vocab_size: usize, cfg: &PvdbowConfig) -> Result<Self> {
        if cfg.dim < 2 {
            return Err(Error::Config("pvdbow needs dim >= 2".into()));
        }
        if cfg.epochs < 1 {
            return Err(Error::Config("pvdbow needs epochs >= 1".into()));
        }
        if cfg.negative_k < 1 {
            return Err(Error::Config("pvdbow needs negative_k >= 1".into()));
        }
        if docs.is_empty() {
            return Err(Error::EmptyInput("pvdbow needs a non-empty corpus".into()));
        }

        let mut token_freqs = vec![0u64; vocab_size];
        for doc in docs {
            for &w in doc {
                if w as usize >= vocab_size {
                    return Err(Error::Data(format!(
                        "token id {w} outside vocabulary of {vocab_size}"
                    )));
                }
                token_freqs[w as usize] += 1;
            }
        }
        let table = UnigramTable::build(&token_freqs, cfg.min_count);

        let dim = cfg.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut doc_vectors = small_uniform_init(&mut rng, docs.len() * dim, dim);
        let mut word_out_vectors = vec![0.0f32; vocab_size * dim];

        let kept_tokens: u64 = docs
            .iter()
            .flat_map(|d| d.iter())
            .filter(|&&w| token_freqs[w as usize] >= cfg.min_count)
            .count() as u64;
        let total_updates = (kept_tokens * cfg.epochs as u64).max(1);

        let mut neu1e = vec![0.0f64; dim];
        let mut negatives = Vec::with_capacity(cfg.negative_k);
        let mut processed: u64 = 0;
        for _ in 0..cfg.epochs {
            for (d, doc) in docs.iter().enumerate() {
                let doc_slice = &mut doc_vectors[d * dim..(d + 1) * dim];
                for &w in doc {
                    if token_freqs[w as usize] < cfg.min_count {
                        continue;
                    }
                    let progress = processed as f64 / total_updates as f64;
                    let lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress;
                    processed += 1;
                    draw_negatives(&table, cfg.negative_k, w, &mut rng, &mut negatives);
                    ns_step(
                        doc_slice,
                        &mut word_out_vectors,
                        dim,
                        w,
                        &negatives,
                        lr,
                        &mut neu1e,
                        false,
                    );
                }
            }
            if doc_vectors.iter().chain(word_out_vectors.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("pvdbow parameters diverged during training".into()));
            }
        }

        Ok(Self {
            dim,
            n_docs: docs.len(),
            vocab_size,
            doc_vectors,
            word_out_vectors,
            token_freqs,
            negative_k: cfg.negative_k,
            epochs: cfg.epochs,
            lr_start: cfg.lr_start,
            lr_end: cfg.lr_end,
            min_count: cfg.min_count,
            seed: cfg.seed,
            table,
        })
    }

    /// Trained vector of training document `d` as f64.
    pub fn doc_vector(&self, d: usize) -> Vec<f64> {
        self.doc_vectors[d * self.dim..(d + 1) * self.dim]
            .iter()
            .map(|&v| v as f64)
            .collect()
    }

    /// Fits a fresh document vector with word vectors frozen. Documents with
    /// no trainable tokens yield the zero vector.
    pub fn infer(&self, doc: &[u32], steps: usize, seed: u64) -> Result<Vec<f64>> {
        for &w in doc {
            if w as usize >= self.vocab_size {
                return Err(Error::Data(format!(
                    "token id {w} outside vocabulary of {}",
                    self.vocab_size
                )));
            }
        }
        let kept: Vec<u32> = doc
            .iter()
            .copied()
            .filter(|&w| self.token_freqs[w as usize] >= self.min_count)
            .collect();
        if kept.is_empty() {
            return Ok(vec![0.0; self.dim]);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vec_f32 = small_uniform_init(&mut rng, self.dim, self.dim);
        let mut words = self.word_out_vectors.clone();
        let total_updates = (kept.len() * steps.max(1)) as u64;
        let mut neu1e = vec![0.0f64; self.dim];
        let mut negatives = Vec::with_capacity(self.negative_k);
        let mut processed: u64 = 0;
        for _ in 0..steps {
            for &w in &kept {
                let progress = processed as f64 / total_updates as f64;
                let lr = self.lr_start + (self.lr_end - self.lr_start) * progress;
                processed += 1;
                draw_negatives(&self.table, self.negative_k, w, &mut rng, &mut negatives);
                ns_step(
                    &mut vec_f32,
                    &mut words,
                    self.dim,
                    w,
                    &negatives,
                    lr,
                    &mut neu1e,
                    true,
                );
            }
        }
        Ok(vec_f32.iter().map(|&v| v as f64).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_docs as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u32).to_le_bytes());
        out.extend_from_slice(&(self.negative_k as u32).to_le_bytes());
        out.extend_from_slice(&(self.epochs as u32).to_le_bytes());
        out.extend_from_slice(&self.min_count.to_le_bytes());
        out.extend_from_slice(&self.lr_start.to_le_bytes());
        out.extend_from_slice(&self.lr_end.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for &f in &self.token_freqs {
            out.extend_from_slice(&f.to_le_bytes());
        }
        for &v in &self.doc_vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.word_out_vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Bundle(format!("pvdbow model blob: {msg}"));
        const HEADER: usize = 8 + 4 + 4 * 5 + 8 + 8 + 8 + 8;
        if bytes.len() < HEADER {
            return Err(bad("truncated header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("wrong magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        if u32_at(8) != FORMAT_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let dim = u32_at(12);
        let n_docs = u32_at(16);
        let vocab_size = u32_at(20);
        let negative_k = u32_at(24);
        let epochs = u32_at(28);
        let min_count = u64_at(32);
        let lr_start = f64_at(40);
        let lr_end = f64_at(48);
        let seed = u64_at(56);

        let expected = HEADER + vocab_size * 8 + (n_docs + vocab_size) * dim * 4;
        if bytes.len() != expected {
            return Err(bad("body has wrong length"));
        }
        let mut at = HEADER;
        let mut token_freqs = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            token_freqs.push(u64_at(at));
            at += 8;
        }
        let read_f32 = |n: usize, at: &mut usize| {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(f32::from_le_bytes(bytes[*at..*at + 4].try_into().unwrap()));
                *at += 4;
            }
            v
        };
        let doc_vectors = read_f32(n_docs * dim, &mut at);
        let word_out_vectors = read_f32(vocab_size * dim, &mut at);
        let table = UnigramTable::build(&token_freqs, min_count);
        Ok(Self {
            dim,
            n_docs,
            vocab_size,
            doc_vectors,
            word_out_vectors,
            token_freqs,
            negative_k,
            epochs,
            lr_start,
            lr_end,
            min_count,
            seed,
            table,
        })
    }
}

const MAGIC: &[u8; 8] = b"DBPVDB01";
const FORMAT_VERSION: u32 = 1;
