//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Documents enter as vocabulary token ids (out-of-vocabulary tokens already
//! dropped). Each token carries a topic assignment that is resampled sweep
//! by sweep from p(z=k) proportional to (n_dk + alpha) * (n_kw + beta) /
//! (n_k + V*beta). The fitted model keeps only the topic-word counts; document
//! features come from fold-in inference with those counts frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Document-topic smoothing; `None` uses the 50/n_topics convention.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            n_topics: 100,
            alpha: None,
            beta: 0.01,
            iters: 500,
            seed: 42,
        }
    }
}

impl LdaConfig {
    pub fn resolved_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub n_topics: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Row-major n_topics x vocab_size token assignment counts.
    pub topic_word_counts: Vec<u64>,
    pub topic_totals: Vec<u64>,
    pub seed: u64,
}

impl LdaModel {
    /// Runs `iters` full Gibbs sweeps over the corpus. Deterministic for a
    /// given seed.
    pub fn fit(docs: &[Vec<u32>], vocab_size: usize, cfg: &LdaConfig) -> Result<Self> {
        if cfg.n_topics < 2 {
            return Err(Error::Config("lda needs n_topics >= 2".into()));
        }
        if cfg.n_topics > u16::MAX as usize {
            return Err(Error::Config("lda n_topics too large".into()));
        }
        if cfg.iters < 1 {
            return Err(Error::Config("lda needs iters >= 1".into()));
        }
        if docs.is_empty() {
            return Err(Error::EmptyInput("lda needs a non-empty corpus".into()));
        }
        for doc in docs {
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(Error::Data(format!("token id {w} outside vocabulary of {vocab_size}")));
            }
        }

        let k = cfg.n_topics;
        let alpha = cfg.resolved_alpha();
        let beta = cfg.beta;
        let v_beta = vocab_size as f64 * beta;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let mut topic_word = vec![0u64; k * vocab_size];
        let mut topic_totals = vec![0u64; k];
        let mut assignments: Vec<Vec<u16>> = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                let topic = rng.gen_range(0..k) as u16;
                topic_word[topic as usize * vocab_size + w as usize] += 1;
                topic_totals[topic as usize] += 1;
                z.push(topic);
            }
            assignments.push(z);
        }

        let mut doc_topic = vec![0u64; k];
        let mut probs = vec![0f64; k];
        for _ in 0..cfg.iters {
            for (doc, z) in docs.iter().zip(assignments.iter_mut()) {
                if doc.is_empty() {
                    continue;
                }
                doc_topic.iter_mut().for_each(|c| *c = 0);
                for &topic in z.iter() {
                    doc_topic[topic as usize] += 1;
                }
                for (pos, &w) in doc.iter().enumerate() {
                    let old = z[pos] as usize;
                    doc_topic[old] -= 1;
                    topic_word[old * vocab_size + w as usize] -= 1;
                    topic_totals[old] -= 1;

                    let mut total = 0.0;
                    for t in 0..k {
                        let p = (doc_topic[t] as f64 + alpha)
                            * (topic_word[t * vocab_size + w as usize] as f64 + beta)
                            / (topic_totals[t] as f64 + v_beta);
                        total += p;
                        probs[t] = total;
                    }
                    let draw = rng.gen::<f64>() * total;
                    let new = probs.partition_point(|&cum| cum <= draw).min(k - 1);

                    z[pos] = new as u16;
                    doc_topic[new] += 1;
                    topic_word[new * vocab_size + w as usize] += 1;
                    topic_totals[new] += 1;
                }
            }
        }

        Ok(Self {
            n_topics: k,
            vocab_size,
            alpha,
            beta,
            topic_word_counts: topic_word,
            topic_totals,
            seed: cfg.seed,
        })
    }

    /// Fold-in inference with the fitted counts frozen: `burn` sweeps, then
    /// the smoothed topic proportions are averaged over `samples` sweeps.
    /// An empty document yields the uniform distribution.
    pub fn infer(&self, doc: &[u32], burn: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
        if samples < 1 {
            return Err(Error::Config("lda inference needs samples >= 1".into()));
        }
        let k = self.n_topics;
        if doc.is_empty() {
            return Ok(vec![1.0 / k as f64; k]);
        }
        if let Some(&w) = doc.iter().find(|&&w| w as usize >= self.vocab_size) {
            return Err(Error::Data(format!(
                "token id {w} outside vocabulary of {}",
                self.vocab_size
            )));
        }

        let alpha = self.alpha;
        let v_beta = self.vocab_size as f64 * self.beta;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_topic = vec![0u64; k];
        let mut z: Vec<u16> = Vec::with_capacity(doc.len());
        for _ in doc {
            let topic = rng.gen_range(0..k) as u16;
            doc_topic[topic as usize] += 1;
            z.push(topic);
        }

        let denom = doc.len() as f64 + k as f64 * alpha;
        let mut acc = vec![0f64; k];
        let mut probs = vec![0f64; k];
        for sweep in 0..burn + samples {
            for (pos, &w) in doc.iter().enumerate() {
                let old = z[pos] as usize;
                doc_topic[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (doc_topic[t] as f64 + alpha)
                        * (self.topic_word_counts[t * self.vocab_size + w as usize] as f64 + self.beta)
                        / (self.topic_totals[t] as f64 + v_beta);
                    total += p;
                    probs[t] = total;
                }
                let draw = rng.gen::<f64>() * total;
                let new = probs.partition_point(|&cum| cum <= draw).min(k - 1);
                z[pos] = new as u16;
                doc_topic[new] += 1;
            }
            if sweep >= burn {
                for t in 0..k {
                    acc[t] += (doc_topic[t] as f64 + alpha) / denom;
                }
            }
        }
        for a in &mut acc {
            *a /= samples as f64;
        }
        Ok(acc)
    }

    pub fn total_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * 4 + 16 + 8 + self.topic_word_counts.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_topics as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u32).to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for &c in &self.topic_word_counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Bundle(format!("lda model blob: {msg}"));
        if bytes.len() < 8 + 4 + 4 + 4 + 8 + 8 + 8 {
            return Err(bad("truncated header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("wrong magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n_topics = u32_at(12) as usize;
        let vocab_size = u32_at(16) as usize;
        let alpha = f64_at(20);
        let beta = f64_at(28);
        let seed = u64::from_le_bytes(bytes[36..44].try_into().unwrap());
        let body = &bytes[44..];
        let expected = n_topics * vocab_size * 8;
        if body.len() != expected {
            return Err(bad("count block has wrong length"));
        }
        let topic_word_counts: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let topic_totals = (0..n_topics)
            .map(|t| topic_word_counts[t * vocab_size..(t + 1) * vocab_size].iter().sum())
            .collect();
        Ok(Self {
            n_topics,
            vocab_size,
            alpha,
            beta,
            topic_word_counts,
            topic_totals,
            seed,
        })
    }
}

const MAGIC: &[u8; 8] = b"DBLDAM01";
const FORMAT_VERSION: u32 = 1;
