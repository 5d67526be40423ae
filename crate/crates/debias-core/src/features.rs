//! Tokenization, n-gram vocabulary construction and tf-idf vectorization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases `summary + " " + body` and splits on runs of
/// non-alphanumeric characters. Empty tokens are dropped.
pub fn tokenize(summary: &str, body: &str) -> Vec<String> {
    let mut joined = String::with_capacity(summary.len() + body.len() + 1);
    joined.push_str(summary);
    joined.push(' ');
    joined.push_str(body);
    joined
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Which n-grams become vocabulary candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramMode {
    Unigram,
    /// Unigrams and adjacent-pair bigrams compete for the same cap.
    UnigramBigram,
}

impl NgramMode {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(NgramMode::Unigram),
            2 => Ok(NgramMode::UnigramBigram),
            other => Err(Error::Config(format!("ngram order {other} not supported (use 1 or 2)"))),
        }
    }
}

/// Emits the candidate terms of one document under the given mode: all
/// unigrams, plus space-joined adjacent bigrams in bigram mode.
fn candidate_terms(tokens: &[String], mode: NgramMode) -> Vec<String> {
    let mut terms = Vec::with_capacity(match mode {
        NgramMode::Unigram => tokens.len(),
        NgramMode::UnigramBigram => tokens.len().saturating_mul(2),
    });
    terms.extend(tokens.iter().cloned());
    if mode == NgramMode::UnigramBigram {
        for pair in tokens.windows(2) {
            terms.push(format!("{} {}", pair[0], pair[1]));
        }
    }
    terms
}

/// Fitted term vocabulary with document frequencies. Column ids are dense,
/// ordered by descending document frequency with lexicographic tie-breaking,
/// so rebuilding from the same corpus always yields the same table.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u64>,
    index: HashMap<String, u32>,
    n_docs: u64,
    mode: NgramMode,
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized training documents, keeping at most
    /// `cap` terms by document frequency.
    pub fn build(train_docs: &[Vec<String>], mode: NgramMode, cap: usize) -> Result<Self> {
        if train_docs.is_empty() {
            return Err(Error::EmptyInput("cannot build vocabulary from empty corpus".into()));
        }
        let mut df: HashMap<String, u64> = HashMap::new();
        for tokens in train_docs {
            let mut seen: Vec<String> = candidate_terms(tokens, mode);
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);

        let mut terms = Vec::with_capacity(ranked.len());
        let mut doc_freq = Vec::with_capacity(ranked.len());
        let mut index = HashMap::with_capacity(ranked.len());
        for (col, (term, freq)) in ranked.into_iter().enumerate() {
            index.insert(term.clone(), col as u32);
            terms.push(term);
            doc_freq.push(freq);
        }
        Ok(Self {
            terms,
            doc_freq,
            index,
            n_docs: train_docs.len() as u64,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mode(&self) -> NgramMode {
        self.mode
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, column: u32) -> u64 {
        self.doc_freq[column as usize]
    }

    /// Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1.
    pub fn idf(&self, column: u32) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[column as usize] as f64)).ln() + 1.0
    }

    /// Raw in-vocabulary term counts of one document (term frequency only).
    pub fn count_vector(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for term in candidate_terms(tokens, self.mode) {
            if let Some(col) = self.column(&term) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        }
        SparseVector::from_pairs(counts.into_iter().collect())
    }

    /// 0/1 in-vocabulary term presence of one document.
    pub fn presence_vector(&self, tokens: &[String]) -> SparseVector {
        let mut cols: Vec<u32> = candidate_terms(tokens, self.mode)
            .into_iter()
            .filter_map(|t| self.column(&t))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        SparseVector::from_pairs(cols.into_iter().map(|c| (c, 1.0)).collect())
    }

    /// tf-idf vector: raw term counts weighted by smoothed idf, then
    /// L2-normalized. Out-of-vocabulary terms are ignored; a document with
    /// no in-vocabulary terms yields the empty vector.
    pub fn tfidf_vector(&self, tokens: &[String]) -> SparseVector {
        let counts = self.count_vector(tokens);
        let mut pairs: Vec<(u32, f64)> = counts
            .iter()
            .map(|(col, tf)| (col, tf * self.idf(col)))
            .collect();
        let norm = pairs.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut pairs {
                *w /= norm;
            }
        }
        SparseVector::from_pairs(pairs)
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let doc = VocabularyDoc {
            format_version: FORMAT_VERSION,
            mode: self.mode,
            n_docs: self.n_docs,
            terms: self.terms.clone(),
            doc_freq: self.doc_freq.clone(),
        };
        Ok(serde_json::to_vec(&doc)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let doc: VocabularyDoc = serde_json::from_slice(bytes)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported vocabulary format_version {}",
                doc.format_version
            )));
        }
        if doc.terms.len() != doc.doc_freq.len() {
            return Err(Error::Bundle("vocabulary terms/doc_freq length mismatch".into()));
        }
        let index = doc
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self {
            terms: doc.terms,
            doc_freq: doc.doc_freq,
            index,
            n_docs: doc.n_docs,
            mode: doc.mode,
        })
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VocabularyDoc {
    format_version: u32,
    mode: NgramMode,
    n_docs: u64,
    terms: Vec<String>,
    doc_freq: Vec<u64>,
}

/// Sparse feature vector: (column, weight) pairs with strictly increasing
/// columns and no explicit zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pairs: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Sorts the pairs, drops zeros and rejects nothing: duplicate columns
    /// are summed.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_unstable_by_key(|(c, _)| *c);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (col, w) in pairs {
            match merged.last_mut() {
                Some((last_col, last_w)) if *last_col == col => *last_w += w,
                _ => merged.push((col, w)),
            }
        }
        merged.retain(|(_, w)| *w != 0.0);
        Self { pairs: merged }
    }

    /// Dense-to-sparse conversion; exact zeros are not stored.
    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            pairs: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_column(&self) -> Option<u32> {
        self.pairs.last().map(|(c, _)| *c)
    }

    /// Value at a column, zero when absent.
    pub fn get(&self, column: u32) -> f64 {
        match self.pairs.binary_search_by_key(&column, |(c, _)| *c) {
            Ok(i) => self.pairs[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.pairs.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|(c, w)| w * dense.get(*c as usize).copied().unwrap_or(0.0))
            .sum()
    }
}

/// A batch of sparse rows with a common column count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseVector>,
    pub n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<SparseVector>, n_cols: usize) -> Result<Self> {
        for row in &rows {
            if let Some(max) = row.max_column() {
                if max as usize >= n_cols {
                    return Err(Error::DimensionMismatch {
                        expected: n_cols,
                        got: max as usize + 1,
                    });
                }
            }
        }
        Ok(Self { rows, n_cols })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>], n_cols: usize) -> Result<Self> {
        Self::new(rows.iter().map(|r| SparseVector::from_dense(r)).collect(), n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}
