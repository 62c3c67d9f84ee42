//! Semantic invariance, representative-summary choice, and the weighted coverage and
//! faithfulness matrices for a single dialogue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{EmbeddingVector, NliKey, NliModel};

/// Default coverage penalty: the largest distance between two unit vectors.
pub const DEFAULT_COVERAGE_PENALTY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Coverage,
    Faithfulness,
}

/// Row-major k×L matrix, one row per candidate summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMatrix {
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl QualityMatrix {
    pub fn new(kind: MatrixKind, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::arg(format!(
                "{rows}x{cols} matrix given {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("matrix contains a non-finite value"));
        }
        Ok(QualityMatrix {
            kind,
            rows,
            cols,
            values,
        })
    }

    pub fn from_rows(kind: MatrixKind, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::arg("ragged matrix rows"));
        }
        QualityMatrix::new(kind, rows.len(), cols, rows.concat())
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QualityMatrix {
        QualityMatrix {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

fn check_dims(embeddings: &[EmbeddingVector]) -> Result<usize> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::arg("no embeddings given"))?;
    let dim = first.dim();
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(Error::arg(format!(
            "embedding dim mismatch: {} vs {dim}",
            bad.dim()
        )));
    }
    Ok(dim)
}

fn mean_vector(embeddings: &[EmbeddingVector], dim: usize) -> Vec<f64> {
    let k = embeddings.len() as f64;
    (0..dim)
        .map(|d| embeddings.iter().map(|e| e.values()[d]).sum::<f64>() / k)
        .collect()
}

/// Mean over dimensions of the population variance across candidate embeddings.
/// Lower means the candidates agree more.
pub fn semantic_invariance(embeddings: &[EmbeddingVector]) -> Result<f64> {
    let dim = check_dims(embeddings)?;
    let k = embeddings.len() as f64;
    // Two-pass variance on values shifted by the first vector, so identical
    // candidates give exactly zero.
    let origin = embeddings[0].values();
    let total: f64 = (0..dim)
        .map(|d| {
            let shifted = || embeddings.iter().map(|e| e.values()[d] - origin[d]);
            let mean = shifted().sum::<f64>() / k;
            shifted().map(|x| (x - mean).powi(2)).sum::<f64>() / k
        })
        .sum();
    Ok(total / dim as f64)
}

/// Index of the candidate nearest (Euclidean) to the mean embedding, lowest index on ties.
pub fn representative_summary(embeddings: &[EmbeddingVector]) -> Result<usize> {
    let dim = check_dims(embeddings)?;
    let mean = mean_vector(embeddings, dim);
    let sq_dist = |e: &EmbeddingVector| -> f64 {
        e.values()
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut best = (0, sq_dist(&embeddings[0]));
    for (i, e) in embeddings.iter().enumerate().skip(1) {
        let d = sq_dist(e);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// A dialogue noun type: all occurrences sharing a lowercased surface form.
#[derive(Debug, Clone, PartialEq)]
pub struct NounType {
    pub surface: String,
    pub common_occurrences: usize,
    pub proper_occurrences: usize,
    pub embedding: EmbeddingVector,
}

impl NounType {
    pub fn is_proper(&self) -> bool {
        self.proper_occurrences > 0
    }

    /// Occurrence count with proper-noun occurrences capped at one.
    pub fn weight(&self) -> f64 {
        (self.common_occurrences + self.proper_occurrences.min(1)) as f64
    }
}

#[derive(Debug, Clone)]
pub struct CoverageInputs {
    pub dialogue_nouns: Vec<NounType>,
    /// Noun embeddings of each candidate summary, in candidate order.
    pub candidate_nouns: Vec<Vec<EmbeddingVector>>,
}

/// Weighted coverage matrix (k×p). Returns `None` when the dialogue has no nouns.
///
/// A candidate without nouns gets a row filled with `penalty`.
pub fn coverage_matrix(inputs: &CoverageInputs, penalty: f64) -> Result<Option<QualityMatrix>> {
    let p = inputs.dialogue_nouns.len();
    if p == 0 {
        return Ok(None);
    }
    let k = inputs.candidate_nouns.len();
    if k == 0 {
        return Err(Error::arg("coverage needs at least one candidate"));
    }
    let dim = inputs.dialogue_nouns[0].embedding.dim();
    let all_dims_match = inputs
        .dialogue_nouns
        .iter()
        .map(|n| &n.embedding)
        .chain(inputs.candidate_nouns.iter().flatten())
        .all(|e| e.dim() == dim);
    if !all_dims_match {
        return Err(Error::arg("noun embedding dim mismatch"));
    }

    let mut values = Vec::with_capacity(k * p);
    for cand in &inputs.candidate_nouns {
        if cand.is_empty() {
            values.extend(std::iter::repeat_n(penalty, p));
            continue;
        }
        for noun in &inputs.dialogue_nouns {
            let nearest = cand
                .iter()
                .map(|c| noun.embedding.distance(c))
                .fold(f64::INFINITY, f64::min);
            values.push(nearest * noun.weight());
        }
    }
    QualityMatrix::new(MatrixKind::Coverage, k, p, values).map(Some)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueSentence {
    pub text: String,
    /// Noun occurrences in the sentence, each proper-noun type counted at most once.
    pub noun_weight: f64,
}

#[derive(Debug, Clone)]
pub struct FaithfulnessInputs {
    pub dialogue_id: String,
    pub dialogue_sentences: Vec<DialogueSentence>,
    /// Sentences of each candidate summary, in candidate order.
    pub candidate_sentences: Vec<Vec<String>>,
}

impl FaithfulnessInputs {
    /// Worst achievable weighted NLI value, `max(w) * 1.0`, floored at 1.
    pub fn default_penalty(&self) -> f64 {
        self.dialogue_sentences
            .iter()
            .map(|s| s.noun_weight)
            .fold(1.0, f64::max)
    }
}

/// Weighted faithfulness matrix (k×h).
///
/// Cells whose dialogue sentence has no nouns, and rows of candidates without
/// sentences, hold `penalty` (default [`FaithfulnessInputs::default_penalty`]).
pub fn faithfulness_matrix(
    inputs: &FaithfulnessInputs,
    nli: &dyn NliModel,
    penalty: Option<f64>,
) -> Result<QualityMatrix> {
    let h = inputs.dialogue_sentences.len();
    if h == 0 {
        return Err(Error::arg(
            "faithfulness needs at least one dialogue sentence",
        ));
    }
    let k = inputs.candidate_sentences.len();
    if k == 0 {
        return Err(Error::arg("faithfulness needs at least one candidate"));
    }
    let penalty = penalty.unwrap_or_else(|| inputs.default_penalty());

    let mut values = Vec::with_capacity(k * h);
    for (cand_idx, sentences) in inputs.candidate_sentences.iter().enumerate() {
        if sentences.is_empty() {
            values.extend(std::iter::repeat_n(penalty, h));
            continue;
        }
        for (premise_idx, premise) in inputs.dialogue_sentences.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (hypothesis_idx, hyp) in sentences.iter().enumerate() {
                let key = NliKey {
                    id: inputs.dialogue_id.clone(),
                    cand_idx,
                    premise_idx,
                    hypothesis_idx,
                };
                best = best.min(nli.judge(&key, &premise.text, hyp)?.score());
            }
            values.push(if premise.noun_weight == 0.0 {
                penalty
            } else {
                best * premise.noun_weight
            });
        }
    }
    QualityMatrix::new(MatrixKind::Faithfulness, k, h, values)
}
