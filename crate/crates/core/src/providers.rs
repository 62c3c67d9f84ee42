//! Text embedding, token tagging and NLI judgment behind uniform traits.
//!
//! Each capability has a synthetic implementation (deterministic, model-free, used by
//! tests and the demo) and a file-backed implementation that serves exports produced
//! by the model adapters.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::text::{metric_tokens, surface_tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("embedding has zero dimensions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("embedding contains a non-finite value"));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &EmbeddingVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PosTag {
    Noun,
    ProperNoun,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: PosTag,
    pub position: usize,
}

impl TaggedToken {
    pub fn is_noun(&self) -> bool {
        matches!(self.tag, PosTag::Noun | PosTag::ProperNoun)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliJudgment {
    pub positive: f64,
    pub negative: f64,
}

impl NliJudgment {
    pub fn new(positive: f64, negative: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(positive) || !ok(negative) {
            return Err(Error::arg(format!(
                "NLI probabilities out of [0,1]: positive={positive}, negative={negative}"
            )));
        }
        Ok(NliJudgment { positive, negative })
    }

    /// Negative minus positive; smaller reads as more faithful.
    pub fn score(&self) -> f64 {
        self.negative - self.positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedRole {
    DialogueNoun,
    SummaryNoun,
    CandidateText,
}

impl EmbedRole {
    fn short(self) -> &'static str {
        match self {
            EmbedRole::DialogueNoun => "dnoun",
            EmbedRole::SummaryNoun => "snoun",
            EmbedRole::CandidateText => "cand",
        }
    }
}

/// Address of one stored embedding.
///
/// `index` layout by role: candidate text `[cand_idx]`, dialogue noun
/// `[turn_idx, token_position]`, summary noun `[cand_idx, token_position]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EmbedKey {
    pub id: String,
    pub role: EmbedRole,
    pub index: Vec<usize>,
}

impl EmbedKey {
    pub fn new(id: &str, role: EmbedRole, index: impl Into<Vec<usize>>) -> Self {
        EmbedKey {
            id: id.to_string(),
            role,
            index: index.into(),
        }
    }
}

impl fmt::Display for EmbedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.id, self.role.short())?;
        for i in &self.index {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TagScope {
    Turn(usize),
    Candidate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NliKey {
    pub id: String,
    pub cand_idx: usize,
    pub premise_idx: usize,
    pub hypothesis_idx: usize,
}

impl fmt::Display for NliKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/cand/{}/premise/{}/hyp/{}",
            self.id, self.cand_idx, self.premise_idx, self.hypothesis_idx
        )
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, key: &EmbedKey, text: &str) -> Result<EmbeddingVector>;
    fn describe(&self) -> String;
}

pub trait Tagger: Send + Sync {
    fn tag(&self, id: &str, scope: TagScope, text: &str) -> Result<Vec<TaggedToken>>;
    fn describe(&self) -> String;
}

pub trait NliModel: Send + Sync {
    fn judge(&self, key: &NliKey, premise: &str, hypothesis: &str) -> Result<NliJudgment>;
    fn describe(&self) -> String;
}

fn require_text(text: &str, what: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(Error::arg(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// synthetic providers

pub const SYNTHETIC_DIM: usize = 16;

/// Hash-seeded unit vectors of the lowercased text.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(0)
    }
}

impl HashEmbedder {
    pub fn new(seed: u64) -> Self {
        HashEmbedder {
            seed,
            dim: SYNTHETIC_DIM,
        }
    }

    pub fn with_dim(seed: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("embedding dim must be positive"));
        }
        Ok(HashEmbedder { seed, dim })
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        require_text(text, "text")?;
        let lowered = text.to_lowercase();
        let mut values = Vec::with_capacity(self.dim);
        let mut block = 0u64;
        while values.len() < self.dim {
            let digest = Sha256::new()
                .chain_update(self.seed.to_le_bytes())
                .chain_update(block.to_le_bytes())
                .chain_update(lowered.as_bytes())
                .finalize();
            for pair in digest.chunks_exact(2) {
                if values.len() == self.dim {
                    break;
                }
                let raw = u16::from_le_bytes([pair[0], pair[1]]) as f64;
                values.push(raw / u16::MAX as f64 * 2.0 - 1.0);
            }
            block += 1;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            values[0] = 1.0;
        } else {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector::new(values)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _key: &EmbedKey, text: &str) -> Result<EmbeddingVector> {
        self.embed_text(text)
    }

    fn describe(&self) -> String {
        format!("synthetic-hash(seed={},dim={})", self.seed, self.dim)
    }
}

const DEFAULT_LEXICON: &[&str] = &[
    "airport",
    "appointment",
    "bag",
    "bike",
    "birthday",
    "book",
    "bus",
    "cake",
    "car",
    "cat",
    "class",
    "coffee",
    "concert",
    "dinner",
    "doctor",
    "dog",
    "exam",
    "flight",
    "game",
    "gift",
    "gym",
    "homework",
    "hotel",
    "house",
    "job",
    "keys",
    "lunch",
    "meeting",
    "money",
    "movie",
    "office",
    "party",
    "phone",
    "pizza",
    "present",
    "project",
    "report",
    "restaurant",
    "room",
    "school",
    "shop",
    "station",
    "team",
    "ticket",
    "tickets",
    "train",
    "trip",
    "weekend",
    "work",
];

/// Capitalized tokens are proper nouns, lexicon words are nouns, anything else is other.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: HashSet<String>,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        LexiconTagger::new(DEFAULT_LEXICON.iter().copied())
    }
}

impl LexiconTagger {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        LexiconTagger {
            lexicon: words.into_iter().map(str::to_lowercase).collect(),
        }
    }

    pub fn tag_tokens(&self, text: &str) -> Result<Vec<TaggedToken>> {
        require_text(text, "text")?;
        Ok(surface_tokens(text)
            .into_iter()
            .enumerate()
            .map(|(position, surface)| {
                let tag = if surface.chars().next().is_some_and(char::is_uppercase) {
                    PosTag::ProperNoun
                } else if self.lexicon.contains(&surface.to_lowercase()) {
                    PosTag::Noun
                } else {
                    PosTag::Other
                };
                TaggedToken {
                    surface: surface.to_string(),
                    tag,
                    position,
                }
            })
            .collect())
    }
}

impl Tagger for LexiconTagger {
    fn tag(&self, _id: &str, _scope: TagScope, text: &str) -> Result<Vec<TaggedToken>> {
        self.tag_tokens(text)
    }

    fn describe(&self) -> String {
        format!("synthetic-lexicon(words={})", self.lexicon.len())
    }
}

/// Positive = share of distinct hypothesis tokens that also occur in the premise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapNli;

impl OverlapNli {
    pub fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment> {
        require_text(premise, "premise")?;
        require_text(hypothesis, "hypothesis")?;
        let premise: HashSet<String> = metric_tokens(premise).into_iter().collect();
        let hyp: HashSet<String> = metric_tokens(hypothesis).into_iter().collect();
        if hyp.is_empty() {
            return NliJudgment::new(0.0, 1.0);
        }
        let shared = hyp.iter().filter(|t| premise.contains(*t)).count();
        let positive = shared as f64 / hyp.len() as f64;
        NliJudgment::new(positive, 1.0 - positive)
    }
}

impl NliModel for OverlapNli {
    fn judge(&self, _key: &NliKey, premise: &str, hypothesis: &str) -> Result<NliJudgment> {
        self.nli_score(premise, hypothesis)
    }

    fn describe(&self) -> String {
        "synthetic-overlap".to_string()
    }
}

// ---------------------------------------------------------------------------
// file-backed providers

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub role: EmbedRole,
    pub index: Vec<usize>,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagRecordScope {
    Dialogue,
    Candidate,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRecord {
    pub id: String,
    pub scope: TagRecordScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cand_idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_idx: Option<usize>,
    pub tokens: Vec<TaggedToken>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliRecord {
    pub id: String,
    pub cand_idx: usize,
    pub premise_idx: usize,
    pub hypothesis_idx: usize,
    pub positive: f64,
    pub negative: f64,
}

fn record_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Embeddings exported by the adapters, held fully in memory.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    dim: usize,
    source: String,
    vectors: HashMap<EmbedKey, EmbeddingVector>,
}

impl FileEmbeddings {
    pub fn load(path: &Path) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (line, rec) in jsonl::read::<EmbeddingRecord>(path)? {
            if rec.id.trim().is_empty() {
                return Err(record_err(path, line, "empty id"));
            }
            let expected_len = if rec.role == EmbedRole::CandidateText {
                1
            } else {
                2
            };
            if rec.index.len() != expected_len {
                return Err(record_err(
                    path,
                    line,
                    format!(
                        "role {:?} expects an index of length {expected_len}",
                        rec.role
                    ),
                ));
            }
            let v = EmbeddingVector::new(rec.vector)
                .map_err(|e| record_err(path, line, e.to_string()))?;
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => {
                    return Err(record_err(
                        path,
                        line,
                        format!("dim {} differs from {d}", v.dim()),
                    ))
                }
                _ => {}
            }
            let key = EmbedKey {
                id: rec.id,
                role: rec.role,
                index: rec.index,
            };
            if vectors.insert(key.clone(), v).is_some() {
                return Err(record_err(path, line, format!("duplicate key {key}")));
            }
        }
        Ok(FileEmbeddings {
            dim: dim.unwrap_or(0),
            source: path.display().to_string(),
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for FileEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, key: &EmbedKey, text: &str) -> Result<EmbeddingVector> {
        require_text(text, "text")?;
        self.vectors
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Lookup(key.to_string()))
    }

    fn describe(&self) -> String {
        format!("file({},dim={})", self.source, self.dim)
    }
}

#[derive(Debug, Clone)]
pub struct FileTags {
    source: String,
    tokens: HashMap<(String, TagScope), Vec<TaggedToken>>,
}

impl FileTags {
    pub fn load(path: &Path) -> Result<Self> {
        let mut tokens = HashMap::new();
        for (line, rec) in jsonl::read::<TagRecord>(path)? {
            let scope = match (rec.scope, rec.turn_idx, rec.cand_idx) {
                (TagRecordScope::Dialogue, Some(t), None) => TagScope::Turn(t),
                (TagRecordScope::Candidate, None, Some(c)) => TagScope::Candidate(c),
                (TagRecordScope::Dialogue, _, _) => {
                    return Err(record_err(
                        path,
                        line,
                        "dialogue scope needs turn_idx and no cand_idx",
                    ))
                }
                (TagRecordScope::Candidate, _, _) => {
                    return Err(record_err(
                        path,
                        line,
                        "candidate scope needs cand_idx and no turn_idx",
                    ))
                }
            };
            if rec
                .tokens
                .windows(2)
                .any(|w| w[0].position >= w[1].position)
            {
                return Err(record_err(
                    path,
                    line,
                    "token positions are not strictly increasing",
                ));
            }
            if tokens.insert((rec.id.clone(), scope), rec.tokens).is_some() {
                return Err(record_err(
                    path,
                    line,
                    format!("duplicate tag record for {} {scope:?}", rec.id),
                ));
            }
        }
        Ok(FileTags {
            source: path.display().to_string(),
            tokens,
        })
    }
}

impl Tagger for FileTags {
    fn tag(&self, id: &str, scope: TagScope, text: &str) -> Result<Vec<TaggedToken>> {
        require_text(text, "text")?;
        self.tokens
            .get(&(id.to_string(), scope))
            .cloned()
            .ok_or_else(|| Error::Lookup(format!("{id}/{scope:?}")))
    }

    fn describe(&self) -> String {
        format!("file({})", self.source)
    }
}

#[derive(Debug, Clone)]
pub struct FileNli {
    source: String,
    judgments: HashMap<NliKey, NliJudgment>,
}

impl FileNli {
    pub fn load(path: &Path) -> Result<Self> {
        let mut judgments = HashMap::new();
        for (line, rec) in jsonl::read::<NliRecord>(path)? {
            let j = NliJudgment::new(rec.positive, rec.negative)
                .map_err(|e| record_err(path, line, e.to_string()))?;
            let key = NliKey {
                id: rec.id,
                cand_idx: rec.cand_idx,
                premise_idx: rec.premise_idx,
                hypothesis_idx: rec.hypothesis_idx,
            };
            if judgments.insert(key.clone(), j).is_some() {
                return Err(record_err(path, line, format!("duplicate key {key}")));
            }
        }
        Ok(FileNli {
            source: path.display().to_string(),
            judgments,
        })
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

impl NliModel for FileNli {
    fn judge(&self, key: &NliKey, premise: &str, hypothesis: &str) -> Result<NliJudgment> {
        require_text(premise, "premise")?;
        require_text(hypothesis, "hypothesis")?;
        self.judgments
            .get(key)
            .copied()
            .ok_or_else(|| Error::Lookup(key.to_string()))
    }

    fn describe(&self) -> String {
        format!("file({})", self.source)
    }
}
