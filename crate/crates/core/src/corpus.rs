//! Dialogues, reference summaries and candidate-summary sets.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::text::budget;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<String>,
    pub raw_text: String,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, turns: Vec<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::arg("dialogue id is empty"));
        }
        if turns.is_empty() {
            return Err(Error::arg(format!("dialogue {id} has no turns")));
        }
        if let Some(i) = turns.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::arg(format!("dialogue {id}: turn {i} is blank")));
        }
        let raw_text = turns.join("\n");
        Ok(Dialogue {
            id,
            turns,
            raw_text,
        })
    }
}

/// The k candidate summaries generated for one dialogue, in generation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummarySet {
    pub dialogue_id: String,
    pub candidates: Vec<String>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDialogue {
    pub dialogue: Dialogue,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusSplit {
    pub name: String,
    pub labeled: Vec<LabeledDialogue>,
    pub unlabeled: Vec<Dialogue>,
}

/// How records in a corpus file are routed into a [`CorpusSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// Every record must carry a `summary`.
    Labeled,
    /// Any `summary` field is ignored.
    Unlabeled,
    /// Records with a `summary` are labeled, the rest unlabeled.
    Mixed,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dialogues(&self) -> impl Iterator<Item = &Dialogue> {
        self.labeled
            .iter()
            .map(|l| &l.dialogue)
            .chain(self.unlabeled.iter())
    }

    pub fn reference(&self, id: &str) -> Option<&str> {
        self.labeled
            .iter()
            .find(|l| l.dialogue.id == id)
            .map(|l| l.reference.as_str())
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for d in self.dialogues() {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate dialogue id {:?}",
                    d.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: Option<String>,
    dialogue: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CandidateRecord {
    id: Option<String>,
    candidates: Option<Vec<String>>,
}

fn schema_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_corpus(path: &Path, kind: SplitKind) -> Result<CorpusSplit> {
    let records: Vec<(usize, CorpusRecord)> = jsonl::read(path)?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    let mut split = CorpusSplit {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        ..CorpusSplit::default()
    };
    for (line, rec) in records {
        let id = rec
            .id
            .ok_or_else(|| schema_err(path, line, "missing required field \"id\""))?;
        let turns = rec
            .dialogue
            .ok_or_else(|| schema_err(path, line, "missing required field \"dialogue\""))?;
        let dialogue =
            Dialogue::new(id, turns).map_err(|e| schema_err(path, line, e.to_string()))?;
        match (kind, rec.summary) {
            (SplitKind::Unlabeled, _) | (SplitKind::Mixed, None) => split.unlabeled.push(dialogue),
            (SplitKind::Labeled | SplitKind::Mixed, Some(reference)) => {
                split.labeled.push(LabeledDialogue {
                    dialogue,
                    reference,
                })
            }
            (SplitKind::Labeled, None) => {
                return Err(schema_err(path, line, "missing required field \"summary\""))
            }
        }
    }
    split.check_unique_ids()?;
    Ok(split)
}

/// Writes labeled records (with `summary`) followed by unlabeled ones.
pub fn write_corpus(path: &Path, split: &CorpusSplit) -> Result<()> {
    let records: Vec<CorpusRecord> = split
        .labeled
        .iter()
        .map(|l| CorpusRecord {
            id: Some(l.dialogue.id.clone()),
            dialogue: Some(l.dialogue.turns.clone()),
            summary: Some(l.reference.clone()),
        })
        .chain(split.unlabeled.iter().map(|d| CorpusRecord {
            id: Some(d.id.clone()),
            dialogue: Some(d.turns.clone()),
            summary: None,
        }))
        .collect();
    jsonl::write(path, &records)
}

pub fn load_candidates(path: &Path) -> Result<Vec<SummarySet>> {
    let records: Vec<(usize, CandidateRecord)> = jsonl::read(path)?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let id = rec
            .id
            .filter(|id| !id.trim().is_empty())
            .ok_or_else(|| schema_err(path, line, "missing required field \"id\""))?;
        let candidates = rec
            .candidates
            .ok_or_else(|| schema_err(path, line, "missing required field \"candidates\""))?;
        if candidates.is_empty() {
            return Err(schema_err(path, line, "\"candidates\" is empty"));
        }
        if candidates.iter().any(|c| c.trim().is_empty()) {
            return Err(schema_err(path, line, "blank candidate summary"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate candidate set id {id:?}"
            )));
        }
        out.push(SummarySet {
            dialogue_id: id,
            candidates,
            reference: None,
        });
    }
    Ok(out)
}

pub fn write_candidates(path: &Path, sets: &[SummarySet]) -> Result<()> {
    let records: Vec<CandidateRecord> = sets
        .iter()
        .map(|s| CandidateRecord {
            id: Some(s.dialogue_id.clone()),
            candidates: Some(s.candidates.clone()),
        })
        .collect();
    jsonl::write(path, &records)
}

/// Seeded uniform split of a corpus into labeled and unlabeled portions.
///
/// Labeled members are drawn from dialogues that carry a reference. Both portions keep
/// the input record order.
pub fn split_corpus(
    full: &CorpusSplit,
    labeled_ratio: f64,
    unlabeled_ratio: f64,
    seed: u64,
) -> Result<CorpusSplit> {
    let valid = |r: f64| (0.0..=1.0).contains(&r);
    if !valid(labeled_ratio) || !valid(unlabeled_ratio) {
        return Err(Error::arg("split ratios must lie in [0, 1]"));
    }
    if labeled_ratio <= 0.0 && unlabeled_ratio <= 0.0 {
        return Err(Error::arg("at least one split ratio must be positive"));
    }
    if labeled_ratio + unlabeled_ratio > 1.0 + 1e-12 {
        return Err(Error::arg(format!(
            "labeled_ratio + unlabeled_ratio = {} exceeds 1",
            labeled_ratio + unlabeled_ratio
        )));
    }

    let n = full.len();
    let n_labeled = budget(n, labeled_ratio);
    let n_unlabeled = budget(n, unlabeled_ratio);
    if n_labeled > full.labeled.len() {
        return Err(Error::arg(format!(
            "{n_labeled} labeled dialogues requested but only {} carry references",
            full.labeled.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Indices < full.labeled.len() address labeled entries, the rest unlabeled ones.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_ref = full.labeled.len();
    let mut take_labeled: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| i < n_ref)
        .take(n_labeled)
        .collect();
    take_labeled.sort_unstable();
    let chosen: HashSet<usize> = take_labeled.iter().copied().collect();
    let mut take_unlabeled: Vec<usize> = order
        .iter()
        .copied()
        .filter(|i| !chosen.contains(i))
        .take(n_unlabeled)
        .collect();
    take_unlabeled.sort_unstable();

    let dialogue_at = |i: usize| -> Dialogue {
        if i < n_ref {
            full.labeled[i].dialogue.clone()
        } else {
            full.unlabeled[i - n_ref].clone()
        }
    };
    Ok(CorpusSplit {
        name: format!("{}-seed{seed}", full.name),
        labeled: take_labeled
            .iter()
            .map(|&i| full.labeled[i].clone())
            .collect(),
        unlabeled: take_unlabeled.into_iter().map(dialogue_at).collect(),
    })
}
