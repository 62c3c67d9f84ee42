//! Per-dialogue scoring: providers in, [`ScoreBundle`] and quality matrices out.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, SummarySet};
use crate::error::{Error, Result};
use crate::fusion::{ScoreBundle, ScoreFlag};
use crate::providers::{
    EmbedKey, EmbedRole, Embedder, HashEmbedder, LexiconTagger, NliModel, OverlapNli, PosTag,
    TagScope, Tagger,
};
use crate::sicf::{
    coverage_matrix, faithfulness_matrix, representative_summary, semantic_invariance,
    CoverageInputs, DialogueSentence, FaithfulnessInputs, MatrixKind, NounType, QualityMatrix,
    DEFAULT_COVERAGE_PENALTY,
};
use crate::text::summary_sentences;
use crate::uncertainty::{phi, PhiConfig};

pub struct Providers {
    pub embedder: Box<dyn Embedder>,
    pub tagger: Box<dyn Tagger>,
    pub nli: Box<dyn NliModel>,
}

impl Providers {
    pub fn synthetic(seed: u64) -> Self {
        Providers {
            embedder: Box::new(HashEmbedder::new(seed)),
            tagger: Box::new(LexiconTagger::default()),
            nli: Box::new(OverlapNli),
        }
    }

    pub fn info(&self) -> ProviderInfo {
        ProviderInfo {
            embedder: self.embedder.describe(),
            tagger: self.tagger.describe(),
            nli: self.nli.describe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub embedder: String,
    pub tagger: String,
    pub nli: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub phi: PhiConfig,
    pub coverage_penalty: f64,
    /// `None` uses the per-dialogue worst weighted NLI value.
    pub faithfulness_penalty: Option<f64>,
    /// Use the first `k` candidates of every set; `None` uses them all.
    pub k: Option<usize>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            phi: PhiConfig::default(),
            coverage_penalty: DEFAULT_COVERAGE_PENALTY,
            faithfulness_penalty: None,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueScore {
    pub bundle: ScoreBundle,
    pub coverage: Option<QualityMatrix>,
    pub faithfulness: QualityMatrix,
}

/// Matrix dump record for debugging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDump {
    pub id: String,
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DialogueScore {
    pub fn dumps(&self) -> Vec<MatrixDump> {
        self.coverage
            .iter()
            .chain(std::iter::once(&self.faithfulness))
            .map(|m| MatrixDump {
                id: self.bundle.dialogue_id.clone(),
                kind: m.kind,
                rows: m.rows,
                cols: m.cols,
                values: m.values.clone(),
            })
            .collect()
    }
}

struct NounTally {
    first: (usize, usize),
    surface: String,
    common: usize,
    proper: usize,
}

/// Dialogue noun types and per-turn noun weights from the tagger.
fn dialogue_nouns(
    dialogue: &Dialogue,
    providers: &Providers,
) -> Result<(Vec<NounType>, Vec<DialogueSentence>)> {
    let mut tallies: Vec<NounTally> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut sentences = Vec::with_capacity(dialogue.turns.len());
    for (turn_idx, turn) in dialogue.turns.iter().enumerate() {
        let tokens = providers
            .tagger
            .tag(&dialogue.id, TagScope::Turn(turn_idx), turn)?;
        let mut common = 0usize;
        let mut propers: Vec<String> = Vec::new();
        for tok in tokens.iter().filter(|t| t.is_noun()) {
            let lowered = tok.surface.to_lowercase();
            let slot = *index.entry(lowered.clone()).or_insert_with(|| {
                tallies.push(NounTally {
                    first: (turn_idx, tok.position),
                    surface: lowered.clone(),
                    common: 0,
                    proper: 0,
                });
                tallies.len() - 1
            });
            if tok.tag == PosTag::ProperNoun {
                tallies[slot].proper += 1;
                if !propers.contains(&lowered) {
                    propers.push(lowered);
                }
            } else {
                tallies[slot].common += 1;
                common += 1;
            }
        }
        sentences.push(DialogueSentence {
            text: turn.clone(),
            noun_weight: (common + propers.len()) as f64,
        });
    }

    let nouns = tallies
        .into_iter()
        .map(|t| {
            let key = EmbedKey::new(
                &dialogue.id,
                EmbedRole::DialogueNoun,
                [t.first.0, t.first.1],
            );
            Ok(NounType {
                embedding: providers.embedder.embed(&key, &t.surface)?,
                surface: t.surface,
                common_occurrences: t.common,
                proper_occurrences: t.proper,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((nouns, sentences))
}

pub fn score_dialogue(
    dialogue: &Dialogue,
    set: &SummarySet,
    providers: &Providers,
    config: &ScoringConfig,
) -> Result<DialogueScore> {
    if set.dialogue_id != dialogue.id {
        return Err(Error::arg(format!(
            "candidate set {} paired with dialogue {}",
            set.dialogue_id, dialogue.id
        )));
    }
    let candidates = match config.k {
        Some(k) if set.candidates.len() < k => {
            return Err(Error::Validation(format!(
                "dialogue {} has {} candidates, k = {k}",
                dialogue.id,
                set.candidates.len()
            )))
        }
        Some(k) => &set.candidates[..k],
        None => &set.candidates[..],
    };
    if candidates.is_empty() {
        return Err(Error::Validation(format!(
            "dialogue {} has no candidates",
            dialogue.id
        )));
    }
    let id = dialogue.id.as_str();

    let text_embeddings = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            providers
                .embedder
                .embed(&EmbedKey::new(id, EmbedRole::CandidateText, [i]), c)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda_sein = semantic_invariance(&text_embeddings)?;
    let representative = representative_summary(&text_embeddings)?;

    let (nouns, sentences) = dialogue_nouns(dialogue, providers)?;
    let mut candidate_nouns = Vec::with_capacity(candidates.len());
    for (i, cand) in candidates.iter().enumerate() {
        let tokens = providers.tagger.tag(id, TagScope::Candidate(i), cand)?;
        let embs = tokens
            .iter()
            .filter(|t| t.is_noun())
            .map(|t| {
                let key = EmbedKey::new(id, EmbedRole::SummaryNoun, [i, t.position]);
                providers.embedder.embed(&key, &t.surface.to_lowercase())
            })
            .collect::<Result<Vec<_>>>()?;
        candidate_nouns.push(embs);
    }

    let coverage = coverage_matrix(
        &CoverageInputs {
            dialogue_nouns: nouns,
            candidate_nouns,
        },
        config.coverage_penalty,
    )?;
    let mut flags = Vec::new();
    let lambda_cov = match &coverage {
        Some(m) => phi(m, config.phi)?,
        None => {
            flags.push(ScoreFlag::CoverageDegenerate);
            0.0
        }
    };

    let faithfulness = faithfulness_matrix(
        &FaithfulnessInputs {
            dialogue_id: id.to_string(),
            dialogue_sentences: sentences,
            candidate_sentences: candidates.iter().map(|c| summary_sentences(c)).collect(),
        },
        providers.nli.as_ref(),
        config.faithfulness_penalty,
    )?;
    let lambda_fai = phi(&faithfulness, config.phi)?;

    let bundle = ScoreBundle {
        dialogue_id: id.to_string(),
        lambda_sein,
        lambda_cov,
        lambda_fai,
        representative_candidate_idx: representative,
        flags,
        phi: config.phi,
    };
    bundle
        .validate()
        .map_err(|e| Error::Invariant(e.to_string()))?;
    Ok(DialogueScore {
        bundle,
        coverage,
        faithfulness,
    })
}

/// Scores every dialogue on `threads` workers. Output is ordered by dialogue id and does
/// not depend on the thread count.
pub fn score_corpus<'a>(
    dialogues: impl IntoIterator<Item = &'a Dialogue>,
    sets: &[SummarySet],
    providers: &Providers,
    config: &ScoringConfig,
    threads: usize,
) -> Result<Vec<DialogueScore>> {
    let by_id: BTreeMap<&str, &Dialogue> =
        dialogues.into_iter().map(|d| (d.id.as_str(), d)).collect();
    let mut sets_by_id: HashMap<&str, &SummarySet> = HashMap::new();
    for s in sets {
        if !by_id.contains_key(s.dialogue_id.as_str()) {
            return Err(Error::Validation(format!(
                "candidate set for unknown dialogue {:?}",
                s.dialogue_id
            )));
        }
        sets_by_id.insert(s.dialogue_id.as_str(), s);
    }
    let jobs: Vec<(&Dialogue, &SummarySet)> = by_id
        .values()
        .map(|d| {
            sets_by_id
                .get(d.id.as_str())
                .map(|s| (*d, *s))
                .ok_or_else(|| Error::Validation(format!("no candidates for dialogue {:?}", d.id)))
        })
        .collect::<Result<_>>()?;

    let results: Mutex<Vec<Option<Result<DialogueScore>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(d, s)) = jobs.get(i) else { break };
                let r = score_dialogue(d, s, providers, config);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dialogue() -> (Dialogue, SummarySet) {
        let d = Dialogue::new(
            "d1",
            vec![
                "Tom: Laura, can you get the cake for the party?".into(),
                "Laura: sure, I will pick up the cake after work".into(),
                "Tom: thanks".into(),
            ],
        )
        .unwrap();
        let s = SummarySet {
            dialogue_id: "d1".into(),
            candidates: vec![
                "Laura will pick up the cake for the party after work.".into(),
                "Laura will get the cake. Tom thanks her.".into(),
                "Tom and Laura talk.".into(),
            ],
            reference: None,
        };
        (d, s)
    }

    #[test]
    fn scores_a_dialogue() {
        let (d, s) = dialogue();
        let p = Providers::synthetic(0);
        let out = score_dialogue(&d, &s, &p, &ScoringConfig::default()).unwrap();
        let cov = out.coverage.as_ref().unwrap();
        // types: tom, laura, cake, party, i, work (the synthetic tagger reads "I" as proper)
        assert_eq!(cov.cols, 6);
        assert_eq!(cov.rows, 3);
        assert_eq!(out.faithfulness.cols, 3);
        assert!(out.bundle.lambda_sein > 0.0);
        assert!(out.bundle.flags.is_empty());
        // candidate 2 mentions no common noun, so its cake column distance is positive
        assert!(cov.get(2, 2) > 0.0);
        assert_eq!(cov.get(0, 2), 0.0);
    }

    #[test]
    fn noun_weights_cap_proper_nouns_per_sentence() {
        let d = Dialogue::new(
            "x",
            vec![
                "Tom: Tom and Tom want cake and cake".into(),
                "ok then".into(),
            ],
        )
        .unwrap();
        let (nouns, sentences) = dialogue_nouns(&d, &Providers::synthetic(0)).unwrap();
        assert_eq!(sentences[0].noun_weight, 3.0);
        assert_eq!(sentences[1].noun_weight, 0.0);
        let tom = nouns.iter().find(|n| n.surface == "tom").unwrap();
        assert_eq!((tom.proper_occurrences, tom.weight()), (3, 1.0));
        let cake = nouns.iter().find(|n| n.surface == "cake").unwrap();
        assert_eq!(cake.weight(), 2.0);
    }

    #[test]
    fn nounless_dialogue_is_flagged() {
        let d = Dialogue::new("z", vec!["see you soon".into(), "ok bye".into()]).unwrap();
        let s = SummarySet {
            dialogue_id: "z".into(),
            candidates: vec!["they say bye.".into(), "bye".into()],
            reference: None,
        };
        let out =
            score_dialogue(&d, &s, &Providers::synthetic(0), &ScoringConfig::default()).unwrap();
        assert!(out.coverage.is_none());
        assert_eq!(out.bundle.lambda_cov, 0.0);
        assert!(out.bundle.is_coverage_degenerate());
    }

    #[test]
    fn k_truncates_or_rejects() {
        let (d, s) = dialogue();
        let p = Providers::synthetic(0);
        let cfg = ScoringConfig {
            k: Some(2),
            ..Default::default()
        };
        assert_eq!(
            score_dialogue(&d, &s, &p, &cfg).unwrap().faithfulness.rows,
            2
        );
        let cfg = ScoringConfig {
            k: Some(4),
            ..Default::default()
        };
        assert!(score_dialogue(&d, &s, &p, &cfg).is_err());
    }

    #[test]
    fn corpus_scoring_is_thread_count_independent() {
        let (d, s) = dialogue();
        let mut dialogues = vec![];
        let mut sets = vec![];
        for i in 0..7 {
            let mut d = d.clone();
            d.id = format!("d{i}");
            let mut s = s.clone();
            s.dialogue_id = d.id.clone();
            s.candidates.rotate_left(i % 3);
            dialogues.push(d);
            sets.push(s);
        }
        let p = Providers::synthetic(1);
        let one = score_corpus(&dialogues, &sets, &p, &ScoringConfig::default(), 1).unwrap();
        let four = score_corpus(&dialogues, &sets, &p, &ScoringConfig::default(), 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[0].bundle.dialogue_id, "d0");

        assert!(score_corpus(&dialogues[..3], &sets, &p, &ScoringConfig::default(), 1).is_err());
    }
}
