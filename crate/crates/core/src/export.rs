//! Provider exports: every embedding, tag sequence and NLI judgment a scoring run looks
//! up, written in the file-provider formats.
//!
//! Recording a run of one provider set and replaying the files through
//! [`FileEmbeddings`](crate::providers::FileEmbeddings), [`FileTags`](crate::providers::FileTags)
//! and [`FileNli`](crate::providers::FileNli) reproduces that run's scores exactly.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::corpus::{Dialogue, SummarySet};
use crate::error::Result;
use crate::jsonl;
use crate::pipeline::{score_corpus, Providers, ScoringConfig};
use crate::providers::{
    EmbedKey, EmbedRole, Embedder, EmbeddingRecord, EmbeddingVector, NliJudgment, NliKey, NliModel,
    NliRecord, TagRecord, TagRecordScope, TagScope, TaggedToken, Tagger,
};

#[derive(Default)]
struct Log {
    embeddings: BTreeMap<EmbedKey, EmbeddingVector>,
    tags: BTreeMap<(String, TagScope), Vec<TaggedToken>>,
    nli: BTreeMap<NliKey, NliJudgment>,
}

type SharedLog = Arc<Mutex<Log>>;

struct RecordingEmbedder(Box<dyn Embedder>, SharedLog);
struct RecordingTagger(Box<dyn Tagger>, SharedLog);
struct RecordingNli(Box<dyn NliModel>, SharedLog);

impl Embedder for RecordingEmbedder {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn embed(&self, key: &EmbedKey, text: &str) -> Result<EmbeddingVector> {
        let v = self.0.embed(key, text)?;
        self.1
            .lock()
            .expect("log lock")
            .embeddings
            .insert(key.clone(), v.clone());
        Ok(v)
    }

    fn describe(&self) -> String {
        self.0.describe()
    }
}

impl Tagger for RecordingTagger {
    fn tag(&self, id: &str, scope: TagScope, text: &str) -> Result<Vec<TaggedToken>> {
        let tokens = self.0.tag(id, scope, text)?;
        self.1
            .lock()
            .expect("log lock")
            .tags
            .insert((id.to_string(), scope), tokens.clone());
        Ok(tokens)
    }

    fn describe(&self) -> String {
        self.0.describe()
    }
}

impl NliModel for RecordingNli {
    fn judge(&self, key: &NliKey, premise: &str, hypothesis: &str) -> Result<NliJudgment> {
        let j = self.0.judge(key, premise, hypothesis)?;
        self.1.lock().expect("log lock").nli.insert(key.clone(), j);
        Ok(j)
    }

    fn describe(&self) -> String {
        self.0.describe()
    }
}

/// Export records, each list sorted by key.
#[derive(Debug, Default)]
pub struct ProviderExport {
    pub embeddings: Vec<EmbeddingRecord>,
    pub tags: Vec<TagRecord>,
    pub nli: Vec<NliRecord>,
}

impl ProviderExport {
    /// Scores the corpus once with `providers` and keeps every lookup.
    pub fn record<'a>(
        dialogues: impl IntoIterator<Item = &'a Dialogue>,
        sets: &[SummarySet],
        providers: Providers,
        config: &ScoringConfig,
    ) -> Result<Self> {
        let log = SharedLog::default();
        let recording = Providers {
            embedder: Box::new(RecordingEmbedder(providers.embedder, log.clone())),
            tagger: Box::new(RecordingTagger(providers.tagger, log.clone())),
            nli: Box::new(RecordingNli(providers.nli, log.clone())),
        };
        score_corpus(dialogues, sets, &recording, config, 1)?;
        drop(recording);
        let log = Arc::try_unwrap(log)
            .ok()
            .expect("recorders dropped")
            .into_inner()
            .expect("log lock");
        Ok(ProviderExport {
            embeddings: log
                .embeddings
                .into_iter()
                .map(|(key, v)| EmbeddingRecord {
                    id: key.id,
                    role: key.role,
                    index: key.index,
                    vector: v.values().to_vec(),
                })
                .collect(),
            tags: log
                .tags
                .into_iter()
                .map(|((id, scope), tokens)| {
                    let (scope, turn_idx, cand_idx) = match scope {
                        TagScope::Turn(t) => (TagRecordScope::Dialogue, Some(t), None),
                        TagScope::Candidate(c) => (TagRecordScope::Candidate, None, Some(c)),
                    };
                    TagRecord {
                        id,
                        scope,
                        cand_idx,
                        turn_idx,
                        tokens,
                    }
                })
                .collect(),
            nli: log
                .nli
                .into_iter()
                .map(|(key, j)| NliRecord {
                    id: key.id,
                    cand_idx: key.cand_idx,
                    premise_idx: key.premise_idx,
                    hypothesis_idx: key.hypothesis_idx,
                    positive: j.positive,
                    negative: j.negative,
                })
                .collect(),
        })
    }

    /// Number of embedding records per role.
    pub fn role_counts(&self) -> BTreeMap<EmbedRole, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.embeddings {
            *counts.entry(r.role).or_default() += 1;
        }
        counts
    }

    pub fn write(&self, embeddings: &Path, tags: &Path, nli: &Path) -> Result<()> {
        jsonl::write(embeddings, &self.embeddings)?;
        jsonl::write(tags, &self.tags)?;
        jsonl::write(nli, &self.nli)
    }
}
