//! Validators for every file the engine reads or writes.
//!
//! Each validator parses the file with its strict record type and checks the
//! cross-record invariants that a line-by-line parse cannot see.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{load_candidates, load_corpus, SplitKind};
use crate::error::{Error, Result};
use crate::eval::ElimReport;
use crate::fusion::{Coefficients, RankRow, RankTable, ScoreBundle, SelectionRecord};
use crate::grid::GridEntry;
use crate::jsonl;
use crate::pipeline::MatrixDump;
use crate::providers::{FileEmbeddings, FileNli, FileTags};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Corpus,
    Candidates,
    Embeddings,
    Tags,
    Nli,
    Scores,
    Ranks,
    Selection,
    Matrices,
    ElimReport,
    Grid,
}

impl FileKind {
    pub const ALL: [FileKind; 11] = [
        FileKind::Corpus,
        FileKind::Candidates,
        FileKind::Embeddings,
        FileKind::Tags,
        FileKind::Nli,
        FileKind::Scores,
        FileKind::Ranks,
        FileKind::Selection,
        FileKind::Matrices,
        FileKind::ElimReport,
        FileKind::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FileKind::Corpus => "corpus",
            FileKind::Candidates => "candidates",
            FileKind::Embeddings => "embeddings",
            FileKind::Tags => "tags",
            FileKind::Nli => "nli",
            FileKind::Scores => "scores",
            FileKind::Ranks => "ranks",
            FileKind::Selection => "selection",
            FileKind::Matrices => "matrices",
            FileKind::ElimReport => "elim-report",
            FileKind::Grid => "grid",
        }
    }
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FileKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown file kind {s:?}")))
    }
}

fn unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>, what: &str) -> Result<usize> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("duplicate id {id:?} in {what}")));
        }
    }
    Ok(seen.len())
}

/// Validates `path` as a file of the given kind and returns its record count.
pub fn validate_file(kind: FileKind, path: &Path) -> Result<usize> {
    match kind {
        FileKind::Corpus => Ok(load_corpus(path, SplitKind::Mixed)?.len()),
        FileKind::Candidates => Ok(load_candidates(path)?.len()),
        FileKind::Embeddings => Ok(FileEmbeddings::load(path)?.len()),
        FileKind::Tags => Ok(jsonl::read::<crate::providers::TagRecord>(path)
            .and_then(|r| FileTags::load(path).map(|_| r.len()))?),
        FileKind::Nli => Ok(FileNli::load(path)?.len()),
        FileKind::Scores => {
            let rows: Vec<(usize, ScoreBundle)> = jsonl::read(path)?;
            for (_, b) in &rows {
                b.validate()?;
            }
            unique_ids(rows.iter().map(|(_, b)| b.dialogue_id.as_str()), "scores")
        }
        FileKind::Ranks => {
            let rows: Vec<RankRow> = jsonl::read(path)?.into_iter().map(|(_, r)| r).collect();
            unique_ids(rows.iter().map(|r| r.id.as_str()), "ranks")?;
            let n = rows.len();
            RankTable::from_rows(rows, Coefficients::default())?;
            Ok(n)
        }
        FileKind::Selection => {
            let rows: Vec<(usize, SelectionRecord)> = jsonl::read(path)?;
            if rows
                .windows(2)
                .any(|w| w[0].1.lambda_sicf < w[1].1.lambda_sicf)
            {
                return Err(Error::Validation("selection not sorted best first".into()));
            }
            unique_ids(rows.iter().map(|(_, r)| r.id.as_str()), "selection")
        }
        FileKind::Matrices => {
            let rows: Vec<(usize, MatrixDump)> = jsonl::read(path)?;
            for (line, m) in &rows {
                if m.rows * m.cols != m.values.len() || m.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        line: *line,
                        message: "matrix shape or values invalid".into(),
                    });
                }
            }
            Ok(rows.len())
        }
        FileKind::ElimReport => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let report: ElimReport = serde_json::from_str(&text).map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?;
            report.validate()?;
            Ok(report.curve.len())
        }
        FileKind::Grid => {
            let rows: Vec<(usize, GridEntry)> = jsonl::read(path)?;
            if rows.iter().enumerate().any(|(i, (_, e))| e.rank != i + 1) {
                return Err(Error::Validation(
                    "grid ranks must run 1..N in order".into(),
                ));
            }
            Ok(rows.len())
        }
    }
}
