//! Rank-based fusion of the three raw scores and top-fraction selection.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::budget;
use crate::uncertainty::PhiConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    /// The dialogue has no nouns; its coverage score is defined as 0.
    CoverageDegenerate,
}

/// Raw per-dialogue scores. Lower is better for all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreBundle {
    #[serde(rename = "id")]
    pub dialogue_id: String,
    pub lambda_sein: f64,
    pub lambda_cov: f64,
    pub lambda_fai: f64,
    pub representative_candidate_idx: usize,
    #[serde(default)]
    pub flags: Vec<ScoreFlag>,
    pub phi: PhiConfig,
}

impl ScoreBundle {
    pub fn validate(&self) -> Result<()> {
        if self.dialogue_id.is_empty() {
            return Err(Error::Validation("score bundle with empty id".into()));
        }
        for (name, v) in [
            ("lambda_sein", self.lambda_sein),
            ("lambda_cov", self.lambda_cov),
            ("lambda_fai", self.lambda_fai),
        ] {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{}: {name} is not finite",
                    self.dialogue_id
                )));
            }
        }
        Ok(())
    }

    pub fn is_coverage_degenerate(&self) -> bool {
        self.flags.contains(&ScoreFlag::CoverageDegenerate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl Coefficients {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let c = Coefficients { alpha, beta, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::arg(format!(
                "fusion coefficients must be finite and non-negative, got {all:?}"
            )));
        }
        if all.iter().all(|&c| c == 0.0) {
            return Err(Error::arg("fusion coefficients are all zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deltas {
    pub sein: usize,
    pub cov: usize,
    pub fai: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRow {
    pub id: String,
    pub delta: Deltas,
    pub lambda_sicf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
    pub coefficients: Coefficients,
}

impl RankTable {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Rows ordered by fused score, best first, ties by id ascending.
    pub fn best_first(&self) -> Vec<&RankRow> {
        let mut rows: Vec<&RankRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            b.lambda_sicf
                .total_cmp(&a.lambda_sicf)
                .then_with(|| a.id.cmp(&b.id))
        });
        rows
    }

    /// Ids ordered worst first, the order in which force-truth elimination replaces them.
    pub fn worst_first_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .best_first()
            .into_iter()
            .map(|r| r.id.clone())
            .collect();
        ids.reverse();
        ids
    }

    /// Rebuilds a table from stored rows, checking that each rank column is a
    /// permutation of 1..N.
    pub fn from_rows(rows: Vec<RankRow>, coefficients: Coefficients) -> Result<Self> {
        let table = RankTable { rows, coefficients };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (name, pick) in [
            ("sein", (|d: &Deltas| d.sein) as fn(&Deltas) -> usize),
            ("cov", |d: &Deltas| d.cov),
            ("fai", |d: &Deltas| d.fai),
        ] {
            let mut seen = vec![false; n + 1];
            for row in &self.rows {
                let d = pick(&row.delta);
                if d == 0 || d > n || std::mem::replace(&mut seen[d], true) {
                    return Err(Error::Validation(format!(
                        "delta_{name} column is not a permutation of 1..{n}"
                    )));
                }
            }
        }
        if let Some(r) = self.rows.iter().find(|r| !r.lambda_sicf.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: lambda_sicf not finite",
                r.id
            )));
        }
        Ok(())
    }
}

/// One line of the selection output: the chosen dialogue and the candidate index used as
/// its pseudolabel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRecord {
    pub id: String,
    pub lambda_sicf: f64,
    pub delta: Deltas,
    pub representative_candidate_idx: usize,
    #[serde(default)]
    pub flags: Vec<ScoreFlag>,
}

/// [`select_top`] joined with the score bundles.
pub fn selection_records(
    table: &RankTable,
    bundles: &[ScoreBundle],
    ratio: f64,
) -> Result<Vec<SelectionRecord>> {
    let by_id: HashMap<&str, &ScoreBundle> = bundles
        .iter()
        .map(|b| (b.dialogue_id.as_str(), b))
        .collect();
    let rows: HashMap<&str, &RankRow> = table.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    select_top(table, ratio)
        .into_iter()
        .map(|id| {
            let bundle = by_id.get(id.as_str()).ok_or_else(|| {
                Error::Validation(format!("no score bundle for ranked id {id:?}"))
            })?;
            let row = rows[id.as_str()];
            Ok(SelectionRecord {
                lambda_sicf: row.lambda_sicf,
                delta: row.delta,
                representative_candidate_idx: bundle.representative_candidate_idx,
                flags: bundle.flags.clone(),
                id,
            })
        })
        .collect()
}

/// Rank numbers from a descending sort: the largest raw value gets 1, the smallest N.
///
/// Equal values are ordered by id ascending.
pub fn rank_scores<S: AsRef<str>>(values: &[f64], ids: &[S]) -> Result<Vec<usize>> {
    if values.len() != ids.len() {
        return Err(Error::arg(format!(
            "{} values for {} ids",
            values.len(),
            ids.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::arg("nothing to rank"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("NaN in raw scores"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match values[b].partial_cmp(&values[a]) {
        Some(Ordering::Equal) | None => ids[a].as_ref().cmp(ids[b].as_ref()),
        Some(o) => o,
    });
    let mut delta = vec![0; values.len()];
    for (pos, idx) in order.into_iter().enumerate() {
        delta[idx] = pos + 1;
    }
    Ok(delta)
}

pub fn fuse_sicf(bundles: &[ScoreBundle], coefficients: Coefficients) -> Result<RankTable> {
    coefficients.validate()?;
    for b in bundles {
        b.validate()?;
    }
    let ids: Vec<&str> = bundles.iter().map(|b| b.dialogue_id.as_str()).collect();
    let column = |f: fn(&ScoreBundle) -> f64| -> Vec<f64> { bundles.iter().map(f).collect() };
    let sein = rank_scores(&column(|b| b.lambda_sein), &ids)?;
    let cov = rank_scores(&column(|b| b.lambda_cov), &ids)?;
    let fai = rank_scores(&column(|b| b.lambda_fai), &ids)?;

    let scale = 3.0 * bundles.len() as f64;
    let Coefficients { alpha, beta, gamma } = coefficients;
    let rows = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| RankRow {
            id: b.dialogue_id.clone(),
            delta: Deltas {
                sein: sein[i],
                cov: cov[i],
                fai: fai[i],
            },
            lambda_sicf: (alpha * sein[i] as f64 + beta * cov[i] as f64 + gamma * fai[i] as f64)
                / scale,
        })
        .collect();
    Ok(RankTable { rows, coefficients })
}

/// The `floor(N * ratio)` best rows, best first. `ratio` is clamped to `[0, 1]`.
pub fn select_top(table: &RankTable, ratio: f64) -> Vec<String> {
    let take = budget(table.n(), ratio.clamp(0.0, 1.0));
    table
        .best_first()
        .into_iter()
        .take(take)
        .map(|r| r.id.clone())
        .collect()
}
