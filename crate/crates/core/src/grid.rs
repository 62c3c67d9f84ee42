//! Exhaustive search over fusion coefficients, scored by an elimination curve.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::SampleScores;
use crate::fusion::{fuse_sicf, Coefficients, ScoreBundle};

/// Values tried for each of the three coefficients.
pub const COEFFICIENT_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStatus {
    Ok,
    /// All three coefficients are zero, so no ranking exists.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub rank: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub status: GridStatus,
    pub mean_0_50: Option<f64>,
    pub mean_0_90: Option<f64>,
}

/// Every coefficient triple of the grid, alpha varying slowest.
pub fn coefficient_triples() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(COEFFICIENT_GRID.len().pow(3));
    for a in COEFFICIENT_GRID {
        for b in COEFFICIENT_GRID {
            for g in COEFFICIENT_GRID {
                out.push((a, b, g));
            }
        }
    }
    out
}

/// Ranks all 125 triples by the 0-90% mean of the resulting elimination curve, best
/// first. Ties keep grid order; the all-zero triple is listed last as invalid.
pub fn grid_search(bundles: &[ScoreBundle], scores: &SampleScores) -> Result<Vec<GridEntry>> {
    let mut entries = Vec::with_capacity(125);
    for (alpha, beta, gamma) in coefficient_triples() {
        let mut entry = GridEntry {
            rank: 0,
            alpha,
            beta,
            gamma,
            status: GridStatus::Invalid,
            mean_0_50: None,
            mean_0_90: None,
        };
        if let Ok(coefficients) = Coefficients::new(alpha, beta, gamma) {
            let table = fuse_sicf(bundles, coefficients)?;
            let curve = scores.curve(&table.worst_first_ids())?;
            entry.status = GridStatus::Ok;
            entry.mean_0_50 = Some(curve.mean_0_50);
            entry.mean_0_90 = Some(curve.mean_0_90);
        }
        entries.push(entry);
    }
    let key = |e: &GridEntry| e.mean_0_90.unwrap_or(f64::NEG_INFINITY);
    entries.sort_by(|a, b| key(b).total_cmp(&key(a)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(entries)
}
