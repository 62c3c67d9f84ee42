//! Browser bindings for three interactive operations:
//!
//! * score one dialogue's candidate summaries with the synthetic providers,
//! * decompose a matrix's BNN uncertainty,
//! * fuse score bundles into ranks and select the best ratio.
//!
//! Each operation is a plain function returning JSON (testable natively) with a thin
//! `#[wasm_bindgen]` wrapper that turns errors into JavaScript exceptions.

use serde::Serialize;
use sicf_core::corpus::{Dialogue, SummarySet};
use sicf_core::fusion::{
    fuse_sicf, selection_records, Coefficients, RankRow, ScoreBundle, SelectionRecord,
};
use sicf_core::jsonl;
use sicf_core::pipeline::{score_dialogue, MatrixDump, Providers, ScoringConfig};
use sicf_core::sicf::{MatrixKind, QualityMatrix};
use sicf_core::uncertainty::{
    bnn_upper_bound, decompose, minmax_normalize, phi, phi_mean, BnnKind, Decomposition, PhiConfig,
    PhiMethod,
};
use wasm_bindgen::prelude::*;

fn non_blank_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn phi_config(method: &str, kind: &str) -> Result<PhiConfig, String> {
    let method: PhiMethod = method
        .parse()
        .map_err(|e: sicf_core::Error| e.to_string())?;
    let kind: BnnKind = kind.parse().map_err(|e: sicf_core::Error| e.to_string())?;
    Ok(PhiConfig::new(method, kind))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo output serializes")
}

#[derive(Serialize)]
struct DialogueResult {
    bundle: ScoreBundle,
    representative: String,
    matrices: Vec<MatrixDump>,
}

/// Scores candidates (one per line) against a dialogue (one turn per line).
pub fn score_dialogue_json(
    dialogue_text: &str,
    candidates_text: &str,
    method: &str,
    bnn_kind: &str,
    seed: u64,
) -> Result<String, String> {
    let dialogue =
        Dialogue::new("demo", non_blank_lines(dialogue_text)).map_err(|e| e.to_string())?;
    let candidates = non_blank_lines(candidates_text);
    if candidates.is_empty() {
        return Err("enter at least one candidate summary".into());
    }
    let set = SummarySet {
        dialogue_id: dialogue.id.clone(),
        candidates,
        reference: None,
    };
    let config = ScoringConfig {
        phi: phi_config(method, bnn_kind)?,
        ..ScoringConfig::default()
    };
    let score = score_dialogue(&dialogue, &set, &Providers::synthetic(seed), &config)
        .map_err(|e| e.to_string())?;
    Ok(to_json(&DialogueResult {
        representative: set.candidates[score.bundle.representative_candidate_idx].clone(),
        matrices: score.dumps(),
        bundle: score.bundle,
    }))
}

#[derive(Serialize)]
struct DecompositionResult {
    rows: usize,
    cols: usize,
    normalized: Vec<Vec<f64>>,
    decomposition: Decomposition,
    upper_bound: f64,
    mean: f64,
    m_bnn: Decomposition,
}

/// Parses a matrix written one row per line, values separated by spaces or commas.
fn parse_matrix(text: &str) -> Result<QualityMatrix, String> {
    let rows = non_blank_lines(text)
        .iter()
        .enumerate()
        .map(|(i, line)| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| format!("row {}: {s:?} is not a number", i + 1))
                })
                .collect::<Result<Vec<f64>, String>>()
        })
        .collect::<Result<Vec<_>, String>>()?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err("enter at least one row of numbers".into());
    }
    QualityMatrix::from_rows(MatrixKind::Faithfulness, &rows).map_err(|e| e.to_string())
}

/// BNN quantities of a matrix (rows are candidates, columns are items).
pub fn bnn_decompose_json(matrix_text: &str) -> Result<String, String> {
    let raw = parse_matrix(matrix_text)?;
    let normalized = minmax_normalize(&raw);
    let decomposition = decompose(&normalized).map_err(|e| e.to_string())?;
    let m_bnn = |kind| phi(&raw, PhiConfig::new(PhiMethod::MBnn, kind)).map_err(|e| e.to_string());
    Ok(to_json(&DecompositionResult {
        rows: raw.rows,
        cols: raw.cols,
        normalized: (0..normalized.rows)
            .map(|r| normalized.row(r).to_vec())
            .collect(),
        upper_bound: bnn_upper_bound(raw.cols),
        mean: phi_mean(&raw).map_err(|e| e.to_string())?,
        m_bnn: Decomposition {
            predictive: m_bnn(BnnKind::Predictive)?,
            aleatoric: m_bnn(BnnKind::Aleatoric)?,
            epistemic: m_bnn(BnnKind::Epistemic)?,
        },
        decomposition,
    }))
}

#[derive(Serialize)]
struct FusionResult {
    ranks: Vec<RankRow>,
    selection: Vec<SelectionRecord>,
}

/// Fuses score bundles (JSON lines, the `scores.jsonl` format) and selects the best
/// `ratio` of them.
pub fn fuse_select_json(
    scores_jsonl: &str,
    alpha: f64,
    beta: f64,
    gamma: f64,
    ratio: f64,
) -> Result<String, String> {
    let bundles = scores_jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<ScoreBundle>(l).map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect::<Result<Vec<_>, String>>()?;
    if bundles.is_empty() {
        return Err("paste at least one score line".into());
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(format!("ratio {ratio} is outside [0, 1]"));
    }
    let coefficients = Coefficients::new(alpha, beta, gamma).map_err(|e| e.to_string())?;
    let table = fuse_sicf(&bundles, coefficients).map_err(|e| e.to_string())?;
    let selection = selection_records(&table, &bundles, ratio).map_err(|e| e.to_string())?;
    Ok(to_json(&FusionResult {
        ranks: table.best_first().into_iter().cloned().collect(),
        selection,
    }))
}

/// Example input for the fusion panel: a few score lines in `scores.jsonl` form.
pub fn example_scores() -> String {
    let bundles: Vec<ScoreBundle> = [
        ("d01", 0.031, 0.24, -0.01, &[][..]),
        ("d02", 0.040, 0.41, -0.16, &[][..]),
        ("d03", 0.053, 0.91, 0.82, &[][..]),
        ("d04", 0.012, 0.18, -0.40, &[][..]),
        (
            "d05",
            0.047,
            0.00,
            0.35,
            &[sicf_core::fusion::ScoreFlag::CoverageDegenerate][..],
        ),
        ("d06", 0.020, 0.30, 0.05, &[][..]),
        ("d07", 0.066, 1.12, 0.71, &[][..]),
        ("d08", 0.009, 0.22, -0.52, &[][..]),
    ]
    .into_iter()
    .map(|(id, s, c, f, flags)| ScoreBundle {
        dialogue_id: id.to_string(),
        lambda_sein: s,
        lambda_cov: c,
        lambda_fai: f,
        representative_candidate_idx: 0,
        flags: flags.to_vec(),
        phi: PhiConfig::default(),
    })
    .collect();
    jsonl::to_string(&bundles)
}

#[wasm_bindgen(js_name = scoreDialogue)]
pub fn score_dialogue_js(
    dialogue_text: &str,
    candidates_text: &str,
    method: &str,
    bnn_kind: &str,
    seed: u32,
) -> Result<String, JsError> {
    score_dialogue_json(
        dialogue_text,
        candidates_text,
        method,
        bnn_kind,
        u64::from(seed),
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bnnDecompose)]
pub fn bnn_decompose_js(matrix_text: &str) -> Result<String, JsError> {
    bnn_decompose_json(matrix_text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fuseSelect)]
pub fn fuse_select_js(
    scores_jsonl: &str,
    alpha: f64,
    beta: f64,
    gamma: f64,
    ratio: f64,
) -> Result<String, JsError> {
    fuse_select_json(scores_jsonl, alpha, beta, gamma, ratio).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = exampleScores)]
pub fn example_scores_js() -> String {
    example_scores()
}
