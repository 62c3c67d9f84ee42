//! Collapsing a quality matrix to one scalar: mean, multi-label BNN entropy, or their
//! product.
//!
//! Each column of a normalized k×L matrix is read as a binary label over the k
//! candidates, with candidate i voting `[v, 1 - v]`. Predictive uncertainty is the
//! entropy of the averaged vote, aleatoric the average entropy of the individual votes,
//! and epistemic their difference (the mutual information). Column values are summed.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sicf::QualityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMethod {
    #[default]
    Mean,
    Bnn,
    MBnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnnKind {
    #[default]
    Predictive,
    Aleatoric,
    Epistemic,
}

/// `bnn_kind` is ignored when `method` is [`PhiMethod::Mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PhiConfig {
    #[serde(rename = "phi")]
    pub method: PhiMethod,
    pub bnn_kind: BnnKind,
}

impl PhiConfig {
    pub fn new(method: PhiMethod, bnn_kind: BnnKind) -> Self {
        PhiConfig { method, bnn_kind }
    }
}

impl FromStr for PhiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PhiMethod::Mean),
            "bnn" => Ok(PhiMethod::Bnn),
            "m_bnn" | "m+bnn" => Ok(PhiMethod::MBnn),
            other => Err(Error::arg(format!(
                "unknown phi {other:?} (mean|bnn|m_bnn)"
            ))),
        }
    }
}

impl FromStr for BnnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predictive" => Ok(BnnKind::Predictive),
            "aleatoric" => Ok(BnnKind::Aleatoric),
            "epistemic" => Ok(BnnKind::Epistemic),
            other => Err(Error::arg(format!(
                "unknown bnn kind {other:?} (predictive|aleatoric|epistemic)"
            ))),
        }
    }
}

impl fmt::Display for PhiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhiMethod::Mean => "mean",
            PhiMethod::Bnn => "bnn",
            PhiMethod::MBnn => "m_bnn",
        })
    }
}

impl fmt::Display for BnnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BnnKind::Predictive => "predictive",
            BnnKind::Aleatoric => "aleatoric",
            BnnKind::Epistemic => "epistemic",
        })
    }
}

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

fn require_nonempty(m: &QualityMatrix) -> Result<()> {
    if m.is_empty() {
        Err(Error::arg("empty quality matrix"))
    } else {
        Ok(())
    }
}

fn require_unit_interval(m: &QualityMatrix) -> Result<()> {
    require_nonempty(m)?;
    match m.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::arg(format!(
            "entry {v} outside [0, 1]; normalize first"
        ))),
        None => Ok(()),
    }
}

pub fn phi_mean(m: &QualityMatrix) -> Result<f64> {
    require_nonempty(m)?;
    Ok(m.values.iter().sum::<f64>() / m.values.len() as f64)
}

/// Whole-matrix min-max scaling. A constant matrix maps to zeros.
pub fn minmax_normalize(m: &QualityMatrix) -> QualityMatrix {
    let (lo, hi) = m
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return m.map(|_| 0.0);
    }
    m.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

pub fn bnn_predictive(normalized: &QualityMatrix) -> Result<f64> {
    require_unit_interval(normalized)?;
    let k = normalized.rows as f64;
    Ok((0..normalized.cols)
        .map(|c| binary_entropy(normalized.column(c).sum::<f64>() / k))
        .sum())
}

pub fn bnn_aleatoric(normalized: &QualityMatrix) -> Result<f64> {
    require_unit_interval(normalized)?;
    let k = normalized.rows as f64;
    Ok((0..normalized.cols)
        .map(|c| normalized.column(c).map(binary_entropy).sum::<f64>() / k)
        .sum())
}

/// Predictive minus aleatoric. Concavity of entropy keeps this non-negative; the
/// remaining rounding noise below zero is clamped.
pub fn bnn_epistemic(normalized: &QualityMatrix) -> Result<f64> {
    let predictive = bnn_predictive(normalized)?;
    let aleatoric = bnn_aleatoric(normalized)?;
    Ok((predictive - aleatoric).max(0.0))
}

pub fn bnn(normalized: &QualityMatrix, kind: BnnKind) -> Result<f64> {
    match kind {
        BnnKind::Predictive => bnn_predictive(normalized),
        BnnKind::Aleatoric => bnn_aleatoric(normalized),
        BnnKind::Epistemic => bnn_epistemic(normalized),
    }
}

/// Upper bound of every BNN variant for a matrix with `cols` label columns.
pub fn bnn_upper_bound(cols: usize) -> f64 {
    cols as f64 * LN_2
}

/// Mean of the normalized matrix times its BNN uncertainty.
pub fn phi_m_bnn(m: &QualityMatrix, kind: BnnKind) -> Result<f64> {
    require_nonempty(m)?;
    let normalized = minmax_normalize(m);
    Ok(phi_mean(&normalized)? * bnn(&normalized, kind)?)
}

pub fn phi(m: &QualityMatrix, config: PhiConfig) -> Result<f64> {
    match config.method {
        PhiMethod::Mean => phi_mean(m),
        PhiMethod::Bnn => {
            require_nonempty(m)?;
            bnn(&minmax_normalize(m), config.bnn_kind)
        }
        PhiMethod::MBnn => phi_m_bnn(m, config.bnn_kind),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub predictive: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

/// All three BNN quantities of an already normalized matrix.
pub fn decompose(normalized: &QualityMatrix) -> Result<Decomposition> {
    Ok(Decomposition {
        predictive: bnn_predictive(normalized)?,
        aleatoric: bnn_aleatoric(normalized)?,
        epistemic: bnn_epistemic(normalized)?,
    })
}
