//! Summarization metrics, force-truth elimination curves and the improved ratio.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{EmbeddingVector, HashEmbedder};
use crate::text::{budget, metric_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "emb_f")]
    EmbF,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rouge1, Metric::Rouge2, Metric::RougeL, Metric::EmbF];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
            Metric::EmbF => "emb_f",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown metric {s:?} (rouge1|rouge2|rougeL|emb_f)")))
    }
}

fn f1(overlap: f64, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0.0 {
        return 0.0;
    }
    let p = overlap / cand_len as f64;
    let r = overlap / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// ROUGE-N F1 with clipped n-gram counts, for n in {1, 2}.
///
/// When neither side has an n-gram the score is 1 for identical token lists and 0
/// otherwise.
pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::arg(format!("ROUGE-N supports n = 1 or 2, got {n}")));
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refs.values().sum();
    if cand_total == 0 && ref_total == 0 {
        let same = candidate.len() == reference.len()
            && candidate
                .iter()
                .zip(reference)
                .all(|(a, b)| a.as_ref() == b.as_ref());
        return Ok(if same { 1.0 } else { 0.0 });
    }
    let overlap: usize = cand
        .iter()
        .map(|(g, c)| refs.get(g).map_or(0, |r| (*c).min(*r)))
        .sum();
    Ok(f1(overlap as f64, cand_total, ref_total))
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence. Two empty lists score 1.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    f1(
        lcs_len(candidate, reference) as f64,
        candidate.len(),
        reference.len(),
    )
}

/// Token similarity for greedy matching: equal tokens score 1, otherwise the cosine of
/// their embeddings floored at 0.
fn token_similarity(a: (&str, &EmbeddingVector), b: (&str, &EmbeddingVector)) -> f64 {
    if a.0 == b.0 {
        1.0
    } else {
        a.1.cosine(b.1).clamp(0.0, 1.0)
    }
}

/// Greedy-matching embedding F score without idf weighting.
pub fn emb_f<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    embed: &dyn Fn(&str) -> Result<EmbeddingVector>,
) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::arg("emb_f needs non-empty candidate and reference"));
    }
    let embed_all = |toks: &[S]| -> Result<Vec<(String, EmbeddingVector)>> {
        toks.iter()
            .map(|t| Ok((t.as_ref().to_string(), embed(t.as_ref())?)))
            .collect()
    };
    let cand = embed_all(candidate)?;
    let refs = embed_all(reference)?;
    let greedy = |from: &[(String, EmbeddingVector)], to: &[(String, EmbeddingVector)]| -> f64 {
        from.iter()
            .map(|(ta, ea)| {
                to.iter()
                    .map(|(tb, eb)| token_similarity((ta, ea), (tb, eb)))
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    let recall = greedy(&refs, &cand);
    let precision = greedy(&cand, &refs);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Scores prediction/reference text pairs under any built-in metric.
///
/// Text is lowercased and split on non-alphanumeric runs. Embedding F uses the
/// synthetic hash embedder for tokens.
#[derive(Debug, Clone, Default)]
pub struct MetricScorer {
    embedder: HashEmbedder,
}

impl MetricScorer {
    pub fn new(embedder: HashEmbedder) -> Self {
        MetricScorer { embedder }
    }

    pub fn score(&self, metric: Metric, prediction: &str, reference: &str) -> Result<f64> {
        let cand = metric_tokens(prediction);
        let refs = metric_tokens(reference);
        match metric {
            Metric::Rouge1 => rouge_n(&cand, &refs, 1),
            Metric::Rouge2 => rouge_n(&cand, &refs, 2),
            Metric::RougeL => Ok(rouge_l(&cand, &refs)),
            Metric::EmbF => match (cand.is_empty(), refs.is_empty()) {
                (true, true) => Ok(1.0),
                (true, false) | (false, true) => Ok(0.0),
                _ => emb_f(&cand, &refs, &|t| self.embedder.embed_text(t)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSample {
    pub id: String,
    pub prediction: String,
    pub reference: String,
}

/// Elimination ratios 0%, 10%, ..., 90%.
pub fn elimination_ratios() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElimCurve {
    pub ratios: Vec<f64>,
    pub values: Vec<f64>,
    pub mean_0_50: f64,
    pub mean_0_90: f64,
}

/// Per-sample scores before and after replacement by the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleScores {
    pub ids: Vec<String>,
    pub predicted: Vec<f64>,
    pub replaced: Vec<f64>,
}

impl SampleScores {
    /// Replaced samples are re-scored reference against itself.
    pub fn compute(samples: &[EvalSample], metric: Metric, scorer: &MetricScorer) -> Result<Self> {
        let mut predicted = Vec::with_capacity(samples.len());
        let mut replaced = Vec::with_capacity(samples.len());
        for s in samples {
            predicted.push(scorer.score(metric, &s.prediction, &s.reference)?);
            replaced.push(scorer.score(metric, &s.reference, &s.reference)?);
        }
        Ok(SampleScores {
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            predicted,
            replaced,
        })
    }

    fn order_indices(&self, quality_order: &[String]) -> Result<Vec<usize>> {
        let position: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        if position.len() != self.ids.len() {
            return Err(Error::arg("duplicate sample ids"));
        }
        if quality_order.len() != self.ids.len() {
            return Err(Error::arg(format!(
                "quality order has {} ids for {} samples",
                quality_order.len(),
                self.ids.len()
            )));
        }
        let mut seen = vec![false; self.ids.len()];
        quality_order
            .iter()
            .map(|id| {
                let &i = position
                    .get(id.as_str())
                    .ok_or_else(|| Error::arg(format!("quality order names unknown id {id:?}")))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::arg(format!("quality order repeats id {id:?}")));
                }
                Ok(i)
            })
            .collect()
    }

    /// Worst-first order by the true per-sample metric, ties by id ascending.
    pub fn oracle_order(&self) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.ids.len()).collect();
        idx.sort_by(|&a, &b| {
            self.predicted[a]
                .total_cmp(&self.predicted[b])
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        idx.into_iter().map(|i| self.ids[i].clone()).collect()
    }

    pub fn curve(&self, quality_order: &[String]) -> Result<ElimCurve> {
        let order = self.order_indices(quality_order)?;
        let n = self.ids.len();
        if n == 0 {
            return Err(Error::arg("no samples"));
        }
        let ratios = elimination_ratios();
        let mut is_replaced = vec![false; n];
        let mut values = Vec::with_capacity(ratios.len());
        for &r in &ratios {
            for &i in &order[..budget(n, r)] {
                is_replaced[i] = true;
            }
            let total: f64 = (0..n)
                .map(|i| {
                    if is_replaced[i] {
                        self.replaced[i]
                    } else {
                        self.predicted[i]
                    }
                })
                .sum();
            values.push(total / n as f64);
        }
        let mean_0_50 = values[..6].iter().sum::<f64>() / 6.0;
        let mean_0_90 = values.iter().sum::<f64>() / values.len() as f64;
        Ok(ElimCurve {
            ratios,
            values,
            mean_0_50,
            mean_0_90,
        })
    }
}

/// Force-truth elimination: for each ratio r, the first `floor(N r)` samples of
/// `quality_order` (worst first) have their prediction replaced by the reference.
pub fn elimination_curve(
    samples: &[EvalSample],
    quality_order: &[String],
    metric: Metric,
    scorer: &MetricScorer,
) -> Result<ElimCurve> {
    SampleScores::compute(samples, metric, scorer)?.curve(quality_order)
}

/// Elimination report for one ranking: curves per metric for the ranking and for the
/// pseudo oracle, and the improved ratio of the ranking's 0-90% mean.
///
/// The improved ratio here takes the unmodified corpus metric (0% point) as the initial
/// score and the pseudo oracle's 0-90% mean as the oracle score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElimReport {
    pub curve: BTreeMap<Metric, ElimCurve>,
    pub oracle_curve: BTreeMap<Metric, ElimCurve>,
    pub improved_ratio: BTreeMap<Metric, Option<f64>>,
}

impl ElimReport {
    pub fn build(
        samples: &[EvalSample],
        worst_first: &[String],
        metrics: &[Metric],
        scorer: &MetricScorer,
    ) -> Result<Self> {
        let mut report = ElimReport {
            curve: BTreeMap::new(),
            oracle_curve: BTreeMap::new(),
            improved_ratio: BTreeMap::new(),
        };
        for &metric in metrics {
            let scores = SampleScores::compute(samples, metric, scorer)?;
            let curve = scores.curve(worst_first)?;
            let oracle = scores.curve(&scores.oracle_order())?;
            let ir = improved_ratio(curve.mean_0_90, curve.values[0], oracle.mean_0_90).ok();
            report.curve.insert(metric, curve);
            report.oracle_curve.insert(metric, oracle);
            report.improved_ratio.insert(metric, ir);
        }
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        for curve in self.curve.values().chain(self.oracle_curve.values()) {
            curve.validate()?;
        }
        if self.curve.keys().ne(self.oracle_curve.keys())
            || self.curve.keys().ne(self.improved_ratio.keys())
        {
            return Err(Error::Validation(
                "report sections cover different metrics".into(),
            ));
        }
        Ok(())
    }
}

impl ElimCurve {
    pub fn validate(&self) -> Result<()> {
        if self.ratios != elimination_ratios() || self.values.len() != self.ratios.len() {
            return Err(Error::Validation(
                "curve must have the ten ratios 0.0..0.9".into(),
            ));
        }
        if self.values.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
            return Err(Error::Validation("curve value outside [0, 1]".into()));
        }
        let m50 = self.values[..6].iter().sum::<f64>() / 6.0;
        let m90 = self.values.iter().sum::<f64>() / 10.0;
        if (m50 - self.mean_0_50).abs() > 1e-12 || (m90 - self.mean_0_90).abs() > 1e-12 {
            return Err(Error::Validation(
                "curve means do not match its values".into(),
            ));
        }
        Ok(())
    }
}

/// `(ms_m - ms_ini) / (ms_ora - ms_ini)`; may exceed 1 or go negative.
pub fn improved_ratio(ms_m: f64, ms_ini: f64, ms_ora: f64) -> Result<f64> {
    if ms_ora == ms_ini {
        return Err(Error::UndefinedRatio(ms_ini));
    }
    Ok((ms_m - ms_ini) / (ms_ora - ms_ini))
}
