//! Tabular renderings of elimination results.
//!
//! Two row shapes are produced: one row per (metric, ordering) with the value at every
//! elimination ratio, and one row per (group, metric, method) with the score and its
//! improved ratio rendered as `45.85(191%)`.

use serde::{Deserialize, Serialize};
use sicf_core::eval::{improved_ratio, ElimCurve, ElimReport};

use crate::error::{CliError, CliResult};

/// Percentage cell with two decimals, as metrics are conventionally reported.
fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Integer percent, truncated toward zero.
pub fn ratio_percent(ratio: f64) -> i64 {
    (ratio * 100.0 + 1e-9 * ratio.signum()).trunc() as i64
}

pub fn ratio_cell(score: f64, ratio: Option<f64>) -> String {
    match ratio {
        Some(r) => format!("{score:.2}({}%)", ratio_percent(r)),
        None => format!("{score:.2}(n/a)"),
    }
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Failed(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Failed(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per metric and ordering (`sicf`, `oracle`), values in percent.
pub fn elim_csv(report: &ElimReport) -> CliResult<String> {
    let curve_header = report
        .curve
        .values()
        .next()
        .map(|c| c.ratios.clone())
        .unwrap_or_default();
    let mut header = vec!["metric".to_string(), "order".to_string()];
    header.extend(curve_header.iter().map(|r| format!("r{:.0}", r * 100.0)));
    header.extend(["mean_0_50", "mean_0_90", "improved_ratio"].map(String::from));

    let row = |metric: &str, order: &str, c: &ElimCurve, ir: Option<Option<f64>>| {
        let mut row = vec![metric.to_string(), order.to_string()];
        row.extend(c.values.iter().map(|v| pct(*v)));
        row.push(pct(c.mean_0_50));
        row.push(pct(c.mean_0_90));
        row.push(match ir {
            Some(Some(r)) => format!("{}%", ratio_percent(r)),
            Some(None) => "n/a".to_string(),
            None => String::new(),
        });
        row
    };
    let mut rows = Vec::new();
    for (metric, curve) in &report.curve {
        rows.push(row(
            metric.name(),
            "sicf",
            curve,
            Some(report.improved_ratio[metric]),
        ));
        rows.push(row(
            metric.name(),
            "oracle",
            &report.oracle_curve[metric],
            None,
        ));
    }
    csv_string(&header, &rows)
}

/// An externally measured score to compare against the initial and oracle scores of the
/// same group and metric. All values are in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdsInput {
    pub group: String,
    pub metric: String,
    pub method: String,
    pub initial: f64,
    pub oracle: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdsRow {
    pub group: String,
    pub metric: String,
    pub method: String,
    pub initial: f64,
    pub oracle: f64,
    pub score: f64,
    pub improved_ratio: Option<f64>,
    pub cell: String,
}

impl SsdsRow {
    pub fn from_input(input: SsdsInput) -> Self {
        let ir = improved_ratio(input.score, input.initial, input.oracle).ok();
        SsdsRow {
            cell: ratio_cell(input.score, ir),
            improved_ratio: ir,
            group: input.group,
            metric: input.metric,
            method: input.method,
            initial: input.initial,
            oracle: input.oracle,
            score: input.score,
        }
    }
}

/// Rows for the run's own ranking: initial is the unmodified corpus metric, oracle and
/// score are the 0-90% means of the pseudo-oracle and ranked curves.
pub fn run_rows(report: &ElimReport) -> Vec<SsdsRow> {
    report
        .curve
        .iter()
        .map(|(metric, curve)| {
            SsdsRow::from_input(SsdsInput {
                group: "run".to_string(),
                metric: metric.name().to_string(),
                method: "sicf".to_string(),
                initial: curve.values[0] * 100.0,
                oracle: report.oracle_curve[metric].mean_0_90 * 100.0,
                score: curve.mean_0_90 * 100.0,
            })
        })
        .collect()
}

pub fn ssds_csv(rows: &[SsdsRow]) -> CliResult<String> {
    let header = ["group", "metric", "method", "initial", "oracle", "score"].map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.group.clone(),
                r.metric.clone(),
                r.method.clone(),
                format!("{:.2}", r.initial),
                format!("{:.2}", r.oracle),
                r.cell.clone(),
            ]
        })
        .collect();
    csv_string(&header, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_truncate_toward_zero() {
        assert_eq!(ratio_cell(45.85, Some(1.9117)), "45.85(191%)");
        assert_eq!(ratio_cell(44.98, Some(1.0588)), "44.98(105%)");
        assert_eq!(ratio_cell(43.72, Some(-0.0345)), "43.72(-3%)");
        assert_eq!(ratio_cell(1.0, None), "1.00(n/a)");
        assert_eq!(ratio_percent(1.0), 100);
    }

    #[test]
    fn ssds_rows_compute_improved_ratio() {
        let row = SsdsRow::from_input(SsdsInput {
            group: "g".into(),
            metric: "rouge1".into(),
            method: "m".into(),
            initial: 76.60,
            oracle: 79.09,
            score: 77.94,
        });
        assert_eq!(row.cell, "77.94(53%)");
        let csv = ssds_csv(&[row]).unwrap();
        assert_eq!(
            csv,
            "group,metric,method,initial,oracle,score\ng,rouge1,m,76.60,79.09,77.94(53%)\n"
        );
    }
}
