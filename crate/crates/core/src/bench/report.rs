use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "NMSE")]
    Nmse,
    #[serde(rename = "Pred")]
    Pred,
    #[serde(rename = "CI_length")]
    CiLength,
    #[serde(rename = "coverage")]
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Mse, Metric::Nmse, Metric::Pred, Metric::CiLength, Metric::Coverage];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "MSE",
            Metric::Nmse => "NMSE",
            Metric::Pred => "Pred",
            Metric::CiLength => "CI_length",
            Metric::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One aggregated (estimator, metric) cell of an experiment. Columns are
/// written in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub fingerprint: String,
    pub setting: String,
    pub m: usize,
    pub p: usize,
    pub r: usize,
    pub tau: f64,
    pub estimator: String,
    pub metric: Metric,
    /// Absent when every replicate failed.
    pub mean: Option<f64>,
    /// Sample standard deviation; absent with fewer than two replicates.
    pub std: Option<f64>,
    pub n_reps: usize,
    pub n_failures: usize,
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "fingerprint", "setting", "m", "p", "r", "tau", "estimator", "metric", "mean", "std", "n_reps", "n_failures",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn write_rows_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}

fn cell(row: Option<&ResultRow>) -> String {
    match row {
        None => "-".into(),
        Some(r) => match (r.mean, r.std) {
            (None, _) => format!("failed ({})", r.n_failures),
            (Some(m), Some(s)) => format!("{m:.3} ({s:.3})"),
            (Some(m), None) => format!("{m:.3}"),
        },
    }
}

/// Text grid of `rows` for one experiment: metrics down, estimators across.
pub fn format_rows(rows: &[ResultRow], estimators: &[String], metrics: &[Metric]) -> String {
    let mut header = vec![String::new()];
    header.extend(estimators.iter().cloned());
    let mut lines = vec![header];
    for &metric in metrics {
        let mut line = vec![metric.name().to_string()];
        for est in estimators {
            line.push(cell(rows.iter().find(|r| &r.estimator == est && r.metric == metric)));
        }
        lines.push(line);
    }
    let widths: Vec<usize> =
        (0..lines[0].len()).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in lines {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
