use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{format_rows, write_rows_csv, write_rows_json, Metric, ResultRow};
use super::run::{run_experiment, ExperimentReport};
use super::{Estimator, ExperimentConfig};
use crate::error::{Error, Result};
use crate::sim::{Setting, SimSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
}

impl TableId {
    pub fn setting(self) -> Setting {
        match self {
            TableId::T1 | TableId::T3 => Setting::ExactLowRank,
            TableId::T2 | TableId::T4 => Setting::approx_default(),
        }
    }

    /// Tables 3 and 4 redraw only the observations around one truth.
    pub fn fixed_truth(self) -> bool {
        matches!(self, TableId::T3 | TableId::T4)
    }

    pub fn estimators(self) -> Vec<Estimator> {
        if self.fixed_truth() {
            vec![Estimator::Db, Estimator::FBayes, Estimator::Bayes]
        } else {
            Estimator::ALL.to_vec()
        }
    }

    pub fn metrics(self) -> Vec<Metric> {
        if self.fixed_truth() {
            vec![Metric::CiLength, Metric::Coverage, Metric::Mse]
        } else {
            vec![Metric::Mse, Metric::Nmse, Metric::Pred]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "T1",
            TableId::T2 => "T2",
            TableId::T3 => "T3",
            TableId::T4 => "T4",
        }
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(TableId::T1),
            "T2" | "2" => Ok(TableId::T2),
            "T3" | "3" => Ok(TableId::T3),
            "T4" | "4" => Ok(TableId::T4),
            _ => Err(Error::Config(format!("unknown table `{s}` (T1..T4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 50 replicates per cell.
    #[default]
    Full,
    /// 20 replicates per cell.
    Desk,
}

impl Scale {
    pub fn replicates(self) -> usize {
        match self {
            Scale::Full => 50,
            Scale::Desk => 20,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TableOptions {
    pub scale: Scale,
    pub seed: u64,
    /// Overrides the scale's replicate count.
    pub replicates: Option<usize>,
    /// Drop both samplers from the p = 1000 cells.
    pub skip_large_bayes: bool,
    pub estimators: Option<Vec<Estimator>>,
    /// Estimator settings (freq, chains, levels) copied into every cell.
    pub template: Option<ExperimentConfig>,
    /// Restrict to these (r, p, τ) cells.
    pub cells: Option<Vec<(usize, usize, f64)>>,
}

pub const RANKS: [usize; 2] = [2, 5];
pub const COLUMNS: [usize; 2] = [100, 1000];
pub const MISSING_RATES: [f64; 3] = [0.2, 0.5, 0.8];

/// The table's factorial design as experiment configurations, in row order.
pub fn table_cells(table: TableId, opts: &TableOptions) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for p in COLUMNS {
        for r in RANKS {
            for tau in MISSING_RATES {
                if let Some(cells) = &opts.cells {
                    if !cells.iter().any(|&(cr, cp, ct)| cr == r && cp == p && (ct - tau).abs() < 1e-9) {
                        continue;
                    }
                }
                let sim = SimSpec { m: 100, p, r, setting: table.setting(), tau, sigma: 1.0, seed: opts.seed };
                let mut cfg = ExperimentConfig::new(sim);
                if let Some(t) = &opts.template {
                    cfg.freq = t.freq;
                    cfg.f_bayes = t.f_bayes;
                    cfg.bayes = t.bayes;
                    cfg.levels = t.levels;
                    cfg.output = t.output.clone();
                }
                cfg.seed = opts.seed;
                cfg.fixed_truth = table.fixed_truth();
                cfg.replicates = opts.replicates.unwrap_or(opts.scale.replicates());
                let wanted = opts.estimators.clone().unwrap_or_else(|| table.estimators());
                cfg.estimators = wanted
                    .into_iter()
                    .filter(|e| !(opts.skip_large_bayes && p >= 1000 && matches!(e, Estimator::FBayes | Estimator::Bayes)))
                    .collect();
                if !cfg.estimators.is_empty() {
                    out.push(cfg);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TableReport {
    pub table: TableId,
    pub cells: Vec<(ExperimentConfig, ExperimentReport)>,
    pub text: String,
}

impl TableReport {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.cells.iter().flat_map(|(_, r)| r.rows.iter().cloned()).collect()
    }

    pub fn partial_failure(&self) -> bool {
        self.cells.iter().any(|(_, r)| r.partial_failure())
    }

    /// Write `<name>.txt`, `<name>.csv` and `<name>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.table.name().to_ascii_lowercase();
        let txt = dir.join(format!("{stem}.txt"));
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        fs::write(&txt, &self.text)?;
        let rows = self.rows();
        write_rows_csv(&rows, fs::File::create(&csv)?)?;
        write_rows_json(&rows, fs::File::create(&json)?)?;
        Ok(vec![txt, csv, json])
    }
}

fn describe(table: TableId) -> &'static str {
    match table {
        TableId::T1 => "Setting I (exact low rank), errors",
        TableId::T2 => "Setting II (approximate low rank), errors",
        TableId::T3 => "Setting I, interval lengths, one truth",
        TableId::T4 => "Setting II, interval lengths, one truth",
    }
}

/// Run every cell of `table` and render it.
pub fn reproduce_table(table: TableId, opts: &TableOptions) -> Result<TableReport> {
    let configs = table_cells(table, opts);
    if configs.is_empty() {
        return Err(Error::Config(format!("no cell of {} selected", table.name())));
    }
    let mut text = String::new();
    let _ = writeln!(text, "{}: {}", table.name(), describe(table));
    let mut cells = Vec::new();
    for cfg in configs {
        let report = run_experiment(&cfg)?;
        let _ = writeln!(
            text,
            "\nr = {}, p = {}, tau = {:.0}%  ({} replicates, config {})",
            cfg.sim.r,
            cfg.sim.p,
            cfg.sim.tau * 100.0,
            cfg.replicates,
            report.fingerprint
        );
        let tags: Vec<String> = cfg.estimators.iter().map(|e| e.tag().to_string()).collect();
        text.push_str(&format_rows(&report.rows, &tags, &table.metrics()));
        let failed: usize = report.rows.iter().filter(|r| r.metric == Metric::Mse).map(|r| r.n_failures).sum();
        if failed > 0 {
            let _ = writeln!(text, "failed fits: {failed}");
        }
        cells.push((cfg, report));
    }
    Ok(TableReport { table, cells, text })
}

/// Tolerance band for a desk-scale run of `replicates` against a value
/// reported as `mean (std)` over 50 replicates.
pub fn desk_band(mean: f64, std: f64, replicates: usize) -> (f64, f64) {
    let half = (3.0 * std * (50.0 / replicates as f64).sqrt()).max(0.1 * mean.abs());
    (mean - half, mean + half)
}
