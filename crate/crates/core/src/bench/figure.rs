use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::run::{db_fit, replicate_data, replicate_stream, shared_als, BAYES, F_BAYES};
use super::{DbBase, Estimator, ExperimentConfig};
use crate::bayes::gibbs_stream;
use crate::error::{Error, Result};

/// Scalar rows written ahead of the draws in every entry file.
pub const FIGURE_SCALARS: [&str; 3] = ["db_mean", "db_variance", "truth"];

/// Long-chain run comparing the de-biased Gaussian limit with posterior draws.
#[derive(Debug, Clone)]
pub struct FigureConfig {
    pub experiment: ExperimentConfig,
    /// Retained posterior draws; at least 10000.
    pub draws: usize,
    /// Which replicate's data to use.
    pub replicate: usize,
    /// `f_bayes` or `bayes`.
    pub sampler: Estimator,
}

impl FigureConfig {
    pub const MIN_DRAWS: usize = 10_000;

    pub fn new(experiment: ExperimentConfig) -> Self {
        Self { experiment, draws: Self::MIN_DRAWS, replicate: 0, sampler: Estimator::FBayes }
    }
}

#[derive(Debug, Clone)]
pub struct FigureEntry {
    pub i: usize,
    pub j: usize,
    pub db_mean: f64,
    pub db_variance: f64,
    pub truth: f64,
    pub draws: Vec<f64>,
    pub path: Option<PathBuf>,
}

impl FigureEntry {
    /// `kind,value` rows: the three scalars, then one `draw` row per draw.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "value"])?;
        for (kind, value) in FIGURE_SCALARS.iter().zip([self.db_mean, self.db_variance, self.truth]) {
            w.write_record([kind.to_string(), format!("{value:.17e}")])?;
        }
        for d in &self.draws {
            w.write_record(["draw".to_string(), format!("{d:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fit the de-biased estimator and a long chain on one data set and collect,
/// per requested entry, the Gaussian parameters, the truth and the draws.
/// Files `entry_<i>_<j>.csv` (1-based) are written into `out_dir` if given.
pub fn emit_figure_data(cfg: &FigureConfig, entries: &[(usize, usize)], out_dir: Option<&Path>) -> Result<Vec<FigureEntry>> {
    let exp = &cfg.experiment;
    exp.validate()?;
    if cfg.draws < FigureConfig::MIN_DRAWS {
        return Err(Error::Config(format!("figure data needs at least {} draws, got {}", FigureConfig::MIN_DRAWS, cfg.draws)));
    }
    if entries.is_empty() {
        return Err(Error::invalid("no entry requested"));
    }
    let (m, p) = (exp.sim.m, exp.sim.p);
    if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= m || j >= p) {
        return Err(Error::invalid(format!("entry ({i}, {j}) outside a {m}x{p} matrix")));
    }
    if !(exp.sigma2() > 0.0) {
        return Err(Error::Config("figure data needs sigma > 0".into()));
    }

    let (truth, obs) = replicate_data(exp, cfg.replicate)?;
    let rep = replicate_stream(exp, cfg.replicate);
    let shared = match exp.freq.db_base {
        DbBase::Shared => Some(shared_als(exp, &obs, &rep)?),
        DbBase::Refit => None,
    };
    let db = db_fit(exp, &obs, shared.as_ref(), &rep)?;
    let variance = db.variance.expect("sigma > 0 gives variances");

    let (mut gibbs, stream) = match cfg.sampler {
        Estimator::FBayes => (exp.f_bayes.gibbs(exp.sim.r, exp.sigma2()), F_BAYES),
        Estimator::Bayes => (exp.bayes.gibbs(exp.sigma2()), BAYES),
        other => return Err(Error::Config(format!("figure sampler must be f_bayes or bayes, got {other}"))),
    };
    gibbs.n_iters = gibbs.burn_in + cfg.draws * gibbs.thin;
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.draws); entries.len()];
    gibbs_stream(&obs, &gibbs, &mut rep.split(stream), None, &mut |f, _| {
        for (col, &(i, j)) in columns.iter_mut().zip(entries) {
            col.push(f.u.row(i).dot(&f.v.row(j)));
        }
        Ok(())
    })?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut out = Vec::with_capacity(entries.len());
    for (&(i, j), draws) in entries.iter().zip(columns) {
        let mut entry = FigureEntry {
            i,
            j,
            db_mean: db.m_db[(i, j)],
            db_variance: variance[(i, j)],
            truth: truth[(i, j)],
            draws,
            path: None,
        };
        if let Some(dir) = out_dir {
            let path = dir.join(format!("entry_{}_{}.csv", i + 1, j + 1));
            entry.write_csv(fs::File::create(&path)?)?;
            entry.path = Some(path);
        }
        out.push(entry);
    }
    Ok(out)
}
