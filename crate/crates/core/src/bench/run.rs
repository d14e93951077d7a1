use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::report::{write_rows_csv, write_rows_json, Metric, ResultRow};
use super::{DbBase, Estimator, ExperimentConfig, Sigma2Source};
use crate::bayes::{credible_interval, gibbs_run, posterior_mean, GibbsConfig};
use crate::debias::{confidence_interval, debias_with, entry_variance, estimate_sigma2, interval_stats, DebiasOptions};
use crate::error::{Error, Result};
use crate::freq::{als_fit, complete, AlsFit};
use crate::linalg::truncated_svd;
use crate::model::{compute_errors, DenseMatrix, ObservationSet};
use crate::rng::RngStream;
use crate::sim::{gen_truth, sample_observations};

// Sub-streams of a replicate stream.
const TRUTH: u64 = 0;
const OBSERVE: u64 = 1;
const ALS: u64 = 2;
const REFIT: u64 = 3;
pub(crate) const F_BAYES: u64 = 4;
pub(crate) const BAYES: u64 = 5;

/// Stream of the truth shared by all replicates when `fixed_truth` is set.
const FIXED_TRUTH_STREAM: u64 = u64::MAX;

pub(crate) fn replicate_stream(cfg: &ExperimentConfig, k: usize) -> RngStream {
    RngStream::new(cfg.seed, k as u64)
}

/// Truth and observations of replicate `k`.
pub(crate) fn replicate_data(cfg: &ExperimentConfig, k: usize) -> Result<(DenseMatrix, ObservationSet)> {
    let rep = replicate_stream(cfg, k);
    let truth_root = if cfg.fixed_truth { RngStream::new(cfg.seed, FIXED_TRUTH_STREAM) } else { rep.clone() };
    let truth = gen_truth(&cfg.sim, &mut truth_root.split(TRUTH))?;
    let obs = sample_observations(&truth, cfg.sim.tau, cfg.sim.sigma, &mut rep.split(OBSERVE))?;
    Ok((truth, obs))
}

type Metrics = Vec<(Metric, f64)>;

/// Per-estimator metrics of one replicate, or the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub results: Vec<(Estimator, std::result::Result<Metrics, String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub estimator: Estimator,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub fingerprint: String,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<ReplicateFailure>,
}

impl ExperimentReport {
    pub fn row(&self, estimator: Estimator, metric: Metric) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.estimator == estimator.tag() && r.metric == metric)
    }

    pub fn mean(&self, estimator: Estimator, metric: Metric) -> Option<f64> {
        self.row(estimator, metric).and_then(|r| r.mean)
    }

    pub fn partial_failure(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Write `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        write_rows_csv(&self.rows, fs::File::create(&csv)?)?;
        write_rows_json(&self.rows, fs::File::create(&json)?)?;
        Ok((csv, json))
    }
}

fn point_metrics(est: &DenseMatrix, truth: &DenseMatrix, obs: &ObservationSet) -> Result<Metrics> {
    let e = compute_errors(est, truth, obs)?;
    let mut out = vec![(Metric::Mse, e.mse), (Metric::Nmse, e.nmse)];
    if let Some(pred) = e.pred {
        out.push((Metric::Pred, pred));
    }
    Ok(out)
}

/// De-biased estimate and, when σ² > 0, its entry variances.
pub(crate) struct DbFit {
    pub m_db: DenseMatrix,
    pub variance: Option<DenseMatrix>,
}

pub(crate) fn shared_als(cfg: &ExperimentConfig, obs: &ObservationSet, rep: &RngStream) -> Result<AlsFit> {
    als_fit(obs, &cfg.freq.als_config(cfg.freq.als_lambda, cfg.sim.r), &mut rep.split(ALS), None)
}

pub(crate) fn db_fit(
    cfg: &ExperimentConfig,
    obs: &ObservationSet,
    shared: Option<&AlsFit>,
    rep: &RngStream,
) -> Result<DbFit> {
    let sim = &cfg.sim;
    let lambda = cfg.freq.lambda_rule.penalty(sim.m, sim.p, sim.tau, sim.sigma);
    let rank = cfg.freq.rank.unwrap_or(sim.r);
    let refit;
    let base = match (cfg.freq.db_base, shared) {
        (DbBase::Shared, Some(fit)) => &fit.estimate.matrix,
        (DbBase::Shared, None) => return Err(Error::invalid("shared de-bias base requested without an als fit")),
        (DbBase::Refit, _) => {
            refit = als_fit(obs, &cfg.freq.als_config(lambda, sim.r), &mut rep.split(REFIT), None)?;
            &refit.estimate.matrix
        }
    };
    let opts = DebiasOptions { ips_correction: cfg.freq.ips_correction };
    let m_db = debias_with(base, obs, rank, opts)?;
    let sigma2 = match cfg.freq.sigma2 {
        Sigma2Source::Known => cfg.sigma2(),
        Sigma2Source::Estimated => estimate_sigma2(base, obs)?,
    };
    // noiseless data carry no interval
    let variance = if sigma2 > 0.0 {
        Some(entry_variance(&truncated_svd(base, rank)?, lambda, sigma2)?.v)
    } else {
        None
    };
    Ok(DbFit { m_db, variance })
}

fn db_metrics(
    cfg: &ExperimentConfig,
    obs: &ObservationSet,
    truth: &DenseMatrix,
    shared: Option<&AlsFit>,
    rep: &RngStream,
) -> Result<Metrics> {
    let fit = db_fit(cfg, obs, shared, rep)?;
    let mut out = point_metrics(&fit.m_db, truth, obs)?;
    if let Some(v) = &fit.variance {
        let ci = confidence_interval(&fit.m_db, v, 1.0 - cfg.levels.db)?;
        let st = interval_stats(&ci, truth)?;
        out.push((Metric::CiLength, st.mean_length));
        out.push((Metric::Coverage, st.coverage));
    }
    Ok(out)
}

fn bayes_metrics(
    gibbs: &GibbsConfig,
    level: f64,
    obs: &ObservationSet,
    truth: &DenseMatrix,
    rng: &mut RngStream,
) -> Result<Metrics> {
    let samples = gibbs_run(obs, gibbs, rng)?;
    let mean = posterior_mean(&samples)?;
    let mut out = point_metrics(&mean.matrix, truth, obs)?;
    let st = interval_stats(&credible_interval(&samples, level)?, truth)?;
    out.push((Metric::CiLength, st.mean_length));
    out.push((Metric::Coverage, st.coverage));
    Ok(out)
}

/// Fit every requested estimator on replicate `k`. Failures are captured per
/// estimator, never propagated.
pub fn run_replicate(cfg: &ExperimentConfig, k: usize) -> ReplicateOutcome {
    let fail_all = |msg: String| ReplicateOutcome {
        replicate: k,
        results: cfg.estimators.iter().map(|e| (*e, Err(msg.clone()))).collect(),
    };
    let (truth, obs) = match replicate_data(cfg, k) {
        Ok(d) => d,
        Err(e) => return fail_all(format!("data generation: {e}")),
    };
    let rep = replicate_stream(cfg, k);
    let wants = |e: Estimator| cfg.estimators.contains(&e);
    let need_als = wants(Estimator::Als) || (wants(Estimator::Db) && cfg.freq.db_base == DbBase::Shared);
    let als = need_als.then(|| shared_als(cfg, &obs, &rep).map_err(|e| e.to_string()));
    let sigma2 = cfg.sigma2();
    let results = cfg
        .estimators
        .iter()
        .map(|&est| {
            let res = match est {
                Estimator::Als => match als.as_ref().expect("als fitted") {
                    Ok(fit) => complete(&obs, &fit.estimate.matrix)
                        .and_then(|c| point_metrics(&c, &truth, &obs))
                        .map_err(|e| e.to_string()),
                    Err(msg) => Err(msg.clone()),
                },
                Estimator::Db => match als.as_ref() {
                    Some(Err(msg)) if cfg.freq.db_base == DbBase::Shared => Err(msg.clone()),
                    shared => db_metrics(cfg, &obs, &truth, shared.and_then(|r| r.as_ref().ok()), &rep)
                        .map_err(|e| e.to_string()),
                },
                Estimator::FBayes => {
                    let g = cfg.f_bayes.gibbs(cfg.sim.r, sigma2);
                    bayes_metrics(&g, cfg.levels.bayes, &obs, &truth, &mut rep.split(F_BAYES)).map_err(|e| e.to_string())
                }
                Estimator::Bayes => {
                    let g = cfg.bayes.gibbs(sigma2);
                    bayes_metrics(&g, cfg.levels.bayes, &obs, &truth, &mut rep.split(BAYES)).map_err(|e| e.to_string())
                }
            };
            (est, res)
        })
        .collect();
    ReplicateOutcome { replicate: k, results }
}

/// Streaming mean and sample standard deviation.
fn welford(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for &x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    match n {
        0 => (None, None),
        1 => (Some(mean), None),
        _ => (Some(mean), Some((m2 / (n - 1) as f64).sqrt())),
    }
}

/// Aggregate replicate outcomes into rows, in replicate-index order whatever
/// the order of `outcomes`.
pub fn aggregate(cfg: &ExperimentConfig, outcomes: &[ReplicateOutcome]) -> ExperimentReport {
    let mut sorted: Vec<&ReplicateOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.replicate);
    let fingerprint = cfg.short_fingerprint();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &est in &cfg.estimators {
        let mut ok: Vec<&Metrics> = Vec::new();
        for o in &sorted {
            match o.results.iter().find(|(e, _)| *e == est).map(|(_, r)| r) {
                Some(Ok(m)) => ok.push(m),
                Some(Err(msg)) => failures.push(ReplicateFailure { replicate: o.replicate, estimator: est, message: msg.clone() }),
                None => {}
            }
        }
        let n_failures = failures.iter().filter(|f| f.estimator == est).count();
        for metric in Metric::ALL {
            let values: Vec<f64> =
                ok.iter().filter_map(|m| m.iter().find(|(k, _)| *k == metric).map(|(_, v)| *v)).collect();
            let always = matches!(metric, Metric::Mse | Metric::Nmse);
            if values.is_empty() && !(ok.is_empty() && always) {
                continue;
            }
            let (mean, std) = welford(&values);
            rows.push(ResultRow {
                fingerprint: fingerprint.clone(),
                setting: cfg.setting_label().into(),
                m: cfg.sim.m,
                p: cfg.sim.p,
                r: cfg.sim.r,
                tau: cfg.sim.tau,
                estimator: est.tag().into(),
                metric,
                mean,
                std,
                n_reps: values.len(),
                n_failures,
            });
        }
    }
    ExperimentReport { fingerprint, rows, failures }
}

/// Run all replicates (in parallel) and aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates).into_par_iter().map(|k| run_replicate(cfg, k)).collect();
    Ok(aggregate(cfg, &outcomes))
}
