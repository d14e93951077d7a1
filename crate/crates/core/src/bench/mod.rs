//! Replicated simulation studies: experiment configuration, the replicate
//! runner and its aggregation, paper-style tables and figure data.
//!
//! Configuration files are TOML and map 1:1 onto [`ExperimentConfig`]:
//!
//! ```toml
//! seed = 7
//! replicates = 20
//! estimators = ["als", "db", "f_bayes", "bayes"]
//!
//! [sim]
//! m = 100
//! p = 100
//! r = 2
//! tau = 0.2
//! sigma = 1.0
//! setting = { kind = "approx_low_rank", perturb_rank = 50, perturb_scale = 0.1 }
//!
//! [freq]
//! lambda_rule = "sqrt_np_obs"
//!
//! [bayes]
//! k = 10
//! ```

mod figure;
mod report;
mod run;
mod tables;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::{GammaInit, GibbsConfig, Prior, TemperSemantics};
use crate::error::{Error, Result};
use crate::freq::{AlsConfig, AlsInit};
use crate::sim::{Setting, SimSpec};

pub use figure::{emit_figure_data, FigureConfig, FigureEntry, FIGURE_SCALARS};
pub use report::{format_rows, read_rows_csv, write_rows_csv, write_rows_json, Metric, ResultRow};
pub use run::{
    aggregate, run_experiment, run_replicate, ExperimentReport, ReplicateFailure, ReplicateOutcome,
};
pub use tables::{desk_band, reproduce_table, table_cells, Scale, TableId, TableOptions, TableReport};

/// Penalty rule for the de-biasing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// 2.5 σ √(m p).
    #[default]
    Verbatim,
    /// 2.5 σ √(max(m, p) · (1 − τ)).
    SqrtNpObs,
    Fixed(f64),
}

impl LambdaRule {
    pub fn penalty(&self, m: usize, p: usize, tau: f64, sigma: f64) -> f64 {
        match *self {
            LambdaRule::Verbatim => lambda_rule_db(m, p, sigma),
            LambdaRule::SqrtNpObs => 2.5 * sigma * (m.max(p) as f64 * (1.0 - tau)).sqrt(),
            LambdaRule::Fixed(l) => l,
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(LambdaRule::Verbatim),
            "sqrt_np_obs" | "sqrt-np-obs" => Ok(LambdaRule::SqrtNpObs),
            other => other
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| *v >= 0.0)
                .map(LambdaRule::Fixed)
                .ok_or_else(|| {
                    Error::Config(format!("unknown lambda rule `{s}` (verbatim, sqrt_np_obs or fixed:<value>)"))
                }),
        }
    }
}

/// λ = 2.5 σ √(m p).
pub fn lambda_rule_db(m: usize, p: usize, sigma: f64) -> f64 {
    2.5 * sigma * ((m * p) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Als,
    Db,
    FBayes,
    Bayes,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Als, Estimator::Db, Estimator::FBayes, Estimator::Bayes];

    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Als => "als",
            Estimator::Db => "db",
            Estimator::FBayes => "f_bayes",
            Estimator::Bayes => "bayes",
        }
    }

    pub fn has_intervals(self) -> bool {
        !matches!(self, Estimator::Als)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.tag() == s || (s == "f.bayes" && *e == Estimator::FBayes) || (s == "d.b" && *e == Estimator::Db))
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}` (als, db, f_bayes, bayes)")))
    }
}

/// Parse a comma-separated estimator list.
pub fn parse_estimators(s: &str) -> Result<Vec<Estimator>> {
    let mut out: Vec<Estimator> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let e: Estimator = part.parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty estimator list".into()));
    }
    Ok(out)
}

/// Which base fit the de-biased estimator starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbBase {
    /// De-bias the `als` fit itself; the rule's λ enters only U^db, V^db.
    #[default]
    Shared,
    /// Refit ALS with λ from the rule and de-bias that fit.
    Refit,
}

/// Where the noise variance used by intervals comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Source {
    /// σ² of the simulation.
    #[default]
    Known,
    /// Mean squared residual of the base fit on Ω.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqSettings {
    /// Penalty of the `als` estimator.
    pub als_lambda: f64,
    pub lambda_rule: LambdaRule,
    pub db_base: DbBase,
    pub ips_correction: bool,
    pub sigma2: Sigma2Source,
    /// Defaults to the simulation rank.
    pub rank: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub init: AlsInit,
}

impl Default for FreqSettings {
    fn default() -> Self {
        Self {
            als_lambda: 0.1,
            lambda_rule: LambdaRule::Verbatim,
            db_base: DbBase::Shared,
            ips_correction: false,
            sigma2: Sigma2Source::Known,
            rank: None,
            max_iters: 200,
            tol: 1e-6,
            init: AlsInit::ScaledGaussian,
        }
    }
}

impl FreqSettings {
    pub fn als_config(&self, lambda: f64, sim_rank: usize) -> AlsConfig {
        AlsConfig { lambda, rank: self.rank.unwrap_or(sim_rank), max_iters: self.max_iters, tol: self.tol, init: self.init }
    }
}

/// Chain settings of the fixed-rank sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FBayesSettings {
    /// Defaults to the simulation rank.
    pub rank: Option<usize>,
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Defaults to 1/(4σ²).
    pub temper_lambda: Option<f64>,
    pub semantics: TemperSemantics,
}

impl Default for FBayesSettings {
    fn default() -> Self {
        Self { rank: None, n_iters: 600, burn_in: 100, thin: 1, temper_lambda: None, semantics: TemperSemantics::default() }
    }
}

/// Chain settings of the flexible-rank sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesSettings {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub temper_lambda: Option<f64>,
    pub semantics: TemperSemantics,
    pub gamma_init: GammaInit,
}

impl Default for BayesSettings {
    fn default() -> Self {
        Self {
            k: 10,
            a: 1.0,
            b: 0.01,
            n_iters: 600,
            burn_in: 100,
            thin: 1,
            temper_lambda: None,
            semantics: TemperSemantics::default(),
            gamma_init: GammaInit::default(),
        }
    }
}

fn chain(prior: Prior, sigma2: f64, n_iters: usize, burn_in: usize, thin: usize, temper: Option<f64>, semantics: TemperSemantics) -> GibbsConfig {
    let mut cfg = GibbsConfig::new(prior, sigma2);
    if let Some(l) = temper {
        cfg.temper_lambda = l;
    }
    cfg.n_iters = n_iters;
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.semantics = semantics;
    cfg
}

impl FBayesSettings {
    pub fn gibbs(&self, sim_rank: usize, sigma2: f64) -> GibbsConfig {
        let prior = Prior::FixedRank { rank: self.rank.unwrap_or(sim_rank) };
        chain(prior, sigma2, self.n_iters, self.burn_in, self.thin, self.temper_lambda, self.semantics)
    }
}

impl BayesSettings {
    pub fn gibbs(&self, sigma2: f64) -> GibbsConfig {
        let prior = Prior::Flexible { k: self.k, a: self.a, b: self.b };
        let mut cfg = chain(prior, sigma2, self.n_iters, self.burn_in, self.thin, self.temper_lambda, self.semantics);
        cfg.gamma_init = self.gamma_init;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Levels {
    /// Confidence level of the de-biased intervals.
    pub db: f64,
    /// Credible level of both samplers.
    pub bayes: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Self { db: 0.95, bayes: 0.89 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem for `<stem>.csv` / `<stem>.json`.
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), stem: "results".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimSpec,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub freq: FreqSettings,
    #[serde(default)]
    pub f_bayes: FBayesSettings,
    #[serde(default)]
    pub bayes: BayesSettings,
    #[serde(default)]
    pub levels: Levels,
    /// One truth shared by every replicate (only the observations are redrawn).
    #[serde(default)]
    pub fixed_truth: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_replicates() -> usize {
    50
}

fn default_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn new(sim: SimSpec) -> Self {
        Self {
            seed: sim.seed,
            sim,
            replicates: default_replicates(),
            estimators: default_estimators(),
            freq: FreqSettings::default(),
            f_bayes: FBayesSettings::default(),
            bayes: BayesSettings::default(),
            levels: Levels::default(),
            fixed_truth: false,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.sim.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sigma2(&self) -> f64 {
        self.sim.sigma * self.sim.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.sim.validate().map_err(cfg_err)?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimator requested".into()));
        }
        for (name, l) in [("db", self.levels.db), ("bayes", self.levels.bayes)] {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!("{name} level must lie in (0,1), got {l}")));
            }
        }
        let f = &self.freq;
        if !(f.als_lambda >= 0.0 && f.als_lambda.is_finite()) {
            return Err(Error::Config(format!("als_lambda must be finite and >= 0, got {}", f.als_lambda)));
        }
        if let LambdaRule::Fixed(l) = f.lambda_rule {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("fixed lambda must be finite and >= 0, got {l}")));
            }
        }
        let max = self.sim.m.min(self.sim.p);
        let rank = f.rank.unwrap_or(self.sim.r);
        if rank == 0 || rank > max {
            return Err(Error::Config(format!("ALS rank {rank} out of range 1..={max}")));
        }
        if f.max_iters == 0 || !(f.tol > 0.0) {
            return Err(Error::Config("ALS needs max_iters >= 1 and tol > 0".into()));
        }
        // chain checks use a unit σ² so that noiseless simulations still validate
        // their structure; the actual σ² is checked per replicate.
        let s2 = if self.sigma2() > 0.0 { self.sigma2() } else { 1.0 };
        if self.estimators.contains(&Estimator::FBayes) {
            self.f_bayes.gibbs(self.sim.r, s2).validate(self.sim.m, self.sim.p).map_err(cfg_err)?;
        }
        if self.estimators.contains(&Estimator::Bayes) {
            self.bayes.gibbs(s2).validate(self.sim.m, self.sim.p).map_err(cfg_err)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of everything that affects the
    /// numbers (output paths excluded).
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        canonical.sim.seed = canonical.seed;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Short form of [`Self::fingerprint`] used in reports.
    pub fn short_fingerprint(&self) -> String {
        self.fingerprint()[..16].to_string()
    }

    pub fn setting_label(&self) -> &'static str {
        match self.sim.setting {
            Setting::ExactLowRank => "I",
            Setting::ApproxLowRank { .. } => "II",
        }
    }
}
