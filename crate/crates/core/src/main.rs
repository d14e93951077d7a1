use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mcuq::bayes::{credible_interval, gibbs_run, posterior_mean, GibbsConfig, Prior, TemperSemantics};
use mcuq::bench::{
    emit_figure_data, parse_estimators, reproduce_table, run_experiment, DbBase, Estimator, ExperimentConfig,
    FigureConfig, LambdaRule, Metric, Scale, TableId, TableOptions,
};
use mcuq::debias::{confidence_interval, debias_with, entry_variance, DebiasOptions, IntervalMatrix};
use mcuq::freq::{als_fit, complete, soft_impute_fit, AlsConfig, SoftImputeConfig};
use mcuq::linalg::truncated_svd;
use mcuq::sim::{gen_truth, read_matrix_triplets, read_triplets, sample_observations, write_matrix_triplets, write_triplets, Setting, SimSpec};
use mcuq::{compute_errors, DenseMatrix, Error, ObservationSet, Result, RngStream};

#[derive(Parser)]
#[command(name = "mcuq", version, about = "Matrix completion with entrywise uncertainty: simulations and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a truth and an observation set and write both as triplet CSV.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
    /// Fit one estimator to an observation file.
    Fit(FitArgs),
    /// Run one replicated experiment described by a config file and/or flags.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Reuse one truth for all replicates.
        #[arg(long)]
        fixed_truth: bool,
    },
    /// Regenerate one of the paper-style tables (T1..T4).
    ReproduceTable {
        table: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Drop both samplers from the p = 1000 cells.
        #[arg(long)]
        skip_large_bayes: bool,
        /// Only run cell r,p,tau (repeatable), e.g. `--cell 2,100,0.2`.
        #[arg(long)]
        cell: Vec<String>,
    },
    /// Write per-entry posterior draws next to the de-biased Gaussian parameters.
    FigureData {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// 1-based entries `i,j`, repeatable.
        #[arg(long = "entry", default_value = "1,1")]
        entries: Vec<String>,
        #[arg(long, default_value_t = FigureConfig::MIN_DRAWS)]
        draws: usize,
        /// f_bayes or bayes.
        #[arg(long, default_value = "f_bayes")]
        sampler: String,
    },
}

#[derive(Args, Default)]
struct SimArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Missing rate (fraction of unobserved cells).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// I (exact low rank) or II (approximate low rank).
    #[arg(long)]
    setting: Option<String>,
}

impl SimArgs {
    fn apply(&self, spec: &mut SimSpec) -> Result<()> {
        if let Some(v) = self.m {
            spec.m = v;
        }
        if let Some(v) = self.p {
            spec.p = v;
        }
        if let Some(v) = self.r {
            spec.r = v;
        }
        if let Some(v) = self.tau {
            spec.tau = v;
        }
        if let Some(v) = self.sigma {
            spec.sigma = v;
        }
        if let Some(s) = &self.setting {
            spec.setting = match s.as_str() {
                "I" | "1" | "exact" => Setting::ExactLowRank,
                "II" | "2" | "approx" => Setting::approx_default(),
                _ => return Err(Error::Config(format!("unknown setting `{s}` (I or II)"))),
            };
        }
        Ok(())
    }
}

fn default_sim() -> SimSpec {
    SimSpec { m: 100, p: 100, r: 2, setting: Setting::ExactLowRank, tau: 0.2, sigma: 1.0, seed: 0 }
}

/// Flags shared by the experiment subcommands; each overrides the config file.
#[derive(Args, Default)]
struct CommonArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Desk scale: 20 replicates per table cell.
    #[arg(long)]
    desk: bool,
    /// Comma-separated subset of als,db,f_bayes,bayes.
    #[arg(long)]
    estimators: Option<String>,
    /// verbatim, sqrt_np_obs or fixed:<value>.
    #[arg(long)]
    lambda_rule: Option<String>,
    /// shared (de-bias the als fit) or refit (ALS at the rule's penalty).
    #[arg(long)]
    db_base: Option<String>,
    #[arg(long)]
    ips_correction: bool,
    /// scaled_residual or powered_gaussian.
    #[arg(long)]
    temper_semantics: Option<String>,
}

fn parse_semantics(s: &str) -> Result<TemperSemantics> {
    match s.replace('-', "_").as_str() {
        "scaled_residual" => Ok(TemperSemantics::ScaledResidual),
        "powered_gaussian" => Ok(TemperSemantics::PoweredGaussian),
        _ => Err(Error::Config(format!("unknown temper semantics `{s}` (scaled_residual, powered_gaussian)"))),
    }
}

fn parse_db_base(s: &str) -> Result<DbBase> {
    match s {
        "shared" => Ok(DbBase::Shared),
        "refit" => Ok(DbBase::Refit),
        _ => Err(Error::Config(format!("unknown db base `{s}` (shared, refit)"))),
    }
}

impl CommonArgs {
    fn base_config(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path),
            None => Ok(ExperimentConfig::new(default_sim())),
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.sim.seed = seed;
        }
        if let Some(n) = self.replicates {
            cfg.replicates = n;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(list) = &self.estimators {
            cfg.estimators = parse_estimators(list)?;
        }
        if let Some(rule) = &self.lambda_rule {
            cfg.freq.lambda_rule = rule.parse::<LambdaRule>()?;
        }
        if let Some(base) = &self.db_base {
            cfg.freq.db_base = parse_db_base(base)?;
        }
        if self.ips_correction {
            cfg.freq.ips_correction = true;
        }
        if let Some(s) = &self.temper_semantics {
            let sem = parse_semantics(s)?;
            cfg.f_bayes.semantics = sem;
            cfg.bayes.semantics = sem;
        }
        Ok(())
    }
}

#[derive(Args)]
struct FitArgs {
    /// Observation triplet file.
    #[arg(long)]
    observations: PathBuf,
    /// Truth triplet file; enables error metrics and coverage.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// als, db, soft_impute, f_bayes or bayes.
    #[arg(long, default_value = "db")]
    estimator: String,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Noise standard deviation (treated as known).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Penalty of the ALS base fit (and of soft-impute).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Penalty rule of the de-biasing pipeline.
    #[arg(long, default_value = "verbatim")]
    lambda_rule: String,
    #[arg(long, default_value = "shared")]
    db_base: String,
    #[arg(long)]
    ips_correction: bool,
    #[arg(long, default_value = "scaled_residual")]
    temper_semantics: String,
    /// Interval level (default 0.95 for db, 0.89 for the samplers).
    #[arg(long)]
    level: Option<f64>,
    /// Flexible prior size K.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fit")]
    out: PathBuf,
}

#[derive(Serialize)]
struct FitSummary {
    estimator: String,
    rows: usize,
    cols: usize,
    observed: usize,
    params: Vec<(String, f64)>,
    mse: Option<f64>,
    nmse: Option<f64>,
    pred: Option<f64>,
    interval_length: Option<f64>,
    coverage: Option<f64>,
}

fn write_intervals(iv: &IntervalMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "lower", "upper"])?;
    for i in 0..iv.lower.nrows() {
        for j in 0..iv.lower.ncols() {
            w.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                format!("{:.17e}", iv.lower[(i, j)]),
                format!("{:.17e}", iv.upper[(i, j)]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    let obs: ObservationSet = read_triplets(fs::File::open(&args.observations)?)?;
    let truth: Option<DenseMatrix> = match &args.truth {
        Some(p) => Some(read_matrix_triplets(fs::File::open(p)?)?),
        None => None,
    };
    let estimator = args.estimator.as_str();
    let sigma2 = args.sigma * args.sigma;
    let mut rng = RngStream::new(args.seed, 0);
    let mut params = vec![("rank".to_string(), args.rank as f64)];
    let (estimate, intervals) = match estimator {
        "als" | "soft_impute" => {
            let m = if estimator == "als" {
                let f = als_fit(&obs, &AlsConfig::new(args.lambda, args.rank), &mut rng, None)?;
                complete(&obs, &f.estimate.matrix)?
            } else {
                soft_impute_fit(&obs, &SoftImputeConfig { lambda: args.lambda, ..Default::default() })?.estimate.matrix
            };
            params.push(("lambda".into(), args.lambda));
            (m, None)
        }
        "db" => {
            let (m, p) = obs.shape();
            let tau = 1.0 - obs.observed_fraction();
            let rule_lambda = args.lambda_rule.parse::<LambdaRule>()?.penalty(m, p, tau, args.sigma);
            let base_lambda = match parse_db_base(&args.db_base)? {
                DbBase::Shared => args.lambda,
                DbBase::Refit => rule_lambda,
            };
            let base = als_fit(&obs, &AlsConfig::new(base_lambda, args.rank), &mut rng, None)?.estimate.matrix;
            let m_db = debias_with(&base, &obs, args.rank, DebiasOptions { ips_correction: args.ips_correction })?;
            let v = entry_variance(&truncated_svd(&base, args.rank)?, rule_lambda, sigma2)?.v;
            let level = args.level.unwrap_or(0.95);
            let iv = confidence_interval(&m_db, &v, 1.0 - level)?;
            params.extend([("base_lambda".into(), base_lambda), ("lambda".into(), rule_lambda), ("level".into(), level)]);
            (m_db, Some(iv))
        }
        "f_bayes" | "bayes" => {
            let prior = if estimator == "f_bayes" {
                Prior::FixedRank { rank: args.rank }
            } else {
                Prior::Flexible { k: args.k, a: 1.0, b: 0.01 }
            };
            let mut cfg = GibbsConfig::new(prior, sigma2);
            cfg.semantics = parse_semantics(&args.temper_semantics)?;
            let samples = gibbs_run(&obs, &cfg, &mut rng)?;
            let level = args.level.unwrap_or(0.89);
            let iv = credible_interval(&samples, level)?;
            params.extend([("temper_lambda".into(), cfg.temper_lambda), ("level".into(), level)]);
            (posterior_mean(&samples)?.matrix, Some(iv))
        }
        other => return Err(Error::Config(format!("unknown estimator `{other}`"))),
    };

    fs::create_dir_all(&args.out)?;
    write_matrix_triplets(&estimate, fs::File::create(args.out.join("estimate.csv"))?)?;
    if let Some(iv) = &intervals {
        write_intervals(iv, &args.out.join("intervals.csv"))?;
    }
    let mut summary = FitSummary {
        estimator: estimator.into(),
        rows: obs.rows(),
        cols: obs.cols(),
        observed: obs.len(),
        params,
        mse: None,
        nmse: None,
        pred: None,
        interval_length: None,
        coverage: None,
    };
    if let Some(t) = &truth {
        let e = compute_errors(&estimate, t, &obs)?;
        summary.mse = Some(e.mse);
        summary.nmse = Some(e.nmse);
        summary.pred = e.pred;
        if let Some(iv) = &intervals {
            let st = mcuq::debias::interval_stats(iv, t)?;
            summary.interval_length = Some(st.mean_length);
            summary.coverage = Some(st.coverage);
        }
    }
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(args.out.join("summary.json"), format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [i, j] => match (i.parse::<usize>(), j.parse::<usize>()) {
            (Ok(i), Ok(j)) if i >= 1 && j >= 1 => Ok((i - 1, j - 1)),
            _ => Err(Error::Config(format!("bad entry `{s}` (1-based i,j)"))),
        },
        _ => Err(Error::Config(format!("bad entry `{s}` (1-based i,j)"))),
    }
}

fn parse_cell(s: &str) -> Result<(usize, usize, f64)> {
    let bad = || Error::Config(format!("bad cell `{s}` (r,p,tau)"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

enum Outcome {
    Done,
    Partial,
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate { sim, seed, out } => {
            let mut spec = default_sim();
            sim.apply(&mut spec)?;
            spec.seed = seed;
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            let rng = RngStream::new(seed, 0);
            let truth = gen_truth(&spec, &mut rng.split(0))?;
            let obs = sample_observations(&truth, spec.tau, spec.sigma, &mut rng.split(1))?;
            fs::create_dir_all(&out)?;
            write_matrix_triplets(&truth, fs::File::create(out.join("truth.csv"))?)?;
            write_triplets(&obs, fs::File::create(out.join("observations.csv"))?)?;
            println!("wrote {} and {} ({} observed of {})", out.join("truth.csv").display(), out.join("observations.csv").display(), obs.len(), spec.m * spec.p);
            Ok(Outcome::Done)
        }
        Command::Fit(args) => {
            fit(&args)?;
            Ok(Outcome::Done)
        }
        Command::Run { sim, common, fixed_truth } => {
            let mut cfg = common.base_config()?;
            sim.apply(&mut cfg.sim)?;
            common.apply(&mut cfg)?;
            if fixed_truth {
                cfg.fixed_truth = true;
            }
            if common.desk && common.replicates.is_none() {
                cfg.replicates = Scale::Desk.replicates();
            }
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            let tags: Vec<String> = cfg.estimators.iter().map(|e| e.tag().to_string()).collect();
            print!("{}", mcuq::bench::format_rows(&report.rows, &tags, &Metric::ALL));
            let (csv, json) = report.write(&cfg.output.dir, &cfg.output.stem)?;
            println!("wrote {} and {}", csv.display(), json.display());
            for f in &report.failures {
                eprintln!("replicate {} {}: {}", f.replicate, f.estimator, f.message);
            }
            Ok(if report.partial_failure() { Outcome::Partial } else { Outcome::Done })
        }
        Command::ReproduceTable { table, common, skip_large_bayes, cell } => {
            let id: TableId = table.parse()?;
            let mut template = common.base_config()?;
            common.apply(&mut template)?;
            let opts = TableOptions {
                scale: if common.desk { Scale::Desk } else { Scale::Full },
                seed: template.seed,
                replicates: common.replicates,
                skip_large_bayes,
                estimators: common.estimators.as_deref().map(parse_estimators).transpose()?,
                cells: if cell.is_empty() { None } else { Some(cell.iter().map(|c| parse_cell(c)).collect::<Result<_>>()?) },
                template: Some(template.clone()),
            };
            let report = reproduce_table(id, &opts)?;
            print!("{}", report.text);
            let dir = common.out.clone().unwrap_or_else(|| template.output.dir.clone());
            for path in report.write(&dir)? {
                println!("wrote {}", path.display());
            }
            Ok(if report.partial_failure() { Outcome::Partial } else { Outcome::Done })
        }
        Command::FigureData { sim, common, entries, draws, sampler } => {
            let mut exp = common.base_config()?;
            sim.apply(&mut exp.sim)?;
            common.apply(&mut exp)?;
            let mut cfg = FigureConfig::new(exp);
            cfg.draws = draws;
            cfg.sampler = sampler.parse::<Estimator>()?;
            let entries: Vec<(usize, usize)> = entries.iter().map(|e| parse_pair(e)).collect::<Result<_>>()?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("figure"));
            for e in emit_figure_data(&cfg, &entries, Some(&dir))? {
                println!(
                    "entry ({}, {}): truth {:.4}, db {:.4} (var {:.4}), {} draws -> {}",
                    e.i + 1,
                    e.j + 1,
                    e.truth,
                    e.db_mean,
                    e.db_variance,
                    e.draws.len(),
                    e.path.as_deref().map(|p| p.display().to_string()).unwrap_or_default()
                );
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("some replicates failed; see the n_failures column");
            ExitCode::from(3)
        }
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_) | Error::RankOutOfRange { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
