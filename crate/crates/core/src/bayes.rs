//! Tempered-posterior Gibbs samplers for factorized low-rank matrices.
//!
//! The target is `exp(−w/2 · ‖P_Ω(Y − U Vᵀ)‖²) · π(U, V, γ)` where the
//! residual weight `w` comes from the tempering parameter (see
//! [`TemperSemantics`]). Two priors are supported: the fixed-rank prior with
//! i.i.d. standard normal factor columns, and the flexible prior where columns
//! `k` of U and V share a variance γ_k with γ_k⁻¹ ~ Gamma(a, b).
//!
//! One sweep updates every row of U, then every row of V, then (flexible prior
//! only) the γ vector.

use std::io::Write;

use nalgebra::{Cholesky, DVector};
use rand::seq::index::sample;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::debias::{IntervalMatrix, IntervalMethod};
use crate::error::{Error, Result};
use crate::kernels::{accumulate, residual_sq, RowMajor};
use crate::model::{CompletionEstimate, DenseMatrix, FactorPair, Method, ObservationSet};
use crate::rng::RngStream;
use crate::stats::{effective_sample_size, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    FixedRank { rank: usize },
    Flexible { k: usize, a: f64, b: f64 },
}

impl Prior {
    pub fn inner_dim(&self) -> usize {
        match *self {
            Prior::FixedRank { rank } => rank,
            Prior::Flexible { k, .. } => k,
        }
    }
}

/// How the tempering parameter λ enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperSemantics {
    /// exp(−λ ‖P_Ω(Y − M)‖²): λ multiplies the squared residual directly.
    #[default]
    ScaledResidual,
    /// The Gaussian likelihood raised to λ: exp(−λ/(2σ²) ‖P_Ω(Y − M)‖²).
    PoweredGaussian,
}

/// Starting value of the column variances γ under the flexible prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaInit {
    /// γ_k = 1, the scale of the fixed-rank prior.
    #[default]
    Unit,
    /// γ_k = b/a. With b/a small the chain can stay collapsed for hundreds of
    /// sweeps on sparse data.
    PriorScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub temper_lambda: f64,
    pub sigma2: f64,
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior: Prior,
    #[serde(default)]
    pub semantics: TemperSemantics,
    #[serde(default)]
    pub gamma_init: GammaInit,
}

impl GibbsConfig {
    /// Defaults: λ = 1/(4σ²), 600 sweeps of which the first 100 are burn-in.
    pub fn new(prior: Prior, sigma2: f64) -> Self {
        Self {
            temper_lambda: 1.0 / (4.0 * sigma2),
            sigma2,
            n_iters: 600,
            burn_in: 100,
            thin: 1,
            prior,
            semantics: TemperSemantics::ScaledResidual,
            gamma_init: GammaInit::Unit,
        }
    }

    pub fn fixed_rank(rank: usize, sigma2: f64) -> Self {
        Self::new(Prior::FixedRank { rank }, sigma2)
    }

    pub fn flexible(k: usize, a: f64, b: f64, sigma2: f64) -> Self {
        Self::new(Prior::Flexible { k, a, b }, sigma2)
    }

    /// Multiplier of Σ v vᵀ in the row precision.
    pub fn residual_weight(&self) -> f64 {
        match self.semantics {
            TemperSemantics::ScaledResidual => 2.0 * self.temper_lambda,
            TemperSemantics::PoweredGaussian => self.temper_lambda / self.sigma2,
        }
    }

    pub fn retained(&self) -> usize {
        (self.n_iters - self.burn_in) / self.thin
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.temper_lambda > 0.0) || !(self.sigma2 > 0.0) {
            return Err(Error::invalid("temper_lambda and sigma2 must be positive"));
        }
        if self.burn_in >= self.n_iters || self.thin == 0 || self.retained() == 0 {
            return Err(Error::invalid(format!(
                "need burn_in < n_iters and at least one retained draw (n_iters {}, burn_in {}, thin {})",
                self.n_iters, self.burn_in, self.thin
            )));
        }
        let k = self.prior.inner_dim();
        let max = rows.min(cols);
        if k == 0 || k > max {
            return Err(Error::RankOutOfRange { rank: k, max });
        }
        if let Prior::Flexible { a, b, .. } = self.prior {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::invalid("flexible prior needs a > 0 and b > 0"));
            }
        }
        Ok(())
    }
}

/// Retained draws of a chain.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub draws: Vec<FactorPair>,
    /// γ per retained draw (flexible prior only).
    pub gamma_draws: Option<Vec<Vec<f64>>>,
    pub config: GibbsConfig,
    /// ‖P_Ω(Y − U Vᵀ)‖² after every sweep, burn-in included.
    pub residual_trace: Vec<f64>,
    pub seed: u64,
}

impl PosteriorSamples {
    pub fn shape(&self) -> (usize, usize) {
        let f = &self.draws[0];
        (f.u.nrows(), f.v.nrows())
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Values of entry (i, j) across retained draws.
    pub fn entry_draws(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        let (m, p) = self.shape();
        if i >= m || j >= p {
            return Err(Error::invalid(format!("entry ({i}, {j}) outside {m}x{p}")));
        }
        Ok(self.draws.iter().map(|f| f.u.row(i).dot(&f.v.row(j))).collect())
    }
}

/// Canonical parameters of the Gaussian full conditional of one factor row:
/// precision `diag(prior_precision) + w Σ v_j v_jᵀ` and linear term
/// `w Σ y_j v_j`, summing over the row's observed pairs.
pub fn row_conditional(
    other: &DenseMatrix,
    pairs: &[(usize, f64)],
    prior_precision: &[f64],
    weight: f64,
) -> (DenseMatrix, DVector<f64>) {
    let rm = RowMajor::from_matrix(other);
    let k = rm.k;
    let mut gram = DenseMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    conditional_into(&rm, pairs, prior_precision, weight, &mut gram, &mut rhs);
    (gram, rhs)
}

fn conditional_into(
    other: &RowMajor,
    pairs: &[(usize, f64)],
    prior_precision: &[f64],
    weight: f64,
    gram: &mut DenseMatrix,
    rhs: &mut DVector<f64>,
) {
    accumulate(other, pairs, gram, rhs);
    *gram *= weight;
    *rhs *= weight;
    for (a, d) in prior_precision.iter().enumerate() {
        gram[(a, a)] += d;
    }
}

/// Shape and rate of the full conditional of γ_k⁻¹:
/// Gamma(a + (m+p)/2, b + (‖U_k‖² + ‖V_k‖²)/2).
pub fn gamma_conditional(a: f64, b: f64, m: usize, p: usize, u_norm2: f64, v_norm2: f64) -> (f64, f64) {
    (a + (m + p) as f64 / 2.0, b + (u_norm2 + v_norm2) / 2.0)
}

/// Draw γ_k⁻¹ from its full conditional.
pub fn sample_gamma_inverse(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::invalid(format!("gamma conditional: {e}")))?;
    Ok(g.sample(rng.inner()))
}

fn update_rows<'a>(
    lists: &dyn Fn(usize) -> &'a [(usize, f64)],
    target: &mut RowMajor,
    other: &RowMajor,
    prior_precision: &[f64],
    weight: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let k = other.k;
    let rows = target.data.len() / k;
    let mut gram = DenseMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    let mut z = DVector::zeros(k);
    for i in 0..rows {
        conditional_into(other, lists(i), prior_precision, weight, &mut gram, &mut rhs);
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| Error::Linalg("row conditional precision is not positive definite".into()))?;
        let mean = chol.solve(&rhs);
        for zi in z.iter_mut() {
            *zi = rng.standard_normal();
        }
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        target.set_row(i, (mean + noise).as_slice());
    }
    Ok(())
}

fn column_norms(f: &RowMajor) -> Vec<f64> {
    let mut out = vec![0.0; f.k];
    for row in f.data.chunks_exact(f.k) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x * x;
        }
    }
    out
}

/// Run the chain from the default initialization: factor entries i.i.d.
/// N(0, 1/k) and γ from [`GibbsConfig::gamma_init`].
pub fn gibbs_run(obs: &ObservationSet, cfg: &GibbsConfig, rng: &mut RngStream) -> Result<PosteriorSamples> {
    gibbs_run_from(obs, cfg, rng, None)
}

pub fn gibbs_run_from(
    obs: &ObservationSet,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
    init: Option<&FactorPair>,
) -> Result<PosteriorSamples> {
    let flexible = matches!(cfg.prior, Prior::Flexible { .. });
    let mut draws = Vec::with_capacity(cfg.retained());
    let mut gamma_draws = flexible.then(|| Vec::with_capacity(cfg.retained()));
    let residual_trace = gibbs_stream(obs, cfg, rng, init, &mut |f, g| {
        draws.push(f.clone());
        if let (Some(store), Some(g)) = (gamma_draws.as_mut(), g) {
            store.push(g.to_vec());
        }
        Ok(())
    })?;
    Ok(PosteriorSamples { draws, gamma_draws, config: *cfg, residual_trace, seed: rng.id().seed })
}

/// Run the chain without storing it: every retained draw (and its γ under the
/// flexible prior) is handed to `visit`. Returns the residual trace of all
/// sweeps.
pub fn gibbs_stream(
    obs: &ObservationSet,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
    init: Option<&FactorPair>,
    visit: &mut dyn FnMut(&FactorPair, Option<&[f64]>) -> Result<()>,
) -> Result<Vec<f64>> {
    let (m, p) = obs.shape();
    cfg.validate(m, p)?;
    let k = cfg.prior.inner_dim();
    let (mut u, mut v) = match init {
        Some(f) => {
            if f.u.shape() != (m, k) || f.v.shape() != (p, k) {
                return Err(Error::invalid("initial factors do not match the prior's inner dimension"));
            }
            (RowMajor::from_matrix(&f.u), RowMajor::from_matrix(&f.v))
        }
        None => {
            let scale = 1.0 / (k as f64).sqrt();
            let u0 = DenseMatrix::from_fn(m, k, |_, _| scale * rng.standard_normal());
            let v0 = DenseMatrix::from_fn(p, k, |_, _| scale * rng.standard_normal());
            (RowMajor::from_matrix(&u0), RowMajor::from_matrix(&v0))
        }
    };
    let mut gamma = match cfg.prior {
        Prior::FixedRank { .. } => vec![1.0; k],
        Prior::Flexible { a, b, .. } => match cfg.gamma_init {
            GammaInit::Unit => vec![1.0; k],
            GammaInit::PriorScale => vec![b / a; k],
        },
    };
    let weight = cfg.residual_weight();
    let flexible = matches!(cfg.prior, Prior::Flexible { .. });

    let mut residual_trace = Vec::with_capacity(cfg.n_iters);
    for sweep in 0..cfg.n_iters {
        let prior_precision: Vec<f64> = gamma.iter().map(|g| 1.0 / g).collect();
        update_rows(&|i| obs.row(i), &mut u, &v, &prior_precision, weight, rng)?;
        update_rows(&|j| obs.col(j), &mut v, &u, &prior_precision, weight, rng)?;
        if let Prior::Flexible { a, b, .. } = cfg.prior {
            let un = column_norms(&u);
            let vn = column_norms(&v);
            for c in 0..k {
                let (shape, rate) = gamma_conditional(a, b, m, p, un[c], vn[c]);
                gamma[c] = 1.0 / sample_gamma_inverse(shape, rate, rng)?;
            }
        }
        residual_trace.push(residual_sq(obs, &u, &v));
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in + 1) % cfg.thin == 0 {
            let draw = FactorPair::new(u.to_matrix(), v.to_matrix())?;
            visit(&draw, flexible.then_some(gamma.as_slice()))?;
        }
    }
    Ok(residual_trace)
}

/// Entrywise average of U Vᵀ over the retained draws.
pub fn posterior_mean(samples: &PosteriorSamples) -> Result<CompletionEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("posterior mean of an empty draw set"));
    }
    let (m, p) = samples.shape();
    let mut acc = DenseMatrix::zeros(m, p);
    for f in &samples.draws {
        acc.gemm(1.0, &f.u, &f.v.transpose(), 1.0);
    }
    acc /= samples.len() as f64;
    let method = match samples.config.prior {
        Prior::FixedRank { .. } => Method::FixedRankBayes,
        Prior::Flexible { .. } => Method::FlexibleBayes,
    };
    Ok(CompletionEstimate::new(acc, method)
        .with_param("temper_lambda", samples.config.temper_lambda)
        .with_param("draws", samples.len() as f64)
        .with_param("k", samples.config.prior.inner_dim() as f64)
        .with_seed(samples.seed))
}

/// Fewest draws accepted for an empirical credible interval.
pub const MIN_INTERVAL_DRAWS: usize = 20;

/// Equal-tailed interval per entry: the (1−level)/2 and 1−(1−level)/2 type-7
/// sample quantiles of the entry's draws.
pub fn credible_interval(samples: &PosteriorSamples, level: f64) -> Result<IntervalMatrix> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must lie in (0,1), got {level}")));
    }
    if samples.len() < MIN_INTERVAL_DRAWS {
        return Err(Error::invalid(format!(
            "credible intervals need at least {MIN_INTERVAL_DRAWS} draws, got {}",
            samples.len()
        )));
    }
    let (m, p) = samples.shape();
    let n = samples.len();
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = 1.0 - q_lo;
    let mut lower = DenseMatrix::zeros(m, p);
    let mut upper = DenseMatrix::zeros(m, p);
    // one row of the matrix at a time: draws x columns
    let mut block = DenseMatrix::zeros(n, p);
    let mut column = vec![0.0; n];
    for i in 0..m {
        for (t, f) in samples.draws.iter().enumerate() {
            let ui = f.u.row(i);
            let vals = &f.v * ui.transpose();
            block.row_mut(t).copy_from(&vals.transpose());
        }
        for j in 0..p {
            column.copy_from_slice(block.column(j).as_slice());
            column.sort_by(f64::total_cmp);
            lower[(i, j)] = quantile_sorted(&column, q_lo);
            upper[(i, j)] = quantile_sorted(&column, q_hi);
        }
    }
    Ok(IntervalMatrix { lower, upper, level, method: IntervalMethod::BayesCri, flagged: Vec::new() })
}

/// Mixing summary of a chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainDiagnostics {
    pub entries: Vec<(usize, usize)>,
    pub ess: Vec<f64>,
    pub ess_min: f64,
    pub ess_median: f64,
    pub ess_mean: f64,
    pub residual_trace: Vec<f64>,
}

/// Effective sample sizes of `n_entries` randomly chosen entries plus the
/// residual trace.
pub fn chain_diagnostics(samples: &PosteriorSamples, n_entries: usize, rng: &mut RngStream) -> Result<ChainDiagnostics> {
    if samples.len() < 2 {
        return Err(Error::invalid("diagnostics need at least two draws"));
    }
    let (m, p) = samples.shape();
    let count = n_entries.clamp(1, m * p);
    let entries: Vec<(usize, usize)> = sample(rng.inner(), m * p, count).iter().map(|c| (c / p, c % p)).collect();
    let mut ess = Vec::with_capacity(count);
    for &(i, j) in &entries {
        ess.push(effective_sample_size(&samples.entry_draws(i, j)?));
    }
    let mut sorted = ess.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(ChainDiagnostics {
        ess_min: sorted[0],
        ess_median: quantile_sorted(&sorted, 0.5),
        ess_mean: ess.iter().sum::<f64>() / ess.len() as f64,
        entries,
        ess,
        residual_trace: samples.residual_trace.clone(),
    })
}

/// Dump retained draws of the requested entries: one row per draw, one column
/// per entry, headers `m_<i>_<j>` with 1-based indices.
pub fn write_draws_csv<W: Write>(samples: &PosteriorSamples, entries: &[(usize, usize)], out: W) -> Result<()> {
    let columns: Vec<Vec<f64>> = entries
        .iter()
        .map(|&(i, j)| samples.entry_draws(i, j))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(entries.iter().map(|(i, j)| format!("m_{}_{}", i + 1, j + 1)))?;
    for t in 0..samples.len() {
        w.write_record(columns.iter().map(|c| format!("{:.17e}", c[t])))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_canonical;
    use crate::model::Entry;

    fn toy_obs(seed: u64) -> (DenseMatrix, ObservationSet) {
        let mut rng = RngStream::new(seed, 0);
        let u = DenseMatrix::from_fn(12, 2, |_, _| rng.standard_normal());
        let v = DenseMatrix::from_fn(10, 2, |_, _| rng.standard_normal());
        let truth = &u * v.transpose();
        let picks = sample(rng.inner(), 120, 80);
        let entries = picks
            .iter()
            .map(|c| Entry { i: c / 10, j: c % 10, y: truth[(c / 10, c % 10)] + 0.3 * rng.standard_normal() })
            .collect();
        (truth, ObservationSet::new(12, 10, entries).unwrap())
    }

    #[test]
    fn scalar_conditional_moments() {
        let v = DenseMatrix::from_element(1, 1, 2.0);
        let (prec, lin) = row_conditional(&v, &[(0, 3.0)], &[1.0], 2.0 * 0.25);
        assert!((prec[(0, 0)] - 3.0).abs() < 1e-15);
        assert!((lin[0] / prec[(0, 0)] - 1.0).abs() < 1e-15);
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| gaussian_canonical(&prec, &lin, &mut rng).unwrap().0[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.02);
        assert!((var - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn empty_row_conditional_is_the_prior() {
        let v = DenseMatrix::from_element(3, 2, 1.0);
        let (prec, lin) = row_conditional(&v, &[], &[4.0, 0.5], 0.5);
        assert_eq!(prec, DenseMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5])));
        assert_eq!(lin, DVector::zeros(2));
    }

    #[test]
    fn gamma_update_arithmetic_and_moments() {
        let (shape, rate) = gamma_conditional(1.0, 0.01, 2, 3, 1.0, 3.0);
        assert_eq!(shape, 3.5);
        assert!((rate - 2.01).abs() < 1e-15);
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_gamma_inverse(shape, rate, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 3.5 / 2.01).abs() < 0.02);
    }

    #[test]
    fn chain_lengths_and_determinism() {
        let (_, obs) = toy_obs(3);
        let mut cfg = GibbsConfig::flexible(3, 1.0, 0.01, 0.09);
        cfg.n_iters = 60;
        cfg.burn_in = 10;
        cfg.thin = 2;
        let a = gibbs_run(&obs, &cfg, &mut RngStream::new(4, 0)).unwrap();
        let b = gibbs_run(&obs, &cfg, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(a.len(), 25);
        assert_eq!(a.residual_trace.len(), 60);
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert_eq!(x, y);
        }
        let gammas = a.gamma_draws.as_ref().unwrap();
        assert_eq!(gammas.len(), 25);
        assert!(gammas.iter().flatten().all(|g| *g > 0.0));
    }

    #[test]
    fn config_validation() {
        let (_, obs) = toy_obs(5);
        let mut cfg = GibbsConfig::fixed_rank(2, 1.0);
        cfg.burn_in = cfg.n_iters;
        assert!(gibbs_run(&obs, &cfg, &mut RngStream::new(0, 0)).is_err());
        let cfg = GibbsConfig::fixed_rank(11, 1.0);
        assert!(matches!(gibbs_run(&obs, &cfg, &mut RngStream::new(0, 0)), Err(Error::RankOutOfRange { .. })));
        let cfg = GibbsConfig::flexible(2, 0.0, 1.0, 1.0);
        assert!(gibbs_run(&obs, &cfg, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn residual_weight_semantics() {
        let mut cfg = GibbsConfig::fixed_rank(2, 1.0);
        assert_eq!(cfg.temper_lambda, 0.25);
        assert_eq!(cfg.residual_weight(), 0.5);
        cfg.semantics = TemperSemantics::PoweredGaussian;
        assert_eq!(cfg.residual_weight(), 0.25);
    }

    fn constant_samples(values: &[DenseMatrix]) -> PosteriorSamples {
        // rank-1 factors U = column, V = e_j style encodings are awkward; use
        // U = M (m×p) and V = I (p×p) so that U Vᵀ = M exactly.
        let draws = values
            .iter()
            .map(|m| FactorPair::new(m.clone(), DenseMatrix::identity(m.ncols(), m.ncols())).unwrap())
            .collect();
        PosteriorSamples {
            draws,
            gamma_draws: None,
            config: GibbsConfig::fixed_rank(1, 1.0),
            residual_trace: vec![],
            seed: 0,
        }
    }

    #[test]
    fn posterior_mean_examples() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let same = constant_samples(&[m.clone(), m.clone(), m.clone()]);
        assert!((posterior_mean(&same).unwrap().matrix - &m).amax() < 1e-15);
        let sym = constant_samples(&[m.clone(), -m.clone()]);
        assert_eq!(posterior_mean(&sym).unwrap().matrix, DenseMatrix::zeros(2, 2));
        assert!(posterior_mean(&constant_samples(&[])).is_err());
    }

    #[test]
    fn credible_interval_examples() {
        let c = DenseMatrix::from_element(2, 2, 0.7);
        let same = constant_samples(&vec![c.clone(); 30]);
        let iv = credible_interval(&same, 0.89).unwrap();
        assert!((&iv.lower - &c).amax() < 1e-15 && (&iv.upper - &c).amax() < 1e-15);

        let ramp: Vec<DenseMatrix> = (1..=1000).rev().map(|t| DenseMatrix::from_element(1, 1, t as f64)).collect();
        let iv = credible_interval(&constant_samples(&ramp), 0.5).unwrap();
        assert!((iv.lower[(0, 0)] - 250.75).abs() < 1e-9);
        assert!((iv.upper[(0, 0)] - 750.25).abs() < 1e-9);

        assert!(credible_interval(&constant_samples(&vec![c.clone(); 19]), 0.89).is_err());
        assert!(credible_interval(&same, 1.0).is_err());
    }

    #[test]
    fn diagnostics_on_constant_chain() {
        let c = DenseMatrix::from_element(3, 3, 1.0);
        let s = constant_samples(&vec![c; 40]);
        let d = chain_diagnostics(&s, 4, &mut RngStream::new(0, 0)).unwrap();
        assert!(d.ess.iter().all(|e| *e == 1.0));
    }

    #[test]
    fn draws_csv_layout() {
        let (_, obs) = toy_obs(6);
        let mut cfg = GibbsConfig::fixed_rank(2, 0.09);
        cfg.n_iters = 30;
        cfg.burn_in = 5;
        let s = gibbs_run(&obs, &cfg, &mut RngStream::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        write_draws_csv(&s, &[(0, 0), (3, 4)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m_1_1,m_4_5");
        assert_eq!(lines.len(), 26);
        let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, s.entry_draws(0, 0).unwrap()[0]);
        assert!(write_draws_csv(&s, &[(12, 0)], Vec::new()).is_err());
    }
}
