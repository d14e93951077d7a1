//! Base frequentist estimators: alternating least squares on the penalized
//! factorization objective, and soft-impute for the nuclear-norm objective.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{accumulate, half_residual, solve_spd, RowMajor};
use crate::linalg::{nuclear_norm, svt, truncated_svd};
use crate::model::{CompletionEstimate, DenseMatrix, FactorPair, Method, ObservationSet};
use crate::rng::RngStream;

/// How ALS factors are initialized when no warm start is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlsInit {
    /// Entries i.i.d. N(0, 1/r) from the supplied stream.
    #[default]
    ScaledGaussian,
    /// Balanced split of the rank-r SVD of P_Ω(Y) / (n / mp).
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlsConfig {
    pub lambda: f64,
    pub rank: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub init: AlsInit,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self { lambda: 0.0, rank: 1, max_iters: 200, tol: 1e-6, init: AlsInit::ScaledGaussian }
    }
}

impl AlsConfig {
    pub fn new(lambda: f64, rank: usize) -> Self {
        Self { lambda, rank, ..Self::default() }
    }

    fn validate(&self, obs: &ObservationSet) -> Result<()> {
        let max = obs.rows().min(obs.cols());
        if self.rank == 0 || self.rank > max {
            return Err(Error::RankOutOfRange { rank: self.rank, max });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("ALS lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(Error::invalid("ALS needs max_iters >= 1 and tol > 0"));
        }
        Ok(())
    }
}

/// Output of [`als_fit`].
#[derive(Debug, Clone)]
pub struct AlsFit {
    pub factors: FactorPair,
    pub estimate: CompletionEstimate,
    /// Penalized objective at the start and after every half-sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// ½‖P_Ω(Y − U Vᵀ)‖² + (λ/2)(‖U‖² + ‖V‖²).
pub fn als_objective(obs: &ObservationSet, factors: &FactorPair, lambda: f64) -> f64 {
    let u = RowMajor::from_matrix(&factors.u);
    let v = RowMajor::from_matrix(&factors.v);
    objective(obs, &u, &v, lambda)
}

fn objective(obs: &ObservationSet, u: &RowMajor, v: &RowMajor, lambda: f64) -> f64 {
    let penalty: f64 = u.data.iter().chain(&v.data).map(|x| x * x).sum();
    half_residual(obs, u, v) + 0.5 * lambda * penalty
}

/// Ridge update of every row of `target` against the frozen `other` factor.
fn half_sweep<'a>(lists: &dyn Fn(usize) -> &'a [(usize, f64)], target: &mut RowMajor, other: &RowMajor, lambda: f64) {
    let k = other.k;
    let rows = target.data.len() / k;
    let mut gram = DenseMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for i in 0..rows {
        let pairs = lists(i);
        if pairs.is_empty() {
            target.set_row(i, &vec![0.0; k]);
            continue;
        }
        accumulate(other, pairs, &mut gram, &mut rhs);
        for a in 0..k {
            gram[(a, a)] += lambda;
        }
        let sol = solve_spd(&gram, &rhs);
        target.set_row(i, sol.as_slice());
    }
}

fn initial_factors(obs: &ObservationSet, cfg: &AlsConfig, rng: &mut RngStream) -> Result<FactorPair> {
    let (m, p) = obs.shape();
    let r = cfg.rank;
    match cfg.init {
        AlsInit::ScaledGaussian => {
            let scale = 1.0 / (r as f64).sqrt();
            let u = DenseMatrix::from_fn(m, r, |_, _| scale * rng.standard_normal());
            let v = DenseMatrix::from_fn(p, r, |_, _| scale * rng.standard_normal());
            FactorPair::new(u, v)
        }
        AlsInit::Spectral => {
            let scaled = obs.to_dense() / obs.observed_fraction();
            let svd = truncated_svd(&scaled, r)?;
            let mut u = svd.u.clone();
            let mut v = svd.v.clone();
            for (k, s) in svd.s.iter().enumerate() {
                let root = s.sqrt();
                u.column_mut(k).scale_mut(root);
                v.column_mut(k).scale_mut(root);
            }
            FactorPair::new(u, v)
        }
    }
}

/// Alternating ridge regressions on the rows of U and V for the penalized
/// factorization objective. Each half-sweep solves, per row i,
/// (V_Ωᵢᵀ V_Ωᵢ + λ I) uᵢ = V_Ωᵢᵀ y_Ωᵢ with V frozen, then symmetrically for V.
/// Rows with no observations are set to zero.
pub fn als_fit(
    obs: &ObservationSet,
    cfg: &AlsConfig,
    rng: &mut RngStream,
    warm_start: Option<&FactorPair>,
) -> Result<AlsFit> {
    cfg.validate(obs)?;
    let start = match warm_start {
        Some(f) => {
            if f.u.shape() != (obs.rows(), cfg.rank) || f.v.shape() != (obs.cols(), cfg.rank) {
                return Err(Error::Dimension {
                    expected: format!("U {}x{}, V {}x{}", obs.rows(), cfg.rank, obs.cols(), cfg.rank),
                    found: format!("U {:?}, V {:?}", f.u.shape(), f.v.shape()),
                });
            }
            f.clone()
        }
        None => initial_factors(obs, cfg, rng)?,
    };
    let mut u = RowMajor::from_matrix(&start.u);
    let mut v = RowMajor::from_matrix(&start.v);

    let mut trace = vec![objective(obs, &u, &v, cfg.lambda)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_iters {
        let before = *trace.last().expect("trace starts non-empty");
        half_sweep(&|i| obs.row(i), &mut u, &v, cfg.lambda);
        trace.push(objective(obs, &u, &v, cfg.lambda));
        half_sweep(&|j| obs.col(j), &mut v, &u, cfg.lambda);
        let after = objective(obs, &u, &v, cfg.lambda);
        trace.push(after);
        sweeps += 1;
        if (before - after).abs() <= cfg.tol * before.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let factors = FactorPair::new(u.to_matrix(), v.to_matrix())?;
    let estimate = CompletionEstimate::new(factors.product(), Method::Als)
        .with_param("lambda", cfg.lambda)
        .with_param("rank", cfg.rank as f64)
        .with_param("sweeps", sweeps as f64)
        .with_seed(rng.id().seed);
    Ok(AlsFit { factors, estimate, objective_trace: trace, sweeps, converged })
}

/// Observed values on Ω, the estimate elsewhere: P_Ω(Y) + P_Ω̄(M̂).
pub fn complete(obs: &ObservationSet, estimate: &DenseMatrix) -> Result<DenseMatrix> {
    obs.check_shape(estimate)?;
    let mut out = estimate.clone();
    for e in obs.entries() {
        out[(e.i, e.j)] = e.y;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftImputeConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        Self { lambda: 0.0, max_iters: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct SoftImputeFit {
    pub estimate: CompletionEstimate,
    /// ½‖P_Ω(Z − Y)‖² + λ‖Z‖_* after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn soft_impute_objective(obs: &ObservationSet, z: &DenseMatrix, lambda: f64) -> Result<f64> {
    obs.check_shape(z)?;
    let fit: f64 = obs.entries().iter().map(|e| (z[(e.i, e.j)] - e.y).powi(2)).sum();
    Ok(0.5 * fit + lambda * nuclear_norm(z)?)
}

/// Soft-impute: Z ← svt(P_Ω(Y) + P_Ω̄(Z), λ) from Z = 0 until the relative
/// Frobenius change drops below `tol`.
pub fn soft_impute_fit(obs: &ObservationSet, cfg: &SoftImputeConfig) -> Result<SoftImputeFit> {
    if !(cfg.lambda >= 0.0) || cfg.max_iters == 0 || !(cfg.tol > 0.0) {
        return Err(Error::invalid("soft-impute needs lambda >= 0, max_iters >= 1, tol > 0"));
    }
    let mut z = DenseMatrix::zeros(obs.rows(), obs.cols());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = svt(&complete(obs, &z)?, cfg.lambda)?;
        let change = (&next - &z).norm();
        let scale = z.norm();
        z = next;
        iterations += 1;
        trace.push(soft_impute_objective(obs, &z, cfg.lambda)?);
        if change <= cfg.tol * scale || (change == 0.0 && scale == 0.0) {
            converged = true;
            break;
        }
    }
    let estimate = CompletionEstimate::new(z, Method::SoftImpute)
        .with_param("lambda", cfg.lambda)
        .with_param("iterations", iterations as f64);
    Ok(SoftImputeFit { estimate, objective_trace: trace, iterations, converged })
}
