//! De-biased estimator and its entrywise Gaussian confidence intervals.
//!
//! Given a base estimate M̂ (ALS or soft-impute), the de-biased estimate is the
//! rank-r projection of M̂ − P_Ω(M̂ − Y): the observed cells are replaced by the
//! data and the result is pulled back onto rank-r matrices. With M̂ = Û Σ̂ V̂ᵀ
//! the rank-r SVD of the base fit, the variance of entry (i, j) is
//!
//! ```text
//! v_ij = σ² [ U_i (UᵀU)⁻¹ U_iᵀ + V_j (VᵀV)⁻¹ V_jᵀ ],  U = Û(Σ̂ + λI)^½,  V = V̂(Σ̂ + λI)^½
//! ```
//!
//! and `M^db_ij ± Φ⁻¹(1 − α/2) √v_ij` is the two-sided (1 − α) interval.

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank_r_project, truncated_svd, Svd};
use crate::model::{mask_project, DenseMatrix, ObservationSet};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DebiasOptions {
    /// Scale the correction term by 1/q̂ with q̂ = n/(mp), the inverse
    /// sampling-probability weighting. Off by default.
    pub ips_correction: bool,
}

/// Rank-r projection of M̂ − P_Ω(M̂ − Y), verbatim (no rescaling).
pub fn debias(m_hat: &DenseMatrix, obs: &ObservationSet, r: usize) -> Result<DenseMatrix> {
    debias_with(m_hat, obs, r, DebiasOptions::default())
}

pub fn debias_with(m_hat: &DenseMatrix, obs: &ObservationSet, r: usize, opts: DebiasOptions) -> Result<DenseMatrix> {
    obs.check_shape(m_hat)?;
    let max = obs.rows().min(obs.cols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    let correction = mask_project(m_hat, obs)? - obs.to_dense();
    let weight = if opts.ips_correction { 1.0 / obs.observed_fraction() } else { 1.0 };
    rank_r_project(&(m_hat - correction * weight), r)
}

/// Entrywise variances together with the leverages they decompose into.
#[derive(Debug, Clone)]
pub struct EntryVariance {
    pub v: DenseMatrix,
    /// σ² U_i (UᵀU)⁻¹ U_iᵀ per row.
    pub row_term: Vec<f64>,
    /// σ² V_j (VᵀV)⁻¹ V_jᵀ per column.
    pub col_term: Vec<f64>,
    /// Cells whose row and column leverages both vanish (v_ij = 0).
    pub degenerate: Vec<(usize, usize)>,
    pub u_db: DenseMatrix,
    pub v_db: DenseMatrix,
}

fn scaled_factor(basis: &DenseMatrix, scale: &[f64]) -> DenseMatrix {
    let mut out = basis.clone();
    for (k, s) in scale.iter().enumerate() {
        out.column_mut(k).scale_mut(s.sqrt());
    }
    out
}

fn leverages(factor: &DenseMatrix) -> Result<Vec<f64>> {
    let gram = factor.transpose() * factor;
    let chol = Cholesky::new(gram).ok_or_else(|| Error::Linalg("singular Gram matrix in entry variance".into()))?;
    Ok((0..factor.nrows())
        .map(|i| {
            let row: DVector<f64> = factor.row(i).transpose();
            row.dot(&chol.solve(&row))
        })
        .collect())
}

/// Leverages below this fraction of the average leverage k/rows count as zero.
const ZERO_LEVERAGE: f64 = 1e-12;

/// v_ij from the rank-r SVD of the base fit.
pub fn entry_variance(base: &Svd, lambda: f64, sigma2: f64) -> Result<EntryVariance> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let shift: Vec<f64> = base.s.iter().map(|s| s + lambda).collect();
    if shift.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Linalg("singular Σ̂ + λI: a retained singular value plus lambda is zero".into()));
    }
    let u_db = scaled_factor(&base.u, &shift);
    let v_db = scaled_factor(&base.v, &shift);
    let clean = |lev: Vec<f64>, rows: usize| -> Vec<f64> {
        let floor = ZERO_LEVERAGE * base.rank() as f64 / rows as f64;
        lev.into_iter().map(|x| if x.abs() <= floor { 0.0 } else { x }).collect()
    };
    let row_lev = clean(leverages(&u_db)?, u_db.nrows());
    let col_lev = clean(leverages(&v_db)?, v_db.nrows());
    let row_term: Vec<f64> = row_lev.iter().map(|x| sigma2 * x).collect();
    let col_term: Vec<f64> = col_lev.iter().map(|x| sigma2 * x).collect();
    let v = DenseMatrix::from_fn(row_term.len(), col_term.len(), |i, j| row_term[i] + col_term[j]);
    let mut degenerate = Vec::new();
    for (i, a) in row_lev.iter().enumerate() {
        for (j, b) in col_lev.iter().enumerate() {
            if *a == 0.0 && *b == 0.0 {
                degenerate.push((i, j));
            }
        }
    }
    Ok(EntryVariance { v, row_term, col_term, degenerate, u_db, v_db })
}

/// Which construction produced an interval matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    DebiasCi,
    BayesCri,
}

/// Per-entry interval bounds at a nominal level.
#[derive(Debug, Clone)]
pub struct IntervalMatrix {
    pub lower: DenseMatrix,
    pub upper: DenseMatrix,
    pub level: f64,
    pub method: IntervalMethod,
    /// Entries whose interval collapsed to a point because of zero leverage.
    pub flagged: Vec<(usize, usize)>,
}

/// `m_db ± Φ⁻¹(1 − α/2) √v` entrywise.
pub fn confidence_interval(m_db: &DenseMatrix, v: &DenseMatrix, alpha: f64) -> Result<IntervalMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if m_db.shape() != v.shape() {
        return Err(Error::shape(m_db.shape(), v.shape()));
    }
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::invalid("variances must be non-negative"));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let half = v.map(|x| z * x.sqrt());
    let mut flagged = Vec::new();
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            if v[(i, j)] == 0.0 {
                flagged.push((i, j));
            }
        }
    }
    Ok(IntervalMatrix {
        lower: m_db - &half,
        upper: m_db + &half,
        level: 1.0 - alpha,
        method: IntervalMethod::DebiasCi,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean_length: f64,
    pub coverage: f64,
}

/// Mean width and empirical coverage of `iv` against `truth`.
pub fn interval_stats(iv: &IntervalMatrix, truth: &DenseMatrix) -> Result<IntervalStats> {
    if iv.lower.shape() != truth.shape() {
        return Err(Error::shape(truth.shape(), iv.lower.shape()));
    }
    let n = truth.len() as f64;
    let mean_length = (&iv.upper - &iv.lower).sum() / n;
    let covered = truth
        .iter()
        .zip(iv.lower.iter().zip(iv.upper.iter()))
        .filter(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
        .count();
    Ok(IntervalStats { mean_length, coverage: covered as f64 / n })
}

/// Mean squared residual of `m` on Ω, a plug-in for an unknown σ².
pub fn estimate_sigma2(m: &DenseMatrix, obs: &ObservationSet) -> Result<f64> {
    obs.check_shape(m)?;
    let ss: f64 = obs.entries().iter().map(|e| (e.y - m[(e.i, e.j)]).powi(2)).sum();
    Ok(ss / obs.len() as f64)
}

/// Everything produced by de-biasing one base fit.
#[derive(Debug, Clone)]
pub struct DebiasResult {
    pub m_db: DenseMatrix,
    pub u_db: DenseMatrix,
    pub v_db: DenseMatrix,
    pub variance: EntryVariance,
    pub sigma2: f64,
    pub lambda: f64,
}

/// De-bias `m_hat` and compute entry variances from its rank-r SVD.
pub fn debias_fit(
    m_hat: &DenseMatrix,
    obs: &ObservationSet,
    r: usize,
    lambda: f64,
    sigma2: f64,
    opts: DebiasOptions,
) -> Result<DebiasResult> {
    let m_db = debias_with(m_hat, obs, r, opts)?;
    let base = truncated_svd(m_hat, r)?;
    let variance = entry_variance(&base, lambda, sigma2)?;
    Ok(DebiasResult {
        m_db,
        u_db: variance.u_db.clone(),
        v_db: variance.v_db.clone(),
        variance,
        sigma2,
        lambda,
    })
}
