//! Observation sets, factor pairs, masked projections and error metrics.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix. Every estimate, truth and interval bound lives in one.
pub type DenseMatrix = DMatrix<f64>;

/// One observed entry `(i, j, y)`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub y: f64,
}

/// The observed index set Ω together with the noisy values Y on Ω.
///
/// Entries are kept sorted by `(i, j)`. Row- and column-wise adjacency lists
/// are built once on construction; both ALS and the Gibbs samplers walk them
/// on every sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    rows: usize,
    cols: usize,
    entries: Vec<Entry>,
    by_row: Vec<Vec<(usize, f64)>>,
    by_col: Vec<Vec<(usize, f64)>>,
}

impl ObservationSet {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<Entry>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidObservations("dimensions must be positive".into()));
        }
        if entries.is_empty() {
            return Err(Error::InvalidObservations("at least one observed entry is required".into()));
        }
        if entries.len() > rows * cols {
            return Err(Error::InvalidObservations(format!(
                "{} entries exceed the {}x{} grid",
                entries.len(),
                rows,
                cols
            )));
        }
        let mut seen = vec![false; rows * cols];
        for e in &entries {
            if e.i >= rows || e.j >= cols {
                return Err(Error::InvalidObservations(format!(
                    "index ({}, {}) outside {}x{}",
                    e.i, e.j, rows, cols
                )));
            }
            if !e.y.is_finite() {
                return Err(Error::InvalidObservations(format!("non-finite value at ({}, {})", e.i, e.j)));
            }
            let slot = &mut seen[e.i * cols + e.j];
            if *slot {
                return Err(Error::InvalidObservations(format!("duplicate entry ({}, {})", e.i, e.j)));
            }
            *slot = true;
        }
        entries.sort_by_key(|e| (e.i, e.j));
        let mut by_row = vec![Vec::new(); rows];
        let mut by_col = vec![Vec::new(); cols];
        for e in &entries {
            by_row[e.i].push((e.j, e.y));
            by_col[e.j].push((e.i, e.y));
        }
        Ok(Self { rows, cols, entries, by_row, by_col })
    }

    /// Observe every cell of `m` exactly.
    pub fn full(m: &DenseMatrix) -> Result<Self> {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Entry { i, j, y: m[(i, j)] })
            .collect();
        Self::new(m.nrows(), m.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// n = |Ω|.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Observed `(col, y)` pairs of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.by_row[i]
    }

    /// Observed `(row, y)` pairs of column `j`.
    pub fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.by_col[j]
    }

    /// Fraction of observed cells, n / (m p).
    pub fn observed_fraction(&self) -> f64 {
        self.len() as f64 / (self.rows * self.cols) as f64
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.rows * self.cols
    }

    /// P_Ω(Y) as a dense matrix: Y on Ω, zero elsewhere.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for e in &self.entries {
            out[(e.i, e.j)] = e.y;
        }
        out
    }

    /// Boolean mask of Ω in row-major order.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.rows * self.cols];
        for e in &self.entries {
            mask[e.i * self.cols + e.j] = true;
        }
        mask
    }

    pub(crate) fn check_shape(&self, m: &DenseMatrix) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::shape(self.shape(), m.shape()));
        }
        Ok(())
    }
}

/// A factorization M = U Vᵀ with U: m×k and V: p×k.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.ncols() != v.ncols() || u.ncols() == 0 {
            return Err(Error::Dimension {
                expected: "U and V with equal, positive column counts".into(),
                found: format!("U {}x{}, V {}x{}", u.nrows(), u.ncols(), v.nrows(), v.ncols()),
            });
        }
        Ok(Self { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn product(&self) -> DenseMatrix {
        &self.u * self.v.transpose()
    }
}

/// Which procedure produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Als,
    AlsCompleted,
    SoftImpute,
    Debiased,
    FixedRankBayes,
    FlexibleBayes,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Als => "als",
            Method::AlsCompleted => "als_completed",
            Method::SoftImpute => "soft_impute",
            Method::Debiased => "db",
            Method::FixedRankBayes => "f_bayes",
            Method::FlexibleBayes => "bayes",
        }
    }
}

/// A dense point estimate and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionEstimate {
    pub matrix: DenseMatrix,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl CompletionEstimate {
    pub fn new(matrix: DenseMatrix, method: Method) -> Self {
        Self { matrix, method, params: BTreeMap::new(), seed: None }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Per-entry error averages of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mse: f64,
    pub nmse: f64,
    /// Average squared error over unobserved cells; `None` when Ω covers
    /// every cell.
    pub pred: Option<f64>,
}

/// P_Ω(M): keep the observed cells, zero the rest.
pub fn mask_project(m: &DenseMatrix, obs: &ObservationSet) -> Result<DenseMatrix> {
    obs.check_shape(m)?;
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for e in obs.entries() {
        out[(e.i, e.j)] = m[(e.i, e.j)];
    }
    Ok(out)
}

/// P_Ω̄(M) = M − P_Ω(M).
pub fn complement_project(m: &DenseMatrix, obs: &ObservationSet) -> Result<DenseMatrix> {
    obs.check_shape(m)?;
    let mut out = m.clone();
    for e in obs.entries() {
        out[(e.i, e.j)] = 0.0;
    }
    Ok(out)
}

/// MSE, NMSE and prediction error of `est` against `truth`.
pub fn compute_errors(est: &DenseMatrix, truth: &DenseMatrix, obs: &ObservationSet) -> Result<ErrorReport> {
    if est.shape() != truth.shape() {
        return Err(Error::shape(truth.shape(), est.shape()));
    }
    obs.check_shape(truth)?;
    let truth_sq = truth.norm_squared();
    if truth_sq == 0.0 {
        return Err(Error::UndefinedMetric("NMSE is undefined for an all-zero truth".into()));
    }
    let diff = est - truth;
    let total = diff.norm_squared();
    let mp = (truth.nrows() * truth.ncols()) as f64;
    let pred = if obs.is_complete() {
        None
    } else {
        let on_omega: f64 = obs.entries().iter().map(|e| diff[(e.i, e.j)].powi(2)).sum();
        Some((total - on_omega).max(0.0) / (mp - obs.len() as f64))
    };
    Ok(ErrorReport { mse: total / mp, nmse: total / truth_sq, pred })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn diag_obs(y: [f64; 2]) -> ObservationSet {
        ObservationSet::new(
            2,
            2,
            vec![Entry { i: 0, j: 0, y: y[0] }, Entry { i: 1, j: 1, y: y[1] }],
        )
        .unwrap()
    }

    fn random_instance(seed: u64) -> (DenseMatrix, ObservationSet) {
        let mut rng = RngStream::new(seed, 0);
        let m = DenseMatrix::from_fn(5, 4, |_, _| rng.standard_normal());
        let picks = rand::seq::index::sample(&mut rng, 20, 7);
        let entries = picks
            .iter()
            .map(|k| Entry { i: k / 4, j: k % 4, y: 0.0 })
            .collect();
        (m, ObservationSet::new(5, 4, entries).unwrap())
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(ObservationSet::new(2, 2, vec![]).is_err());
        let dup = vec![Entry { i: 0, j: 0, y: 1.0 }, Entry { i: 0, j: 0, y: 2.0 }];
        assert!(ObservationSet::new(2, 2, dup).is_err());
        assert!(ObservationSet::new(2, 2, vec![Entry { i: 2, j: 0, y: 1.0 }]).is_err());
    }

    #[test]
    fn mask_project_examples() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let obs = diag_obs([0.0, 0.0]);
        let out = mask_project(&m, &obs).unwrap();
        assert_eq!(out, DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        let full = ObservationSet::full(&m).unwrap();
        assert_eq!(mask_project(&m, &full).unwrap(), m);
        assert_eq!(mask_project(&out, &obs).unwrap(), out);
    }

    #[test]
    fn complement_project_examples() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let obs = diag_obs([0.0, 0.0]);
        assert_eq!(
            complement_project(&m, &obs).unwrap(),
            DenseMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0])
        );
        let full = ObservationSet::full(&m).unwrap();
        assert_eq!(complement_project(&m, &full).unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn projections_match_loop_oracle() {
        for seed in 0..5 {
            let (m, obs) = random_instance(seed);
            let mask = obs.mask();
            let masked = mask_project(&m, &obs).unwrap();
            let comp = complement_project(&m, &obs).unwrap();
            for i in 0..5 {
                for j in 0..4 {
                    let inside = obs.entries().iter().any(|e| e.i == i && e.j == j);
                    assert_eq!(inside, mask[i * 4 + j]);
                    assert_eq!(masked[(i, j)], if inside { m[(i, j)] } else { 0.0 });
                    assert_eq!(comp[(i, j)], if inside { 0.0 } else { m[(i, j)] });
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let obs = diag_obs([1.0, 1.0]);
        let m = DenseMatrix::zeros(3, 2);
        assert!(matches!(mask_project(&m, &obs), Err(Error::Dimension { .. })));
        assert!(matches!(complement_project(&m, &obs), Err(Error::Dimension { .. })));
    }

    #[test]
    fn error_metrics_hand_values() {
        let truth = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let est = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let obs = diag_obs([1.0, 1.0]);
        let rep = compute_errors(&est, &truth, &obs).unwrap();
        assert!((rep.mse - 0.25).abs() < 1e-15);
        assert!((rep.nmse - 0.5).abs() < 1e-15);
        assert!((rep.pred.unwrap() - 0.5).abs() < 1e-15);

        let exact = compute_errors(&truth, &truth, &obs).unwrap();
        assert_eq!((exact.mse, exact.nmse, exact.pred), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn error_metric_edge_cases() {
        let truth = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let full = ObservationSet::full(&truth).unwrap();
        assert_eq!(compute_errors(&truth, &truth, &full).unwrap().pred, None);
        let zero = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            compute_errors(&truth, &zero, &diag_obs([0.0, 0.0])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    proptest! {
        #[test]
        fn partition_and_metric_identity(seed in 0u64..10_000) {
            let (m, obs) = random_instance(seed);
            let sum = mask_project(&m, &obs).unwrap() + complement_project(&m, &obs).unwrap();
            prop_assert_eq!(&sum, &m);
            let comp = complement_project(&m, &obs).unwrap();
            prop_assert_eq!(mask_project(&comp, &obs).unwrap(), DenseMatrix::zeros(5, 4));

            let mut rng = RngStream::new(seed, 1);
            let est = DenseMatrix::from_fn(5, 4, |_, _| rng.standard_normal());
            let rep = compute_errors(&est, &m, &obs).unwrap();
            let lhs = rep.mse * 20.0;
            let rhs = rep.nmse * m.norm_squared();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300));
        }
    }
}
