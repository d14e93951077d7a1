//! Row-wise normal-equation accumulation shared by ALS and the Gibbs samplers.

use nalgebra::{DVector, Dyn};

use crate::model::DenseMatrix;

/// Row-major copy of a tall factor, so that row `j` is a contiguous slice.
#[derive(Debug, Clone)]
pub(crate) struct RowMajor {
    pub k: usize,
    pub data: Vec<f64>,
}

impl RowMajor {
    pub fn from_matrix(m: &DenseMatrix) -> Self {
        let (rows, k) = m.shape();
        let mut data = vec![0.0; rows * k];
        for i in 0..rows {
            for c in 0..k {
                data[i * k + c] = m[(i, c)];
            }
        }
        Self { k, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        self.data[i * self.k..(i + 1) * self.k].copy_from_slice(values);
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        let rows = self.data.len() / self.k;
        DenseMatrix::from_row_slice(rows, self.k, &self.data)
    }
}

/// For the observed pairs `(j, y)` of one row, fill `gram = Σ v_j v_jᵀ` and
/// `rhs = Σ y v_j`, where `v_j` is row `j` of `other`.
pub(crate) fn accumulate(other: &RowMajor, pairs: &[(usize, f64)], gram: &mut DenseMatrix, rhs: &mut DVector<f64>) {
    let k = other.k;
    gram.fill(0.0);
    rhs.fill(0.0);
    for &(j, y) in pairs {
        let v = other.row(j);
        for a in 0..k {
            let va = v[a];
            rhs[a] += y * va;
            for b in 0..=a {
                gram[(a, b)] += va * v[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
}

/// Solve the symmetric system `a x = b`, falling back to a least-squares
/// pseudo-inverse solve when `a` is singular.
pub(crate) fn solve_spd(a: &DenseMatrix, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = nalgebra::Cholesky::<f64, Dyn>::new(a.clone()) {
        return chol.solve(b);
    }
    let svd = a.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, tol).unwrap_or_else(|_| DVector::zeros(b.len()))
}

/// ½ ‖P_Ω(Y − U Vᵀ)‖² evaluated through row-major factors.
pub(crate) fn half_residual(obs: &crate::model::ObservationSet, u: &RowMajor, v: &RowMajor) -> f64 {
    0.5 * residual_sq(obs, u, v)
}

pub(crate) fn residual_sq(obs: &crate::model::ObservationSet, u: &RowMajor, v: &RowMajor) -> f64 {
    obs.entries()
        .iter()
        .map(|e| {
            let fit: f64 = u.row(e.i).iter().zip(v.row(e.j)).map(|(a, b)| a * b).sum();
            (e.y - fit).powi(2)
        })
        .sum()
}
