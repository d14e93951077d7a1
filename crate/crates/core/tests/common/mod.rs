#![allow(dead_code)]

use mcuq::bench::ExperimentConfig;
use mcuq::linalg::Svd;
use mcuq::sim::{Setting, SimSpec};
use mcuq::{DenseMatrix, Entry, ObservationSet, RngStream};
use nalgebra::SymmetricEigen;

pub fn random(m: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::new(seed, 7);
    DenseMatrix::from_fn(m, p, |_, _| rng.standard_normal())
}

/// SVD through the symmetric eigendecomposition of BᵀB (or BBᵀ when wider).
pub fn eig_svd(b: &DenseMatrix) -> Svd {
    if b.nrows() < b.ncols() {
        let t = eig_svd(&b.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let eig = SymmetricEigen::new(b.transpose() * b);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let k = b.ncols();
    let mut u = DenseMatrix::zeros(b.nrows(), k);
    let mut v = DenseMatrix::zeros(k, k);
    let mut s = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = eig.eigenvalues[src].max(0.0).sqrt();
        let vec = eig.eigenvectors.column(src).into_owned();
        if sigma > 0.0 {
            u.set_column(dst, &(b * &vec / sigma));
        }
        v.set_column(dst, &vec);
        s.push(sigma);
    }
    Svd { u, s, v }
}

/// Oracle rank-r projection: Σ_{k<r} σ_k u_k v_kᵀ from the eigen route.
pub fn oracle_project(b: &DenseMatrix, r: usize) -> DenseMatrix {
    let full = eig_svd(b);
    let mut out = DenseMatrix::zeros(b.nrows(), b.ncols());
    for k in 0..r {
        out += full.s[k] * full.u.column(k) * full.v.column(k).transpose();
    }
    out
}

/// Oracle soft-threshold.
pub fn oracle_svt(b: &DenseMatrix, t: f64) -> DenseMatrix {
    let full = eig_svd(b);
    let mut out = DenseMatrix::zeros(b.nrows(), b.ncols());
    for (k, s) in full.s.iter().enumerate() {
        if *s > t {
            out += (s - t) * full.u.column(k) * full.v.column(k).transpose();
        }
    }
    out
}

/// Low-rank truth plus a random observed subset of it with unit noise.
pub fn noisy_problem(m: usize, p: usize, r: usize, keep: f64, seed: u64) -> (DenseMatrix, ObservationSet) {
    let mut rng = RngStream::new(seed, 11);
    let u = DenseMatrix::from_fn(m, r, |_, _| rng.standard_normal());
    let v = DenseMatrix::from_fn(p, r, |_, _| rng.standard_normal());
    let truth = &u * v.transpose();
    let mut entries = Vec::new();
    for i in 0..m {
        for j in 0..p {
            if rng.uniform() < keep {
                entries.push(Entry { i, j, y: truth[(i, j)] + rng.standard_normal() });
            }
        }
    }
    (truth, ObservationSet::new(m, p, entries).unwrap())
}

pub fn small_config(seed: u64, replicates: usize) -> ExperimentConfig {
    let sim = SimSpec { m: 20, p: 15, r: 2, setting: Setting::ExactLowRank, tau: 0.3, sigma: 0.5, seed };
    let mut cfg = ExperimentConfig::new(sim);
    cfg.replicates = replicates;
    cfg.f_bayes.n_iters = 120;
    cfg.f_bayes.burn_in = 20;
    cfg.bayes.n_iters = 120;
    cfg.bayes.burn_in = 20;
    cfg
}
