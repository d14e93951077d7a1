//! Synthetic truths, uniform observation sampling, and the triplet CSV format
//! for truths and observation sets.
//!
//! Triplet files start with one line `m,p,n` (the dimensions and the number of
//! entries) followed by `n` lines `i,j,y` with 1-based indices.

use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DenseMatrix, Entry, ObservationSet};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setting {
    /// M* = U* V*ᵀ with standard normal factors.
    #[default]
    ExactLowRank,
    /// M* = U* V*ᵀ + scale · A Bᵀ with A: m×perturb_rank, B: p×perturb_rank.
    ApproxLowRank { perturb_rank: usize, perturb_scale: f64 },
}

impl Setting {
    pub fn approx_default() -> Self {
        Setting::ApproxLowRank { perturb_rank: 50, perturb_scale: 0.1 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Setting::ExactLowRank => "I",
            Setting::ApproxLowRank { .. } => "II",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub m: usize,
    pub p: usize,
    pub r: usize,
    #[serde(default)]
    pub setting: Setting,
    /// Fraction of cells left unobserved.
    pub tau: f64,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let max = self.m.min(self.p);
        if self.m == 0 || self.p == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if self.r == 0 || self.r > max {
            return Err(Error::RankOutOfRange { rank: self.r, max });
        }
        if let Setting::ApproxLowRank { perturb_rank, perturb_scale } = self.setting {
            if perturb_rank == 0 || perturb_rank > max || !perturb_scale.is_finite() {
                return Err(Error::invalid(format!("perturbation rank {perturb_rank} must lie in 1..={max}")));
            }
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("missing rate must lie in [0,1), got {}", self.tau)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("noise sd must be >= 0"));
        }
        Ok(())
    }

    /// n = round((1 − τ) m p).
    pub fn n_observed(&self) -> usize {
        observed_count(self.m, self.p, self.tau)
    }
}

pub fn observed_count(m: usize, p: usize, tau: f64) -> usize {
    ((1.0 - tau) * (m * p) as f64).round() as usize
}

fn gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

/// Generate the true matrix M*.
pub fn gen_truth(spec: &SimSpec, rng: &mut RngStream) -> Result<DenseMatrix> {
    spec.validate()?;
    let u = gaussian(spec.m, spec.r, rng);
    let v = gaussian(spec.p, spec.r, rng);
    let mut truth = &u * v.transpose();
    if let Setting::ApproxLowRank { perturb_rank, perturb_scale } = spec.setting {
        let a = gaussian(spec.m, perturb_rank, rng);
        let b = gaussian(spec.p, perturb_rank, rng);
        truth.gemm(perturb_scale, &a, &b.transpose(), 1.0);
    }
    Ok(truth)
}

/// Observe exactly round((1 − τ) m p) cells chosen uniformly without
/// replacement, each with additive N(0, σ²) noise.
pub fn sample_observations(truth: &DenseMatrix, tau: f64, sigma: f64, rng: &mut RngStream) -> Result<ObservationSet> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::invalid(format!("missing rate must lie in [0,1), got {tau}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("noise sd must be >= 0"));
    }
    let (m, p) = truth.shape();
    let n = observed_count(m, p, tau);
    if n == 0 {
        return Err(Error::InvalidObservations(format!("missing rate {tau} leaves no observed cell in {m}x{p}")));
    }
    let mut cells = sample(rng.inner(), m * p, n).into_vec();
    cells.sort_unstable();
    let entries = cells
        .into_iter()
        .map(|c| {
            let (i, j) = (c / p, c % p);
            Entry { i, j, y: truth[(i, j)] + sigma * rng.standard_normal() }
        })
        .collect();
    ObservationSet::new(m, p, entries)
}

/// Write an observation set in the triplet format.
pub fn write_triplets<W: Write>(obs: &ObservationSet, mut out: W) -> Result<()> {
    writeln!(out, "{},{},{}", obs.rows(), obs.cols(), obs.len())?;
    for e in obs.entries() {
        writeln!(out, "{},{},{:.17e}", e.i + 1, e.j + 1, e.y)?;
    }
    out.flush()?;
    Ok(())
}

/// Write a dense matrix in the triplet format (every cell listed).
pub fn write_matrix_triplets<W: Write>(m: &DenseMatrix, out: W) -> Result<()> {
    write_triplets(&ObservationSet::full(m)?, out)
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidObservations(format!("line {line}: {msg}"))
}

/// Read the triplet format. An optional `i,j,y` column header after the size
/// line is skipped.
pub fn read_triplets<R: Read>(input: R) -> Result<ObservationSet> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let head = head?;
    let dims: Vec<usize> = head
        .trim()
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| parse_err(1, e)))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(parse_err(1, "expected `m,p,n`"));
    }
    let (m, p, n) = (dims[0], dims[1], dims[2]);
    let mut entries = Vec::with_capacity(n);
    for (idx, line) in lines {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || (entries.is_empty() && text.eq_ignore_ascii_case("i,j,y")) {
            continue;
        }
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(parse_err(idx + 1, "expected `i,j,y`"));
        }
        let i: usize = parts[0].parse().map_err(|e| parse_err(idx + 1, e))?;
        let j: usize = parts[1].parse().map_err(|e| parse_err(idx + 1, e))?;
        let y: f64 = parts[2].parse().map_err(|e| parse_err(idx + 1, e))?;
        if i == 0 || j == 0 {
            return Err(parse_err(idx + 1, "indices are 1-based"));
        }
        entries.push(Entry { i: i - 1, j: j - 1, y });
    }
    if entries.len() != n {
        return Err(Error::InvalidObservations(format!("header announces {n} entries, found {}", entries.len())));
    }
    ObservationSet::new(m, p, entries)
}

/// Read a dense matrix written by [`write_matrix_triplets`].
pub fn read_matrix_triplets<R: Read>(input: R) -> Result<DenseMatrix> {
    let obs = read_triplets(input)?;
    if !obs.is_complete() {
        return Err(Error::InvalidObservations("matrix file must list every cell".into()));
    }
    Ok(obs.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd;

    fn spec(m: usize, p: usize, r: usize, tau: f64) -> SimSpec {
        SimSpec { m, p, r, setting: Setting::ExactLowRank, tau, sigma: 1.0, seed: 0 }
    }

    #[test]
    fn exact_truth_has_rank_r() {
        let t = gen_truth(&spec(30, 20, 3, 0.2), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(t.shape(), (30, 20));
        let s = thin_svd(&t).unwrap().s;
        assert!(s[3] / s[0] < 1e-10);
        assert!(s[2] / s[0] > 1e-3);
    }

    #[test]
    fn exact_truth_second_moment() {
        let t = gen_truth(&spec(100, 1000, 5, 0.2), &mut RngStream::new(2, 0)).unwrap();
        let m2 = t.norm_squared() / t.len() as f64;
        assert!((m2 - 5.0).abs() < 0.2, "second moment {m2}");
    }

    #[test]
    fn approx_truth_tail_energy_matches_perturbation() {
        let approx = SimSpec { setting: Setting::approx_default(), ..spec(100, 100, 2, 0.2) };
        let zero = SimSpec { setting: Setting::ApproxLowRank { perturb_rank: 50, perturb_scale: 0.0 }, ..approx };
        let t = gen_truth(&approx, &mut RngStream::new(3, 0)).unwrap();
        let base = gen_truth(&zero, &mut RngStream::new(3, 0)).unwrap();
        let perturbation = &t - &base;
        // difference-matrix oracle: the perturbation is exactly (1/10) A Bᵀ of rank 50
        let ps = thin_svd(&perturbation).unwrap().s;
        assert!(ps[50] / ps[0] < 1e-10);
        let energy = perturbation.norm_squared();
        assert!((energy / (0.01 * 100.0 * 100.0 * 50.0) - 1.0).abs() < 0.1);
        // beyond rank r the spectrum of M* carries (almost only) perturbation energy
        let ts = thin_svd(&t).unwrap().s;
        let tail: f64 = ts[2..].iter().map(|s| s * s).sum();
        let ptail: f64 = ps[2..].iter().map(|s| s * s).sum();
        assert!(tail <= energy * 1.05 && tail >= ptail * 0.7, "tail {tail}, perturbation {energy}");
    }

    #[test]
    fn observation_count_and_noise() {
        let truth = gen_truth(&spec(100, 100, 2, 0.8), &mut RngStream::new(4, 0)).unwrap();
        let obs = sample_observations(&truth, 0.8, 1.0, &mut RngStream::new(4, 1)).unwrap();
        assert_eq!(obs.len(), 2000);
        let resid: Vec<f64> = obs.entries().iter().map(|e| e.y - truth[(e.i, e.j)]).collect();
        let var = resid.iter().map(|x| x * x).sum::<f64>() / resid.len() as f64;
        assert!((var - 1.0).abs() < 0.05 * 1.0 + 0.03, "noise variance {var}");
    }

    #[test]
    fn full_and_noiseless_edges() {
        let truth = gen_truth(&spec(6, 5, 2, 0.0), &mut RngStream::new(5, 0)).unwrap();
        let all = sample_observations(&truth, 0.0, 0.3, &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(all.len(), 30);
        let exact = sample_observations(&truth, 0.5, 0.0, &mut RngStream::new(5, 2)).unwrap();
        assert_eq!(exact.len(), 15);
        assert!(exact.entries().iter().all(|e| e.y == truth[(e.i, e.j)]));
        assert!(sample_observations(&DenseMatrix::zeros(2, 2), 0.9, 1.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn inclusion_is_uniform() {
        let truth = DenseMatrix::zeros(10, 10);
        let mut counts = vec![0usize; 100];
        let reps = 2000;
        for k in 0..reps {
            let obs = sample_observations(&truth, 0.5, 1.0, &mut RngStream::new(6, k)).unwrap();
            for e in obs.entries() {
                counts[e.i * 10 + e.j] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / reps as f64;
            assert!((f - 0.5).abs() < 0.05, "inclusion frequency {f}");
        }
    }

    #[test]
    fn same_stream_same_observations() {
        let truth = gen_truth(&spec(8, 8, 2, 0.5), &mut RngStream::new(7, 0)).unwrap();
        let a = sample_observations(&truth, 0.5, 1.0, &mut RngStream::new(7, 9)).unwrap();
        let b = sample_observations(&truth, 0.5, 1.0, &mut RngStream::new(7, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn triplet_files_round_trip() {
        let truth = gen_truth(&spec(7, 4, 2, 0.3), &mut RngStream::new(8, 0)).unwrap();
        let obs = sample_observations(&truth, 0.3, 1.0, &mut RngStream::new(8, 1)).unwrap();
        let mut buf = Vec::new();
        write_triplets(&obs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("7,4,20\n"));
        assert_eq!(read_triplets(buf.as_slice()).unwrap(), obs);

        let mut dense = Vec::new();
        write_matrix_triplets(&truth, &mut dense).unwrap();
        assert_eq!(read_matrix_triplets(dense.as_slice()).unwrap(), truth);

        assert!(read_triplets("2,2,2\n1,1,0.5\n".as_bytes()).is_err());
        assert!(read_triplets("2,2,1\ni,j,y\n0,1,0.5\n".as_bytes()).is_err());
        assert!(read_triplets("2,2,1\ni,j,y\n2,1,0.5\n".as_bytes()).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(spec(5, 5, 6, 0.2).validate().is_err());
        assert!(spec(5, 5, 2, 1.0).validate().is_err());
        let bad = SimSpec { setting: Setting::ApproxLowRank { perturb_rank: 10, perturb_scale: 0.1 }, ..spec(5, 5, 2, 0.2) };
        assert!(bad.validate().is_err());
    }
}
