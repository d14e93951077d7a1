mod common;

use common::noisy_problem;
use mcuq::bayes::{gibbs_run, gibbs_run_from, gibbs_stream, posterior_mean, GibbsConfig, Prior};
use mcuq::stats::{effective_sample_size, mean_std};
use mcuq::{compute_errors, DenseMatrix, FactorPair, RngStream};

fn mean_and_se(trace: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_std(trace);
    let ess = effective_sample_size(trace).max(1.0);
    (mean, sd.unwrap_or(0.0) / ess.sqrt())
}

#[test]
fn sign_flip_of_a_column_leaves_the_m_trace_unchanged() {
    let (_, obs) = noisy_problem(10, 8, 2, 0.6, 3);
    let mut cfg = GibbsConfig::fixed_rank(2, 1.0);
    cfg.n_iters = 4200;
    cfg.burn_in = 200;
    let mut rng = RngStream::new(5, 0);
    let u = DenseMatrix::from_fn(10, 2, |_, _| rng.standard_normal());
    let v = DenseMatrix::from_fn(8, 2, |_, _| rng.standard_normal());
    let start = FactorPair::new(u.clone(), v.clone()).unwrap();
    let mut uf = u;
    let mut vf = v;
    uf.column_mut(1).neg_mut();
    vf.column_mut(1).neg_mut();
    let flipped = FactorPair::new(uf, vf).unwrap();
    assert!((start.product() - flipped.product()).amax() < 1e-15);

    let a = gibbs_run_from(&obs, &cfg, &mut RngStream::new(9, 1), Some(&start)).unwrap();
    let b = gibbs_run_from(&obs, &cfg, &mut RngStream::new(9, 1), Some(&flipped)).unwrap();
    for (i, j) in [(0, 0), (3, 5), (9, 7)] {
        let (ma, sa) = mean_and_se(&a.entry_draws(i, j).unwrap());
        let (mb, sb) = mean_and_se(&b.entry_draws(i, j).unwrap());
        let tol = 4.0 * (sa * sa + sb * sb).sqrt();
        assert!((ma - mb).abs() <= tol, "entry ({i},{j}): {ma} vs {mb}, tol {tol}");
    }
    let frob = |s: &mcuq::bayes::PosteriorSamples| -> Vec<f64> { s.draws.iter().map(|f| f.product().norm()).collect() };
    let (ma, sa) = mean_and_se(&frob(&a));
    let (mb, sb) = mean_and_se(&frob(&b));
    assert!((ma - mb).abs() <= 4.0 * (sa * sa + sb * sb).sqrt());
}

#[test]
fn thinning_leaves_the_posterior_mean_mse_unchanged() {
    let (truth, obs) = noisy_problem(12, 10, 2, 0.5, 4);
    let reps = 10;
    let mut diffs = Vec::new();
    for k in 0..reps {
        let mut plain = GibbsConfig::fixed_rank(2, 1.0);
        plain.n_iters = 300;
        plain.burn_in = 50;
        let mut thinned = plain;
        thinned.n_iters = 550;
        thinned.thin = 2;
        assert_eq!(plain.retained(), thinned.retained());
        let a = gibbs_run(&obs, &plain, &mut RngStream::new(100 + k, 0)).unwrap();
        let b = gibbs_run(&obs, &thinned, &mut RngStream::new(200 + k, 0)).unwrap();
        let ea = compute_errors(&posterior_mean(&a).unwrap().matrix, &truth, &obs).unwrap().mse;
        let eb = compute_errors(&posterior_mean(&b).unwrap().matrix, &truth, &obs).unwrap().mse;
        diffs.push(ea - eb);
    }
    let (mean, sd) = mean_std(&diffs);
    let se = sd.unwrap() / (reps as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "MSE difference {mean} vs 3 se {}", 3.0 * se);
}

#[test]
fn streaming_visits_exactly_the_stored_draws() {
    let (_, obs) = noisy_problem(9, 7, 2, 0.7, 6);
    for prior in [Prior::FixedRank { rank: 2 }, Prior::Flexible { k: 4, a: 1.0, b: 0.01 }] {
        let mut cfg = GibbsConfig::new(prior, 1.0);
        cfg.n_iters = 60;
        cfg.burn_in = 10;
        cfg.thin = 3;
        let stored = gibbs_run(&obs, &cfg, &mut RngStream::new(1, 2)).unwrap();
        let mut seen = Vec::new();
        let mut gammas = Vec::new();
        let trace = gibbs_stream(&obs, &cfg, &mut RngStream::new(1, 2), None, &mut |f, g| {
            seen.push(f.clone());
            if let Some(g) = g {
                gammas.push(g.to_vec());
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), stored.len());
        assert_eq!(trace, stored.residual_trace);
        for (x, y) in seen.iter().zip(&stored.draws) {
            assert_eq!(x.u, y.u);
            assert_eq!(x.v, y.v);
        }
        match &stored.gamma_draws {
            Some(g) => assert_eq!(&gammas, g),
            None => assert!(gammas.is_empty()),
        }
    }
}

#[test]
fn gamma_draws_stay_positive_and_shape_is_fixed() {
    let (_, obs) = noisy_problem(15, 12, 2, 0.5, 8);
    let cfg = GibbsConfig::flexible(5, 1.0, 0.01, 1.0);
    let s = gibbs_run(&obs, &cfg, &mut RngStream::new(3, 3)).unwrap();
    let gammas = s.gamma_draws.as_ref().unwrap();
    assert_eq!(gammas.len(), cfg.retained());
    assert!(gammas.iter().flatten().all(|g| *g > 0.0 && g.is_finite()));
    for (un, vn) in [(0.0, 0.0), (3.0, 5.0), (1e4, 2.0)] {
        let (shape, _) = mcuq::bayes::gamma_conditional(1.0, 0.01, 15, 12, un, vn);
        assert_eq!(shape, 1.0 + 27.0 / 2.0);
    }
}
