mod common;

use common::small_config;
use mcuq::bench::{
    aggregate, emit_figure_data, read_rows_csv, run_experiment, run_replicate, write_rows_csv, Estimator,
    ExperimentConfig, FigureConfig, Metric, FIGURE_SCALARS,
};
use mcuq::bayes::{gibbs_run, posterior_mean};
use mcuq::sim::{gen_truth, sample_observations, Setting, SimSpec};
use mcuq::{Error, RngStream};

#[test]
fn identical_configs_give_identical_rows() {
    let cfg = small_config(21, 4);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg.clone()).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.fingerprint, b.fingerprint);
    let mut other = cfg.clone();
    other.seed = 22;
    other.sim.seed = 22;
    let c = run_experiment(&other).unwrap();
    assert_ne!(a.rows.iter().map(|r| r.mean).collect::<Vec<_>>(), c.rows.iter().map(|r| r.mean).collect::<Vec<_>>());
}

#[test]
fn replicate_order_does_not_change_aggregates() {
    let cfg = small_config(5, 6);
    let forward: Vec<_> = (0..6).map(|k| run_replicate(&cfg, k)).collect();
    let shuffled: Vec<_> = [4, 1, 5, 0, 3, 2].iter().map(|&k| run_replicate(&cfg, k)).collect();
    let a = aggregate(&cfg, &forward);
    let b = aggregate(&cfg, &shuffled);
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.rows, run_experiment(&cfg).unwrap().rows);
}

#[test]
fn aggregates_match_a_two_pass_reference() {
    let cfg = small_config(8, 7);
    let outcomes: Vec<_> = (0..7).map(|k| run_replicate(&cfg, k)).collect();
    let report = aggregate(&cfg, &outcomes);
    for est in &cfg.estimators {
        for metric in Metric::ALL {
            let values: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.results.iter().find(|(e, _)| e == est))
                .filter_map(|(_, r)| r.as_ref().ok())
                .filter_map(|m| m.iter().find(|(k, _)| *k == metric).map(|(_, v)| *v))
                .collect();
            let Some(row) = report.row(*est, metric) else {
                assert!(values.is_empty());
                continue;
            };
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let got_mean = row.mean.unwrap();
            let got_std = row.std.unwrap();
            assert!((got_mean - mean).abs() <= 1e-12 * mean.abs().max(1e-300), "{est} {metric:?} mean");
            assert!((got_std - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1e-300), "{est} {metric:?} std");
        }
    }
}

#[test]
fn one_replicate_reports_no_spread() {
    let mut cfg = small_config(2, 1);
    cfg.estimators = vec![Estimator::Als, Estimator::Db];
    let report = run_experiment(&cfg).unwrap();
    let row = report.row(Estimator::Db, Metric::Mse).unwrap();
    assert!(row.mean.is_some());
    assert_eq!(row.std, None);
    assert_eq!(row.n_reps, 1);
}

#[test]
fn rows_survive_a_csv_round_trip() {
    let report = run_experiment(&small_config(3, 2)).unwrap();
    let mut buf = Vec::new();
    write_rows_csv(&report.rows, &mut buf).unwrap();
    let back = read_rows_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), report.rows.len());
    for (a, b) in back.iter().zip(&report.rows) {
        assert_eq!((a.metric, &a.estimator, a.n_reps), (b.metric, &b.estimator, b.n_reps));
        let (x, y) = (a.mean.unwrap(), b.mean.unwrap());
        assert!((x - y).abs() <= 1e-15 * y.abs());
    }
}

#[test]
fn db_coverage_is_at_least_ninety_percent() {
    let sim = SimSpec { m: 100, p: 100, r: 2, setting: Setting::ExactLowRank, tau: 0.2, sigma: 1.0, seed: 17 };
    let mut cfg = ExperimentConfig::new(sim);
    cfg.replicates = 5;
    cfg.estimators = vec![Estimator::Db];
    let report = run_experiment(&cfg).unwrap();
    let coverage = report.mean(Estimator::Db, Metric::Coverage).unwrap();
    assert!(coverage >= 0.90, "coverage {coverage}");
}

#[test]
fn figure_data_contract() {
    let sim = SimSpec { m: 12, p: 10, r: 2, setting: Setting::ExactLowRank, tau: 0.3, sigma: 1.0, seed: 4 };
    let exp = ExperimentConfig::new(sim);
    let fig = FigureConfig::new(exp.clone());
    let dir = tempfile::tempdir().unwrap();
    let entries = emit_figure_data(&fig, &[(0, 0), (11, 9)], Some(dir.path())).unwrap();
    assert_eq!(entries.len(), 2);

    // the same chain, stored, for the posterior mean and spread
    let rep = RngStream::new(exp.seed, 0);
    let truth = gen_truth(&exp.sim, &mut rep.split(0)).unwrap();
    let obs = sample_observations(&truth, exp.sim.tau, exp.sim.sigma, &mut rep.split(1)).unwrap();
    let mut gibbs = exp.f_bayes.gibbs(exp.sim.r, exp.sigma2());
    gibbs.n_iters = gibbs.burn_in + FigureConfig::MIN_DRAWS;
    let samples = gibbs_run(&obs, &gibbs, &mut rep.split(4)).unwrap();
    let pm = posterior_mean(&samples).unwrap().matrix;

    for e in &entries {
        assert_eq!(e.draws.len(), FigureConfig::MIN_DRAWS);
        assert!(e.db_variance > 0.0);
        assert_eq!(e.truth, truth[(e.i, e.j)]);
        assert_eq!(e.draws, samples.entry_draws(e.i, e.j).unwrap());
        let n = e.draws.len() as f64;
        let mean = e.draws.iter().sum::<f64>() / n;
        let sd = (e.draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - pm[(e.i, e.j)]).abs() <= 3.0 * sd / n.sqrt());

        let text = std::fs::read_to_string(e.path.as_ref().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kind,value");
        for (line, kind) in lines[1..4].iter().zip(FIGURE_SCALARS) {
            assert!(line.starts_with(&format!("{kind},")));
        }
        assert_eq!(lines.iter().filter(|l| l.starts_with("draw,")).count(), FigureConfig::MIN_DRAWS);
    }
    assert!(dir.path().join("entry_12_10.csv").exists());
}

#[test]
fn figure_data_rejects_bad_requests() {
    let sim = SimSpec { m: 12, p: 10, r: 2, setting: Setting::ExactLowRank, tau: 0.3, sigma: 1.0, seed: 4 };
    let mut fig = FigureConfig::new(ExperimentConfig::new(sim));
    assert!(matches!(emit_figure_data(&fig, &[(12, 0)], None), Err(Error::InvalidArgument(_))));
    fig.draws = 500;
    assert!(matches!(emit_figure_data(&fig, &[(0, 0)], None), Err(Error::Config(_))));
}
