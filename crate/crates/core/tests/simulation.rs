//! Monte Carlo checks of the simulators and estimators against known values.

use bigjump::heavy_tails::ParetoLaw;
use bigjump::montecarlo::{
    estimate, exact_orderstat_tail, ks_critical, ks_uniform, mean_estimate, orderstat_tail_family,
    residual_tail_convergence, wilson_interval, RunConfig,
};
use bigjump::point_processes::BaseProcessModel;
use bigjump::risk_paths::{build_centered_risk, build_risk};
use bigjump::{mc_hrv_pp, norming, AsymptoticContext, ConditionalLimitSampler, ExperimentConfig, MarkedPattern};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn experiment(model: BaseProcessModel<f64>, alpha: f64, samples: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(model, alpha, 1, RunConfig::new(samples, seed)).unwrap()
}

fn within(mean: f64, se: f64, truth: f64) -> bool {
    (mean - truth).abs() <= 3.0 * se
}

#[test]
fn mean_counts() {
    let poisson = experiment(BaseProcessModel::poisson(0.5, 10.0).unwrap(), 1.0, 200_000, 1);
    let m = mean_estimate(&poisson, |p| Ok(p.len() as f64)).unwrap();
    assert!(within(m.mean, m.std_error(), 5.0), "poisson mean {}", m.mean);

    let gamma = experiment(BaseProcessModel::gamma_renewal(10.0).unwrap(), 1.0, 200_000, 2);
    let m = mean_estimate(&gamma, |p| Ok(p.len() as f64)).unwrap();
    assert!(within(m.mean, m.std_error(), 5.0), "gamma mean {}", m.mean);
}

#[test]
fn gamma_factorial_moments() {
    let model = BaseProcessModel::gamma_renewal(5.0).unwrap();
    let cfg = experiment(model, 1.0, 400_000, 3);
    for order in 1..=3usize {
        let truth = model.count_factorial_moment(order).unwrap();
        let m = mean_estimate(&cfg, |p| {
            let n = p.len() as f64;
            Ok((0..order).map(|j| n - j as f64).product())
        })
        .unwrap();
        assert!(within(m.mean, m.std_error(), truth), "order {order}: {} vs {truth}", m.mean);
    }
}

#[test]
fn gamma_stationarity() {
    let cfg = experiment(BaseProcessModel::gamma_renewal(10.0).unwrap(), 1.0, 200_000, 4);
    for (lo, hi) in [(0.0, 1.0), (4.0, 5.0), (9.0, 10.0)] {
        let m = mean_estimate(&cfg, move |p| Ok(p.points().iter().filter(|q| q.time > lo && q.time <= hi).count() as f64))
            .unwrap();
        assert!(within(m.mean, m.std_error(), 0.5), "window ({lo}, {hi}]: {}", m.mean);
    }
}

#[test]
fn mark_survival() {
    let law = ParetoLaw::new(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let times = BaseProcessModel::grid(1_000_000, 1.0).unwrap().sample(&mut rng);
    let pattern = MarkedPattern::mark(&times, &law, &mut rng);
    let n = pattern.len() as f64;
    let p = pattern.count_exceed(4.0) as f64 / n;
    assert!(within(p, (0.25f64 * 0.75 / n).sqrt(), 0.25));
}

#[test]
fn exceedances_shrink_under_norming() {
    let cfg = experiment(BaseProcessModel::poisson(0.5, 10.0).unwrap(), 1.0, 50_000, 6);
    let mut last = f64::INFINITY;
    for n in [1u64, 10, 100, 1000] {
        let a = norming(1.0, n).unwrap();
        let m = mean_estimate(&cfg, |p| Ok(p.scale(1.0 / a).unwrap().count_exceed(1.0) as f64)).unwrap();
        assert!(m.mean < last);
        last = m.mean;
    }
}

#[test]
fn centered_path_has_zero_mean() {
    let law = ParetoLaw::new(2.0).unwrap();
    let c = law.mean().unwrap();
    let cfg = experiment(BaseProcessModel::poisson(0.5, 10.0).unwrap(), 2.0, 1_000_000, 7);
    let m = mean_estimate(&cfg, |p| Ok(build_centered_risk(p, c).evaluate(10.0))).unwrap();
    assert!(within(m.mean, m.std_error(), 0.0), "mean {} se {}", m.mean, m.std_error());
}

#[test]
fn void_probability_and_wilson_coverage() {
    let model = BaseProcessModel::poisson(0.5, 10.0).unwrap();
    let truth = (-5.0f64).exp();
    let est = estimate(&experiment(model, 1.0, 1_000_000, 8), |p| Ok(p.is_empty())).unwrap();
    assert!((est.p_hat - truth).abs() <= 3.0 * est.half_width());

    let mut covered = 0;
    for rep in 0..200 {
        let est = estimate(&experiment(model, 1.0, 2_000, 100 + rep), |p| Ok(p.is_empty())).unwrap();
        if est.contains(truth) {
            covered += 1;
        }
    }
    assert!(covered >= 180, "coverage {covered}/200");
    let (lo, hi) = wilson_interval(0, 2000);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0);
}

#[test]
fn oracle_agreement_binomial_and_poisson() {
    for model in [BaseProcessModel::binomial(8, 1.0).unwrap(), BaseProcessModel::poisson(0.5, 10.0).unwrap()] {
        let mut cfg = experiment(model, 1.5, 300_000, 9);
        for k in 0..=2 {
            cfg.k = k;
            let xs = [3.0, 10.0];
            for (est, &x) in orderstat_tail_family(&cfg, &xs).unwrap().iter().zip(&xs) {
                let exact = exact_orderstat_tail(&model, 1.5, k, x).unwrap().value;
                assert!((est.p_hat - exact).abs() <= 3.0 * est.half_width(), "{} k={k} x={x}", model.name());
            }
        }
    }
}

#[test]
fn hrv_pp_matches_exact_finite_n() {
    let model = BaseProcessModel::poisson(0.5, 10.0).unwrap();
    let est = mc_hrv_pp(&model, 1.0, 1, 1.0, 100, &RunConfig::new(2_000_000, 10)).unwrap();
    let exact = exact_orderstat_tail(&model, 1.0, 1, 100.0).unwrap().value * 1e4;
    let (lo, hi) = est.scaled_ci();
    assert!((est.scaled_estimate() - exact).abs() <= 1.5 * (hi - lo), "{} vs {exact}", est.scaled_estimate());
}

#[test]
fn residual_dominates_order_statistic() {
    let model = BaseProcessModel::poisson(0.5, 10.0).unwrap();
    let cfg = experiment(model, 1.0, 1_000_000, 11);
    let rows = residual_tail_convergence(&cfg, &[20.0, 50.0]).unwrap();
    for row in rows {
        let exact = exact_orderstat_tail(&model, 1.0, 1, row.point).unwrap().value * row.point.powi(2);
        assert!(row.ci_high >= exact);
    }
}

#[test]
fn results_do_not_depend_on_workers() {
    let cfg = experiment(BaseProcessModel::gamma_renewal(5.0).unwrap(), 1.0, 150_000, 12);
    let run = |w| {
        estimate(&cfg.with_run(cfg.run.with_workers(w)), |p| Ok(build_risk(p).residual_risk(1, 5.0).unwrap() > 3.0)).unwrap()
    };
    assert_eq!(run(1), run(3));
    assert_eq!(run(1), run(8));
    let other = estimate(&cfg.with_run(cfg.run.with_seed(13)), |p| Ok(p.len() > 2)).unwrap();
    let same = estimate(&cfg, |p| Ok(p.len() > 2)).unwrap();
    assert_ne!(other.hits, same.hits);
}

#[test]
fn conditional_limit_sampler_law() {
    let ctx = AsymptoticContext::new(BaseProcessModel::poisson(0.5, 10.0).unwrap(), 1.0, 1).unwrap();
    let mut sampler = ConditionalLimitSampler::new(ctx).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut times = Vec::new();
    let mut above = 0usize;
    let draws = 100_000;
    for _ in 0..draws {
        let path = sampler.sample(&mut rng).unwrap();
        assert_eq!(path.jumps().len(), 2);
        times.extend(path.jumps().iter().map(|j| j.time));
        if path.jumps()[0].size > 2.0 {
            above += 1;
        }
    }
    assert!(ks_uniform(&times, 0.0, 10.0) < ks_critical(times.len(), 0.01));
    let p = above as f64 / draws as f64;
    assert!(within(p, (0.25 / draws as f64).sqrt(), 0.5));
}
