//! Seeded Monte Carlo estimation, exact oracles and convergence diagnostics.

mod engine;
mod estimate;
mod oracle;
mod stats;

pub use engine::{fold_patterns, run_chunks, substream, Chunk, RunConfig, DEFAULT_CHUNK_SIZE};
pub use estimate::{wilson_interval, MeanEstimate, TailEstimate, Z95, Z95_ONE_SIDED};
pub use oracle::{binomial_upper_tail, exact_orderstat_tail, ln_factorial, OracleValue, POISSON_TRUNCATION};
pub use stats::{ks_coefficient, ks_critical, ks_critical_two_sample, ks_one_sample, ks_two_sample, ks_uniform};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticContext, ConditionalLimitSampler};
use crate::error::{invalid, Result};
use crate::heavy_tails::{norming, ParetoLaw};
use crate::marked::MarkedPattern;
use crate::point_processes::{BaseProcessModel, ProcessKind};
use crate::risk_paths::build_risk;

/// Conditioned sample size below which diagnostics are flagged.
pub const MIN_CONDITIONED: usize = 500;

/// Model, tail index, reinsurance order and run knobs of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: BaseProcessModel<f64>,
    pub alpha: f64,
    pub k: usize,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn new(model: BaseProcessModel<f64>, alpha: f64, k: usize, run: RunConfig) -> Result<Self> {
        let config = Self { model, alpha, k, run };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        ParetoLaw::new(self.alpha)?;
        self.run.validate()
    }

    pub fn law(&self) -> Result<ParetoLaw<f64>> {
        ParetoLaw::new(self.alpha)
    }

    pub fn context(&self) -> Result<AsymptoticContext<f64>> {
        AsymptoticContext::new(self.model, self.alpha, self.k)
    }

    pub fn with_run(mut self, run: RunConfig) -> Self {
        self.run = run;
        self
    }
}

/// Hit frequency of `event` over `config.run.samples` simulated patterns.
pub fn estimate<F>(config: &ExperimentConfig, event: F) -> Result<TailEstimate>
where
    F: Fn(&MarkedPattern<f64>) -> std::result::Result<bool, String> + Sync,
{
    Ok(estimate_family(config, 1, |p, i| event(p).map(|hit| hit && i == 0))?.remove(0))
}

/// Estimates `count` events on the same simulated patterns. Event `i` of
/// pattern `p` is `event(p, i)`; results come back in index order.
pub fn estimate_family<F>(config: &ExperimentConfig, count: usize, event: F) -> Result<Vec<TailEstimate>>
where
    F: Fn(&MarkedPattern<f64>, usize) -> std::result::Result<bool, String> + Sync,
{
    config.validate()?;
    let law = config.law()?;
    let per_chunk = fold_patterns(
        &config.model,
        &law,
        &config.run,
        || vec![0u64; count],
        |hits, pattern, _| {
            for (i, h) in hits.iter_mut().enumerate() {
                if event(pattern, i)? {
                    *h += 1;
                }
            }
            Ok(())
        },
    )?;
    let mut totals = vec![0u64; count];
    for chunk in &per_chunk {
        for (t, h) in totals.iter_mut().zip(chunk) {
            *t += h;
        }
    }
    Ok(totals
        .into_iter()
        .map(|hits| TailEstimate::from_counts(hits, config.run.samples, 1.0))
        .collect())
}

/// `P(statistic > level_i)` for every level, computing the statistic once
/// per simulated pattern.
pub fn estimate_levels<F>(config: &ExperimentConfig, levels: &[f64], statistic: F) -> Result<Vec<TailEstimate>>
where
    F: Fn(&MarkedPattern<f64>) -> std::result::Result<f64, String> + Sync,
{
    config.validate()?;
    let law = config.law()?;
    let per_chunk = fold_patterns(
        &config.model,
        &law,
        &config.run,
        || vec![0u64; levels.len()],
        |hits, pattern, _| {
            let value = statistic(pattern)?;
            for (h, &level) in hits.iter_mut().zip(levels) {
                if value > level {
                    *h += 1;
                }
            }
            Ok(())
        },
    )?;
    let mut totals = vec![0u64; levels.len()];
    for chunk in &per_chunk {
        for (t, h) in totals.iter_mut().zip(chunk) {
            *t += h;
        }
    }
    Ok(totals
        .into_iter()
        .map(|hits| TailEstimate::from_counts(hits, config.run.samples, 1.0))
        .collect())
}

/// Claims left after removing the `k` largest, `sum_{i <= N-k} X_{i:N}`.
fn residual_total(pattern: &MarkedPattern<f64>, k: usize) -> f64 {
    if pattern.len() <= k {
        return 0.0;
    }
    let total: f64 = pattern.marks().sum();
    if k == 0 {
        return total;
    }
    let mut marks: Vec<f64> = pattern.marks().collect();
    marks.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).expect("finite marks"));
    marks[k..].iter().sum()
}

/// Sample mean of a path functional.
pub fn mean_estimate<F>(config: &ExperimentConfig, value: F) -> Result<MeanEstimate>
where
    F: Fn(&MarkedPattern<f64>) -> std::result::Result<f64, String> + Sync,
{
    config.validate()?;
    let law = config.law()?;
    let per_chunk = fold_patterns(&config.model, &law, &config.run, MeanEstimate::default, |acc, pattern, _| {
        acc.push(value(pattern)?);
        Ok(())
    })?;
    let mut total = MeanEstimate::default();
    for chunk in &per_chunk {
        total.merge(chunk);
    }
    Ok(total)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Grid point (`n` or `x`).
    pub point: f64,
    pub scaled_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub asymptote: f64,
    pub ratio: f64,
    pub hits: u64,
    pub zero_hits: bool,
}

impl ConvergenceRow {
    pub fn new(point: f64, estimate: &TailEstimate, asymptote: f64) -> Self {
        let (ci_low, ci_high) = estimate.scaled_ci();
        let scaled = estimate.scaled_estimate();
        Self {
            point,
            scaled_estimate: scaled,
            ci_low,
            ci_high,
            asymptote,
            ratio: scaled / asymptote,
            hits: estimate.hits,
            zero_hits: estimate.zero_hits,
        }
    }
}

/// Builds a table from per-point `(estimate, asymptote)` evaluations.
pub fn convergence_table<F>(grid: &[f64], mut point: F) -> Result<Vec<ConvergenceRow>>
where
    F: FnMut(f64) -> Result<(TailEstimate, f64)>,
{
    if grid.is_empty() {
        return Err(invalid("grid", "must contain at least one point"));
    }
    grid.iter()
        .map(|&g| point(g).map(|(est, asym)| ConvergenceRow::new(g, &est, asym)))
        .collect()
}

/// `n^{k+1} P(count_exceed(a_n^{-1} Pi, r) >= k+1)` over an `n` grid against
/// its limit. Every grid point reuses the run's seed, so all points are
/// evaluated on one shared set of simulated patterns.
pub fn hrv_pp_convergence(config: &ExperimentConfig, r: f64, ns: &[u64]) -> Result<Vec<ConvergenceRow>> {
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    if ns.iter().any(|&n| n == 0) {
        return Err(invalid("n", "grid values must be at least 1"));
    }
    let limit = crate::marked::hrv_pp_limit(&config.model, config.alpha, config.k, r)?;
    let levels = ns
        .iter()
        .map(|&n| norming(config.alpha, n).map(|a| a * r))
        .collect::<Result<Vec<f64>>>()?;
    let k = config.k;
    let estimates = estimate_levels(config, &levels, |p| Ok(p.mark_order_stat(k + 1)))?;
    let grid: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut it = estimates.into_iter().zip(ns);
    convergence_table(&grid, |_| {
        let (est, &n) = it.next().expect("one estimate per grid point");
        Ok((est.with_scale((n as f64).powi(k as i32 + 1)), limit))
    })
}

/// `P(R_k^-(T) > x) x^{alpha (k+1)}` over an `x` grid against the
/// factorial-moment constant (shared simulated patterns).
pub fn residual_tail_convergence(config: &ExperimentConfig, xs: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let ctx = config.context()?;
    if let Some(x) = xs.iter().find(|&&x| !(x > 1.0)) {
        return Err(invalid("x", format!("levels must exceed 1, got {x}")));
    }
    let k = config.k;
    let estimates = estimate_levels(config, xs, |p| Ok(residual_total(p, k)))?;
    let power = config.alpha * (k + 1) as f64;
    let mut it = estimates.into_iter();
    convergence_table(xs, |x| {
        let est = it.next().expect("one estimate per grid point");
        let scale = x.powf(power);
        Ok((est.with_scale(scale), ctx.residual_tail(x)? * scale))
    })
}

/// Order-statistic tail `P(X_{N-k:N} > x)` on shared patterns, one estimate
/// per level.
pub fn orderstat_tail_family(config: &ExperimentConfig, xs: &[f64]) -> Result<Vec<TailEstimate>> {
    let k = config.k;
    estimate_levels(config, xs, |p| Ok(p.mark_order_stat(k + 1)))
}

/// `P(sum_{i <= N-k-1} X_{i:N} > x) x^{alpha (k+1)}`: the residual without
/// its largest remaining claim, which must be negligible at this scale.
pub fn second_order_residual_family(config: &ExperimentConfig, xs: &[f64]) -> Result<Vec<TailEstimate>> {
    let k = config.k;
    let power = config.alpha * (k + 1) as f64;
    let estimates = estimate_levels(config, xs, |p| Ok(residual_total(p, k + 1)))?;
    Ok(estimates
        .into_iter()
        .zip(xs)
        .map(|(e, &x)| e.with_scale(x.powf(power)))
        .collect())
}

/// Outcome of the conditional-law diagnostics at one level `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub x: f64,
    pub samples: u64,
    /// Paths with `R_k^-(T) > x`.
    pub conditioned: usize,
    /// Among those, the fraction with exactly `k+1` claims above `x`.
    pub exact_big_claims: f64,
    /// KS distance of the `k+1` largest-claim times against the normalised
    /// intensity (uniform on `[0, T]`).
    pub time_ks: f64,
    pub time_critical: f64,
    /// Two-sample KS distance of those times against limit-law times.
    pub time_ks_limit: f64,
    pub time_critical_limit: f64,
    /// Two-sample KS distance of `max claim / x` against the largest limit jump.
    pub size_ks: f64,
    pub size_critical: f64,
    pub limit_samples: usize,
    pub limit_acceptance_rate: f64,
    /// Fewer than [`MIN_CONDITIONED`] conditioned paths.
    pub insufficient: bool,
}

impl ConditionalSummary {
    pub fn time_uniform_ok(&self) -> bool {
        !self.insufficient && self.time_ks < self.time_critical
    }

    pub fn size_ok(&self) -> bool {
        !self.insufficient && self.size_ks < self.size_critical
    }
}

/// Compares paths with `R_k^-(T) > x` with the conditional limit law.
/// `limit_samples` draws from the limit law use the stream after the last
/// simulation chunk; KS critical values are at `level` (e.g. 0.01).
pub fn conditional_diagnostics(
    config: &ExperimentConfig,
    x: f64,
    limit_samples: usize,
    level: f64,
) -> Result<ConditionalSummary> {
    if !(x > 1.0) {
        return Err(invalid("x", "must exceed 1"));
    }
    if limit_samples == 0 {
        return Err(invalid("limit_samples", "must be at least 1"));
    }
    let ctx = config.context()?;
    let law = config.law()?;
    let k = config.k;
    let horizon = config.model.horizon;

    #[derive(Default)]
    struct Acc {
        conditioned: usize,
        exact: usize,
        times: Vec<f64>,
        sizes: Vec<f64>,
    }
    let chunks = fold_patterns(&config.model, &law, &config.run, Acc::default, |acc, pattern, _| {
        if pattern.marks().sum::<f64>() <= x {
            return Ok(());
        }
        let path = build_risk(pattern);
        let residual = path.residual_risk(k, horizon).map_err(|e| e.to_string())?;
        if residual <= x {
            return Ok(());
        }
        acc.conditioned += 1;
        if pattern.count_exceed(x) == k + 1 {
            acc.exact += 1;
        }
        let mut points = pattern.points().to_vec();
        points.sort_by(|a, b| b.mark.partial_cmp(&a.mark).expect("finite marks"));
        acc.times.extend(points.iter().take(k + 1).map(|p| p.time));
        acc.sizes.push(points[0].mark / x);
        Ok(())
    })?;
    let mut acc = Acc::default();
    for c in chunks {
        acc.conditioned += c.conditioned;
        acc.exact += c.exact;
        acc.times.extend(c.times);
        acc.sizes.extend(c.sizes);
    }

    let mut sampler = ConditionalLimitSampler::new(ctx)?;
    let mut rng = substream(config.run.seed, config.run.chunks());
    let mut limit_times = Vec::with_capacity(limit_samples * (k + 1));
    let mut limit_sizes = Vec::with_capacity(limit_samples);
    for _ in 0..limit_samples {
        let path = sampler.sample(&mut rng)?;
        limit_times.extend(path.jumps().iter().map(|j| j.time));
        limit_sizes.push(path.delta(1)?);
    }

    let n = acc.conditioned;
    let nan_if_empty = |v: f64| if n == 0 { f64::NAN } else { v };
    Ok(ConditionalSummary {
        x,
        samples: config.run.samples,
        conditioned: n,
        exact_big_claims: nan_if_empty(acc.exact as f64 / n.max(1) as f64),
        time_ks: nan_if_empty(ks_uniform(&acc.times, 0.0, horizon)),
        time_critical: ks_critical(acc.times.len().max(1), level),
        time_ks_limit: nan_if_empty(ks_two_sample(&acc.times, &limit_times)),
        time_critical_limit: ks_critical_two_sample(acc.times.len().max(1), limit_times.len(), level),
        size_ks: nan_if_empty(ks_two_sample(&acc.sizes, &limit_sizes)),
        size_critical: ks_critical_two_sample(n.max(1), limit_sizes.len(), level),
        limit_samples,
        limit_acceptance_rate: sampler.acceptance_rate(),
        insufficient: n < MIN_CONDITIONED,
    })
}

/// Parameters of a residual-risk monitoring experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitoringEvent {
    pub x: f64,
    pub t0: f64,
    pub t1: f64,
    pub u: f64,
    pub eps: f64,
}

impl MonitoringEvent {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0 < self.t1 && self.t1 <= horizon) {
            return Err(invalid("t0, t1", format!("need 0 < t0 < t1 <= {horizon}")));
        }
        if !(self.u > 1.0) {
            return Err(invalid("u", "must exceed 1"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        if !(self.x > 0.0) {
            return Err(invalid("x", "must be positive"));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the monitoring ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitoringEstimate {
    pub event: MonitoringEvent,
    /// `P(x < R_k^-(t0) < (1+eps) x)` over all paths.
    pub conditioning: TailEstimate,
    /// Conditional frequency of `R_k^-(t1) > u x`, scaled by `x^alpha`.
    pub conditional: TailEstimate,
    /// Conditioned paths fell below [`MIN_CONDITIONED`].
    pub rare: bool,
}

impl MonitoringEstimate {
    pub fn value(&self) -> f64 {
        self.conditional.scaled_estimate()
    }
}

/// `P(R_k^-(t1) > u x | x < R_k^-(t0) < (1+eps) x) / x^{-alpha}`. Poisson
/// and renewal paths are simulated on `[0, t1]` only.
pub fn monitoring_mc(config: &ExperimentConfig, event: MonitoringEvent) -> Result<MonitoringEstimate> {
    Ok(monitoring_mc_family(config, &[event])?.remove(0))
}

/// [`monitoring_mc`] for several events sharing one window `(t0, t1)`,
/// evaluated on the same simulated paths.
pub fn monitoring_mc_family(config: &ExperimentConfig, events: &[MonitoringEvent]) -> Result<Vec<MonitoringEstimate>> {
    config.validate()?;
    let Some(first) = events.first() else {
        return Err(invalid("events", "must contain at least one event"));
    };
    for ev in events {
        ev.validate(config.model.horizon)?;
        if ev.t0 != first.t0 || ev.t1 != first.t1 {
            return Err(invalid("t0, t1", "events of one family must share the monitoring window"));
        }
    }
    let (t0, t1) = (first.t0, first.t1);
    let model = match config.model.kind {
        ProcessKind::Poisson { .. } | ProcessKind::GammaRenewal => config.model.restricted(t1)?,
        _ => config.model,
    };
    let law = config.law()?;
    let k = config.k;
    let min_level = events.iter().map(|e| e.x).fold(f64::INFINITY, f64::min);
    let chunks = fold_patterns(&model, &law, &config.run, || vec![(0u64, 0u64); events.len()], |acc, pattern, _| {
        if pattern.marks().sum::<f64>() <= min_level {
            return Ok(());
        }
        let path = build_risk(pattern);
        let early = path.residual_risk(k, t0).map_err(|e| e.to_string())?;
        let mut late = None;
        for (slot, ev) in acc.iter_mut().zip(events) {
            if early > ev.x && early < (1.0 + ev.eps) * ev.x {
                slot.0 += 1;
                let r = match late {
                    Some(r) => r,
                    None => *late.insert(path.residual_risk(k, t1).map_err(|e| e.to_string())?),
                };
                if r > ev.u * ev.x {
                    slot.1 += 1;
                }
            }
        }
        Ok(())
    })?;
    let mut totals = vec![(0u64, 0u64); events.len()];
    for chunk in &chunks {
        for (t, c) in totals.iter_mut().zip(chunk) {
            t.0 += c.0;
            t.1 += c.1;
        }
    }
    Ok(totals
        .into_iter()
        .zip(events)
        .map(|((conditioned, joint), &event)| {
            let scale = event.x.powf(config.alpha);
            let conditional = if conditioned == 0 {
                TailEstimate {
                    p_hat: f64::NAN,
                    hits: 0,
                    samples: 0,
                    ci_low: 0.0,
                    ci_high: 1.0,
                    scale,
                    zero_hits: true,
                }
            } else {
                TailEstimate::from_counts(joint, conditioned, scale)
            };
            MonitoringEstimate {
                event,
                conditioning: TailEstimate::from_counts(conditioned, config.run.samples, 1.0),
                conditional,
                rare: (conditioned as usize) < MIN_CONDITIONED,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn poisson_config(samples: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            BaseProcessModel::poisson(0.5, 10.0).unwrap(),
            1.0,
            1,
            RunConfig::new(samples, 11),
        )
        .unwrap()
    }

    #[test]
    fn trivial_events() {
        let cfg = poisson_config(1000);
        let all = estimate(&cfg, |_| Ok(true)).unwrap();
        assert_eq!(all.p_hat, 1.0);
        assert_eq!(all.ci_high, 1.0);
        let none = estimate(&cfg, |_| Ok(false)).unwrap();
        assert!(none.zero_hits && none.ci_high > 0.0);
    }

    #[test]
    fn failing_event_reports_replay_key() {
        let mut cfg = poisson_config(300);
        cfg.run.chunk_size = 100;
        let err = estimate(&cfg, |p| if p.len() > 12 { Err("too many".into()) } else { Ok(false) });
        match err {
            Err(crate::Error::EventFailed { seed, chunk, path, .. }) => {
                assert_eq!(seed, 11);
                assert_eq!(chunk, path / 100);
            }
            other => panic!("expected a replayable failure, got {other:?}"),
        }
    }

    #[test]
    fn void_probability() {
        let cfg = poisson_config(200_000);
        let est = estimate(&cfg, |p| Ok(p.is_empty())).unwrap();
        let truth = (-5.0f64).exp();
        assert!((est.p_hat - truth).abs() <= 3.0 * est.half_width());
    }

    #[test]
    fn family_matches_single_estimates() {
        let cfg = poisson_config(20_000);
        let rows = hrv_pp_convergence(&cfg, 1.0, &[10, 30]).unwrap();
        for row in &rows {
            let est = crate::marked::mc_hrv_pp(&cfg.model, 1.0, 1, 1.0, row.point as u64, &cfg.run).unwrap();
            assert_eq!(est.scaled_estimate(), row.scaled_estimate);
        }
        assert_relative_eq!(rows[0].asymptote, 12.5);
    }

    #[test]
    fn single_point_table() {
        let cfg = poisson_config(1000);
        assert_eq!(residual_tail_convergence(&cfg, &[20.0]).unwrap().len(), 1);
        assert!(convergence_table(&[], |_| unreachable!()).is_err());
    }

    #[test]
    fn monitoring_large_u_vanishes() {
        let cfg = poisson_config(100_000);
        let ev = MonitoringEvent {
            x: 3.0,
            t0: 1.0,
            t1: 2.0,
            u: 1e9,
            eps: 0.5,
        };
        let est = monitoring_mc(&cfg, ev).unwrap();
        assert!(est.conditioning.hits > 0);
        assert_eq!(est.conditional.hits, 0);
        assert!(monitoring_mc(&cfg, MonitoringEvent { u: 1.0, ..ev }).is_err());
    }

    #[test]
    fn conditional_summary_flags_small_samples() {
        let cfg = poisson_config(2000);
        let s = conditional_diagnostics(&cfg, 50.0, 100, 0.01).unwrap();
        assert!(s.insufficient);
        assert!(!s.time_uniform_ok());
    }
}
