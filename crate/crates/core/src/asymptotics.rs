//! Closed-form tail asymptotics of the residual risk and the conditional
//! limit law of the risk path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heavy_tails::ParetoLaw;
use crate::point_processes::{renewal_density_gamma21, BaseProcessModel, ProcessKind};
use crate::real::Real;
use crate::risk_paths::{Jump, RiskPath};

/// Proposal cap of the Gamma-renewal rejection sampler.
pub const REJECTION_CAP: u64 = 1_000_000;

/// A base process, a tail index and a reinsurance order `k` (the `k`
/// largest claims are ceded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticContext<S> {
    pub model: BaseProcessModel<S>,
    pub alpha: S,
    pub k: usize,
}

impl<S: Real> AsymptoticContext<S> {
    pub fn new(model: BaseProcessModel<S>, alpha: S, k: usize) -> Result<Self> {
        let ctx = Self { model, alpha, k };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        ParetoLaw::new(self.alpha)?;
        let m = self.model.count_factorial_moment(self.k + 1)?;
        if !(m > S::zero()) || !m.is_finite() {
            return Err(invalid(
                "k",
                format!("factorial moment of order {} is {m}; it must be finite and positive", self.k + 1),
            ));
        }
        Ok(())
    }

    /// `E[N^{[k+1]}] / (k+1)!`.
    pub fn moment_constant(&self) -> Result<S> {
        let order = self.k + 1;
        let fact = (1..=order as u64).fold(S::one(), |acc, i| acc * S::from_count(i));
        Ok(self.model.count_factorial_moment(order)? / fact)
    }

    fn power(&self) -> S {
        self.alpha * S::from_count(self.k as u64 + 1)
    }

    /// Asymptote of `P(R_k^-(T) > x)`: `E[N^{[k+1]}]/(k+1)! x^{-alpha (k+1)}`.
    pub fn residual_tail(&self, x: S) -> Result<S> {
        if !(x > S::one()) {
            return Err(invalid("x", format!("level must exceed 1, got {x}")));
        }
        Ok(self.moment_constant()? * x.powf(-self.power()))
    }

    /// Limit of `n^{k+1} P(Delta_{k+1}(a_n^{-1} R) > 2 r)`.
    pub fn path_tail(&self, r: S) -> Result<S> {
        if !(r > S::zero()) {
            return Err(invalid("r", "must be positive"));
        }
        Ok(self.moment_constant()? * (S::lit(2.0) * r).powf(-self.power()))
    }

    /// `M_{k+2}([0,t0]^{k+1} x (t0,t1]) / M_{k+1}([0,t0]^{k+1})`.
    pub fn monitoring_ratio(&self, t0: S, t1: S) -> Result<S> {
        if !(t0 > S::zero() && t0 < t1 && t1 <= self.model.horizon) {
            return Err(invalid(
                "t0, t1",
                format!("need 0 < t0 < t1 <= {}, got t0 = {t0}, t1 = {t1}", self.model.horizon),
            ));
        }
        if let ProcessKind::Grid { .. } = self.model.kind {
            return Err(Error::Unsupported(
                "monitoring limits need continuous factorial moment measures; the grid model has atoms".into(),
            ));
        }
        let order = self.k + 1;
        let mut intervals = vec![(S::zero(), t0); order];
        let denominator = self.model.factorial_moments(order)?.box_mass(&intervals)?.value;
        intervals.push((t0, t1));
        let numerator = self.model.factorial_moments(order + 1)?.box_mass(&intervals)?.value;
        if !(denominator > S::zero()) {
            return Err(invalid("t0", "factorial moment of the conditioning window vanishes"));
        }
        if !(numerator > S::zero()) {
            return Err(invalid("k", format!("factorial moment of order {} vanishes", order + 1)));
        }
        Ok(numerator / denominator)
    }

    /// Limit of `P(R_k^-(t1) > u x | x < R_k^-(t0) < (1+eps) x) / P(X > x)`
    /// as `x -> inf` and then `eps -> 0`.
    pub fn monitoring_limit(&self, u: S, t0: S, t1: S) -> Result<S> {
        let factor = monitoring_factor(u, self.alpha, self.k)?;
        Ok(self.monitoring_ratio(t0, t1)? * factor)
    }
}

fn check_ratio<S: Real>(u: S) -> Result<()> {
    if !(u > S::one()) {
        return Err(invalid("u", format!("ratio must exceed 1, got {u}")));
    }
    Ok(())
}

/// Pareto part of the monitoring limit:
/// `f(u) = (u-1)^{-alpha} max(u-1, 1)^{-k alpha}`.
///
/// Given the retained claim sits at `x`, a new claim `xW` pushes the
/// residual above `ux` when `u - 1 < W <= 1`, or when `W > 1` and every one
/// of the `k` larger claims also exceeds `(u-1)x`. For `u >= 2` this is
/// `(u-1)^{-(k+1) alpha}`; below 2 it is `(u-1)^{-alpha}`.
pub fn monitoring_factor<S: Real>(u: S, alpha: S, k: usize) -> Result<S> {
    check_ratio(u)?;
    ParetoLaw::new(alpha)?;
    let v = u - S::one();
    Ok(v.powf(-alpha) * v.max(S::one()).powf(-alpha * S::from_count(k as u64)))
}

/// `(u-1)^{-(k+1) alpha} + ((u-1)^{-alpha} - 1)_+`. Coincides with
/// [`monitoring_factor`] for `u >= 2` and exceeds it on `(1, 2)`, where it
/// counts the case `W > 1` with weight `(u-1)^{-(k+1) alpha}` instead of 1.
pub fn monitoring_factor_two_term<S: Real>(u: S, alpha: S, k: usize) -> Result<S> {
    check_ratio(u)?;
    ParetoLaw::new(alpha)?;
    let v = u - S::one();
    let head = v.powf(-alpha * S::from_count(k as u64 + 1));
    Ok(head + (v.powf(-alpha) - S::one()).max(S::zero()))
}

/// `lim_{t0 -> 0} M_{k+2}([0,t0]^{k+1} x (t0,t1]) / M_{k+1}([0,t0]^{k+1})`
/// for Gamma(2, 1) gaps: `int_0^{t1} u(s) ds = (e^{-2 t1} + 2 t1 - 1) / 4`.
pub fn gamma_monitoring_ratio_t0zero<S: Real>(t1: S) -> Result<S> {
    if !(t1 > S::zero()) {
        return Err(invalid("t1", "must be positive"));
    }
    let two = S::lit(2.0);
    Ok(((-two * t1).exp_m1() + two * t1) * S::lit(0.25))
}

/// Monitoring limit of the Gamma renewal model with `t0 -> 0`.
pub fn monitoring_limit_t0zero_gamma<S: Real>(t1: S, u: S, alpha: S, k: usize) -> Result<S> {
    Ok(gamma_monitoring_ratio_t0zero(t1)? * monitoring_factor(u, alpha, k)?)
}

/// Draws from the conditional limit law of the risk path given a large
/// residual: `k+1` i.i.d. standard Pareto jumps at times distributed as the
/// normalised `M_{k+1}`.
#[derive(Debug, Clone)]
pub struct ConditionalLimitSampler<S> {
    ctx: AsymptoticContext<S>,
    law: ParetoLaw<S>,
    proposed: u64,
    accepted: u64,
}

impl<S: Real> ConditionalLimitSampler<S> {
    pub fn new(ctx: AsymptoticContext<S>) -> Result<Self> {
        ctx.validate()?;
        if let ProcessKind::Grid { n } = ctx.model.kind {
            if (n as usize) < ctx.k + 1 {
                return Err(invalid("k", "grid has fewer than k + 1 points"));
            }
        }
        Ok(Self {
            law: ParetoLaw::new(ctx.alpha)?,
            ctx,
            proposed: 0,
            accepted: 0,
        })
    }

    /// Fraction of accepted time proposals so far (1 for exact samplers).
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn proposals(&self) -> (u64, u64) {
        (self.proposed, self.accepted)
    }

    /// `k+1` times from the normalised `M_{k+1}`, unsorted.
    pub fn sample_times<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<S>> {
        let count = self.ctx.k + 1;
        let horizon = self.ctx.model.horizon;
        let uniform = |rng: &mut R| S::lit(rng.random::<f64>()) * horizon;
        match self.ctx.model.kind {
            ProcessKind::Poisson { .. } | ProcessKind::Binomial { .. } => {
                self.proposed += 1;
                self.accepted += 1;
                Ok((0..count).map(|_| uniform(rng)).collect())
            }
            ProcessKind::Grid { n } => {
                self.proposed += 1;
                self.accepted += 1;
                let idx = rand::seq::index::sample(rng, n as usize, count);
                let nf = S::from_count(n);
                Ok(idx.iter().map(|i| S::from_count(i as u64 + 1) * horizon / nf).collect())
            }
            ProcessKind::GammaRenewal => {
                // Target tau^{-1} prod u(gaps) against the bound tau^{-1} (1/2)^k.
                let mut tries = 0u64;
                loop {
                    if tries == REJECTION_CAP {
                        return Err(Error::RejectionCap {
                            cap: REJECTION_CAP,
                            proposed: self.proposed,
                            accepted: self.accepted,
                        });
                    }
                    tries += 1;
                    self.proposed += 1;
                    let times: Vec<S> = (0..count).map(|_| uniform(rng)).collect();
                    let mut sorted = times.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
                    let ratio = sorted
                        .windows(2)
                        .fold(S::one(), |acc, w| acc * S::lit(2.0) * renewal_density_gamma21(w[1] - w[0]));
                    if S::lit(rng.random::<f64>()) < ratio {
                        self.accepted += 1;
                        return Ok(times);
                    }
                }
            }
        }
    }

    /// A path with exactly `k+1` jumps of standard Pareto size.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<RiskPath<S>> {
        let times = self.sample_times(rng)?;
        let jumps = times
            .into_iter()
            .map(|time| Jump {
                time,
                size: self.law.sample(rng),
            })
            .collect();
        RiskPath::from_jumps(self.ctx.model.horizon, jumps)
    }
}
