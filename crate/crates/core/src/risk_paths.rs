//! Risk paths built from marked patterns, jump order statistics, cone
//! distances and the largest-claims split.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::marked::MarkedPattern;
use crate::real::Real;

/// A jump of a risk path. `size` is signed only on centered paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump<S> {
    pub time: S,
    pub size: S,
}

/// Right-continuous step path `t -> sum_{time_i <= t} size_i + drift t` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPath<S> {
    horizon: S,
    jumps: Vec<Jump<S>>,
    drift: S,
}

impl<S: Real> RiskPath<S> {
    /// Path with strictly positive jumps and no drift.
    pub fn from_jumps(horizon: S, jumps: Vec<Jump<S>>) -> Result<Self> {
        if let Some(j) = jumps.iter().find(|j| !(j.size > S::zero())) {
            return Err(invalid("jump", format!("sizes must be positive, got {}", j.size)));
        }
        Self::with_drift(horizon, jumps, S::zero())
    }

    /// General constructor: signed jumps and a linear drift.
    pub fn with_drift(horizon: S, mut jumps: Vec<Jump<S>>, drift: S) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        for j in &jumps {
            if !(j.time >= S::zero() && j.time <= horizon) {
                return Err(Error::OutsideWindow {
                    time: j.time.as_f64(),
                    horizon: horizon.as_f64(),
                });
            }
            if !j.size.is_finite() {
                return Err(invalid("jump", "sizes must be finite"));
            }
        }
        jumps.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
        Ok(Self { horizon, jumps, drift })
    }

    /// Builds the jump-free path of length `horizon`.
    pub fn zero(horizon: S) -> Result<Self> {
        Self::from_jumps(horizon, Vec::new())
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn jumps(&self) -> &[Jump<S>] {
        &self.jumps
    }

    pub fn drift(&self) -> S {
        self.drift
    }

    pub fn is_pure_jump(&self) -> bool {
        self.drift == S::zero()
    }

    /// Right-continuous value at `t`; 0 for `t < 0`.
    pub fn evaluate(&self, t: S) -> S {
        if t < S::zero() {
            return S::zero();
        }
        let upto = self.jumps.partition_point(|j| j.time <= t);
        self.jumps[..upto].iter().fold(self.drift * t, |acc, j| acc + j.size)
    }

    /// Multiplies every jump (and the drift) by `u > 0`.
    pub fn scale(&self, u: S) -> Result<Self> {
        if !(u > S::zero()) || !u.is_finite() {
            return Err(invalid("u", "must be positive and finite"));
        }
        Ok(Self {
            horizon: self.horizon,
            jumps: self.jumps.iter().map(|j| Jump { time: j.time, size: j.size * u }).collect(),
            drift: self.drift * u,
        })
    }

    /// Absolute jump sizes in decreasing order; ties keep time order.
    fn sizes_desc(&self, upto: S) -> Vec<S> {
        let mut sizes: Vec<S> = self
            .jumps
            .iter()
            .take_while(|j| j.time <= upto)
            .map(|j| j.size.abs())
            .collect();
        // Stable sort: equal sizes stay in time order.
        sizes.sort_by(|a, b| b.partial_cmp(a).expect("finite sizes"));
        sizes
    }

    /// `k`-th largest absolute jump (`k >= 1`), 0 with fewer than `k` jumps.
    pub fn delta(&self, k: usize) -> Result<S> {
        if k == 0 {
            return Err(invalid("k", "jump ranks start at 1"));
        }
        Ok(self.sizes_desc(self.horizon).get(k - 1).copied().unwrap_or_else(S::zero))
    }

    /// Skorokhod distance to the set of paths with at most `k` jumps.
    pub fn dist_to_dk(&self, k: usize) -> S {
        self.sizes_desc(self.horizon).get(k).copied().unwrap_or_else(S::zero) * S::lit(0.5)
    }

    /// Distance to pure-jump paths with at most `k` jumps: the sum of all
    /// but the `k` largest jumps. Requires a nondecreasing pure-jump path.
    pub fn dist_to_jk(&self, k: usize) -> Result<S> {
        if !self.is_pure_jump() {
            return Err(Error::NotPureJump(format!("path has drift {}", self.drift)));
        }
        if let Some(j) = self.jumps.iter().find(|j| j.size < S::zero()) {
            return Err(Error::NotPureJump(format!("negative jump {} at time {}", j.size, j.time)));
        }
        Ok(self.residual_risk(k, self.horizon)?)
    }

    fn split(&self, k: usize, t: S) -> Result<(S, S)> {
        if !(t >= S::zero() && t <= self.horizon) {
            return Err(Error::OutsideWindow {
                time: t.as_f64(),
                horizon: self.horizon.as_f64(),
            });
        }
        // Signed contributions ranked by absolute size.
        let mut sizes: Vec<S> = self.jumps.iter().take_while(|j| j.time <= t).map(|j| j.size).collect();
        sizes.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite sizes"));
        let covered = sizes.iter().take(k).fold(S::zero(), |acc, &x| acc + x);
        let residual = sizes.iter().skip(k).fold(self.drift * t, |acc, &x| acc + x);
        Ok((residual, covered))
    }

    /// Claims up to `t` retained after ceding the `k` largest.
    pub fn residual_risk(&self, k: usize, t: S) -> Result<S> {
        Ok(self.split(k, t)?.0)
    }

    /// The `k` largest claims up to `t`.
    pub fn covered_risk(&self, k: usize, t: S) -> Result<S> {
        Ok(self.split(k, t)?.1)
    }

    /// Writes `time,value_right_limit` rows at `0` and every jump epoch.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,value_right_limit")?;
        writeln!(out, "0,{}", self.evaluate(S::zero()))?;
        for j in &self.jumps {
            writeln!(out, "{},{}", j.time, self.evaluate(j.time))?;
        }
        Ok(())
    }
}

/// `R(t) = sum_i X_i 1{T_i <= t}`.
pub fn build_risk<S: Real>(pattern: &MarkedPattern<S>) -> RiskPath<S> {
    RiskPath {
        horizon: pattern.horizon(),
        jumps: pattern
            .points()
            .iter()
            .map(|p| Jump {
                time: p.time,
                size: p.mark,
            })
            .collect(),
        drift: S::zero(),
    }
}

/// Same as [`build_risk`] with every claim replaced by `x - c`. Jumps are
/// signed; order statistics act on `|x - c|`.
pub fn build_centered_risk<S: Real>(pattern: &MarkedPattern<S>, c: S) -> RiskPath<S> {
    RiskPath {
        horizon: pattern.horizon(),
        jumps: pattern
            .points()
            .iter()
            .map(|p| Jump {
                time: p.time,
                size: p.mark - c,
            })
            .collect(),
        drift: S::zero(),
    }
}
