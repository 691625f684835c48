//! Base arrival processes on `[0, T]` and their factorial moment measures.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_ordered, GaussLegendre};
use crate::real::Real;

/// Mean inter-arrival time of the Gamma(2, 1) renewal process.
pub const GAMMA_RENEWAL_MEAN: f64 = 2.0;

/// Sorted arrival times in `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePattern<S> {
    horizon: S,
    times: Vec<S>,
}

impl<S: Real> TimePattern<S> {
    pub fn new(horizon: S, mut times: Vec<S>) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if let Some(&t) = times.iter().find(|&&t| !(t >= S::zero() && t <= horizon)) {
            return Err(Error::OutsideWindow {
                time: t.as_f64(),
                horizon: horizon.as_f64(),
            });
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        Ok(Self { horizon, times })
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of arrivals in `(lo, hi]`.
    pub fn count_in(&self, lo: S, hi: S) -> usize {
        let a = self.times.partition_point(|&t| t <= lo);
        let b = self.times.partition_point(|&t| t <= hi);
        b.saturating_sub(a)
    }
}

/// Arrival mechanism of the base process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcessKind<S> {
    /// Homogeneous Poisson process with the given intensity.
    Poisson { rate: S },
    /// Stationary renewal process with Gamma(2, 1) gaps (mean 2).
    GammaRenewal,
    /// Deterministic times `i T / n`, `i = 1..=n`.
    Grid { n: u64 },
    /// `n` i.i.d. uniform times on `[0, T]`.
    Binomial { n: u64 },
}

/// A base process together with its observation window `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseProcessModel<S> {
    pub kind: ProcessKind<S>,
    pub horizon: S,
}

/// Knobs for factorial-moment quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Gauss-Legendre nodes per panel and axis.
    pub nodes: usize,
    /// Use closed forms where they exist (Gamma renewal, orders 1-3).
    pub closed_forms: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            nodes: 16,
            closed_forms: true,
        }
    }
}

/// Result of a factorial-moment box evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMass<S> {
    pub value: S,
    /// Relative change when the quadrature resolution is doubled; zero for
    /// exact evaluations.
    pub resolution_change: S,
    /// `false` when the doubling check moved the value by more than 1e-6.
    pub converged: bool,
}

impl<S: Real> BoxMass<S> {
    fn exact(value: S) -> Self {
        Self {
            value,
            resolution_change: S::zero(),
            converged: true,
        }
    }
}

impl<S: Real> BaseProcessModel<S> {
    pub fn poisson(rate: S, horizon: S) -> Result<Self> {
        Self::new(ProcessKind::Poisson { rate }, horizon)
    }

    pub fn gamma_renewal(horizon: S) -> Result<Self> {
        Self::new(ProcessKind::GammaRenewal, horizon)
    }

    pub fn grid(n: u64, horizon: S) -> Result<Self> {
        Self::new(ProcessKind::Grid { n }, horizon)
    }

    pub fn binomial(n: u64, horizon: S) -> Result<Self> {
        Self::new(ProcessKind::Binomial { n }, horizon)
    }

    pub fn new(kind: ProcessKind<S>, horizon: S) -> Result<Self> {
        let model = Self { kind, horizon };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > S::zero()) || !self.horizon.is_finite() {
            return Err(invalid("horizon", format!("must be positive and finite, got {}", self.horizon)));
        }
        match self.kind {
            ProcessKind::Poisson { rate } if !(rate > S::zero()) || !rate.is_finite() => {
                Err(invalid("rate", format!("must be positive and finite, got {rate}")))
            }
            ProcessKind::Grid { n: 0 } | ProcessKind::Binomial { n: 0 } => {
                Err(invalid("n", "point count must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProcessKind::Poisson { .. } => "poisson",
            ProcessKind::GammaRenewal => "gamma-renewal",
            ProcessKind::Grid { .. } => "grid",
            ProcessKind::Binomial { .. } => "binomial",
        }
    }

    /// Mean number of arrivals per unit time.
    pub fn intensity(&self) -> S {
        match self.kind {
            ProcessKind::Poisson { rate } => rate,
            ProcessKind::GammaRenewal => S::lit(1.0 / GAMMA_RENEWAL_MEAN),
            ProcessKind::Grid { n } | ProcessKind::Binomial { n } => S::from_count(n) / self.horizon,
        }
    }

    /// `E[N] = M_1([0, T])`.
    pub fn mean_count(&self) -> S {
        self.intensity() * self.horizon
    }

    /// Whether `M_1` (and hence every `M_k`) has a Lebesgue density.
    pub fn is_continuous(&self) -> bool {
        !matches!(self.kind, ProcessKind::Grid { .. })
    }

    /// The same process observed on the shorter window `[0, t]`. Only
    /// available where the restriction has the same law as the model with a
    /// smaller horizon (Poisson and the stationary renewal process).
    pub fn restricted(&self, t: S) -> Result<Self> {
        if !(t > S::zero() && t <= self.horizon) {
            return Err(invalid("t", format!("restriction window must lie in (0, {}]", self.horizon)));
        }
        match self.kind {
            ProcessKind::Poisson { .. } | ProcessKind::GammaRenewal => Self::new(self.kind, t),
            _ => Err(Error::Unsupported(format!(
                "restriction of the {} model is not a model of the same family",
                self.name()
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TimePattern<S> {
        let mut times = Vec::new();
        self.sample_into(rng, &mut times);
        TimePattern {
            horizon: self.horizon,
            times,
        }
    }

    /// Clears `times` and fills it with one sorted realisation.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, times: &mut Vec<S>) {
        let horizon = self.horizon;
        times.clear();
        match self.kind {
            ProcessKind::Poisson { rate } => {
                let mut t = S::zero();
                loop {
                    t = t + exponential::<S, R>(rng) / rate;
                    if t > horizon {
                        break;
                    }
                    times.push(t);
                }
            }
            ProcessKind::GammaRenewal => {
                // Equilibrium delay (1 + t) e^{-t} / 2 = mixture of Exp(1) and Gamma(2, 1).
                let mut t = exponential::<S, R>(rng);
                if rng.random::<bool>() {
                    t = t + exponential::<S, R>(rng);
                }
                while t <= horizon {
                    times.push(t);
                    t = t + exponential::<S, R>(rng) + exponential::<S, R>(rng);
                }
            }
            ProcessKind::Grid { n } => {
                times.extend(grid_times(n, horizon));
            }
            ProcessKind::Binomial { n } => {
                times.extend((0..n).map(|_| S::lit(rng.random::<f64>()) * horizon));
                times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            }
        }
    }

    pub fn factorial_moments(&self, order: usize) -> Result<FactorialMoments<S>> {
        FactorialMoments::new(*self, order)
    }

    /// `E[N (N - 1) ... (N - k + 1)]`.
    pub fn count_factorial_moment(&self, order: usize) -> Result<S> {
        if order == 0 {
            return Ok(S::one());
        }
        match self.kind {
            ProcessKind::Poisson { .. } => Ok(self.mean_count().powi(order as i32)),
            ProcessKind::Grid { n } | ProcessKind::Binomial { n } => Ok(falling_factorial(n, order)),
            ProcessKind::GammaRenewal => {
                let full = vec![(S::zero(), self.horizon); order];
                Ok(self.factorial_moments(order)?.box_mass(&full)?.value)
            }
        }
    }
}

fn exponential<S: Real, R: Rng + ?Sized>(rng: &mut R) -> S {
    S::lit(rng.sample::<f64, _>(Exp1))
}

fn grid_times<S: Real>(n: u64, horizon: S) -> impl Iterator<Item = S> {
    let nf = S::from_count(n);
    (1..=n).map(move |i| S::from_count(i) * horizon / nf)
}

/// `n (n - 1) ... (n - k + 1)`, zero when `k > n`.
pub fn falling_factorial<S: Real>(n: u64, k: usize) -> S {
    if k as u64 > n {
        return S::zero();
    }
    (0..k as u64).fold(S::one(), |acc, j| acc * S::from_count(n - j))
}

/// Renewal density of Gamma(2, 1) gaps: `u(t) = (1 - e^{-2t}) / 2`.
pub fn renewal_density_gamma21<S: Real>(t: S) -> S {
    if t <= S::zero() {
        return S::zero();
    }
    -(S::lit(-2.0) * t).exp_m1() * S::lit(0.5)
}

/// Second factorial moment of `N(T)` for the stationary Gamma(2, 1) renewal
/// process: `T^2/4 - (2T - 1 + e^{-2T})/8`.
pub fn m2_gamma<S: Real>(horizon: S) -> S {
    let t = horizon;
    t * t * S::lit(0.25) - (S::lit(2.0) * t + (S::lit(-2.0) * t).exp_m1()) * S::lit(0.125)
}

/// `M_2([0, t0]^2)` for the Gamma(2, 1) renewal process.
pub fn m2_box_gamma<S: Real>(t0: S) -> S {
    m2_gamma(t0)
}

/// `M_3([0, t0]^2 x (t0, t1])` for the Gamma(2, 1) renewal process.
pub fn m3_box_gamma<S: Real>(t0: S, t1: S) -> Result<S> {
    if !(t0 >= S::zero()) {
        return Err(invalid("t0", "must be nonnegative"));
    }
    if !(t1 > t0) {
        return Err(invalid("t1", format!("must exceed t0 = {t0}, got {t1}")));
    }
    let two = S::lit(2.0);
    let d = t1 - t0;
    let e0 = (-two * t0).exp();
    let a = S::lit(0.125) * t0 * t0 * d;
    let b = S::lit(1.0 / 16.0) * d * ((-two * t0).exp_m1() + two * t0);
    let c = S::lit(1.0 / 16.0) * (-two * d).exp_m1() * (t0 * e0 + (-two * t0).exp_m1() + t0);
    Ok(a - b + c)
}

/// Evaluator of the `k`-th factorial moment measure `M_k` of a base process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorialMoments<S> {
    model: BaseProcessModel<S>,
    order: usize,
    pub quadrature: QuadratureOptions,
}

impl<S: Real> FactorialMoments<S> {
    pub fn new(model: BaseProcessModel<S>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "factorial moment order must be at least 1"));
        }
        model.validate()?;
        Ok(Self {
            model,
            order,
            quadrature: QuadratureOptions::default(),
        })
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureOptions) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn model(&self) -> &BaseProcessModel<S> {
        &self.model
    }

    fn check_times(&self, times: &[S]) -> Result<()> {
        if times.len() != self.order {
            return Err(invalid("t", format!("expected {} times, got {}", self.order, times.len())));
        }
        let horizon = self.model.horizon;
        match times.iter().find(|&&t| !(t >= S::zero() && t <= horizon)) {
            Some(&t) => Err(Error::OutsideWindow {
                time: t.as_f64(),
                horizon: horizon.as_f64(),
            }),
            None => Ok(()),
        }
    }

    /// Lebesgue density of `M_k` at `(t_1, ..., t_k)`.
    pub fn density(&self, times: &[S]) -> Result<S> {
        self.check_times(times)?;
        let k = self.order;
        match self.model.kind {
            ProcessKind::Poisson { rate } => Ok(rate.powi(k as i32)),
            ProcessKind::Binomial { n } => Ok(falling_factorial::<S>(n, k) / self.model.horizon.powi(k as i32)),
            ProcessKind::GammaRenewal => {
                let mut sorted = times.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
                Ok(gamma_ordered_density(&sorted))
            }
            ProcessKind::Grid { .. } => Err(Error::Unsupported(
                "the grid model has atomic factorial moment measures without a density".into(),
            )),
        }
    }

    /// `M_k` of the box `(lo_1, hi_1] x ... x (lo_k, hi_k]`.
    pub fn box_mass(&self, intervals: &[(S, S)]) -> Result<BoxMass<S>> {
        if intervals.len() != self.order {
            return Err(invalid(
                "box",
                format!("expected {} intervals, got {}", self.order, intervals.len()),
            ));
        }
        let horizon = self.model.horizon;
        for &(lo, hi) in intervals {
            if !(lo >= S::zero() && hi <= horizon) {
                return Err(Error::OutsideWindow {
                    time: if lo < S::zero() { lo.as_f64() } else { hi.as_f64() },
                    horizon: horizon.as_f64(),
                });
            }
        }
        if intervals.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Ok(BoxMass::exact(S::zero()));
        }
        let k = self.order;
        match self.model.kind {
            ProcessKind::Poisson { rate } => Ok(BoxMass::exact(
                intervals.iter().fold(S::one(), |acc, &(lo, hi)| acc * rate * (hi - lo)),
            )),
            ProcessKind::Binomial { n } => Ok(BoxMass::exact(
                intervals
                    .iter()
                    .fold(falling_factorial::<S>(n, k), |acc, &(lo, hi)| acc * (hi - lo) / horizon),
            )),
            ProcessKind::Grid { n } => Ok(BoxMass::exact(grid_box_mass(n, horizon, intervals))),
            ProcessKind::GammaRenewal => {
                if self.quadrature.closed_forms {
                    if let Some(v) = gamma_closed_form(intervals) {
                        return Ok(BoxMass::exact(v));
                    }
                }
                Ok(self.gamma_quadrature(intervals))
            }
        }
    }

    fn gamma_quadrature(&self, intervals: &[(S, S)]) -> BoxMass<S> {
        let nodes = self.quadrature.nodes.max(1);
        let coarse: S = integrate_ordered(&GaussLegendre::new(nodes), intervals, gamma_ordered_density);
        let fine: S = integrate_ordered(&GaussLegendre::new(2 * nodes), intervals, gamma_ordered_density);
        let change = if fine == S::zero() {
            (fine - coarse).abs()
        } else {
            ((fine - coarse) / fine).abs()
        };
        BoxMass {
            value: fine,
            resolution_change: change,
            converged: change <= S::lit(1e-6),
        }
    }
}

/// `tau^{-1} prod u(s_{i+1} - s_i)` for sorted `s`.
fn gamma_ordered_density<S: Real>(sorted: &[S]) -> S {
    sorted
        .windows(2)
        .fold(S::lit(1.0 / GAMMA_RENEWAL_MEAN), |acc, w| acc * renewal_density_gamma21(w[1] - w[0]))
}

fn gamma_closed_form<S: Real>(intervals: &[(S, S)]) -> Option<S> {
    let zero = S::zero();
    match intervals {
        [(lo, hi)] => Some((*hi - *lo) * S::lit(1.0 / GAMMA_RENEWAL_MEAN)),
        [(a0, b0), (a1, b1)] if *a0 == zero && *a1 == zero && b0 == b1 => Some(m2_box_gamma(*b0)),
        _ if intervals.len() == 3 => {
            // [0, t0]^2 x (t0, t1] in any coordinate order.
            let square: Vec<&(S, S)> = intervals.iter().filter(|iv| iv.0 == zero).collect();
            let tail: Vec<&(S, S)> = intervals.iter().filter(|iv| iv.0 != zero).collect();
            match (square.as_slice(), tail.as_slice()) {
                ([p, q], [r]) if p.1 == q.1 && r.0 == p.1 => m3_box_gamma(p.1, r.1).ok(),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Number of ordered tuples of distinct grid points in the box, by
/// inclusion-exclusion over set partitions of the coordinates.
fn grid_box_mass<S: Real>(n: u64, horizon: S, intervals: &[(S, S)]) -> S {
    let points: Vec<S> = grid_times(n, horizon).collect();
    let count = |lo: S, hi: S| -> i128 {
        if !(hi > lo) {
            return 0;
        }
        let a = points.partition_point(|&t| t <= lo);
        let b = points.partition_point(|&t| t <= hi);
        (b - a) as i128
    };
    let mut total: i128 = 0;
    for partition in set_partitions(intervals.len()) {
        let mut term: i128 = 1;
        for block in &partition {
            let lo = block.iter().map(|&i| intervals[i].0).fold(S::neg_infinity(), S::max);
            let hi = block.iter().map(|&i| intervals[i].1).fold(S::infinity(), S::min);
            let size = block.len() as i128;
            let mobius = if size % 2 == 1 { 1 } else { -1 } * (1..size).product::<i128>();
            term *= mobius * count(lo, hi);
            if term == 0 {
                break;
            }
        }
        total += term;
    }
    S::from_i128(total).expect("count representable")
}

fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(i: usize, k: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            go(i + 1, k, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    go(0, k, &mut Vec::new(), &mut out);
    out
}
