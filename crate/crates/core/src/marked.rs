//! Independently marked point processes, mark order statistics and the
//! hidden-regular-variation limit `mu*_{k+1}` on cylinder events.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heavy_tails::{norming, LimitMeasure, ParetoLaw};
use crate::montecarlo::{fold_patterns, RunConfig, TailEstimate};
use crate::point_processes::{BaseProcessModel, ProcessKind, TimePattern};
use crate::real::Real;

/// One claim: arrival time and (positive) mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint<S> {
    pub time: S,
    pub mark: S,
}

/// Finite marked pattern on `[0, T] x (0, inf)`, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPattern<S> {
    horizon: S,
    points: Vec<MarkedPoint<S>>,
}

impl<S: Real> MarkedPattern<S> {
    pub fn new(horizon: S, mut points: Vec<MarkedPoint<S>>) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(invalid("horizon", "must be positive"));
        }
        for p in &points {
            if !(p.time >= S::zero() && p.time <= horizon) {
                return Err(Error::OutsideWindow {
                    time: p.time.as_f64(),
                    horizon: horizon.as_f64(),
                });
            }
            if !(p.mark > S::zero()) || !p.mark.is_finite() {
                return Err(invalid("mark", format!("marks must be positive and finite, got {}", p.mark)));
            }
        }
        points.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
        Ok(Self { horizon, points })
    }

    /// Attaches an independent Pareto mark to every arrival.
    pub fn mark<R: Rng + ?Sized>(times: &TimePattern<S>, law: &ParetoLaw<S>, rng: &mut R) -> Self {
        let points = times
            .times()
            .iter()
            .map(|&time| MarkedPoint {
                time,
                mark: law.sample(rng),
            })
            .collect();
        Self {
            horizon: times.horizon(),
            points,
        }
    }

    /// Replaces the content with `times` marked by fresh draws, reusing
    /// the allocation. Draws match [`mark`](Self::mark).
    pub fn remark<R: Rng + ?Sized>(&mut self, horizon: S, times: &[S], law: &ParetoLaw<S>, rng: &mut R) {
        self.horizon = horizon;
        self.points.clear();
        self.points.extend(times.iter().map(|&time| MarkedPoint {
            time,
            mark: law.sample(rng),
        }));
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn points(&self) -> &[MarkedPoint<S>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn marks(&self) -> impl Iterator<Item = S> + '_ {
        self.points.iter().map(|p| p.mark)
    }

    /// `(t, x) -> (t, factor x)`: scaling acts on marks only.
    pub fn scale(&self, factor: S) -> Result<Self> {
        if !(factor > S::zero()) || !factor.is_finite() {
            return Err(invalid("factor", format!("must be positive and finite, got {factor}")));
        }
        Ok(Self {
            horizon: self.horizon,
            points: self
                .points
                .iter()
                .map(|p| MarkedPoint {
                    time: p.time,
                    mark: p.mark * factor,
                })
                .collect(),
        })
    }

    /// `j`-th largest mark (`j >= 1`), 0 when there are fewer than `j` points.
    pub fn mark_order_stat(&self, j: usize) -> S {
        if j == 0 || j > self.points.len() {
            return S::zero();
        }
        let mut marks: Vec<S> = self.marks().collect();
        let (_, nth, _) = marks.select_nth_unstable_by(j - 1, |a, b| b.partial_cmp(a).expect("finite marks"));
        *nth
    }

    /// `#{i : mark_i > r}`.
    pub fn count_exceed(&self, r: S) -> usize {
        self.points.iter().filter(|p| p.mark > r).count()
    }
}

/// Box `(t_lo, t_hi] x (x_lo, x_hi]` with `x_lo > 0`; `x_hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderBox<S> {
    pub time: (S, S),
    pub mark: (S, S),
}

impl<S: Real> CylinderBox<S> {
    pub fn contains(&self, p: &MarkedPoint<S>) -> bool {
        p.time > self.time.0 && p.time <= self.time.1 && p.mark > self.mark.0 && p.mark <= self.mark.1
    }

    fn disjoint(&self, other: &Self) -> bool {
        let apart = |a: (S, S), b: (S, S)| a.1 <= b.0 || b.1 <= a.0;
        apart(self.time, other.time) || apart(self.mark, other.mark)
    }
}

/// The event `{pi(A_i) = m_i for every i}` over pairwise disjoint boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderEvent<S> {
    boxes: Vec<CylinderBox<S>>,
    counts: Vec<u32>,
}

impl<S: Real> CylinderEvent<S> {
    pub fn new(boxes: Vec<CylinderBox<S>>, counts: Vec<u32>) -> Result<Self> {
        if boxes.len() != counts.len() {
            return Err(Error::InvalidEvent(format!(
                "{} boxes but {} counts",
                boxes.len(),
                counts.len()
            )));
        }
        if counts.iter().sum::<u32>() == 0 {
            return Err(Error::InvalidEvent("counts must sum to at least 1".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if !(b.mark.0 > S::zero()) {
                return Err(Error::InvalidEvent(format!(
                    "box {i}: mark interval must be bounded away from 0, lower bound is {}",
                    b.mark.0
                )));
            }
            if !(b.mark.1 > b.mark.0) || !(b.time.1 >= b.time.0) {
                return Err(Error::InvalidEvent(format!("box {i}: empty or reversed interval")));
            }
            if let Some(j) = boxes[..i].iter().position(|o| !o.disjoint(b)) {
                return Err(Error::InvalidEvent(format!("boxes {j} and {i} overlap")));
            }
        }
        Ok(Self { boxes, counts })
    }

    pub fn boxes(&self) -> &[CylinderBox<S>] {
        &self.boxes
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total_count(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn occurs(&self, pattern: &MarkedPattern<S>) -> bool {
        self.boxes.iter().zip(&self.counts).all(|(b, &m)| {
            pattern.points().iter().filter(|p| b.contains(p)).count() == m as usize
        })
    }
}

/// `mu*_{k+1}` of a cylinder event whose counts sum to `k + 1`:
/// `M_{k+1}(T_1^{m_1} x ... x T_p^{m_p}) prod_i mu(J_i)^{m_i} / m_i!`.
pub fn limit_cylinder_mass<S: Real>(
    model: &BaseProcessModel<S>,
    alpha: S,
    k: usize,
    event: &CylinderEvent<S>,
) -> Result<S> {
    if event.total_count() as usize != k + 1 {
        return Err(Error::InvalidEvent(format!(
            "counts sum to {} but the order-{k} limit charges exactly {} points",
            event.total_count(),
            k + 1
        )));
    }
    let mu = LimitMeasure::new(alpha)?;
    let mut intervals = Vec::with_capacity(k + 1);
    let mut factor = S::one();
    for (b, &m) in event.boxes.iter().zip(&event.counts) {
        for i in 0..m {
            intervals.push(b.time);
            factor = factor * mu.interval_mass(b.mark.0, b.mark.1) / S::from_count(u64::from(i) + 1);
        }
    }
    let moments = model.factorial_moments(k + 1)?.box_mass(&intervals)?;
    Ok(moments.value * factor)
}

/// `lim n^{k+1} P(count_exceed(a_n^{-1} Pi, r) >= k + 1)
///  = E[N^{[k+1]}] / (k+1)! * r^{-alpha (k+1)}`.
pub fn hrv_pp_limit<S: Real>(model: &BaseProcessModel<S>, alpha: S, k: usize, r: S) -> Result<S> {
    if !(r > S::zero()) {
        return Err(invalid("r", "must be positive"));
    }
    ParetoLaw::new(alpha)?;
    let order = k + 1;
    let fact = (1..=order as u64).fold(S::one(), |acc, i| acc * S::from_count(i));
    Ok(model.count_factorial_moment(order)? / fact * r.powf(-alpha * S::from_count(order as u64)))
}

/// Monte Carlo estimate of `n^{k+1} P(count_exceed(a_n^{-1} Pi, r) >= k+1)`.
pub fn mc_hrv_pp(
    model: &BaseProcessModel<f64>,
    alpha: f64,
    k: usize,
    r: f64,
    n: u64,
    run: &RunConfig,
) -> Result<TailEstimate> {
    let a_n = norming(alpha, n)?;
    let scale = (n as f64).powi(k as i32 + 1);
    exceedance_estimate(model, alpha, k, r, a_n, scale, run)
}

/// Point count `m_n = ceil(sqrt(n))` used by default for triangular arrays.
pub fn default_triangular_count(n: u64) -> u64 {
    ((n as f64).sqrt().ceil() as u64).max(1)
}

/// Triangular-array version: `m_n` grid or binomial points, norming
/// `a_{n m_n}`, scale `n^{k+1}`.
pub fn mc_hrv_triangular(
    kind: ProcessKind<f64>,
    horizon: f64,
    alpha: f64,
    k: usize,
    r: f64,
    n: u64,
    m_n: u64,
    run: &RunConfig,
) -> Result<TailEstimate> {
    let model = match kind {
        ProcessKind::Grid { .. } => BaseProcessModel::grid(m_n, horizon)?,
        ProcessKind::Binomial { .. } => BaseProcessModel::binomial(m_n, horizon)?,
        _ => {
            return Err(Error::Unsupported(
                "triangular arrays are implemented for grid and binomial counts only".into(),
            ))
        }
    };
    let a = norming(alpha, n * m_n)?;
    let scale = (n as f64).powi(k as i32 + 1);
    exceedance_estimate(&model, alpha, k, r, a, scale, run)
}

/// Limit of the triangular-array estimate: `lambda` is a probability
/// measure, so the constant is `r^{-alpha (k+1)} / (k+1)!`.
pub fn triangular_limit(alpha: f64, k: usize, r: f64) -> f64 {
    let fact: f64 = (1..=k as u64 + 1).map(|i| i as f64).product();
    r.powf(-alpha * (k + 1) as f64) / fact
}

fn exceedance_estimate(
    model: &BaseProcessModel<f64>,
    alpha: f64,
    k: usize,
    r: f64,
    norm: f64,
    scale: f64,
    run: &RunConfig,
) -> Result<TailEstimate> {
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let law = ParetoLaw::new(alpha)?;
    let inv = norm.recip();
    let hits = fold_patterns(
        model,
        &law,
        run,
        || 0u64,
        |hits, pattern, _| {
            let scaled = pattern.scale(inv).map_err(|e| e.to_string())?;
            if scaled.count_exceed(r) > k {
                *hits += 1;
            }
            Ok(())
        },
    )?;
    Ok(TailEstimate::from_counts(hits.iter().sum(), run.samples, scale))
}
