use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile, used when every or no path hits.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Monte Carlo estimate of a probability with its Wilson 95% interval.
///
/// `p_hat`, `ci_low` and `ci_high` are on the probability scale; `scale` is
/// the normalisation (for instance `n^(k+1)`) the estimate is compared at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub hits: u64,
    pub samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub scale: f64,
    /// No path hit the event; `ci_high` is then the one-sided bound.
    pub zero_hits: bool,
}

impl TailEstimate {
    pub fn from_counts(hits: u64, samples: u64, scale: f64) -> Self {
        assert!(hits <= samples && samples > 0, "hits {hits} out of {samples} samples");
        let (ci_low, ci_high) = wilson_interval(hits, samples);
        Self {
            p_hat: hits as f64 / samples as f64,
            hits,
            samples,
            ci_low,
            ci_high,
            scale,
            zero_hits: hits == 0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn scaled_estimate(&self) -> f64 {
        self.p_hat * self.scale
    }

    pub fn scaled_ci(&self) -> (f64, f64) {
        (self.ci_low * self.scale, self.ci_high * self.scale)
    }

    /// Half-width of the (unscaled) interval.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)` of `p_hat`.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.samples as f64).sqrt()
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Wilson score interval at 95%. A cell with zero (or all) hits gets the
/// one-sided bound at the same level.
pub fn wilson_interval(hits: u64, samples: u64) -> (f64, f64) {
    let n = samples as f64;
    if hits == 0 {
        let z2 = Z95_ONE_SIDED * Z95_ONE_SIDED;
        return (0.0, z2 / (n + z2));
    }
    if hits == samples {
        let z2 = Z95_ONE_SIDED * Z95_ONE_SIDED;
        return (n / (n + z2), 1.0);
    }
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Running mean and variance (Chan et al. merge), reduced in chunk order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanEstimate {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanEstimate) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count.max(1) as f64).sqrt()
    }
}
