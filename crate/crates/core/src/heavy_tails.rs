//! Standard Pareto claim sizes and their regular-variation data.
//!
//! Marks follow the exact standard Pareto law `P(X > x) = x^(-alpha)` for
//! `x >= 1`, so the norming sequence `a_n = n^(1/alpha)` is exact rather than
//! asymptotic and the limit measure is `mu(dx) = alpha x^(-alpha-1) dx`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Standard Pareto distribution with tail index `alpha` and support `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoLaw<S> {
    alpha: S,
}

impl<S: Real> ParetoLaw<S> {
    pub fn new(alpha: S) -> Result<Self> {
        if !(alpha > S::zero()) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("tail index must be positive and finite, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// `P(X > x) = max(x, 1)^(-alpha)`. Underflows to 0 for astronomically
    /// large `x`.
    pub fn survival(&self, x: S) -> S {
        x.max(S::one()).powf(-self.alpha)
    }

    pub fn cdf(&self, x: S) -> S {
        S::one() - self.survival(x)
    }

    /// Inverse of [`survival`](Self::survival) on `(0, 1]`: the level whose
    /// exceedance probability is `p`.
    pub fn quantile(&self, p: S) -> Result<S> {
        if !(p > S::zero() && p <= S::one()) {
            return Err(invalid("p", format!("exceedance probability must lie in (0, 1], got {p}")));
        }
        Ok(p.powf(-self.alpha.recip()))
    }

    /// Inverse transform of a uniform `u` in `[0, 1)`: `(1 - u)^(-1/alpha)`.
    pub fn from_uniform(&self, u: f64) -> S {
        let v = S::lit(1.0 - u);
        if self.alpha == S::one() {
            v.recip()
        } else if self.alpha == S::lit(2.0) {
            v.sqrt().recip()
        } else {
            v.powf(-self.alpha.recip())
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        self.from_uniform(rng.random::<f64>())
    }

    /// `E[X] = alpha / (alpha - 1)` when `alpha > 1`.
    pub fn mean(&self) -> Option<S> {
        (self.alpha > S::one()).then(|| self.alpha / (self.alpha - S::one()))
    }

    /// Closed form of `E[(X/x)^p 1{X <= x}] / P(X > x)` for `p > alpha`,
    /// `x >= 1`: `alpha/(p - alpha) * (1 - x^(alpha - p))`.
    ///
    /// The ratio increases to `alpha / (p - alpha)` as `x` grows, which is
    /// Karamata's truncated-moment constant.
    pub fn truncated_moment_ratio(&self, p: S, x: S) -> Result<S> {
        if !(p > self.alpha) {
            return Err(invalid(
                "p",
                format!("moment order must exceed the tail index {}, got {p}", self.alpha),
            ));
        }
        if !(x >= S::one()) {
            return Err(invalid("x", format!("truncation level must be at least 1, got {x}")));
        }
        let a = self.alpha;
        Ok(a / (p - a) * (S::one() - x.powf(a - p)))
    }

    /// The Karamata limit `alpha / (p - alpha)`.
    pub fn karamata_constant(&self, p: S) -> Result<S> {
        if !(p > self.alpha) {
            return Err(invalid("p", "moment order must exceed the tail index"));
        }
        Ok(self.alpha / (p - self.alpha))
    }

    pub fn limit_measure(&self) -> LimitMeasure<S> {
        LimitMeasure { alpha: self.alpha }
    }
}

/// The limit measure `mu(dx) = alpha x^(-alpha-1) dx` on `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitMeasure<S> {
    alpha: S,
}

impl<S: Real> LimitMeasure<S> {
    pub fn new(alpha: S) -> Result<Self> {
        ParetoLaw::new(alpha).map(|law| law.limit_measure())
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// `mu((r, inf)) = r^(-alpha)`.
    pub fn tail_mass(&self, r: S) -> S {
        r.powf(-self.alpha)
    }

    /// `mu((lo, hi]) = lo^(-alpha) - hi^(-alpha)`; `hi` may be infinite.
    pub fn interval_mass(&self, lo: S, hi: S) -> S {
        if hi <= lo {
            return S::zero();
        }
        let upper = if hi.is_infinite() { S::zero() } else { self.tail_mass(hi) };
        self.tail_mass(lo) - upper
    }
}

/// Norming sequence `a_n = n^(1/alpha)`, exact for standard Pareto marks:
/// `n * P(X > a_n r) = r^(-alpha)` whenever `a_n r >= 1`.
pub fn norming<S: Real>(alpha: S, n: u64) -> Result<S> {
    if n == 0 {
        return Err(invalid("n", "norming index must be at least 1"));
    }
    ParetoLaw::new(alpha)?;
    Ok(S::from_count(n).powf(alpha.recip()))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn survival_values() {
        let one = ParetoLaw::new(1.0_f64).unwrap();
        assert_eq!(one.survival(2.0), 0.5);
        assert_eq!(ParetoLaw::new(2.0_f64).unwrap().survival(1.0), 1.0);
        assert_eq!(one.survival(0.3), 1.0);
        assert_relative_eq!(
            ParetoLaw::new(0.8_f64).unwrap().survival(10.0),
            0.158_489_319_246_111_35,
            max_relative = 1e-14
        );
        assert_eq!(one.survival(1e300 * 1e10), 0.0);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(ParetoLaw::new(0.0_f64).is_err());
        assert!(ParetoLaw::new(-1.0_f64).is_err());
        assert!(ParetoLaw::new(f64::NAN).is_err());
    }

    #[test]
    fn inverse_transform() {
        let law = ParetoLaw::new(1.0_f64).unwrap();
        assert_eq!(law.from_uniform(0.0), 1.0);
        assert_eq!(law.from_uniform(0.75), 4.0);
    }

    #[test]
    fn norming_values() {
        assert_relative_eq!(norming(1.0_f64, 100).unwrap(), 100.0);
        assert_relative_eq!(norming(2.0_f64, 10_000).unwrap(), 100.0);
        let a = norming(1.5_f64, 1000).unwrap();
        let law = ParetoLaw::new(1.5).unwrap();
        assert_relative_eq!(1000.0 * law.survival(a * 2.0), 2.0_f64.powf(-1.5), max_relative = 1e-12);
        assert!(norming(1.0_f64, 0).is_err());
    }

    #[test]
    fn truncated_moments() {
        let law = ParetoLaw::new(1.5_f64).unwrap();
        assert_relative_eq!(law.karamata_constant(2.0).unwrap(), 3.0);
        assert_relative_eq!(
            law.truncated_moment_ratio(2.0, 1000.0).unwrap(),
            3.0 * (1.0 - 1000.0_f64.powf(-0.5)),
            max_relative = 1e-14
        );
        assert_relative_eq!(law.truncated_moment_ratio(2.0, 1000.0).unwrap(), 2.9051, epsilon = 1e-4);
        let unit = ParetoLaw::new(1.0_f64).unwrap();
        assert_eq!(unit.truncated_moment_ratio(2.0, 1.0).unwrap(), 0.0);
        assert!(law.truncated_moment_ratio(1.5, 10.0).is_err());
        assert!(law.truncated_moment_ratio(1.0, 10.0).is_err());
    }

    #[test]
    fn empirical_survival_matches() {
        let law = ParetoLaw::new(1.0_f64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| law.sample(&mut rng) > 2.0).count() as f64;
        let p = hits / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn f32_matches_f64() {
        let a = ParetoLaw::new(1.5_f32).unwrap();
        let b = ParetoLaw::new(1.5_f64).unwrap();
        assert_relative_eq!(a.survival(7.0) as f64, b.survival(7.0), max_relative = 1e-6);
    }

    #[test]
    fn limit_measure_masses() {
        let mu = LimitMeasure::new(2.0_f64).unwrap();
        assert_eq!(mu.interval_mass(2.0, f64::INFINITY), 0.25);
        assert_relative_eq!(mu.interval_mass(1.0, 2.0), 0.75);
        assert_eq!(mu.interval_mass(3.0, 2.0), 0.0);
    }
}
