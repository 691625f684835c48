//! Exact order-statistic tails for count laws with a computable pmf.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tails::ParetoLaw;
use crate::point_processes::{BaseProcessModel, ProcessKind};

/// Poisson pmf summation stops once the remaining mass is below this.
pub const POISSON_TRUNCATION: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Upper bound on the probability mass of counts left out of the sum.
    pub truncation_bound: f64,
}

/// `P(X_{N-k:N} > x) = sum_n P(N = n) P(Bin(n, x^-alpha) >= k + 1)`.
pub fn exact_orderstat_tail(model: &BaseProcessModel<f64>, alpha: f64, k: usize, x: f64) -> Result<OracleValue> {
    model.validate()?;
    let p = ParetoLaw::new(alpha)?.survival(x);
    let need = k as u64 + 1;
    match model.kind {
        ProcessKind::Grid { n } | ProcessKind::Binomial { n } => Ok(OracleValue {
            value: binomial_upper_tail(n, p, need),
            truncation_bound: 0.0,
        }),
        ProcessKind::Poisson { rate } => {
            let lambda = rate * model.horizon;
            let ln_lambda = lambda.ln();
            let mut value = 0.0;
            let mut n = 0u64;
            loop {
                let ln_pmf = n as f64 * ln_lambda - lambda - ln_factorial(n);
                if n >= need {
                    value += ln_pmf.exp() * binomial_upper_tail(n, p, need);
                }
                // Tail after n is at most pmf(n+1) / (1 - lambda/(n+2)).
                let next = n + 1;
                if next as f64 > lambda + 1.0 {
                    let ln_next = next as f64 * ln_lambda - lambda - ln_factorial(next);
                    let bound = ln_next.exp() / (1.0 - lambda / (next as f64 + 1.0));
                    if bound < POISSON_TRUNCATION {
                        return Ok(OracleValue {
                            value,
                            truncation_bound: bound,
                        });
                    }
                }
                n = next;
            }
        }
        ProcessKind::GammaRenewal => Err(Error::Unsupported(
            "no closed-form count distribution for the renewal model".into(),
        )),
    }
}

/// `ln n!`: direct sum below 256, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 256 {
        return (2..=n).map(|i| (i as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + inv / 12.0 - inv * inv2 / 360.0
        + inv * inv2 * inv2 / 1260.0
}

/// `P(Bin(n, p) >= m)`, summed upward from `m` so tiny `p` loses nothing to
/// cancellation.
pub fn binomial_upper_tail(n: u64, p: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_q = (-p).ln_1p();
    let ln_choose = ln_factorial(n) - ln_factorial(m) - ln_factorial(n - m);
    let mut term = (ln_choose + m as f64 * p.ln() + (n - m) as f64 * ln_q).exp();
    let odds = p / (1.0 - p);
    let mut sum = 0.0;
    for j in m..=n {
        sum += term;
        let past_mode = j as f64 >= (n as f64 + 1.0) * p;
        if past_mode && term <= sum * 1e-17 {
            break;
        }
        term *= (n - j) as f64 / (j + 1) as f64 * odds;
    }
    sum.min(1.0)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn brute_binomial_tail(n: u64, p: f64, m: u64) -> f64 {
        let mut c = 1.0;
        let mut total = 0.0;
        for j in 0..=n {
            if j > 0 {
                c *= (n - j + 1) as f64 / j as f64;
            }
            if j >= m {
                total += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
            }
        }
        total
    }

    #[test]
    fn binomial_tail_matches_direct_sum() {
        for &(n, p, m) in &[(10, 0.3, 2), (20, 0.01, 3), (7, 0.9, 7), (30, 0.5, 0), (5, 0.2, 6)] {
            assert_relative_eq!(binomial_upper_tail(n, p, m), brute_binomial_tail(n, p, m), max_relative = 1e-12);
        }
    }

    #[test]
    fn ln_factorial_branches_agree() {
        let direct: f64 = (2..=300u64).map(|i| (i as f64).ln()).sum();
        assert_relative_eq!(ln_factorial(300), direct, max_relative = 1e-14);
    }

    #[test]
    fn single_point_reduces_to_survival() {
        let model = BaseProcessModel::binomial(1, 1.0).unwrap();
        let v = exact_orderstat_tail(&model, 1.5, 0, 7.0).unwrap();
        assert_relative_eq!(v.value, 7.0_f64.powf(-1.5), max_relative = 1e-14);
        assert_eq!(v.truncation_bound, 0.0);
    }

    #[test]
    fn poisson_oracle_reference() {
        // Independent evaluation (pmf x binomial survival summed to n = 200).
        let model = BaseProcessModel::poisson(0.5, 10.0).unwrap();
        let v = exact_orderstat_tail(&model, 1.0, 1, 200.0).unwrap();
        assert_relative_eq!(v.value, 3.073_401_709_590_144e-4, max_relative = 1e-10);
        assert!(v.truncation_bound < POISSON_TRUNCATION);
        let v0 = exact_orderstat_tail(&model, 1.0, 0, 10.0).unwrap();
        assert_relative_eq!(v0.value, 1.0 - (-0.5_f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn oracle_monotonicity() {
        let small = BaseProcessModel::poisson(0.4, 10.0).unwrap();
        let big = BaseProcessModel::poisson(0.5, 10.0).unwrap();
        let mut prev = 1.0;
        for x in [2.0, 5.0, 10.0, 50.0, 200.0] {
            let v = exact_orderstat_tail(&big, 1.0, 1, x).unwrap().value;
            assert!(v < prev);
            assert!(exact_orderstat_tail(&small, 1.0, 1, x).unwrap().value < v);
            prev = v;
        }
    }

    #[test]
    fn renewal_has_no_oracle() {
        let model = BaseProcessModel::gamma_renewal(5.0).unwrap();
        assert!(exact_orderstat_tail(&model, 1.0, 1, 10.0).is_err());
    }
}
