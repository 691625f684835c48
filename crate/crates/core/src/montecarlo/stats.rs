//! Kolmogorov-Smirnov statistics and their asymptotic critical values.

/// `c(level) = sqrt(-ln(level / 2) / 2)`; 1.628 at the 1% level.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// One-sample critical value for `n` observations.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

/// Two-sample critical value for sample sizes `n` and `m`.
pub fn ks_critical_two_sample(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(level) * ((n + m) / (n * m)).sqrt()
}

/// Sup distance between the empirical CDF of `data` and the uniform CDF on
/// `[lo, hi]`.
pub fn ks_uniform(data: &[f64], lo: f64, hi: f64) -> f64 {
    ks_one_sample(data, |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Sup distance between the empirical CDF of `data` and `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    if data.is_empty() {
        return 1.0;
    }
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}
