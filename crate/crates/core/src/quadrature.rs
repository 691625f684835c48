//! Gauss-Legendre rules and the ordered-region integrator used for
//! factorial moment boxes.

use crate::real::Real;

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are found by Newton iteration on `P_n` from the Chebyshev-like
    /// initial guesses; accurate to a few ulps for `n` up to several hundred.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<S: Real, F: FnMut(S) -> S>(&self, a: S, b: S, mut f: F) -> S {
        if !(b > a) {
            return S::zero();
        }
        let half = (b - a) * S::lit(0.5);
        let mid = (b + a) * S::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(S::zero(), |acc, (&x, &w)| acc + S::lit(w) * f(mid + half * S::lit(x)))
            * half
    }

    /// Composite rule over `[a, b]` split at every breakpoint strictly inside.
    pub fn integrate_split<S: Real, F: FnMut(S) -> S>(&self, a: S, b: S, breaks: &[S], mut f: F) -> S {
        if !(b > a) {
            return S::zero();
        }
        let mut total = S::zero();
        let mut lo = a;
        for &c in breaks.iter().filter(|&&c| c > a && c < b) {
            total = total + self.integrate(lo, c, &mut f);
            lo = c;
        }
        total + self.integrate(lo, b, &mut f)
    }
}

/// Value and first derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates a symmetric function of `k` times over the box
/// `intervals[0] x ... x intervals[k-1]`, where the function is smooth on
/// every ordered region `s_1 < ... < s_k` and is supplied in ordered form.
///
/// The box is decomposed by the relative order of the coordinates; each
/// region is an iterated integral with lower limits `max(lo, s_prev)`, split
/// at every interval endpoint so each panel sees a smooth integrand.
pub fn integrate_ordered<S: Real, F>(rule: &GaussLegendre, intervals: &[(S, S)], ordered_density: F) -> S
where
    F: Fn(&[S]) -> S,
{
    let k = intervals.len();
    if k == 0 {
        return S::one();
    }
    if intervals.iter().any(|&(lo, hi)| !(hi > lo)) {
        return S::zero();
    }
    let mut breaks: Vec<S> = intervals.iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
    breaks.dedup();

    // Distinct interval orderings with their multiplicities.
    let mut orders: Vec<(Vec<(S, S)>, u64)> = Vec::new();
    for perm in permutations(k) {
        let seq: Vec<(S, S)> = perm.iter().map(|&i| intervals[i]).collect();
        match orders.iter_mut().find(|(s, _)| *s == seq) {
            Some((_, m)) => *m += 1,
            None => orders.push((seq, 1)),
        }
    }

    let mut point = vec![S::zero(); k];
    orders
        .iter()
        .fold(S::zero(), |acc, (seq, mult)| {
            acc + S::from_count(*mult) * nested(rule, seq, &breaks, 0, S::neg_infinity(), &mut point, &ordered_density)
        })
}

fn nested<S: Real, F: Fn(&[S]) -> S>(
    rule: &GaussLegendre,
    seq: &[(S, S)],
    breaks: &[S],
    level: usize,
    prev: S,
    point: &mut Vec<S>,
    f: &F,
) -> S {
    let (lo, hi) = seq[level];
    let a = lo.max(prev);
    if !(hi > a) {
        return S::zero();
    }
    let last = level + 1 == seq.len();
    let mut total = S::zero();
    let mut panel_lo = a;
    let inner: Vec<S> = breaks.iter().copied().filter(|&c| c > a && c < hi).collect();
    for panel_hi in inner.into_iter().chain(std::iter::once(hi)) {
        let half = (panel_hi - panel_lo) * S::lit(0.5);
        let mid = (panel_hi + panel_lo) * S::lit(0.5);
        let mut panel = S::zero();
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * S::lit(x);
            point[level] = s;
            let v = if last {
                f(point)
            } else {
                nested(rule, seq, breaks, level + 1, s, point, f)
            };
            panel = panel + S::lit(w) * v;
        }
        total = total + panel * half;
        panel_lo = panel_hi;
    }
    total
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn polynomial_exactness() {
        let rule = GaussLegendre::new(5);
        // exact for degree <= 9
        let v: f64 = rule.integrate(0.0, 2.0, |x: f64| x.powi(9));
        assert_relative_eq!(v, 2.0_f64.powi(10) / 10.0, max_relative = 1e-13);
        let w: f64 = rule.integrate(-1.0, 1.0, |_| 1.0);
        assert_relative_eq!(w, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn smooth_integrand() {
        let rule = GaussLegendre::new(20);
        let v: f64 = rule.integrate_split(0.0, 3.0, &[1.0], |x: f64| (-x).exp());
        assert_relative_eq!(v, 1.0 - (-3.0_f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn ordered_integrator_handles_kinks() {
        // |x - y| over [0,1]^2 = 1/3
        let rule = GaussLegendre::new(8);
        let v: f64 = integrate_ordered(&rule, &[(0.0, 1.0), (0.0, 1.0)], |s| s[1] - s[0]);
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-13);
        // overlapping boxes: |x - y| over [0,1] x [0.5,2]
        let brute = {
            let n = 2000;
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = (i as f64 + 0.5) / n as f64;
                    let y = 0.5 + 1.5 * (j as f64 + 0.5) / n as f64;
                    acc += (x - y).abs();
                }
            }
            acc * 1.5 / (n * n) as f64
        };
        let v: f64 = integrate_ordered(&rule, &[(0.0, 1.0), (0.5, 2.0)], |s| s[1] - s[0]);
        assert_relative_eq!(v, brute, max_relative = 1e-6);
    }

    #[test]
    fn empty_box_is_zero() {
        let rule = GaussLegendre::new(4);
        let v: f64 = integrate_ordered(&rule, &[(0.0, 1.0), (2.0, 2.0)], |_| 1.0);
        assert_eq!(v, 0.0);
    }
}
