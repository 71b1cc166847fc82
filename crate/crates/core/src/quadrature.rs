//! Quadrature rules and order-fixed reductions.
//!
//! Every parallel reduction in the crate goes through [`par_sum`] or
//! [`pairwise_sum`], so totals do not depend on the rayon pool size.

use rayon::prelude::*;

/// Sum with a fixed binary tree shape.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if v.len() <= LEAF {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `Σ_i f(i)` for `i < n`, evaluated in parallel chunks and combined in
/// index order.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let parts: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    pairwise_sum(&parts)
}

/// `max_i f(i)`; max is order independent.
pub fn par_max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(f)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|xi| m + h * xi).collect(),
        w.iter().map(|wi| h * wi).collect(),
    )
}

/// Composite trapezoid weights for `n` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Positive `h` nodes on `(h_min, h_max]` made of dyadic bands
/// `[2^j, 2^{j+1}]` with a Gauss rule per band; the last band is clipped.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DyadicRule {
    pub fn new(h_min: f64, h_max: f64, per_band: usize) -> Self {
        assert!(h_min > 0.0 && h_max > h_min);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut j = h_max.log2().ceil() as i32;
        loop {
            let hi = 2f64.powi(j).min(h_max);
            let lo = 2f64.powi(j - 1).max(h_min);
            if hi > lo {
                let (x, w) = gauss_on(lo, hi, per_band);
                nodes.extend(x);
                weights.extend(w);
            }
            if lo <= h_min {
                break;
            }
            j -= 1;
        }
        Self { nodes, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let (x, w) = gauss_on(0.0, 2.0, 4);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn dyadic_rule_integrates_power() {
        let r = DyadicRule::new(1e-8, 3.0, 4);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(h, w)| w * h.powf(-0.5)).sum();
        let exact = 2.0 * (3f64.sqrt() - 1e-4);
        assert!((s - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        assert_eq!(par_sum(1000, |i| i as f64), 499500.0);
    }
}
