//! Exponent bookkeeping for the embedding theorems.

use crate::error::{LabError, Result};

/// `p*_k = p𝐝/(𝐝 − kp)`, i.e. `1/p*_k = 1/p − k/𝐝`, for `k p < 𝐝`.
pub fn critical_k(p: f64, k: usize, hom_dim: usize) -> Result<f64> {
    let d = hom_dim as f64;
    let den = d - k as f64 * p;
    if !(p >= 1.0) || den <= 0.0 {
        return Err(LabError::Exponent {
            name: "p",
            value: p,
            reason: format!("need 1 ≤ p < {}/{k}", hom_dim),
        });
    }
    Ok(p * d / den)
}

/// `p* = p*_1`.
pub fn critical(p: f64, hom_dim: usize) -> Result<f64> {
    critical_k(p, 1, hom_dim)
}

/// Upper end `r = p(𝐝 + p)/𝐝` of the crude embedding range `[p, r)`.
pub fn crude_limit(p: f64, hom_dim: usize) -> f64 {
    p * (hom_dim as f64 + p) / hom_dim as f64
}

/// `θ = 𝐝(1/p − 1/q)` for `q ∈ [p, r)`.
pub fn theta(p: f64, q: f64, hom_dim: usize) -> Result<f64> {
    let r = crude_limit(p, hom_dim);
    if !(q >= p && q < r) {
        return Err(LabError::Exponent {
            name: "q",
            value: q,
            reason: format!("need {p} ≤ q < {r}"),
        });
    }
    Ok(hom_dim as f64 * (1.0 / p - 1.0 / q))
}

/// Hölder exponent `k − 𝐝/p` of the Morrey embedding, for `𝐝/p < k`.
pub fn morrey(p: f64, k: usize, hom_dim: usize) -> Result<f64> {
    let a = k as f64 - hom_dim as f64 / p;
    if !(a > 0.0 && a < 1.0) {
        return Err(LabError::Exponent {
            name: "p",
            value: p,
            reason: format!("need 0 < {k} − {hom_dim}/p < 1"),
        });
    }
    Ok(a)
}

/// Rate `1 − 𝐝/(2p)` of `sup|u(e^{δY}z) − u(z)|` for `u ∈ W^{2,p}_B`, `p > 𝐝/2`.
pub fn y_holder(p: f64, hom_dim: usize) -> Result<f64> {
    let a = 1.0 - hom_dim as f64 / (2.0 * p);
    if !(a > 0.0) {
        return Err(LabError::Exponent {
            name: "p",
            value: p,
            reason: format!("need p > {}/2", hom_dim),
        });
    }
    Ok(a)
}

/// Exponent `𝐝/(𝐝 − 1)` in the exponential integrability bound.
pub fn trudinger(hom_dim: usize) -> f64 {
    hom_dim as f64 / (hom_dim as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langevin_values() {
        assert_eq!(critical(2.0, 6).unwrap(), 3.0);
        assert_eq!(critical(4.0, 6).unwrap(), 12.0);
        assert!((critical_k(2.0, 2, 6).unwrap() - 6.0).abs() < 1e-12);
        assert!(critical(6.0, 6).is_err());
        assert!((crude_limit(2.0, 6) - 8.0 / 3.0).abs() < 1e-15);
        assert!((theta(2.0, 2.5, 6).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(theta(2.0, 2.0, 6).unwrap(), 0.0);
        assert!(theta(2.0, 3.0, 6).is_err());
        assert_eq!(morrey(8.0, 1, 6).unwrap(), 0.25);
        assert_eq!(y_holder(8.0, 6).unwrap(), 0.625);
        assert_eq!(trudinger(6), 1.2);
    }

    #[test]
    fn critical_pairing_cancels_scaling() {
        // λ^{1−𝐝/p} = λ^{−𝐝/p*}
        for (p, d) in [(1.5, 6), (2.0, 10), (3.0, 12)] {
            let ps = critical(p, d).unwrap();
            assert!((1.0 - d as f64 / p + d as f64 / ps).abs() < 1e-12);
        }
    }
}
