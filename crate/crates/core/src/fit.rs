//! Least-squares power-law fits `y ≈ C x^s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(scale, value)` pairs the fit was computed from.
    pub points: Vec<(f64, f64)>,
}

impl ExponentFit {
    /// Fits `log y = intercept + slope · log x` over the positive pairs.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .collect();
        if pts.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least two positive points to fit a rate, got {}",
                pts.len()
            )));
        }
        let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::Degenerate("all scales coincide".into()));
        }
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
        let ss_res: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        Ok(Self {
            slope,
            intercept,
            r_squared,
            points: points.to_vec(),
        })
    }
}
