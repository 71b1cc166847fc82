//! Experiment output tables and verdicts.

use kinetic_core::fit::ExponentFit;
use serde::{Deserialize, Serialize};

/// One pass/fail decision, recomputable from `value` and `bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
}

impl Verdict {
    pub fn at_most(criterion: impl Into<String>, value: f64, max: f64) -> Self {
        Self {
            criterion: criterion.into(),
            passed: value <= max,
            value,
            bound: format!("≤ {max:e}"),
        }
    }

    pub fn at_least(criterion: impl Into<String>, value: f64, min: f64) -> Self {
        Self {
            criterion: criterion.into(),
            passed: value >= min,
            value,
            bound: format!("≥ {min:e}"),
        }
    }

    pub fn within(criterion: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            criterion: criterion.into(),
            passed: (value - target).abs() <= tol,
            value,
            bound: format!("{target:e} ± {tol:e}"),
        }
    }

    pub fn finite(criterion: impl Into<String>, value: f64) -> Self {
        Self {
            criterion: criterion.into(),
            passed: value.is_finite(),
            value,
            bound: "finite".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub fits: Vec<(String, ExponentFit)>,
    pub verdicts: Vec<Verdict>,
}

impl SweepResult {
    pub fn new(name: impl Into<String>, kind: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: kind.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Shortest round-trip formatting, so tables are reproducible byte for byte.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// `max/min` over a non-empty list of positive values.
pub fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_bounds() {
        assert!(Verdict::within("s", 1.9, 2.0, 0.3).passed);
        assert!(!Verdict::within("s", 1.6, 2.0, 0.3).passed);
        assert!(Verdict::at_most("d", 1.0, 1.0).passed);
        assert!(!Verdict::finite("f", f64::INFINITY).passed);
        assert_eq!(spread(&[2.0, 1.0, 4.0]), 4.0);
        assert_eq!(num(0.5), "5e-1");
    }
}
