//! Experiment configuration files.

use std::path::{Path, PathBuf};

use kinetic_core::field::FieldSpec;
use kinetic_core::norms::{HolderSampling, NormSettings};
use kinetic_core::structure::{BlockStructure, Geometry};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Operator file, relative to the config file.
    pub operator: PathBuf,
    pub field: FieldSpec,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub resolution: Resolution,
    /// Output directory, relative to the config file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub experiments: Vec<Experiment>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Members derived from the base field: dilates, left translates,
/// oscillating modulations and seeded random translates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default = "default_lambdas")]
    pub dilates: Vec<f64>,
    #[serde(default)]
    pub translates: Vec<Vec<f64>>,
    #[serde(default)]
    pub modulations: Vec<Modulation>,
    #[serde(default)]
    pub random_translates: usize,
    #[serde(default = "one")]
    pub random_radius: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            dilates: default_lambdas(),
            translates: Vec::new(),
            modulations: Vec::new(),
            random_translates: 0,
            random_radius: 1.0,
        }
    }
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub axis: usize,
    pub omega: f64,
}

/// Quadrature nodes per axis; `refined` is the second resolution used by
/// stability checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub points: usize,
    pub refined: usize,
    pub per_band: usize,
    pub holder_points: usize,
    pub holder_levels: usize,
    /// Rearrangement nodes per axis as a multiple of `points`.
    pub lorentz_factor: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            points: 16,
            refined: 24,
            per_band: 4,
            holder_points: 16,
            holder_levels: 12,
            lorentz_factor: 2.0,
        }
    }
}

impl Resolution {
    pub fn norms(&self, refined: bool) -> NormSettings {
        let mut s = NormSettings::default().with_points(if refined { self.refined } else { self.points });
        s.per_band = self.per_band;
        s
    }

    pub fn lorentz_points(&self, set: &NormSettings) -> usize {
        ((self.lorentz_factor * set.points as f64).round() as usize).max(2)
    }

    pub fn holder(&self, refined: bool) -> HolderSampling {
        let h = HolderSampling {
            points: self.holder_points,
            levels: self.holder_levels,
        };
        if refined {
            h.refined()
        } else {
            h
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    Supercritical,
    Critical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Scaling {
        #[serde(default = "scaling_lambdas")]
        lambdas: Vec<f64>,
        #[serde(default = "scaling_orders")]
        orders: Vec<usize>,
        #[serde(default = "scaling_ps")]
        p: Vec<f64>,
        #[serde(default = "pct1")]
        tolerance: f64,
    },
    Embedding {
        regime: Regime,
        p: f64,
        /// Lorentz exponents `q`; the first index is `p*` or `𝐝` when empty.
        #[serde(default)]
        q: Vec<f64>,
        #[serde(default = "two")]
        drift: f64,
        #[serde(default = "pct1")]
        tolerance: f64,
    },
    Trudinger {
        #[serde(default = "trud_lambdas")]
        lambdas: Vec<f64>,
        #[serde(default = "trud_deltas")]
        deltas: Vec<f64>,
    },
    YHolder {
        p: f64,
        #[serde(default = "y_deltas")]
        deltas: Vec<f64>,
        #[serde(default = "tenth")]
        tolerance: f64,
    },
    YFrac {
        p: f64,
        #[serde(default = "two")]
        drift: f64,
    },
    HigherSobolev {
        p: f64,
        k: usize,
        #[serde(default)]
        n: usize,
        #[serde(default = "two")]
        drift: f64,
    },
    Crude {
        p: f64,
        q: f64,
        #[serde(default = "pct1")]
        tolerance: f64,
    },
    Interpolation {
        #[serde(default = "one_usize")]
        n: usize,
        #[serde(default = "two_usize")]
        m: usize,
        p: f64,
        #[serde(default = "two")]
        drift: f64,
    },
    Taylor {
        #[serde(default = "taylor_orders")]
        orders: Vec<usize>,
        #[serde(default = "two")]
        p: f64,
        #[serde(default = "taylor_sigmas")]
        sigmas: Vec<f64>,
        zeta: Vec<f64>,
        #[serde(default = "slope_tol")]
        tolerance: f64,
    },
    Mollifier {
        #[serde(default = "mollifier_orders")]
        orders: Vec<usize>,
        #[serde(default = "two")]
        p: f64,
        eps: Vec<f64>,
        #[serde(default)]
        inverse: Option<[usize; 2]>,
        #[serde(default = "six")]
        kernel_nodes: usize,
        #[serde(default = "slope_tol")]
        tolerance: f64,
    },
    Lorentz {
        p: f64,
        #[serde(default = "lorentz_qs")]
        q: Vec<f64>,
    },
    Tartar {
        p: f64,
        #[serde(default = "pct10")]
        drift: f64,
    },
    KFunctional {
        p: f64,
        t: Vec<f64>,
        eps: Vec<f64>,
        #[serde(default = "k_tol")]
        tolerance: f64,
    },
}

fn scaling_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn scaling_orders() -> Vec<usize> {
    vec![1, 2]
}
fn scaling_ps() -> Vec<f64> {
    vec![1.5, 2.0, 4.0]
}
fn pct1() -> f64 {
    0.01
}
fn pct10() -> f64 {
    0.1
}
fn two() -> f64 {
    2.0
}
fn tenth() -> f64 {
    0.1
}
fn six() -> usize {
    6
}
fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn k_tol() -> f64 {
    0.05
}
fn slope_tol() -> f64 {
    0.3
}
fn trud_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn trud_deltas() -> Vec<f64> {
    vec![0.1, 1.0]
}
fn y_deltas() -> Vec<f64> {
    (0..6).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.4)).collect()
}
fn taylor_orders() -> Vec<usize> {
    vec![0, 1, 2]
}
fn taylor_sigmas() -> Vec<f64> {
    (0..6).map(|i| 0.05 * 1.5f64.powi(i)).collect()
}
fn mollifier_orders() -> Vec<usize> {
    vec![1, 2]
}
fn lorentz_qs() -> Vec<f64> {
    vec![1.0, 2.0, f64::INFINITY]
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Scaling { .. } => "scaling",
            Experiment::Embedding { .. } => "embedding",
            Experiment::Trudinger { .. } => "trudinger",
            Experiment::YHolder { .. } => "y-holder",
            Experiment::YFrac { .. } => "y-frac",
            Experiment::HigherSobolev { .. } => "higher-sobolev",
            Experiment::Crude { .. } => "crude",
            Experiment::Interpolation { .. } => "interpolation",
            Experiment::Taylor { .. } => "taylor",
            Experiment::Mollifier { .. } => "mollifier",
            Experiment::Lorentz { .. } => "lorentz",
            Experiment::Tartar { .. } => "tartar",
            Experiment::KFunctional { .. } => "k-functional",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::Config(format!("{}: {m}", self.kind())));
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite());
        let p = match self {
            Experiment::Scaling { p, .. } => {
                if p.is_empty() {
                    return bad("empty p grid");
                }
                p.iter().copied().fold(f64::INFINITY, f64::min)
            }
            Experiment::Embedding { p, .. }
            | Experiment::YHolder { p, .. }
            | Experiment::YFrac { p, .. }
            | Experiment::HigherSobolev { p, .. }
            | Experiment::Crude { p, .. }
            | Experiment::Interpolation { p, .. }
            | Experiment::Taylor { p, .. }
            | Experiment::Mollifier { p, .. }
            | Experiment::Lorentz { p, .. }
            | Experiment::Tartar { p, .. }
            | Experiment::KFunctional { p, .. } => *p,
            Experiment::Trudinger { .. } => 1.0,
        };
        if !(p >= 1.0) {
            return bad("need p ≥ 1");
        }
        match self {
            Experiment::Scaling { lambdas, tolerance, .. } if !positive(lambdas) || !(*tolerance > 0.0) => {
                bad("need positive λ grid and tolerance")
            }
            Experiment::Trudinger { lambdas, deltas } if !positive(lambdas) || !positive(deltas) => bad("empty or non-positive grid"),
            Experiment::YHolder { deltas, tolerance, .. } if !positive(deltas) || !(*tolerance > 0.0) => bad("need positive δ grid and tolerance"),
            Experiment::Taylor { sigmas, tolerance, .. } if !positive(sigmas) || !(*tolerance > 0.0) => bad("need positive σ grid and tolerance"),
            Experiment::Mollifier { eps, tolerance, .. } if !positive(eps) || !(*tolerance > 0.0) => bad("need positive ε grid and tolerance"),
            Experiment::KFunctional { t, eps, .. } if !positive(t) || !positive(eps) => bad("need positive t and ε grids"),
            Experiment::Interpolation { n, m, .. } if n >= m => bad("need n < m"),
            Experiment::Embedding { drift, tolerance, .. } if !(*drift >= 1.0) || !(*tolerance > 0.0) => bad("need drift ≥ 1 and tolerance > 0"),
            _ => Ok(()),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(s)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, dir)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(LabError::Config("no experiments listed".into()));
        }
        if self.family.dilates.iter().any(|l| !(*l > 0.0)) {
            return Err(LabError::Config("dilation factors must be positive".into()));
        }
        let r = &self.resolution;
        if r.points < 4 || r.refined <= r.points || r.holder_points < 4 || r.per_band == 0 || !(r.lorentz_factor >= 0.5) {
            return Err(LabError::Config("resolution: need 4 ≤ points < refined, positive per_band and lorentz_factor ≥ 0.5".into()));
        }
        for e in &self.experiments {
            e.validate()?;
        }
        Ok(())
    }

    pub fn operator_path(&self) -> PathBuf {
        self.base_dir.join(&self.operator)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let bs = BlockStructure::load(self.operator_path())?;
        Ok(Geometry::new(bs)?)
    }

    pub fn with_output(mut self, out: PathBuf) -> Self {
        self.output = out;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
operator = "langevin1.toml"

[field]
kind = "gaussian"
a = [1.0, 1.0, 1.0]

[[experiments]]
kind = "scaling"
p = [2.0]

[[experiments]]
kind = "crude"
p = 2.0
q = 2.5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE, "ops").unwrap();
        assert_eq!(cfg.experiments.len(), 2);
        assert_eq!(cfg.family.dilates, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.operator_path(), PathBuf::from("ops/langevin1.toml"));
        match &cfg.experiments[0] {
            Experiment::Scaling { lambdas, tolerance, .. } => {
                assert_eq!(lambdas, &vec![0.5, 1.0, 2.0, 4.0]);
                assert_eq!(*tolerance, 0.01);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        let bad_p = SAMPLE.replace("p = 2.0\nq", "p = 0.5\nq");
        assert!(ExperimentConfig::from_toml_str(&bad_p, ".").is_err());
        let empty = SAMPLE.replace("p = [2.0]", "p = []");
        assert!(ExperimentConfig::from_toml_str(&empty, ".").is_err());
        let unknown = SAMPLE.replace("kind = \"crude\"", "kind = \"nope\"");
        assert!(ExperimentConfig::from_toml_str(&unknown, ".").is_err());
    }
}
