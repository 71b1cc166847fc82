//! Test families built from one base field.

use std::sync::Arc;

use kinetic_core::field::{BaseField, Dilated, FieldRef, FieldSpec, Translated};
use kinetic_core::structure::Geometry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::FamilyConfig;
use crate::error::{LabError, Result};

#[derive(Clone, Debug)]
pub struct Member {
    pub label: String,
    pub field: FieldRef,
    /// Dilation factor when the member is a pure dilate of the base.
    pub dilate: Option<f64>,
}

/// Dilates, translates, modulated copies and seeded random translates, in
/// that order.
pub fn build_family(base: &FieldSpec, cfg: &FamilyConfig, g: &Geometry, seed: u64) -> Result<Vec<Member>> {
    let u = base.build(g)?;
    let mut out = Vec::new();
    for &l in &cfg.dilates {
        let field: FieldRef = if l == 1.0 { u.clone() } else { Arc::new(Dilated::new(u.clone(), g, l)?) };
        out.push(Member {
            label: format!("dilate {l}"),
            field,
            dilate: Some(l),
        });
    }
    let mut shifts = cfg.translates.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.random_translates {
        shifts.push(
            (0..g.dim())
                .map(|_| rng.random_range(-cfg.random_radius..=cfg.random_radius))
                .collect(),
        );
    }
    for (i, z) in shifts.iter().enumerate() {
        if z.len() != g.dim() {
            return Err(LabError::Config(format!("translate {i} has {} entries, expected {}", z.len(), g.dim())));
        }
        out.push(Member {
            label: format!("translate {}", z.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")),
            field: Arc::new(Translated::new(u.clone(), g, z)?),
            dilate: None,
        });
    }
    for m in &cfg.modulations {
        let spec = modulate(base, m.axis, m.omega)?;
        out.push(Member {
            label: format!("modulated axis {} omega {}", m.axis, m.omega),
            field: spec.build(g)?,
            dilate: None,
        });
    }
    Ok(out)
}

fn modulate(base: &FieldSpec, axis: usize, omega: f64) -> Result<FieldSpec> {
    let BaseField::Gaussian { a, center, amplitude } = &base.base else {
        return Err(LabError::Config("modulations need a Gaussian base field".into()));
    };
    Ok(FieldSpec {
        base: BaseField::Modulated {
            a: a.clone(),
            center: center.clone(),
            amplitude: *amplitude,
            axis,
            omega,
        },
        ..base.clone()
    })
}
