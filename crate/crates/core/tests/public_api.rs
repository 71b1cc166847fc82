use std::path::PathBuf;
use std::sync::Arc;

use kinetic_core::field::Dilated;
use kinetic_core::grid::sample;
use kinetic_core::lorentz::Rearrangement;
use kinetic_core::norms::{lp_norm, NormSettings};
use kinetic_core::field::TestFunction;
use kinetic_core::{AnalyticField, BlockStructure, CovariancePolynomial, FieldRef, Geometry, GridFunction, GridSpec};
use proptest::prelude::*;

fn operator(name: &str) -> Geometry {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "operators", name].iter().collect();
    Geometry::new(BlockStructure::load(path).unwrap()).unwrap()
}

#[test]
fn shipped_operators_load() {
    for (name, hd, n) in [("langevin1.toml", 6, 2), ("langevin2.toml", 10, 4), ("three_layer.toml", 12, 4)] {
        let g = operator(name);
        assert_eq!(g.hom_dim(), hd, "{name}");
        assert_eq!(g.n(), n, "{name}");
        assert!(g.check_hormander(true).holds, "{name}");
    }
}

#[test]
fn degenerate_blocks_are_rejected() {
    let bs = BlockStructure::new(vec![2, 2], vec![vec![1.0, 0.0, 0.0, 0.0]]);
    assert!(Geometry::new(bs).is_err());
}

#[test]
fn toml_round_trip() {
    let bs = BlockStructure::three_layer();
    let back = BlockStructure::from_toml_str(&bs.to_toml_string()).unwrap();
    assert_eq!(bs, back);
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n + 1)
}

proptest! {
    #[test]
    fn group_laws_on_three_layer(z in point(4), w in point(4), v in point(4)) {
        let g = Geometry::new(BlockStructure::three_layer()).unwrap();
        let d = g.dim();
        let (mut zw, mut left, mut wv, mut right) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        g.compose_raw(&z, &w, &mut zw);
        g.compose_raw(&zw, &v, &mut left);
        g.compose_raw(&w, &v, &mut wv);
        g.compose_raw(&z, &wv, &mut right);
        for (a, b) in left.iter().zip(&right) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        let mut inv = vec![0.0; d];
        let mut e = vec![0.0; d];
        g.invert_raw(&z, &mut inv);
        g.compose_raw(&z, &inv, &mut e);
        prop_assert!(e.iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn norm_is_homogeneous(z in point(2), lambda in 0.1..10.0f64) {
        let g = Geometry::new(BlockStructure::langevin(1)).unwrap();
        let mut dz = vec![0.0; 3];
        g.dilate_raw(lambda, &z, &mut dz);
        let (a, b) = (g.hom_norm_raw(&dz), lambda * g.hom_norm_raw(&z));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
    }
}

#[test]
fn kernel_is_homogeneous() {
    let g = operator("langevin2.toml");
    let cp = CovariancePolynomial::new(&g);
    let hd = g.hom_dim() as f64;
    let z = [0.7, 0.3, -0.2, 0.5, 0.1];
    let mut dz = [0.0; 5];
    for lambda in [0.5, 2.0, 3.0] {
        g.dilate_raw(lambda, &z, &mut dz);
        let lhs = cp.gamma(&dz).unwrap() * lambda.powf(hd - 2.0);
        let rhs = cp.gamma(&z).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-10, "λ={lambda}");
    }
    assert_eq!(cp.gamma(&[-1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn lp_norm_scales_under_dilation() {
    let g = Geometry::new(BlockStructure::langevin(1)).unwrap();
    let u: FieldRef = Arc::new(AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap());
    let set = NormSettings::default().with_points(32);
    let base = lp_norm(u.as_ref(), 2.0, &set).unwrap();
    let v = Dilated::new(u.clone(), &g, 2.0).unwrap();
    let scaled = lp_norm(&v, 2.0, &set).unwrap();
    let expect = base * 2f64.powf(-6.0 / 2.0);
    assert!((scaled / expect - 1.0).abs() < 1e-3, "{scaled} vs {expect}");
}

#[test]
fn step_rearrangement_norms() {
    let r = Rearrangement::from_steps(&[(3.0, 1.0), (1.0, 2.0)]).unwrap();
    assert_eq!(r.total_measure(), 3.0);
    assert_eq!(r.mu(2.0), 1.0);
    assert_eq!(r.u_star(1.5), 1.0);
    let l2 = r.lp_norm(2.0).unwrap();
    assert!((l2 - 11f64.sqrt()).abs() < 1e-12);
    let lpp = r.lorentz_norm(2.0, 2.0).unwrap();
    assert!((lpp / l2 - 1.0).abs() < 1e-12);
    assert!(Rearrangement::from_steps(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
}

#[test]
fn grid_dump_round_trip() {
    let u = AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap();
    let spec = GridSpec::on_box(&u.support(), 6).unwrap();
    let gf = sample(&u, &spec, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.grid");
    gf.dump(&path).unwrap();
    let back = GridFunction::load(&path).unwrap();
    assert_eq!(back.values(), gf.values());
    assert_eq!(back.margin(), 0);
    std::fs::write(&path, b"lo = [0.0]\n").unwrap();
    assert!(GridFunction::load(&path).is_err());
}
