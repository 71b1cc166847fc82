//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Every tolerance used below is pinned in the constants block.

use std::path::Path;
use std::process::Command;

use kinetic_core::field::BaseField;
use kinetic_core::kernel::{kernel_bound_check, BoundSampling, CovariancePolynomial};
use kinetic_core::{BlockStructure, FieldSpec, Geometry};
use kinetic_lab::config::{FamilyConfig, Modulation};
use kinetic_lab::{Experiment, Lab, LabError, Regime, Resolution, SweepResult};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// structure
const GROUP_TOL: f64 = 1e-12;
const DET_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;
// kernel
const COVARIANCE_QUAD_TOL: f64 = 1e-10;
const COVARIANCE_SCALING_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-5;
const GAMMA_SCALING_TOL: f64 = 1e-10;
const BOUND_DRIFT: f64 = 0.05;
// sweeps
const SCALING_TOL: f64 = 0.01;
const SLOPE_TOL: f64 = 0.3;
const POLY_TOL: f64 = 1e-8;
const UNIT_MASS_TOL: f64 = 1e-8;
const REFINEMENT_DRIFT: f64 = 2.0;
const DILATE_TOL: f64 = 0.01;
const Y_HOLDER_TOL: f64 = 0.1;
const C_HAT_DRIFT: f64 = 0.1;

struct Outcome {
    detail: Vec<String>,
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            detail: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool, value: f64) {
        let what = what.into();
        self.detail.push(format!("{what} = {value:e}"));
        if !ok {
            self.failures.push(format!("{what} = {value:e}"));
        }
    }

    fn at_most(&mut self, what: impl Into<String>, value: f64, max: f64) {
        self.check(what, value <= max, value);
    }

    fn sweep(&mut self, r: &SweepResult) {
        for v in &r.verdicts {
            self.check(format!("{} {} ({})", r.name, v.criterion, v.bound), v.passed, v.value);
        }
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.failures.push(format!("{what}: {e}"));
    }
}

fn geometries() -> Vec<(&'static str, Geometry)> {
    vec![
        ("langevin d=1", Geometry::new(BlockStructure::langevin(1)).unwrap()),
        ("langevin d=2", Geometry::new(BlockStructure::langevin(2)).unwrap()),
        ("three-layer", Geometry::new(BlockStructure::three_layer()).unwrap()),
    ]
}

fn random_point(g: &Geometry, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..g.dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn structure_exactness() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let expected_hd = [6, 10, 12];
    for ((name, g), want) in geometries().into_iter().zip(expected_hd) {
        let b = g.b().clone();
        let mut pow = DMatrix::identity(g.n(), g.n());
        for _ in 0..=g.r() {
            pow = &pow * &b;
        }
        o.check(format!("{name}: B^(r+1) = 0"), pow.iter().all(|&v| v == 0.0), pow.abs().max());
        let det = [-1.3, 0.4, 2.5].iter().map(|&s| (g.matrix_exp(s).determinant() - 1.0).abs()).fold(0.0, f64::max);
        o.at_most(format!("{name}: |det e^(sB) − 1|"), det, DET_TOL);
        let formula: usize = 2 + g
            .structure()
            .layer_dims
            .iter()
            .enumerate()
            .map(|(k, d)| (2 * k + 1) * d)
            .sum::<usize>();
        o.check(format!("{name}: 𝐝 = {}", g.hom_dim()), g.hom_dim() == formula && formula == want, g.hom_dim() as f64);
        let n = g.dim();
        let (mut assoc, mut ident, mut inv, mut norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let e = vec![0.0; n];
        for _ in 0..200 {
            let (x, y, z) = (random_point(&g, &mut rng), random_point(&g, &mut rng), random_point(&g, &mut rng));
            let (mut xy, mut yz, mut l, mut r) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            g.compose_raw(&x, &y, &mut xy);
            g.compose_raw(&xy, &z, &mut l);
            g.compose_raw(&y, &z, &mut yz);
            g.compose_raw(&x, &yz, &mut r);
            assoc = assoc.max(max_diff(&l, &r));
            g.compose_raw(&x, &e, &mut l);
            g.compose_raw(&e, &x, &mut r);
            ident = ident.max(max_diff(&l, &x)).max(max_diff(&r, &x));
            let mut xi = vec![0.0; n];
            g.invert_raw(&x, &mut xi);
            g.compose_raw(&x, &xi, &mut l);
            g.compose_raw(&xi, &x, &mut r);
            inv = inv.max(max_diff(&l, &e)).max(max_diff(&r, &e));
            let lam = rng.random_range(0.1..10.0);
            g.dilate_raw(lam, &x, &mut l);
            let nx = g.hom_norm_raw(&x);
            norm = norm.max((g.hom_norm_raw(&l) - lam * nx).abs() / (lam * nx));
        }
        o.at_most(format!("{name}: associativity"), assoc, GROUP_TOL);
        o.at_most(format!("{name}: identity"), ident, GROUP_TOL);
        o.at_most(format!("{name}: inverse"), inv, GROUP_TOL);
        o.at_most(format!("{name}: ‖D_λz‖ − λ‖z‖ (relative)"), norm, NORM_TOL);
    }
    for d in 1..=4 {
        let g = Geometry::new(BlockStructure::langevin(d)).unwrap();
        o.check(format!("langevin d={d}: 𝐝 = 4d + 2"), g.hom_dim() == 4 * d + 2, g.hom_dim() as f64);
    }
    o
}

/// Composite Simpson rule for `∫_0^t e^{sB} A₀ e^{sBᵀ} ds`.
fn covariance_by_quadrature(g: &Geometry, t: f64, panels: usize) -> DMatrix<f64> {
    let n = g.n();
    let a0 = DMatrix::from_fn(n, n, |i, j| if i == j && i < g.d0() { 1.0 } else { 0.0 });
    let f = |s: f64| {
        let e = (g.b() * s).exp();
        &e * &a0 * e.transpose()
    };
    let h = t / (2 * panels) as f64;
    let mut acc = f(0.0) + f(t);
    for k in 1..2 * panels {
        acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

fn kernel_correctness() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, g) in geometries() {
        let cp = CovariancePolynomial::new(&g);
        let n = g.n();
        let mut quad: f64 = 0.0;
        let mut scal: f64 = 0.0;
        for &t in &[0.3, 1.0, 2.7] {
            let c = cp.eval(t);
            let q = covariance_by_quadrature(&g, t, 400);
            quad = quad.max((&c - &q).abs().max() / c.abs().max());
            for &lam in &[0.5, 2.0, 3.0] {
                let d = g.dilation_matrix(lam);
                let lhs = cp.eval(lam * lam * t);
                let rhs = &d * &c * &d;
                scal = scal.max((&lhs - &rhs).abs().max() / rhs.abs().max());
            }
        }
        o.at_most(format!("{name}: C_t against quadrature (relative)"), quad, COVARIANCE_QUAD_TOL);
        o.at_most(format!("{name}: C_(λ²t) = D̂C_tD̂ (relative)"), scal, COVARIANCE_SCALING_TOL);

        // ∫Γ(t,·) by the trapezoid rule on a grid aligned with the
        // eigenvectors of C_t, ±7 standard deviations per axis
        let t = 0.8;
        let eig = cp.eval(t).symmetric_eigen();
        let m = 29usize;
        let sig: Vec<f64> = eig.eigenvalues.iter().map(|v| v.sqrt()).collect();
        let h: Vec<f64> = sig.iter().map(|s| 14.0 * s / (m - 1) as f64).collect();
        let mut z = vec![0.0; n + 1];
        z[0] = t;
        let mut y = nalgebra::DVector::zeros(n);
        let mut mass = 0.0;
        for k in 0..m.pow(n as u32) {
            let mut rem = k;
            for i in 0..n {
                y[i] = -7.0 * sig[i] + h[i] * (rem % m) as f64;
                rem /= m;
            }
            let x = &eig.eigenvectors * &y;
            z[1..].copy_from_slice(x.as_slice());
            mass += cp.gamma(&z).unwrap();
        }
        mass *= h.iter().product::<f64>();
        o.at_most(format!("{name}: |∫Γ(t,·) − 1|"), (mass - 1.0).abs(), MASS_TOL);

        // KΓ = ½Σ_{i<d₀}∂²_iΓ − YΓ by central differences at points within
        // 1.5 standard deviations, steps scaled per coordinate
        let gam = |z: &[f64]| cp.gamma(z).unwrap();
        let (mut residual, mut closed, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        let mut gscale: f64 = 0.0;
        for _ in 0..20 {
            let t = rng.random_range(0.5..2.0);
            let c = cp.eval(t);
            let l = c.clone().cholesky().unwrap().l();
            let xi = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
            let mut z = vec![t];
            z.extend((&l * xi).iter());
            let steps: Vec<f64> = std::iter::once(1e-4 * t).chain((0..n).map(|i| 1e-4 * c[(i, i)].sqrt())).collect();
            let mut bx = vec![0.0; n];
            g.b_apply(&z[1..], &mut bx);
            let shifted = |i: usize, s: f64| {
                let mut w = z.clone();
                w[i] += s;
                gam(&w)
            };
            let mut diff = 0.0;
            for i in 0..g.d0() {
                let fd = steps[i + 1];
                diff += 0.5 * (shifted(i + 1, fd) - 2.0 * gam(&z) + shifted(i + 1, -fd)) / (fd * fd);
            }
            let mut y = (shifted(0, steps[0]) - shifted(0, -steps[0])) / (2.0 * steps[0]);
            for i in 0..n {
                let fd = steps[i + 1];
                y += bx[i] * (shifted(i + 1, fd) - shifted(i + 1, -fd)) / (2.0 * fd);
            }
            residual = residual.max((diff - y).abs());
            closed = closed.max((cp.gamma_eval(&z).unwrap().y_gamma - y).abs());
            scale = scale.max(y.abs());
            let mut dz = vec![0.0; n + 1];
            let lam = rng.random_range(0.3..3.0);
            g.dilate_raw(lam, &z, &mut dz);
            let lhs = gam(&dz) * lam.powi(g.hom_dim() as i32 - 2);
            gscale = gscale.max((lhs - gam(&z)).abs() / gam(&z));
        }
        o.at_most(format!("{name}: sup|KΓ| / sup|YΓ| by finite differences"), residual / scale, RESIDUAL_TOL);
        o.at_most(format!("{name}: closed-form YΓ against finite differences"), closed / scale, RESIDUAL_TOL);
        o.at_most(format!("{name}: Γ(D_λz)λ^(𝐝−2) = Γ(z) (relative)"), gscale, GAMMA_SCALING_TOL);

        let s = BoundSampling {
            t_min: 1e-3,
            t_max: 10.0,
            x_max: 10.0,
            n_t: 9,
            n_x: if n > 2 { 5 } else { 9 },
        };
        let a = kernel_bound_check(&cp, &s).unwrap();
        let b = kernel_bound_check(&cp, &s.refined()).unwrap();
        let finite = a.sup_gamma.is_finite() && a.sup_y_gamma.is_finite() && b.sup_gamma.is_finite() && b.sup_y_gamma.is_finite();
        o.check(format!("{name}: kernel bound suprema finite"), finite, b.sup_gamma.max(b.sup_y_gamma));
        let drift = (b.sup_gamma / a.sup_gamma - 1.0).abs().max((b.sup_y_gamma / a.sup_y_gamma - 1.0).abs());
        o.at_most(format!("{name}: kernel bound suprema drift"), drift, BOUND_DRIFT);
    }
    o
}

fn langevin_lab(amplitude: f64) -> Lab {
    let g = Geometry::new(BlockStructure::langevin(1)).unwrap();
    let spec = FieldSpec {
        base: BaseField::Gaussian {
            a: vec![1.0; 3],
            center: None,
            amplitude,
        },
        dilate: None,
        translate: None,
    };
    let family = FamilyConfig {
        dilates: vec![0.5, 1.0, 2.0],
        translates: vec![vec![0.3, -0.2, 0.5]],
        modulations: vec![Modulation { axis: 1, omega: 2.0 }],
        random_translates: 1,
        random_radius: 0.5,
    };
    Lab::new(g, spec, &family, Resolution::default(), 7).unwrap()
}

fn run(o: &mut Outcome, lab: &Lab, name: &str, e: Experiment) -> Option<SweepResult> {
    match lab.run(name, &e) {
        Ok(r) => {
            o.sweep(&r);
            Some(r)
        }
        Err(err) => {
            o.error(name, err);
            None
        }
    }
}

fn scaling_suite(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    let e = Experiment::Scaling {
        lambdas: vec![0.5, 1.0, 2.0, 4.0],
        orders: vec![1, 2],
        p: vec![1.5, 2.0, 4.0],
        tolerance: SCALING_TOL,
    };
    run(&mut o, lab, "scaling", e);
    o
}

fn taylor_rates(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    let e = Experiment::Taylor {
        orders: vec![0, 1, 2],
        p: 2.0,
        sigmas: (0..6).map(|i| 0.05 * 1.5f64.powi(i)).collect(),
        zeta: vec![0.1, -0.2, 0.3],
        tolerance: SLOPE_TOL,
    };
    if let Some(r) = run(&mut o, lab, "taylor", e) {
        for v in r.verdicts.iter().filter(|v| v.criterion.starts_with("polynomial")) {
            o.at_most(format!("pinned {}", v.criterion), v.value, POLY_TOL);
        }
    }
    o
}

fn mollifier_rates(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    let e = Experiment::Mollifier {
        orders: vec![1, 2],
        p: 2.0,
        eps: vec![0.1, 0.14, 0.2, 0.28, 0.4],
        inverse: Some([1, 2]),
        kernel_nodes: 6,
        tolerance: SLOPE_TOL,
    };
    if let Some(r) = run(&mut o, lab, "mollifier", e) {
        if let Some(v) = r.verdicts.iter().find(|v| v.criterion.starts_with("unit mass")) {
            o.at_most("pinned unit mass", v.value, UNIT_MASS_TOL);
        }
    }
    o
}

fn interpolation(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    let e = Experiment::Interpolation {
        n: 1,
        m: 2,
        p: 2.0,
        drift: REFINEMENT_DRIFT,
    };
    run(&mut o, lab, "interpolation", e);
    o
}

fn rearrangement_lorentz(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    run(
        &mut o,
        lab,
        "lorentz",
        Experiment::Lorentz {
            p: 2.0,
            q: vec![1.0, 2.0, f64::INFINITY],
        },
    );
    o
}

fn embeddings(lab: &Lab, tall: &Lab) -> Outcome {
    let mut o = Outcome::new();
    run(
        &mut o,
        lab,
        "subcritical",
        Experiment::Embedding {
            regime: Regime::Subcritical,
            p: 2.0,
            q: vec![3.0],
            drift: REFINEMENT_DRIFT,
            tolerance: DILATE_TOL,
        },
    );
    let beyond = lab.run(
        "beyond p*",
        &Experiment::Embedding {
            regime: Regime::Subcritical,
            p: 2.0,
            q: vec![3.5],
            drift: REFINEMENT_DRIFT,
            tolerance: DILATE_TOL,
        },
    );
    o.check("q = 3.5 > p* rejected", matches!(beyond, Err(LabError::Exponent { .. })), 3.5);
    run(
        &mut o,
        lab,
        "supercritical",
        Experiment::Embedding {
            regime: Regime::Supercritical,
            p: 8.0,
            q: vec![],
            drift: REFINEMENT_DRIFT,
            tolerance: DILATE_TOL,
        },
    );
    run(
        &mut o,
        lab,
        "y-holder",
        Experiment::YHolder {
            p: 8.0,
            deltas: (0..6).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.4)).collect(),
            tolerance: Y_HOLDER_TOL,
        },
    );
    // amplitude 2 so that the δ = 1 level set is not empty
    run(
        &mut o,
        tall,
        "trudinger",
        Experiment::Trudinger {
            lambdas: vec![0.5, 1.0, 2.0],
            deltas: vec![0.1, 1.0],
        },
    );
    o
}

fn tartar(lab: &Lab) -> Outcome {
    let mut o = Outcome::new();
    run(
        &mut o,
        lab,
        "tartar",
        Experiment::Tartar {
            p: 2.0,
            drift: C_HAT_DRIFT,
        },
    );
    o
}

fn determinism() -> Outcome {
    let mut o = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let op = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../operators/langevin1.toml");
    let cfg = format!(
        r#"name = "determinism"
operator = {op:?}
seed = 3

[field]
kind = "gaussian"
a = [1.0, 2.0, 0.5]

[family]
translates = [[0.1, 0.2, -0.3]]
random_translates = 2

[[experiments]]
kind = "scaling"
p = [2.0]
orders = [1]

[[experiments]]
kind = "lorentz"
p = 2.0

[[experiments]]
kind = "taylor"
orders = [1]
zeta = [0.1, -0.2, 0.3]

[[experiments]]
kind = "crude"
p = 2.0
q = 2.5
"#,
        op = op.canonicalize().unwrap().display().to_string()
    );
    let path = dir.path().join("determinism.toml");
    std::fs::write(&path, cfg).unwrap();
    let mut outs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("out-{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_kinetic"))
            .args(["lab", "run"])
            .arg(&path)
            .arg("--out")
            .arg(&out)
            .env("KINETIC_WORKERS", workers)
            .output()
            .unwrap();
        o.check(format!("lab run with {workers} workers exits 0"), status.status.success(), workers.parse().unwrap());
        outs.push(out);
    }
    let mut files: Vec<_> = std::fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|f| f.to_string_lossy().ends_with(".csv"))
        .collect();
    files.sort();
    o.check("CSV tables written", files.len() == 4, files.len() as f64);
    let differing = files
        .iter()
        .filter(|f| std::fs::read(outs[0].join(f)).ok() != std::fs::read(outs[1].join(f)).ok())
        .count();
    o.check("CSV files differing between 1 and 3 workers", differing == 0, differing as f64);
    o
}

fn main() {
    let lab = langevin_lab(1.0);
    let tall = langevin_lab(2.0);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("structure exactness", Box::new(structure_exactness)),
        ("kernel correctness", Box::new(kernel_correctness)),
        ("scaling suite", Box::new(|| scaling_suite(&lab))),
        ("taylor rates", Box::new(|| taylor_rates(&lab))),
        ("mollifier rates", Box::new(|| mollifier_rates(&lab))),
        ("interpolation", Box::new(|| interpolation(&lab))),
        ("rearrangement and lorentz", Box::new(|| rearrangement_lorentz(&lab))),
        ("embeddings", Box::new(|| embeddings(&lab, &tall))),
        ("tartar machinery", Box::new(|| tartar(&lab))),
        ("determinism", Box::new(determinism)),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let verbose = std::env::var("ACCEPTANCE_VERBOSE").is_ok();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|s| !name.contains(s)) {
            continue;
        }
        let start = std::time::Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        if out.failures.is_empty() {
            println!("PASS {:2} {name} ({} checks, {secs:.1}s)", i + 1, out.detail.len());
        } else {
            failed += 1;
            println!("FAIL {:2} {name}: {}", i + 1, out.failures.join("; "));
        }
        if verbose {
            for d in &out.detail {
                println!("       {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
