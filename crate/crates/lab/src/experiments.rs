//! Sweeps behind the lab experiments.

use std::sync::Arc;

use kinetic_core::field::{AnalyticField, Dilated, Direction, FieldRef, FieldSpec, Profile, TestFunction};
use kinetic_core::fit::ExponentFit;
use kinetic_core::grid::{flow_y_raw, GridSpec};
use kinetic_core::lorentz::{
    cell_lp_norm, k_functional, level_report, sample_support, tail_equivalence, KSettings, Rearrangement, SpacePair,
    TartarSequence, K_WINDOW,
};
use kinetic_core::norms::{
    holder_norm, lp_norm, slobodeckij_y, sobolev_norm, sobolev_seminorm, NormSettings, SeminormForm, SobolevVariant,
};
use kinetic_core::quadrature::par_max;
use kinetic_core::structure::Geometry;
use kinetic_core::taylor::{
    indices_up_to, mollify_inverse_rate, mollify_rate, taylor_remainder_rate, BumpKernel, MollifyGrid, TaylorExpander,
};
use kinetic_core::MultiIndex;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Regime, Resolution};
use crate::error::{LabError, Result};
use crate::exponents;
use crate::family::{build_family, Member};
use crate::sweep::{num, spread, SweepResult, Verdict};

/// Names of the experiment kinds accepted in config files.
pub const KINDS: [(&str, &str); 13] = [
    ("scaling", "dilation factors of ‖·‖_p and |·|_{n,p,B}"),
    ("embedding", "Lorentz or Hölder ratios against ‖·‖_{W^{1,p}_B} by regime"),
    ("trudinger", "exponential integrals at p = 𝐝 and level growth"),
    ("y-holder", "rate of sup|u(e^{δY}z) − u(z)| over a dilate family"),
    ("y-frac", "[u]_{Y,1/2,p*} against ‖u‖_{W^{2,p}_B}"),
    ("higher-sobolev", "‖u‖_{W^{n,p*_k}_B} against ‖u‖_{W^{n+k,p}_B}"),
    ("crude", "‖u‖_q against ‖u‖_p^{1−θ}|u|_{1,p,B}^θ"),
    ("interpolation", "‖u‖_{W^n} against ‖u‖_{W^m}^{n/m}‖u‖_p^{1−n/m}"),
    ("taylor", "remainder rates and polynomial reproduction"),
    ("mollifier", "approximation and blow-up rates, unit mass"),
    ("lorentz", "rearrangements and Lorentz quasi-norms"),
    ("tartar", "level gaps against truncation seminorms"),
    ("k-functional", "mollifier upper bound for K(t, u; L^p, L^∞)"),
];

/// Geometry, base field and family shared by the experiments of one config.
pub struct Lab {
    pub g: Geometry,
    pub spec: FieldSpec,
    pub base: FieldRef,
    pub family: Vec<Member>,
    pub res: Resolution,
}

impl Lab {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let g = cfg.geometry()?;
        Self::new(g, cfg.field.clone(), &cfg.family, cfg.resolution, cfg.seed)
    }

    pub fn new(g: Geometry, spec: FieldSpec, family: &crate::config::FamilyConfig, res: Resolution, seed: u64) -> Result<Self> {
        let base = spec.build(&g)?;
        let family = build_family(&spec, family, &g, seed)?;
        Ok(Self {
            g,
            spec,
            base,
            family,
            res,
        })
    }

    fn hd(&self) -> usize {
        self.g.hom_dim()
    }

    pub fn run(&self, name: &str, e: &Experiment) -> Result<SweepResult> {
        match e {
            Experiment::Scaling {
                lambdas,
                orders,
                p,
                tolerance,
            } => self.scaling(name, lambdas, orders, p, *tolerance),
            Experiment::Embedding {
                regime,
                p,
                q,
                drift,
                tolerance,
            } => self.embedding(name, *regime, *p, q, *drift, *tolerance),
            Experiment::Trudinger { lambdas, deltas } => self.trudinger(name, lambdas, deltas),
            Experiment::YHolder { p, deltas, tolerance } => self.y_holder(name, *p, deltas, *tolerance),
            Experiment::YFrac { p, drift } => self.y_frac(name, *p, *drift),
            Experiment::HigherSobolev { p, k, n, drift } => self.higher_sobolev(name, *p, *k, *n, *drift),
            Experiment::Crude { p, q, tolerance } => self.crude(name, *p, *q, *tolerance),
            Experiment::Interpolation { n, m, p, drift } => self.interpolation(name, *n, *m, *p, *drift),
            Experiment::Taylor {
                orders,
                p,
                sigmas,
                zeta,
                tolerance,
            } => self.taylor(name, orders, *p, sigmas, zeta, *tolerance),
            Experiment::Mollifier {
                orders,
                p,
                eps,
                inverse,
                kernel_nodes,
                tolerance,
            } => self.mollifier(name, orders, *p, eps, *inverse, *kernel_nodes, *tolerance),
            Experiment::Lorentz { p, q } => self.lorentz(name, *p, q),
            Experiment::Tartar { p, drift } => self.tartar(name, *p, *drift),
            Experiment::KFunctional { p, t, eps, tolerance } => self.k_functional(name, *p, t, eps, *tolerance),
        }
    }

    fn w_norm(&self, u: &FieldRef, n: usize, p: f64, set: &NormSettings) -> Result<f64> {
        Ok(if n == 0 {
            lp_norm(u.as_ref(), p, set)?
        } else {
            sobolev_norm(u, &self.g, n, p, SobolevVariant::Full, set)?
        })
    }

    fn dilates(&self) -> impl Iterator<Item = &Member> {
        self.family.iter().filter(|m| m.dilate.is_some())
    }

    pub fn scaling(&self, name: &str, lambdas: &[f64], orders: &[usize], ps: &[f64], tol: f64) -> Result<SweepResult> {
        let mut out = SweepResult::new(name, "scaling", &["p", "quantity", "lambda", "measured", "predicted", "rel_dev"]);
        let set = self.res.norms(false).full_line();
        let hd = self.hd() as f64;
        let mut worst: f64 = 0.0;
        for &p in ps {
            let mut quantities: Vec<(String, f64, Box<dyn Fn(&FieldRef) -> Result<f64>>)> = vec![(
                "lp".into(),
                -hd / p,
                Box::new(|u: &FieldRef| Ok(lp_norm(u.as_ref(), p, &set)?)),
            )];
            for &n in orders {
                let g = &self.g;
                let set = &set;
                quantities.push((
                    format!("seminorm {n}"),
                    n as f64 - hd / p,
                    Box::new(move |u: &FieldRef| Ok(sobolev_seminorm(u, g, n, p, SeminormForm::Recursive, set)?)),
                ));
            }
            for (label, exponent, f) in &quantities {
                let base = f(&self.base)?;
                for &l in lambdas {
                    let v: FieldRef = Arc::new(Dilated::new(self.base.clone(), &self.g, l)?);
                    let measured = f(&v)? / base;
                    let predicted = l.powf(*exponent);
                    let dev = (measured / predicted - 1.0).abs();
                    worst = worst.max(dev);
                    out.push(vec![num(p), label.clone(), num(l), num(measured), num(predicted), num(dev)]);
                }
            }
        }
        out.verdict(Verdict::at_most("max relative deviation from λ-power", worst, tol));
        Ok(out)
    }

    pub fn embedding(&self, name: &str, regime: Regime, p: f64, qs: &[f64], drift: f64, tol: f64) -> Result<SweepResult> {
        let hd = self.hd();
        let hdf = hd as f64;
        let found = if p < hdf {
            Regime::Subcritical
        } else if p > hdf {
            Regime::Supercritical
        } else {
            Regime::Critical
        };
        if found != regime {
            return Err(LabError::Config(format!("p = {p} with 𝐝 = {hd} is {found:?}, not {regime:?}")));
        }
        match regime {
            Regime::Subcritical => {
                let ps = exponents::critical(p, hd)?;
                let qs = if qs.is_empty() { vec![ps] } else { qs.to_vec() };
                for &q in &qs {
                    if q > ps + 1e-12 {
                        return Err(LabError::Exponent {
                            name: "q",
                            value: q,
                            reason: format!("q > p* = {ps} is not admissible; the critical exponent p* is optimal"),
                        });
                    }
                    if q < p {
                        return Err(LabError::Exponent {
                            name: "q",
                            value: q,
                            reason: format!("need q ≥ p = {p}"),
                        });
                    }
                }
                let pairs: Vec<(f64, f64)> = qs.iter().flat_map(|&q| [(q, p), (q, q)]).collect();
                self.lorentz_ratios(name, p, &pairs, Some(ps), drift, tol)
            }
            Regime::Critical => {
                let qs = if qs.is_empty() { vec![hdf, 2.0 * hdf, 4.0 * hdf] } else { qs.to_vec() };
                if let Some(&q) = qs.iter().find(|&&q| q < hdf) {
                    return Err(LabError::Exponent {
                        name: "q",
                        value: q,
                        reason: format!("need q ≥ 𝐝 = {hd}"),
                    });
                }
                let pairs: Vec<(f64, f64)> = qs.iter().map(|&q| (q, hdf)).collect();
                self.lorentz_ratios(name, p, &pairs, None, drift, tol)
            }
            Regime::Supercritical => self.holder_ratios(name, p, drift),
        }
    }

    /// `‖u‖_{L^{q,s}} / ‖u‖_{W^{1,p}_B}` at two resolutions; with `critical`
    /// set, also `‖u‖_{L^{p*,s}} / |u|_{1,p,B}` over the dilates.
    fn lorentz_ratios(
        &self,
        name: &str,
        p: f64,
        pairs: &[(f64, f64)],
        critical: Option<f64>,
        drift: f64,
        tol: f64,
    ) -> Result<SweepResult> {
        let mut out = SweepResult::new(name, "embedding", &["member", "q", "s", "points", "lorentz", "w1p", "ratio"]);
        let mut ratios = vec![vec![[0.0; 2]; self.family.len()]; pairs.len()];
        for (level, refined) in [false, true].into_iter().enumerate() {
            let set = self.res.norms(refined);
            for (mi, m) in self.family.iter().enumerate() {
                let r = Rearrangement::from_function(m.field.as_ref(), self.res.lorentz_points(&set))?;
                let w = sobolev_norm(&m.field, &self.g, 1, p, SobolevVariant::Full, &set)?;
                for (pi, &(q, s)) in pairs.iter().enumerate() {
                    let l = r.lorentz_norm(q, s)?;
                    ratios[pi][mi][level] = l / w;
                    out.push(vec![m.label.clone(), num(q), num(s), num(set.points as f64), num(l), num(w), num(l / w)]);
                }
            }
        }
        for (pi, &(q, s)) in pairs.iter().enumerate() {
            let worst = ratios[pi].iter().map(|r| spread(r)).fold(1.0, f64::max);
            out.verdict(Verdict::at_most(format!("L^({q},{s}) ratio drift under refinement"), worst, drift));
        }
        if let Some(ps) = critical {
            let set = self.res.norms(false).full_line();
            for &(q, s) in pairs.iter().filter(|(q, _)| (q - ps).abs() < 1e-12) {
                let mut vals = Vec::new();
                for m in self.dilates() {
                    let r = Rearrangement::from_function(m.field.as_ref(), self.res.lorentz_points(&set))?;
                    let semi = sobolev_seminorm(&m.field, &self.g, 1, p, SeminormForm::Recursive, &set)?;
                    vals.push(r.lorentz_norm(q, s)? / semi);
                }
                if vals.len() > 1 {
                    out.verdict(Verdict::at_most(
                        format!("L^({q},{s}) / |u|_1 constant over dilates"),
                        spread(&vals) - 1.0,
                        tol,
                    ));
                }
            }
        }
        Ok(out)
    }

    fn holder_ratios(&self, name: &str, p: f64, drift: f64) -> Result<SweepResult> {
        let alpha = exponents::morrey(p, 1, self.hd())?;
        let mut out = SweepResult::new(name, "embedding", &["member", "points", "alpha", "holder", "w1p", "ratio"]);
        let mut ratios = vec![[0.0; 2]; self.family.len()];
        for (level, refined) in [false, true].into_iter().enumerate() {
            let set = self.res.norms(refined);
            let hs = self.res.holder(refined);
            for (mi, m) in self.family.iter().enumerate() {
                let h = holder_norm(&m.field, &self.g, 0, alpha, &hs)?;
                let w = sobolev_norm(&m.field, &self.g, 1, p, SobolevVariant::Full, &set)?;
                ratios[mi][level] = h / w;
                out.push(vec![m.label.clone(), num(set.points as f64), num(alpha), num(h), num(w), num(h / w)]);
            }
        }
        let worst = ratios.iter().map(|r| spread(r)).fold(1.0, f64::max);
        out.verdict(Verdict::at_most("C^{0,1-𝐝/p} ratio drift under refinement", worst, drift));
        Ok(out)
    }

    pub fn trudinger(&self, name: &str, lambdas: &[f64], deltas: &[f64]) -> Result<SweepResult> {
        let hd = self.hd();
        let gamma = exponents::trudinger(hd);
        let mut out = SweepResult::new(name, "trudinger", &["lambda", "delta", "integral", "bound", "level_set"]);
        let u = &self.base;
        let sup = u.support();
        let spec = GridSpec::on_box(&sup, self.res.lorentz_points(&self.res.norms(false)))?;
        let d = self.g.dim();
        let sup_u = par_max(spec.len(), |k| {
            let mut z = [0.0; kinetic_core::field::MAX_AXES];
            spec.coords(k, &mut z[..d]);
            u.eval(&z[..d]).abs()
        });
        for &l in lambdas {
            for &delta in deltas {
                let integral = spec.integrate(|z| {
                    let v = u.eval(z).abs();
                    if v > delta {
                        (l * v.powf(gamma)).exp()
                    } else {
                        0.0
                    }
                });
                let level = spec.integrate(|z| if u.eval(z).abs() > delta { 1.0 } else { 0.0 });
                let bound = (l * sup_u.powf(gamma)).exp() * level;
                out.push(vec![num(l), num(delta), num(integral), num(bound), num(level)]);
                out.verdict(Verdict::finite(format!("integral at λ={l}, δ={delta}"), integral));
                if bound > 0.0 {
                    out.verdict(Verdict::at_most(
                        format!("integral / (e^(λ‖u‖^γ) Leb) at λ={l}, δ={delta}"),
                        integral / bound,
                        1.0 + 1e-12,
                    ));
                }
            }
        }
        let w = sobolev_norm(u, &self.g, 1, hd as f64, SobolevVariant::Full, &self.res.norms(false))?;
        out.verdict(Verdict::finite("‖u‖_{W^{1,𝐝}_B}", w));
        // a_k^γ ≈ ε̂|k| + ĉ for k ≤ 0
        let r = Rearrangement::from_function(u.as_ref(), self.res.lorentz_points(&self.res.norms(false)))?;
        let ts = TartarSequence::new(&r, K_WINDOW)?;
        let pts: Vec<(f64, f64)> = ts
            .ks()
            .filter(|&k| k <= 0)
            .map(|k| ((-k) as f64, ts.a(k).unwrap().powf(gamma)))
            .collect();
        let eps_hat = linear_slope(&pts);
        let lmax = lambdas.iter().copied().fold(0.0, f64::max);
        out.verdict(Verdict::at_most("level growth slope ε̂ below 1/λ_max", eps_hat, 1.0 / lmax));
        Ok(out)
    }

    pub fn y_holder(&self, name: &str, p: f64, deltas: &[f64], tol: f64) -> Result<SweepResult> {
        let hd = self.hd();
        let target = exponents::y_holder(p, hd)?;
        let set = self.res.norms(false).full_line();
        let g = &self.g;
        let u = &self.base;
        let hdf = hd as f64;
        // graded pieces of ‖u‖_{W^{2,p}_B}; each is exactly homogeneous under D_λ
        let a0 = lp_norm(u.as_ref(), p, &set)?;
        let mut a1 = 0.0;
        let mut a2 = lp_norm(u.derivative(g, Direction::Y)?.as_ref(), p, &set)?;
        for i in 0..g.d0() {
            let di = u.derivative(g, Direction::Partial(i))?;
            a1 += lp_norm(di.as_ref(), p, &set)?;
            a2 += sobolev_seminorm(&di, g, 1, p, SeminormForm::Recursive, &set)?;
        }
        let direct = sobolev_norm(u, g, 2, p, SobolevVariant::Full, &set)?;
        let norm_at = |l: f64| a0 * l.powf(-hdf / p) + a1 * l.powf(1.0 - hdf / p) + a2 * l.powf(2.0 - hdf / p);
        let check_l = 2.0;
        let dil: FieldRef = Arc::new(Dilated::new(u.clone(), g, check_l)?);
        let direct_l = sobolev_norm(&dil, g, 2, p, SobolevVariant::Full, &set)?;
        let mut out = SweepResult::new(name, "y-holder", &["delta", "sup_ratio", "best_lambda"]);
        out.verdict(Verdict::at_most("graded W^2 pieces sum to the norm", (a0 + a1 + a2 - direct).abs() / direct, 1e-10));
        out.verdict(Verdict::at_most(
            "graded W^2 pieces scale under D_2",
            (norm_at(check_l) - direct_l).abs() / direct_l,
            1e-6,
        ));
        let w = u.support().width(0);
        let dmin = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let octaves = (4.0 * w / dmin).log2() / 2.0;
        let lams: Vec<f64> = (0..=(4.0 * octaves).ceil() as usize).map(|j| 2f64.powf(j as f64 / 4.0)).collect();
        let mut pts = Vec::new();
        for &delta in deltas {
            let mut best = (0.0, 1.0);
            for &l in &lams {
                let v = y_increment_sup(u.as_ref(), g, l * l * delta, self.res.holder_points)? / norm_at(l);
                if v > best.0 {
                    best = (v, l);
                }
            }
            out.push(vec![num(delta), num(best.0), num(best.1)]);
            pts.push((delta, best.0));
        }
        let fit = ExponentFit::fit(&pts)?;
        out.verdict(Verdict::within("sup increment slope", fit.slope, target, tol));
        out.fits.push(("sup increment".into(), fit));
        Ok(out)
    }

    pub fn y_frac(&self, name: &str, p: f64, drift: f64) -> Result<SweepResult> {
        let ps = exponents::critical(p, self.hd())?;
        if !(p > 1.0) {
            return Err(LabError::Exponent {
                name: "p",
                value: p,
                reason: "the W^2 embeddings need p > 1".into(),
            });
        }
        let mut out = SweepResult::new(name, "y-frac", &["member", "points", "frac", "w2p", "ratio"]);
        let rows = self.two_level(|m, set| {
            Ok((slobodeckij_y(m.field.as_ref(), &self.g, ps, 0.5, set)?, self.w_norm(&m.field, 2, p, set)?))
        })?;
        self.ratio_rows(&mut out, &rows, format!("[u]_(Y,1/2,{ps}) / W^(2,{p}) drift under refinement"), drift);
        Ok(out)
    }

    pub fn higher_sobolev(&self, name: &str, p: f64, k: usize, n: usize, drift: f64) -> Result<SweepResult> {
        if !(p > 1.0) {
            return Err(LabError::Exponent {
                name: "p",
                value: p,
                reason: "the W^{n+k} embeddings need p > 1".into(),
            });
        }
        let q = exponents::critical_k(p, k, self.hd())?;
        let mut out = SweepResult::new(name, "higher-sobolev", &["member", "points", "low", "high", "ratio"]);
        let rows = self.two_level(|m, set| Ok((self.w_norm(&m.field, n, q, set)?, self.w_norm(&m.field, n + k, p, set)?)))?;
        self.ratio_rows(&mut out, &rows, format!("W^({n},{q}) / W^({},{p}) drift under refinement", n + k), drift);
        Ok(out)
    }

    pub fn crude(&self, name: &str, p: f64, q: f64, tol: f64) -> Result<SweepResult> {
        let hd = self.hd();
        let theta = exponents::theta(p, q, hd)?;
        let mut out = SweepResult::new(name, "crude", &["member", "points", "lq", "bound", "ratio"]);
        let bound = |u: &FieldRef, set: &NormSettings| -> Result<(f64, f64)> {
            let lq = lp_norm(u.as_ref(), q, set)?;
            let lp = lp_norm(u.as_ref(), p, set)?;
            let semi = sobolev_seminorm(u, &self.g, 1, p, SeminormForm::Recursive, set)?;
            Ok((lq, lp.powf(1.0 - theta) * semi.powf(theta)))
        };
        let rows = self.two_level(|m, set| bound(&m.field, set))?;
        self.ratio_rows(&mut out, &rows, format!("‖u‖_{q} / ‖u‖_p^(1-θ)|u|_1^θ drift, θ = {theta}"), 2.0);
        let set = self.res.norms(false).full_line();
        let mut vals = Vec::new();
        for m in self.dilates() {
            let (a, b) = bound(&m.field, &set)?;
            vals.push(a / b);
        }
        if vals.len() > 1 {
            out.verdict(Verdict::at_most("ratio constant over dilates", spread(&vals) - 1.0, tol));
        }
        Ok(out)
    }

    pub fn interpolation(&self, name: &str, n: usize, m: usize, p: f64, drift: f64) -> Result<SweepResult> {
        let t = n as f64 / m as f64;
        let mut out = SweepResult::new(name, "interpolation", &["member", "points", "wn", "bound", "ratio"]);
        let rows = self.two_level(|mem, set| {
            let wn = self.w_norm(&mem.field, n, p, set)?;
            let wm = self.w_norm(&mem.field, m, p, set)?;
            let lp = lp_norm(mem.field.as_ref(), p, set)?;
            Ok((wn, wm.powf(t) * lp.powf(1.0 - t)))
        })?;
        self.ratio_rows(&mut out, &rows, format!("Ĉ for W^({n},{p}) ≤ Ĉ W^({m},{p})^{t} L^{p}^{}", 1.0 - t), drift);
        let chat = |level: usize| rows.iter().map(|r| r[level].0 / r[level].1).fold(0.0, f64::max);
        out.verdict(Verdict::at_most("fitted Ĉ drift under refinement", spread(&[chat(0), chat(1)]), drift));
        Ok(out)
    }

    pub fn taylor(&self, name: &str, orders: &[usize], p: f64, sigmas: &[f64], zeta: &[f64], tol: f64) -> Result<SweepResult> {
        let set = self.res.norms(false);
        let mut out = SweepResult::new(name, "taylor", &["n", "scale", "remainder"]);
        for &n in orders {
            let study = taylor_remainder_rate(&self.base, &self.g, n, p, zeta, sigmas, &set)?;
            for pt in &study.points {
                out.push(vec![num(n as f64), num(pt.scale), num(pt.value)]);
            }
            out.verdict(Verdict::within(format!("remainder slope n={n}"), study.fit.slope, (n + 1) as f64, tol));
            out.fits.push((format!("n={n}"), study.fit));
            let err = polynomial_reproduction(&self.g, n)?;
            out.verdict(Verdict::at_most(format!("polynomial reproduction n={n}"), err, 1e-8));
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn mollifier(
        &self,
        name: &str,
        orders: &[usize],
        p: f64,
        eps: &[f64],
        inverse: Option<[usize; 2]>,
        nodes: usize,
        tol: f64,
    ) -> Result<SweepResult> {
        let set = self.res.norms(false);
        let kernel = Arc::new(BumpKernel::new(&self.g, nodes)?);
        let mut out = SweepResult::new(name, "mollifier", &["quantity", "eps", "value"]);
        for &n in orders {
            let study = mollify_rate(&self.base, &self.g, n, p, eps, kernel.clone(), &set)?;
            for pt in &study.points {
                out.push(vec![format!("error n={n}"), num(pt.scale), num(pt.value)]);
            }
            out.verdict(Verdict::within(format!("approximation slope n={n}"), study.fit.slope, n as f64, tol));
            out.fits.push((format!("error n={n}"), study.fit));
        }
        if let Some([n, m]) = inverse {
            let grid = MollifyGrid {
                points: self.res.refined + 1,
                margin: 3,
            };
            let study = mollify_inverse_rate(&self.base, &self.g, n, m, p, eps, kernel.clone(), &grid, &set)?;
            for pt in &study.points {
                out.push(vec![format!("W^{m} norm n={n}"), num(pt.scale), num(pt.value)]);
            }
            out.verdict(Verdict::at_least(
                format!("W^{m} growth slope n={n}"),
                study.fit.slope,
                n as f64 - m as f64 - tol,
            ));
            out.fits.push((format!("W^{m} norm n={n}"), study.fit));
        }
        let mut z = vec![0.0; self.g.dim()];
        for (a, zi) in z.iter_mut().enumerate() {
            *zi = 0.1 * (a as f64 + 1.0) * if a % 2 == 0 { 1.0 } else { -1.0 };
        }
        let mut worst: f64 = 0.0;
        for &e in [eps[0], eps[eps.len() - 1]].iter() {
            let mass = kernel.mass_at(&z, e, 24, 10)?;
            out.push(vec!["mass".into(), num(e), num(mass)]);
            worst = worst.max((mass - 1.0).abs());
        }
        out.verdict(Verdict::at_most("unit mass of the scaled kernel", worst, 1e-8));
        Ok(out)
    }

    pub fn lorentz(&self, name: &str, p: f64, qs: &[f64]) -> Result<SweepResult> {
        let mut out = SweepResult::new(name, "lorentz", &["member", "q", "norm", "normalized"]);
        let mut qs: Vec<f64> = qs.iter().copied().chain([p]).collect();
        qs.sort_by(f64::total_cmp);
        qs.dedup();
        let mut equi: f64 = 0.0;
        let mut galois = 0usize;
        let mut nested = true;
        for m in &self.family {
            let gf = sample_support(m.field.as_ref(), self.res.lorentz_points(&self.res.norms(false)))?;
            let r = Rearrangement::from_grid(&gf)?;
            let w = gf.spec().trapezoid();
            let d = self.g.dim();
            let mut idx = [0usize; kinetic_core::field::MAX_AXES];
            let meas: Vec<f64> = (0..gf.spec().len())
                .map(|k| {
                    gf.spec().unravel(k, &mut idx[..d]);
                    (0..d).map(|a| w[a][idx[a]]).product()
                })
                .collect();
            let direct = cell_lp_norm(gf.values(), &meas, p);
            equi = equi.max((r.lp_norm(p)? - direct).abs() / direct);
            let mut prev = f64::INFINITY;
            for &q in &qs {
                let v = r.lorentz_norm(p, q)?;
                let nv = r.lorentz_normalized(p, q)?;
                nested &= nv <= prev * (1.0 + 1e-12);
                prev = nv;
                out.push(vec![m.label.clone(), num(q), num(v), num(nv)]);
            }
            let top = r.max();
            for i in 0..=8 {
                let lam = top * i as f64 / 8.0;
                for &t in &[0.0, 0.01, 0.1, 1.0, 10.0] {
                    if (r.u_star(t) > lam) != (r.mu(lam) > t) {
                        galois += 1;
                    }
                }
            }
            let ts = TartarSequence::new(&r, K_WINDOW)?;
            let chk = ts.check_levels(&r);
            out.verdict(Verdict::at_most(
                format!("level inequalities, {} ({} plateaus skipped)", m.label, chk.plateaus.len()),
                chk.violations.len() as f64,
                0.0,
            ));
        }
        out.verdict(Verdict::at_most("‖u*‖_p = ‖u‖_p", equi, 1e-12));
        out.verdict(Verdict::at_most("u*(t) > λ ⇔ μ(λ) > t mismatches", galois as f64, 0.0));
        out.verdict(Verdict::at_least("normalized L^(p,q) non-increasing in q", nested as u8 as f64, 1.0));
        // step data
        let steps: Vec<(f64, f64)> = (0..50).map(|i| (1.0 / (1.0 + i as f64), 0.1 + 0.01 * i as f64)).collect();
        let r = Rearrangement::from_steps(&steps)?;
        let direct = steps.iter().map(|(v, l)| v.powf(p) * l).sum::<f64>().powf(1.0 / p);
        out.verdict(Verdict::at_most("L^(p,p) = L^p on steps", (r.lorentz_norm(p, p)? - direct).abs() / direct, 1e-12));
        for (label, gamma, finite) in [("convergent", 1.0, true), ("divergent", 0.25, false)] {
            let f = move |t: f64| t.powf(-1.0 / p) / (2.0 + t.ln().abs()).powf(gamma);
            let (norm, sum) = tail_equivalence(f, p, p, 100)?;
            let (a, b) = (norm.ratio(), sum.ratio());
            out.push(vec![format!("{label} tail norm growth"), num(p), num(a), num(b)]);
            if finite {
                out.verdict(Verdict::at_most(format!("{label} tail: norm and level sum settle"), a.max(b), 1.05));
            } else {
                out.verdict(Verdict::at_least(format!("{label} tail: norm and level sum grow"), a.min(b), 1.2));
            }
        }
        Ok(out)
    }

    pub fn tartar(&self, name: &str, p: f64, drift: f64) -> Result<SweepResult> {
        let mut out = SweepResult::new(
            name,
            "tartar",
            &["example", "points", "k", "a_k", "gap", "weighted_gap", "seminorm", "ratio"],
        );
        let singular = singular_example(&self.g)?;
        let mut chat = [0.0; 2];
        let mut sums = [[0.0; 2]; 2];
        let mut whole = [[0.0; 2]; 2];
        for (level, refined) in [false, true].into_iter().enumerate() {
            for (ei, (label, u)) in [("base", &self.base), ("singular", &singular)].into_iter().enumerate() {
                // the singular seminorm grows like h^{-3/2}, so it gets a full doubling
                let set = match (ei, refined) {
                    (1, true) => self.res.norms(false).with_points(2 * self.res.points),
                    _ => self.res.norms(refined),
                };
                let (ts, rep) = level_report(u, &self.g, p, set.points, &set)?;
                for row in &rep.rows {
                    out.push(vec![
                        label.into(),
                        num(set.points as f64),
                        num(row.k as f64),
                        num(row.a_k),
                        num(row.gap),
                        num(row.weighted_gap),
                        num(row.seminorm),
                        num(row.ratio().unwrap_or(0.0)),
                    ]);
                }
                let r = Rearrangement::from_function(u.as_ref(), set.points)?;
                let chk = ts.check_levels(&r);
                out.verdict(Verdict::at_most(
                    format!("level inequalities, {label} at {} points", set.points),
                    chk.violations.len() as f64,
                    0.0,
                ));
                if ei == 0 {
                    chat[level] = rep.c_hat();
                }
                sums[ei][level] = rep.seminorm_power_sum();
                whole[ei][level] = sobolev_seminorm(u, &self.g, 1, p, SeminormForm::Recursive, &set)?.powf(p);
            }
        }
        out.verdict(Verdict::at_most("ĉ relative drift under refinement", (chat[1] / chat[0] - 1.0).abs(), drift));
        out.verdict(Verdict::at_least("ĉ positive", chat[0].min(chat[1]), f64::MIN_POSITIVE));
        let growth = |v: [f64; 2]| v[1] / v[0];
        let finite = growth(sums[0]).max(growth(whole[0])).max(1.0 / growth(sums[0]).min(growth(whole[0])));
        out.verdict(Verdict::at_most("base: Σ|φ_k|^p and |u|^p settle", finite, 1.25));
        let div = growth(sums[1]).min(growth(whole[1]));
        out.verdict(Verdict::at_least("singular: Σ|φ_k|^p and |u|^p grow", div, 1.25));
        Ok(out)
    }

    pub fn k_functional(&self, name: &str, p: f64, t: &[f64], eps: &[f64], tol: f64) -> Result<SweepResult> {
        let kernel = Arc::new(BumpKernel::new(&self.g, 6)?);
        let set = self.res.norms(false);
        let ks = KSettings {
            sup_points: self.res.points,
            ..KSettings::default()
        };
        let curve = k_functional(&self.base, &self.g, p, SpacePair::LpLinf, t, eps, kernel, &set, &ks)?;
        let mut out = SweepResult::new(name, "k-functional", &["t", "k_upper_bound", "mollifier", "best_eps"]);
        for pt in &curve.points {
            out.push(vec![num(pt.t), num(pt.k), num(pt.mollifier), num(pt.best_eps)]);
        }
        let fit = curve.slope()?;
        let target = p / (self.hd() as f64 + p);
        out.verdict(Verdict::at_least("mollifier upper bound slope", fit.slope, target - tol));
        let mut sorted = curve.points.clone();
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        let monotone = sorted.windows(2).all(|w| w[1].k >= w[0].k && w[1].k / w[1].t <= w[0].k / w[0].t * (1.0 + 1e-12));
        out.verdict(Verdict::at_least("K non-decreasing with K/t non-increasing", monotone as u8 as f64, 1.0));
        out.fits.push(("mollifier upper bound".into(), fit));
        Ok(out)
    }

    /// `(value, reference)` pairs per member at the coarse and refined resolution.
    fn two_level<F>(&self, f: F) -> Result<Vec<[(f64, f64); 2]>>
    where
        F: Fn(&Member, &NormSettings) -> Result<(f64, f64)>,
    {
        let mut rows = vec![[(0.0, 0.0); 2]; self.family.len()];
        for (level, refined) in [false, true].into_iter().enumerate() {
            let set = self.res.norms(refined);
            for (mi, m) in self.family.iter().enumerate() {
                rows[mi][level] = f(m, &set)?;
            }
        }
        Ok(rows)
    }

    fn ratio_rows(&self, out: &mut SweepResult, rows: &[[(f64, f64); 2]], criterion: String, drift: f64) {
        let mut worst: f64 = 1.0;
        for (m, r) in self.family.iter().zip(rows) {
            for (level, refined) in [false, true].into_iter().enumerate() {
                let (a, b) = r[level];
                let pts = if refined { self.res.refined } else { self.res.points };
                out.push(vec![m.label.clone(), num(pts as f64), num(a), num(b), num(a / b)]);
            }
            worst = worst.max(spread(&[r[0].0 / r[0].1, r[1].0 / r[1].1]));
        }
        out.verdict(Verdict::at_most(criterion, worst, drift));
    }
}

/// `sup_z |u(e^{±hY}z) − u(z)|` with `z` on a grid of the support box.
pub fn y_increment_sup(u: &dyn TestFunction, g: &Geometry, h: f64, points: usize) -> Result<f64> {
    let spec = GridSpec::on_box(&u.support(), points)?;
    let d = g.dim();
    Ok(par_max(spec.len(), |k| {
        let mut z = [0.0; kinetic_core::field::MAX_AXES];
        let mut w = [0.0; kinetic_core::field::MAX_AXES];
        spec.coords(k, &mut z[..d]);
        let u0 = u.eval(&z[..d]);
        let mut best: f64 = 0.0;
        for s in [h, -h] {
            flow_y_raw(g, &z[..d], s, &mut w[..d]);
            best = best.max((u.eval(&w[..d]) - u0).abs());
        }
        best
    }))
}

/// Least-squares slope of `y` against `x`; zero with fewer than two points.
fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Gaussian times `|x_0|^{−1/4}` on the first space axis: in `L^p` for
/// `p < 4` but with `∂_{x_0}u ∉ L^2`.
pub fn singular_example(g: &Geometry) -> Result<FieldRef> {
    let profiles = (0..g.dim())
        .map(|a| {
            let gauss = Profile::Gauss { a: 1.0, c: 0.0 };
            if a == 1 {
                Profile::Product(Box::new(Profile::Power { c: 0.0, gamma: -0.25 }), Box::new(gauss))
            } else {
                gauss
            }
        })
        .collect();
    Ok(Arc::new(AnalyticField::separable(profiles, &[], 1.0)?))
}

/// Max relative error of `T_n p(ζ, z) = p(z)` for a polynomial `p` of
/// intrinsic degree `n`.
pub fn polynomial_reproduction(g: &Geometry, n: usize) -> Result<f64> {
    let terms: Vec<(f64, Vec<u8>)> = indices_up_to(g, n)
        .into_iter()
        .enumerate()
        .map(|(i, MultiIndex { k, beta })| {
            let mut mono = vec![k as u8];
            mono.extend(beta.iter().map(|&b| b as u8));
            (1.0 / (1.0 + i as f64), mono)
        })
        .collect();
    let poly: FieldRef = Arc::new(AnalyticField::polynomial(g.dim(), &terms)?);
    let te = TaylorExpander::new(&poly, g, n)?;
    let d = g.dim();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
        .map(|i| {
            let s = i as f64;
            let zeta = (0..d).map(|a| ((s + 1.0) * (a as f64 + 0.7)).sin()).collect();
            let z = (0..d).map(|a| ((s + 2.0) * (a as f64 + 0.3)).cos() * 1.5).collect();
            (zeta, z)
        })
        .collect();
    Ok(pairs
        .par_iter()
        .map(|(zeta, z)| {
            let exact = poly.eval(z);
            (te.eval(zeta, z) - exact).abs() / exact.abs().max(1.0)
        })
        .reduce(|| 0.0, f64::max))
}

/// Runs every experiment of `cfg` and returns the results in config order.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    let lab = Lab::from_config(cfg)?;
    cfg.experiments
        .par_iter()
        .enumerate()
        .map(|(i, e)| lab.run(&format!("{:02}-{}", i + 1, e.kind()), e))
        .collect()
}
