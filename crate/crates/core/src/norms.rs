//! Intrinsic quasi-norms: `L^p`, the Slobodeckij seminorm along `Y`, the
//! Sobolev seminorms `|u|_{n,p,B}` with both Sobolev norms, and sampled
//! Hölder norms.
//!
//! Integrals run over the support box of `u` with the tensor trapezoid rule.
//! The `h` integral of the fractional seminorm uses Gauss nodes on dyadic
//! bands scaled to the `t`-width of the support, so a dilated field sees
//! exactly the dilated quadrature.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::{apply_word, multi_derivative, Direction, FieldRef, TestFunction, MAX_AXES};
use crate::grid::{flow_raw, flow_y_raw, BoxDomain, GridSpec};
use crate::quadrature::{par_max, DyadicRule};
use crate::structure::{Geometry, MultiIndex};

/// Range of `h` in the fractional seminorm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FractionalWindow {
    /// `|h| ≤ H`; `Truncated(1.0)` is the bracket seminorm `[u]_{Y,s,p}`.
    Truncated(f64),
    /// `h ∈ ℝ`, the seminorm `⌊u⌋_{Y,s,p}`; exactly dilation covariant.
    FullLine,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormSettings {
    /// Trapezoid nodes per axis over the support box.
    pub points: usize,
    /// Smallest `|h|` relative to the `t`-width of the support.
    pub h_min: f64,
    /// Gauss nodes per dyadic band.
    pub per_band: usize,
    pub window: FractionalWindow,
}

impl Default for NormSettings {
    fn default() -> Self {
        Self {
            points: 24,
            h_min: 2f64.powi(-20),
            per_band: 4,
            window: FractionalWindow::Truncated(1.0),
        }
    }
}

impl NormSettings {
    pub fn full_line(mut self) -> Self {
        self.window = FractionalWindow::FullLine;
        self
    }

    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(param("points", "need at least two nodes per axis"));
        }
        if !(self.h_min > 0.0 && self.h_min < 1.0) {
            return Err(param("h_min", "must lie in (0, 1)"));
        }
        if self.per_band == 0 {
            return Err(param("per_band", "must be positive"));
        }
        if let FractionalWindow::Truncated(h) = self.window {
            if !(h > 0.0) {
                return Err(param("window", "truncation must be positive"));
            }
        }
        Ok(())
    }
}

/// Support box, or `None` for a function with empty support.
fn integration_box(u: &dyn TestFunction) -> Result<Option<BoxDomain>> {
    let b = u.support();
    if !b.is_finite() {
        return Err(Error::Unsupported("norms need a bounded support box".into()));
    }
    if (0..b.dim()).any(|a| b.width(a) <= 0.0) {
        return Ok(None);
    }
    Ok(Some(b))
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(param("p", "need 1 ≤ p < ∞"));
    }
    Ok(())
}

#[inline]
fn pow_abs(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

/// `∫ |u|^p`.
pub fn lp_power(u: &dyn TestFunction, p: f64, set: &NormSettings) -> Result<f64> {
    check_p(p)?;
    set.validate()?;
    let Some(b) = integration_box(u)? else {
        return Ok(0.0);
    };
    let spec = GridSpec::on_box(&b, set.points)?;
    Ok(spec.integrate(|z| pow_abs(u.eval(z), p)))
}

pub fn lp_norm(u: &dyn TestFunction, p: f64, set: &NormSettings) -> Result<f64> {
    Ok(lp_power(u, p, set)?.powf(1.0 / p))
}

/// Largest `|u|` on the trapezoid nodes of the support box.
pub fn sup_norm(u: &dyn TestFunction, points: usize) -> Result<f64> {
    let Some(b) = integration_box(u)? else {
        return Ok(0.0);
    };
    let spec = GridSpec::on_box(&b, points)?;
    let d = spec.dim();
    Ok(par_max(spec.len(), |k| {
        let mut z = [0.0; MAX_AXES];
        spec.coords(k, &mut z[..d]);
        u.eval(&z[..d]).abs()
    })
    .max(0.0))
}

/// `[u]^p_{Y,s,p}` for the configured window.
///
/// For `z` in the support box `S` the integrand is
/// `|u(e^{hY}z) − u(z)|^p + 1[e^{−hY}z ∉ S] |u(z)|^p`; the second term is the
/// contribution of points outside `S` moved back by the measure preserving
/// flow. Beyond the `t`-width `W` of `S` the flow always leaves `S`, which
/// gives the closed-form tail `4‖u‖_p^p (W^{−ps} − H^{−ps})/(ps)`.
pub fn slobodeckij_power(
    u: &dyn TestFunction,
    g: &Geometry,
    p: f64,
    s: f64,
    set: &NormSettings,
) -> Result<f64> {
    check_p(p)?;
    set.validate()?;
    if !(s > 0.0 && s < 1.0) {
        return Err(param("s", "fractional order must lie in (0, 1)"));
    }
    let Some(b) = integration_box(u)? else {
        return Ok(0.0);
    };
    let w = b.width(0);
    let h_cap = match set.window {
        FractionalWindow::Truncated(h) => h,
        FractionalWindow::FullLine => f64::INFINITY,
    };
    let h_top = h_cap.min(w);
    let ps = p * s;
    let mut total = 0.0;
    if h_top > set.h_min * w {
        let rule = DyadicRule::new(set.h_min, h_top / w, set.per_band);
        let hs: Vec<(f64, f64)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, wt)| {
                let h = x * w;
                (h, wt * w / h.powf(ps + 1.0))
            })
            .collect();
        let spec = GridSpec::on_box(&b, set.points)?;
        let d = g.dim();
        total += spec.integrate(|z| {
            let u0 = u.eval(z);
            let a0 = pow_abs(u0, p);
            let mut fw = [0.0; MAX_AXES];
            let mut acc = 0.0;
            for &(h, wt) in &hs {
                let mut inner = 0.0;
                for sg in [h, -h] {
                    flow_y_raw(g, z, sg, &mut fw[..d]);
                    inner += pow_abs(u.eval(&fw[..d]) - u0, p);
                    if a0 != 0.0 {
                        flow_y_raw(g, z, -sg, &mut fw[..d]);
                        if !b.contains(&fw[..d]) {
                            inner += a0;
                        }
                    }
                }
                acc += wt * inner;
            }
            acc
        });
    }
    if h_cap > w {
        let lp = lp_power(u, p, set)?;
        let far = if h_cap.is_finite() { h_cap.powf(-ps) } else { 0.0 };
        total += 4.0 * lp * (w.powf(-ps) - far) / ps;
    }
    Ok(total)
}

pub fn slobodeckij_y(u: &dyn TestFunction, g: &Geometry, p: f64, s: f64, set: &NormSettings) -> Result<f64> {
    Ok(slobodeckij_power(u, g, p, s, set)?.powf(1.0 / p))
}

/// `c_{p,s} = (∫_{|h|>1} 2|h|^{−1−ps} dh)^{1/p} = (4/(ps))^{1/p}`.
pub fn sandwich_constant(p: f64, s: f64) -> f64 {
    (4.0 / (p * s)).powf(1.0 / p)
}

/// Both ends of `[u] ≤ ⌊u⌋ ≤ [u] + c_{p,s}‖u‖_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub bracket: f64,
    pub full_line: f64,
    pub upper: f64,
}

impl Sandwich {
    pub fn holds(&self, rtol: f64) -> bool {
        self.bracket <= self.full_line * (1.0 + rtol) && self.full_line <= self.upper * (1.0 + rtol)
    }
}

pub fn sandwich_check(u: &dyn TestFunction, g: &Geometry, p: f64, s: f64, set: &NormSettings) -> Result<Sandwich> {
    let mut tr = set.clone();
    tr.window = FractionalWindow::Truncated(1.0);
    let bracket = slobodeckij_y(u, g, p, s, &tr)?;
    let full_line = slobodeckij_y(u, g, p, s, &set.clone().full_line())?;
    let upper = bracket + sandwich_constant(p, s) * lp_norm(u, p, set)?;
    Ok(Sandwich {
        bracket,
        full_line,
        upper,
    })
}

/// Which expression of `|u|_{n,p,B}` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SeminormForm {
    /// The inductive definition through `∇_d u` and `Yu`.
    Recursive,
    /// The same sum flattened into words over `{∂_1..∂_d, Y}`.
    Expanded,
    /// `Σ_{2k+⟨β⟩=n} ‖Y^k∂^β u‖_p + Σ_{2k+⟨β⟩=n−1} [Y^k∂^β u]_{Y,1/2,p}`.
    Graded,
    /// `Σ_{2k+⟨β⟩=n−1} |Y^k∂^β u|_{1,p,B}`, plus `‖Y^l u‖_p` when `n = 2l`.
    FirstOrder,
}

/// Kind of a term in the expanded seminorm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TermKind {
    Lp,
    Fractional,
}

/// Words `w` and term kinds such that `|u|_{n,p,B} = Σ ‖w u‖` with `‖·‖`
/// the `L^p` norm or `[·]_{Y,1/2,p}`. Words apply left to right.
pub fn seminorm_words(g: &Geometry, n: usize) -> Vec<(Vec<Direction>, TermKind)> {
    match n {
        0 => vec![(Vec::new(), TermKind::Lp)],
        1 => {
            let mut v: Vec<_> = (0..g.d0())
                .map(|i| (vec![Direction::Partial(i)], TermKind::Lp))
                .collect();
            v.push((Vec::new(), TermKind::Fractional));
            v
        }
        _ => {
            let mut v = Vec::new();
            for i in 0..g.d0() {
                for (w, k) in seminorm_words(g, n - 1) {
                    let mut word = vec![Direction::Partial(i)];
                    word.extend(w);
                    v.push((word, k));
                }
            }
            for (w, k) in seminorm_words(g, n - 2) {
                let mut word = vec![Direction::Y];
                word.extend(w);
                v.push((word, k));
            }
            v
        }
    }
}

/// All `(k, β)` with `2k + ⟨β⟩_B = order`.
pub fn multi_indices(g: &Geometry, order: usize) -> Vec<MultiIndex> {
    fn rec(g: &Geometry, axis: usize, left: usize, beta: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if axis == g.n() {
            if left % 2 == 0 {
                out.push(MultiIndex::new(left / 2, beta.clone()));
            }
            return;
        }
        let w = g.weight(axis);
        let mut b = 0;
        while b * w <= left {
            beta[axis] = b;
            rec(g, axis + 1, left - b * w, beta, out);
            b += 1;
        }
        beta[axis] = 0;
    }
    let mut out = Vec::new();
    rec(g, 0, order, &mut vec![0; g.n()], &mut out);
    out
}

fn half_y(u: &dyn TestFunction, g: &Geometry, p: f64, set: &NormSettings) -> Result<f64> {
    slobodeckij_y(u, g, p, 0.5, set)
}

fn recursive(u: &FieldRef, g: &Geometry, n: usize, p: f64, set: &NormSettings) -> Result<f64> {
    if n == 0 {
        return lp_norm(u.as_ref(), p, set);
    }
    let mut acc = 0.0;
    for i in 0..g.d0() {
        let di = u.derivative(g, Direction::Partial(i))?;
        acc += recursive(&di, g, n - 1, p, set)?;
    }
    if n == 1 {
        acc += half_y(u.as_ref(), g, p, set)?;
    } else {
        acc += recursive(&u.derivative(g, Direction::Y)?, g, n - 2, p, set)?;
    }
    Ok(acc)
}

/// `|u|_{n,p,B}` in the requested form. The recursive and expanded forms are
/// the same finite sum; the graded and first-order forms are equivalent
/// quasi-norms with unquantified constants.
pub fn sobolev_seminorm(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    p: f64,
    form: SeminormForm,
    set: &NormSettings,
) -> Result<f64> {
    if n == 0 {
        return Err(param("n", "seminorm order must be at least 1"));
    }
    check_p(p)?;
    match form {
        SeminormForm::Recursive => recursive(u, g, n, p, set),
        SeminormForm::Expanded => {
            let mut acc = 0.0;
            for (word, kind) in seminorm_words(g, n) {
                let f = apply_word(u, g, &word)?;
                acc += match kind {
                    TermKind::Lp => lp_norm(f.as_ref(), p, set)?,
                    TermKind::Fractional => half_y(f.as_ref(), g, p, set)?,
                };
            }
            Ok(acc)
        }
        SeminormForm::Graded => {
            let mut acc = 0.0;
            for idx in multi_indices(g, n) {
                acc += lp_norm(multi_derivative(u, g, &idx)?.as_ref(), p, set)?;
            }
            for idx in multi_indices(g, n - 1) {
                acc += half_y(multi_derivative(u, g, &idx)?.as_ref(), g, p, set)?;
            }
            Ok(acc)
        }
        SeminormForm::FirstOrder => {
            let mut acc = 0.0;
            for idx in multi_indices(g, n - 1) {
                acc += recursive(&multi_derivative(u, g, &idx)?, g, 1, p, set)?;
            }
            if n % 2 == 0 {
                let idx = MultiIndex::new(n / 2, vec![0; g.n()]);
                acc += lp_norm(multi_derivative(u, g, &idx)?.as_ref(), p, set)?;
            }
            Ok(acc)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SobolevVariant {
    /// `‖u‖_{W^{n,p}_B}`, with every intermediate order.
    Full,
    /// `⦀u⦀ = ‖u‖_p + |u|_{n,p,B}`.
    Triple,
}

fn full_norm(u: &FieldRef, g: &Geometry, n: usize, p: f64, set: &NormSettings) -> Result<f64> {
    let lp = lp_norm(u.as_ref(), p, set)?;
    match n {
        0 => Ok(lp),
        1 => Ok(lp + recursive(u, g, 1, p, set)?),
        _ => {
            let mut acc = lp;
            for i in 0..g.d0() {
                acc += full_norm(&u.derivative(g, Direction::Partial(i))?, g, n - 1, p, set)?;
            }
            acc += full_norm(&u.derivative(g, Direction::Y)?, g, n - 2, p, set)?;
            Ok(acc)
        }
    }
}

pub fn sobolev_norm(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    p: f64,
    variant: SobolevVariant,
    set: &NormSettings,
) -> Result<f64> {
    check_p(p)?;
    if n == 0 {
        return Err(param("n", "Sobolev order must be at least 1"));
    }
    match variant {
        SobolevVariant::Full => full_norm(u, g, n, p, set),
        SobolevVariant::Triple => {
            Ok(lp_norm(u.as_ref(), p, set)? + recursive(u, g, n, p, set)?)
        }
    }
}

/// Sampling of `(z, h)` pairs for Hölder quotients: `z` on a trapezoid grid
/// of the support box, `h = ±W 2^{−j/2}` for `j = −4 ..= 2·levels` with `W`
/// the box width along the flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderSampling {
    pub points: usize,
    pub levels: usize,
}

impl Default for HolderSampling {
    fn default() -> Self {
        Self { points: 20, levels: 16 }
    }
}

impl HolderSampling {
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            levels: self.levels + 4,
        }
    }
}

/// Sampled `sup |u(e^{hX}z) − u(z)| / |h|^{exponent}`.
///
/// Pairs with both `z` and `e^{hX}z` outside the support give zero, and a
/// pair with only the endpoint inside is the reversed pair of one with `z`
/// inside, so `z` ranges over the support box only.
pub fn holder_quotient(
    u: &dyn TestFunction,
    g: &Geometry,
    dir: Direction,
    exponent: f64,
    hs: &HolderSampling,
) -> Result<f64> {
    let Some(b) = integration_box(u)? else {
        return Ok(0.0);
    };
    let axis = match dir {
        Direction::Partial(i) => i + 1,
        Direction::Y => 0,
    };
    let w = b.width(axis);
    let steps: Vec<f64> = (-4..=2 * hs.levels as i32)
        .map(|j| w * 2f64.powf(-j as f64 / 2.0))
        .collect();
    let spec = GridSpec::on_box(&b, hs.points)?;
    let d = g.dim();
    let q = par_max(spec.len(), |k| {
        let mut z = [0.0; MAX_AXES];
        let mut f = [0.0; MAX_AXES];
        spec.coords(k, &mut z[..d]);
        let u0 = u.eval(&z[..d]);
        let mut best: f64 = 0.0;
        for &h in &steps {
            let den = h.powf(exponent);
            for sg in [h, -h] {
                flow_raw(g, dir, &z[..d], sg, &mut f[..d]);
                best = best.max((u.eval(&f[..d]) - u0).abs() / den);
            }
        }
        best
    });
    Ok(q.max(0.0))
}

/// `‖u‖_{C^{k,α}_B}` by the recursive definition with sampled suprema.
pub fn holder_norm(u: &FieldRef, g: &Geometry, k: usize, alpha: f64, hs: &HolderSampling) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param("alpha", "Hölder exponent must lie in (0, 1]"));
    }
    let sup = sup_norm(u.as_ref(), hs.points)?;
    match k {
        0 => {
            let mut acc = sup;
            for i in 0..g.d0() {
                acc += holder_quotient(u.as_ref(), g, Direction::Partial(i), alpha, hs)?;
            }
            Ok(acc + holder_quotient(u.as_ref(), g, Direction::Y, alpha / 2.0, hs)?)
        }
        1 => {
            let mut acc = sup;
            for i in 0..g.d0() {
                acc += holder_norm(&u.derivative(g, Direction::Partial(i))?, g, 0, alpha, hs)?;
            }
            Ok(acc + holder_quotient(u.as_ref(), g, Direction::Y, (alpha + 1.0) / 2.0, hs)?)
        }
        _ => {
            let mut acc = sup;
            for i in 0..g.d0() {
                acc += holder_norm(&u.derivative(g, Direction::Partial(i))?, g, k - 1, alpha, hs)?;
            }
            Ok(acc + holder_norm(&u.derivative(g, Direction::Y)?, g, k - 2, alpha, hs)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderEntry {
    pub k: usize,
    pub alpha: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub p: f64,
    pub lp: f64,
    pub slobodeckij_y: f64,
    pub seminorms: BTreeMap<usize, f64>,
    pub sobolev: BTreeMap<usize, f64>,
    pub triple: BTreeMap<usize, f64>,
    pub holder: Vec<HolderEntry>,
    pub settings: NormSettings,
    pub holder_sampling: HolderSampling,
}

impl NormReport {
    pub fn compute(
        u: &FieldRef,
        g: &Geometry,
        p: f64,
        orders: &[usize],
        holder: &[(usize, f64)],
        set: &NormSettings,
        hs: &HolderSampling,
    ) -> Result<Self> {
        let mut r = Self {
            p,
            lp: lp_norm(u.as_ref(), p, set)?,
            slobodeckij_y: half_y(u.as_ref(), g, p, set)?,
            seminorms: BTreeMap::new(),
            sobolev: BTreeMap::new(),
            triple: BTreeMap::new(),
            holder: Vec::new(),
            settings: set.clone(),
            holder_sampling: *hs,
        };
        for &n in orders {
            let semi = sobolev_seminorm(u, g, n, p, SeminormForm::Recursive, set)?;
            r.seminorms.insert(n, semi);
            r.triple.insert(n, r.lp + semi);
            r.sobolev.insert(n, sobolev_norm(u, g, n, p, SobolevVariant::Full, set)?);
        }
        for &(k, alpha) in holder {
            r.holder.push(HolderEntry {
                k,
                alpha,
                value: holder_norm(u, g, k, alpha, hs)?,
            });
        }
        Ok(r)
    }

    /// CSV rows `quantity,order,value`.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut v = vec![
            ("lp".to_string(), String::new(), self.lp),
            ("slobodeckij_y".to_string(), String::new(), self.slobodeckij_y),
        ];
        for (n, x) in &self.seminorms {
            v.push(("seminorm".into(), n.to_string(), *x));
        }
        for (n, x) in &self.sobolev {
            v.push(("sobolev".into(), n.to_string(), *x));
        }
        for (n, x) in &self.triple {
            v.push(("triple".into(), n.to_string(), *x));
        }
        for h in &self.holder {
            v.push(("holder".into(), format!("{}:{}", h.k, h.alpha), h.value));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::{AnalyticField, Dilated};
    use crate::structure::BlockStructure;

    fn langevin() -> Geometry {
        Geometry::new(BlockStructure::langevin(1)).unwrap()
    }

    fn gauss() -> FieldRef {
        Arc::new(AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap())
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = langevin();
        let z: FieldRef = Arc::new(AnalyticField::zero(3));
        let s = NormSettings::default();
        assert_eq!(lp_norm(z.as_ref(), 2.0, &s).unwrap(), 0.0);
        assert_eq!(sobolev_seminorm(&z, &g, 2, 2.0, SeminormForm::Recursive, &s).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&z, &g, 2, 2.0, SobolevVariant::Full, &s).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_l2_matches_closed_form() {
        // ∫ e^{-2|z|^2} = (π/2)^{3/2}
        let v = lp_power(gauss().as_ref(), 2.0, &NormSettings::default()).unwrap();
        let exact = (std::f64::consts::PI / 2.0).powf(1.5);
        assert!((v - exact).abs() < 1e-6 * exact, "{v} {exact}");
    }

    #[test]
    fn lp_scaling_exponent() {
        let g = langevin();
        let u = gauss();
        let s = NormSettings::default();
        let d = Dilated::new(u.clone(), &g, 2.0).unwrap();
        let r = lp_norm(&d, 2.0, &s).unwrap() / lp_norm(u.as_ref(), 2.0, &s).unwrap();
        assert!((r - 2f64.powi(-3)).abs() < 1e-10);
    }

    #[test]
    fn full_line_slobodeckij_scales_exactly() {
        let g = langevin();
        let u = gauss();
        let s = NormSettings::default().with_points(16).full_line();
        let d = Dilated::new(u.clone(), &g, 2.0).unwrap();
        let r = slobodeckij_y(&d, &g, 2.0, 0.5, &s).unwrap() / slobodeckij_y(u.as_ref(), &g, 2.0, 0.5, &s).unwrap();
        assert!((r - 2f64.powi(-2)).abs() < 1e-9, "{r}");
    }

    #[test]
    fn slobodeckij_self_converges() {
        let g = langevin();
        let u = gauss();
        let a = slobodeckij_y(u.as_ref(), &g, 2.0, 0.5, &NormSettings::default().with_points(16)).unwrap();
        let mut fine = NormSettings::default().with_points(24);
        fine.per_band = 6;
        let b = slobodeckij_y(u.as_ref(), &g, 2.0, 0.5, &fine).unwrap();
        assert!((a - b).abs() < 1e-2 * b, "{a} {b}");
    }

    #[test]
    fn flat_full_line_matches_fourier_value() {
        // Y = ∂_t; ∫∫ |f(t+h)-f(t)|^2 h^{-2} = ∫ |ω| |f̂(ω)|^2 dω = 2π for f = e^{-t^2}
        let g = Geometry::new(BlockStructure::new(vec![1], vec![])).unwrap();
        let u = AnalyticField::gaussian(&[1.0, 1.0], &[0.0; 2], 1.0).unwrap();
        let mut s = NormSettings::default().with_points(40).full_line();
        s.per_band = 6;
        let v = slobodeckij_power(&u, &g, 2.0, 0.5, &s).unwrap();
        let exact = 2.0 * std::f64::consts::PI * (std::f64::consts::PI / 2.0).sqrt();
        assert!((v - exact).abs() < 1e-3 * exact, "{v} {exact}");
    }

    #[test]
    fn sandwich_holds_for_gaussian() {
        let g = langevin();
        let s = NormSettings::default().with_points(16);
        let sw = sandwich_check(gauss().as_ref(), &g, 2.0, 0.5, &s).unwrap();
        assert!(sw.holds(1e-12), "{sw:?}");
        assert!((sandwich_constant(2.0, 0.5) - 2f64.sqrt() * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn expanded_form_equals_recursive() {
        let g = langevin();
        let u = gauss();
        let s = NormSettings::default().with_points(12);
        for n in 1..=3 {
            let a = sobolev_seminorm(&u, &g, n, 2.0, SeminormForm::Recursive, &s).unwrap();
            let b = sobolev_seminorm(&u, &g, n, 2.0, SeminormForm::Expanded, &s).unwrap();
            assert!((a - b).abs() < 1e-12 * a, "{n}: {a} {b}");
        }
    }

    #[test]
    fn multi_index_enumeration() {
        let g = langevin();
        // order 3 on Langevin d=1: ∂_v^3, ∂_v Y, ∂_p
        let mut v: Vec<_> = multi_indices(&g, 3).into_iter().map(|m| (m.k, m.beta)).collect();
        v.sort();
        assert_eq!(v, vec![(0, vec![0, 1]), (0, vec![3, 0]), (1, vec![1, 0])]);
        assert_eq!(seminorm_words(&g, 3).len(), 3 + 2);
    }

    #[test]
    fn first_order_triple_equals_full() {
        let g = langevin();
        let u = gauss();
        let s = NormSettings::default().with_points(12);
        let a = sobolev_norm(&u, &g, 1, 2.0, SobolevVariant::Full, &s).unwrap();
        let b = sobolev_norm(&u, &g, 1, 2.0, SobolevVariant::Triple, &s).unwrap();
        assert_eq!(a, b);
        let c = sobolev_norm(&u, &g, 2, 2.0, SobolevVariant::Full, &s).unwrap();
        let d = sobolev_norm(&u, &g, 2, 2.0, SobolevVariant::Triple, &s).unwrap();
        assert!(c >= d);
    }

    #[test]
    fn lipschitz_quotient_recovers_slope() {
        // u = 3 v on a bounded box: quotient along ∂_v is 3
        let g = langevin();
        let u = AnalyticField::polynomial(3, &[(3.0, vec![0, 1, 0])])
            .unwrap()
            .with_support(BoxDomain::cube(3, 1.0));
        let q = holder_quotient(&u, &g, Direction::Partial(0), 1.0, &HolderSampling::default()).unwrap();
        assert!((q - 3.0).abs() < 0.05 * 3.0, "{q}");
    }

    #[test]
    fn constant_has_zero_holder_seminorm() {
        let g = langevin();
        let u: FieldRef = Arc::new(
            AnalyticField::polynomial(3, &[(2.0, vec![0, 0, 0])])
                .unwrap()
                .with_support(BoxDomain::cube(3, 1.0)),
        );
        let h = HolderSampling { points: 6, levels: 4 };
        assert_eq!(holder_norm(&u, &g, 0, 0.5, &h).unwrap(), 2.0);
    }
}
