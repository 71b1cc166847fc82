//! Taylor polynomials adapted to the group, remainder rates, the group
//! mollifier, and horizontal chains reaching pure space translations.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::{multi_derivative, Direction, FieldRef, TestFunction, MAX_AXES};
use crate::fit::ExponentFit;
use crate::grid::{flow_y_raw, sample, BoxDomain, GridFunction, GridSpec};
use crate::norms::{lp_norm, multi_indices, sobolev_norm, NormSettings, SobolevVariant};
use crate::quadrature::{gauss_on, pairwise_sum};
use crate::structure::{Geometry, MultiIndex};

/// `Y^k∂^β u(ζ)` for every `2k + ⟨β⟩_B ≤ n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorData {
    pub zeta: Vec<f64>,
    pub order: usize,
    pub coefficients: BTreeMap<MultiIndex, f64>,
}

/// `(k, β)` with `2k + ⟨β⟩_B ≤ n`, lowest order first.
pub fn indices_up_to(g: &Geometry, n: usize) -> Vec<MultiIndex> {
    (0..=n).flat_map(|o| multi_indices(g, o)).collect()
}

/// `(t^k x^β)/(k! β!)` for the increment `inc = (t, x)`.
fn monomial(idx: &MultiIndex, inc: &[f64]) -> f64 {
    let mut v = inc[0].powi(idx.k as i32);
    for (i, &b) in idx.beta.iter().enumerate() {
        if b > 0 {
            v *= inc[i + 1].powi(b as i32);
        }
    }
    v / idx.factorial()
}

impl TaylorData {
    pub fn from_field(u: &FieldRef, g: &Geometry, zeta: &[f64], n: usize) -> Result<Self> {
        if zeta.len() != g.dim() {
            return Err(Error::Dimension {
                expected: g.dim(),
                got: zeta.len(),
            });
        }
        let mut coefficients = BTreeMap::new();
        for idx in indices_up_to(g, n) {
            let v = multi_derivative(u, g, &idx)?.eval(zeta);
            coefficients.insert(idx, v);
        }
        Ok(Self {
            zeta: zeta.to_vec(),
            order: n,
            coefficients,
        })
    }

    /// `T_n u(ζ, z) = Σ Y^k∂^β u(ζ) (t−s)^k (x − e^{(t−s)B}ξ)^β / (k!β!)`.
    pub fn eval(&self, g: &Geometry, z: &[f64]) -> Result<f64> {
        let d = g.dim();
        if z.len() != d {
            return Err(Error::Dimension { expected: d, got: z.len() });
        }
        let mut inc = [0.0; MAX_AXES];
        g.increment_raw(&self.zeta, z, &mut inc[..d]);
        let mut terms = Vec::new();
        for idx in indices_up_to(g, self.order) {
            let c = self.coefficients.get(&idx).ok_or_else(|| Error::MissingCoefficient {
                k: idx.k,
                beta: idx.beta.clone(),
            })?;
            terms.push(c * monomial(&idx, &inc[..d]));
        }
        Ok(pairwise_sum(&terms))
    }
}

pub fn taylor_eval(td: &TaylorData, g: &Geometry, z: &[f64]) -> Result<f64> {
    td.eval(g, z)
}

/// The derivatives entering `T_n u`, for evaluation at many base points.
#[derive(Clone, Debug)]
pub struct TaylorExpander {
    geometry: Geometry,
    order: usize,
    terms: Vec<(MultiIndex, FieldRef)>,
}

impl TaylorExpander {
    pub fn new(u: &FieldRef, g: &Geometry, n: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for idx in indices_up_to(g, n) {
            let f = multi_derivative(u, g, &idx)?;
            terms.push((idx, f));
        }
        Ok(Self {
            geometry: g.clone(),
            order: n,
            terms,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `T_n u(ζ, ·)` at the point whose increment from `ζ` is `inc = ζ^{-1}∘z`.
    pub fn eval_increment(&self, zeta: &[f64], inc: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (idx, f) in &self.terms {
            let m = monomial(idx, inc);
            if m != 0.0 {
                acc += f.eval(zeta) * m;
            }
        }
        acc
    }

    pub fn eval(&self, zeta: &[f64], z: &[f64]) -> f64 {
        let d = self.geometry.dim();
        let mut inc = [0.0; MAX_AXES];
        self.geometry.increment_raw(zeta, z, &mut inc[..d]);
        self.eval_increment(zeta, &inc[..d])
    }

    pub fn data(&self, zeta: &[f64]) -> TaylorData {
        TaylorData {
            zeta: zeta.to_vec(),
            order: self.order,
            coefficients: self
                .terms
                .iter()
                .map(|(i, f)| (i.clone(), f.eval(zeta)))
                .collect(),
        }
    }
}

/// `z ↦ u(z) − T_n u(z∘ζ, z)`.
#[derive(Debug)]
struct Remainder {
    u: FieldRef,
    expander: TaylorExpander,
    zeta: Vec<f64>,
    inc: Vec<f64>,
    support: BoxDomain,
}

impl TestFunction for Remainder {
    fn eval(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let mut base = [0.0; MAX_AXES];
        self.expander.geometry.compose_raw(z, &self.zeta, &mut base[..d]);
        self.u.eval(z) - self.expander.eval_increment(&base[..d], &self.inc)
    }
    fn support(&self) -> BoxDomain {
        self.support.clone()
    }
    fn derivative(&self, _g: &Geometry, _dir: Direction) -> Result<FieldRef> {
        Err(Error::Unsupported("remainders are only integrated".into()))
    }
}

/// One row of a rate experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub scale: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateStudy {
    pub points: Vec<RatePoint>,
    pub fit: ExponentFit,
}

/// `‖u − T_n u(·∘ζ, ·)‖_p`.
pub fn taylor_remainder(u: &FieldRef, g: &Geometry, n: usize, p: f64, zeta: &[f64], set: &NormSettings) -> Result<f64> {
    let expander = TaylorExpander::new(u, g, n)?;
    remainder_with(u, &expander, g, p, zeta, set)
}

fn remainder_with(
    u: &FieldRef,
    expander: &TaylorExpander,
    g: &Geometry,
    p: f64,
    zeta: &[f64],
    set: &NormSettings,
) -> Result<f64> {
    let d = g.dim();
    let mut inv = vec![0.0; d];
    g.invert_raw(zeta, &mut inv);
    let sup = u.support();
    let moved = BoxDomain::product_bound(g, &sup, &BoxDomain::point(&inv));
    let r = Remainder {
        u: u.clone(),
        expander: expander.clone(),
        zeta: zeta.to_vec(),
        inc: inv,
        support: sup.union(&moved),
    };
    lp_norm(&r, p, set)
}

/// Remainders along `D_σ ζ₀` and the log-log fit against `‖D_σ ζ₀‖_B`.
pub fn taylor_remainder_rate(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    p: f64,
    zeta0: &[f64],
    sigmas: &[f64],
    set: &NormSettings,
) -> Result<RateStudy> {
    if sigmas.len() < 2 {
        return Err(param("sigmas", "need at least two scales"));
    }
    let expander = TaylorExpander::new(u, g, n)?;
    let d = g.dim();
    let mut points = Vec::new();
    for &s in sigmas {
        let mut zeta = vec![0.0; d];
        g.dilate_raw(s, zeta0, &mut zeta);
        let v = remainder_with(u, &expander, g, p, &zeta, set)?;
        points.push(RatePoint {
            scale: g.hom_norm_raw(&zeta),
            value: v,
        });
    }
    let fit = ExponentFit::fit(&points.iter().map(|r| (r.scale, r.value)).collect::<Vec<_>>())?;
    Ok(RateStudy { points, fit })
}

/// `exp(−1/(1−ρ²))(1 + ρ/2)` on `(−1, 1)`; the tilt gives nonzero first
/// moments, so `u_{1,ε} − u` is of exact order `ε`.
pub fn tilted_bump(rho: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    (-1.0 / (1.0 - rho * rho)).exp() * (1.0 + 0.5 * rho)
}

/// `∫_{-1}^{1}` of [`tilted_bump`], by composite Gauss.
fn tilted_bump_mass() -> f64 {
    let panels = 64;
    let mut parts = Vec::new();
    for k in 0..panels {
        let a = -1.0 + 2.0 * k as f64 / panels as f64;
        let (x, w) = gauss_on(a, a + 2.0 / panels as f64, 12);
        parts.push(x.iter().zip(&w).map(|(x, w)| w * tilted_bump(*x)).sum::<f64>());
    }
    pairwise_sum(&parts)
}

/// Product bump `φ(η) = c Π_a β(η_a / r_a)` with half-widths `r_t = a²`,
/// `r_i = a^{2j+1}` in layer `j` and `a = 1/(1 + Σ_j d_j^{1/(4j+2)})`, so the
/// support box lies in `{‖η‖_B < 1}`.
#[derive(Clone, Debug)]
pub struct BumpKernel {
    geometry: Geometry,
    half_widths: Vec<f64>,
    constant: f64,
    nodes: Vec<[f64; MAX_AXES]>,
    weights: Vec<f64>,
}

impl BumpKernel {
    /// `per_axis` Gauss nodes on each axis for the discrete kernel used by
    /// [`mollify`]; its weights are rescaled to total exactly one.
    pub fn new(g: &Geometry, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(param("per_axis", "must be positive"));
        }
        let dims = &g.structure().layer_dims;
        let denom: f64 = 1.0
            + dims
                .iter()
                .enumerate()
                .map(|(j, &dj)| (dj as f64).powf(1.0 / (4 * j + 2) as f64))
                .sum::<f64>();
        let a = 1.0 / denom;
        let d = g.dim();
        let half_widths: Vec<f64> = (0..d).map(|ax| a.powi(g.axis_weight(ax) as i32)).collect();
        let m1 = tilted_bump_mass();
        let constant = 1.0 / half_widths.iter().map(|r| r * m1).product::<f64>();
        let axes: Vec<(Vec<f64>, Vec<f64>)> = half_widths.iter().map(|&r| gauss_on(-r, r, per_axis)).collect();
        let total = per_axis.pow(d as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut raw = Vec::with_capacity(total);
        for k in 0..total {
            let mut rem = k;
            let mut eta = [0.0; MAX_AXES];
            let mut w = 1.0;
            for ax in (0..d).rev() {
                let i = rem % per_axis;
                rem /= per_axis;
                eta[ax] = axes[ax].0[i];
                w *= axes[ax].1[i];
            }
            let phi = constant * Self::shape(&half_widths, &eta[..d]);
            nodes.push(eta);
            raw.push(w * phi);
        }
        let mass = pairwise_sum(&raw);
        let weights = raw.iter().map(|w| w / mass).collect();
        Ok(Self {
            geometry: g.clone(),
            half_widths,
            constant,
            nodes,
            weights,
        })
    }

    fn shape(r: &[f64], eta: &[f64]) -> f64 {
        eta.iter().zip(r).map(|(e, r)| tilted_bump(e / r)).product()
    }

    pub fn eval(&self, eta: &[f64]) -> f64 {
        self.constant * Self::shape(&self.half_widths, eta)
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    pub fn support(&self) -> BoxDomain {
        BoxDomain::new(
            self.half_widths.iter().map(|r| -r).collect(),
            self.half_widths.clone(),
        )
    }

    /// `Σ` of the discrete kernel weights.
    pub fn discrete_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `∫ φ(D_{1/ε}(ζ^{-1}∘z)) dζ / ε^𝐝` as an iterated integral over
    /// `ζ = (s, ξ)`. For fixed `s` the increment is `x − e^{(t−s)B}ξ` with a
    /// unipotent lower-triangular `e^{(t−s)B}`, so the support in `ξ_i`
    /// given `ξ_{<i}` is an explicit interval; each level uses `panels`
    /// Gauss panels of `nodes` points on that interval.
    pub fn mass_at(&self, z: &[f64], eps: f64, panels: usize, nodes: usize) -> Result<f64> {
        let g = &self.geometry;
        let d = g.dim();
        if z.len() != d {
            return Err(Error::Dimension { expected: d, got: z.len() });
        }
        if !(eps > 0.0) || panels == 0 || nodes == 0 {
            return Err(param("eps", "need eps > 0 and a non-empty rule"));
        }
        let r: Vec<f64> = (0..d)
            .map(|a| self.half_widths[a] * eps.powi(g.axis_weight(a) as i32))
            .collect();
        let (x, w) = crate::quadrature::gauss_legendre(nodes);
        let rule: Vec<(f64, f64)> = (0..panels)
            .flat_map(|k| {
                let (x, w) = (&x, &w);
                let (lo, h) = (-1.0 + 2.0 * k as f64 / panels as f64, 1.0 / panels as f64);
                x.iter().zip(w).map(move |(x, w)| (lo + h * (x + 1.0), h * w)).collect::<Vec<_>>()
            })
            .collect();
        let scale = eps.powi(g.hom_dim() as i32);
        let mut total = 0.0;
        for &(rs, ws) in &rule {
            // s = t − τ with τ = r_0 ρ
            let tau = r[0] * rs;
            let m = g.matrix_exp(tau);
            let mut xi = vec![0.0; d - 1];
            let inner = self.nested(&m, z, &r, &rule, 0, &mut xi, eps);
            total += ws * r[0] * inner * self.axis_factor(0, tau / eps.powi(2));
        }
        Ok(total / scale)
    }

    fn axis_factor(&self, a: usize, eta: f64) -> f64 {
        tilted_bump(eta / self.half_widths[a])
    }

    #[allow(clippy::too_many_arguments)]
    fn nested(
        &self,
        m: &nalgebra::DMatrix<f64>,
        z: &[f64],
        r: &[f64],
        rule: &[(f64, f64)],
        i: usize,
        xi: &mut Vec<f64>,
        eps: f64,
    ) -> f64 {
        let n = xi.len();
        if i == n {
            return self.constant;
        }
        let g = &self.geometry;
        // y_i = x_i − ξ_i − Σ_{j<i} m_ij ξ_j
        let shift: f64 = (0..i).map(|j| m[(i, j)] * xi[j]).sum();
        let centre = z[i + 1] - shift;
        let scale_i = eps.powi(g.axis_weight(i + 1) as i32);
        let mut acc = 0.0;
        for &(rho, w) in rule {
            let y = r[i + 1] * rho;
            xi[i] = centre - y;
            let f = self.axis_factor(i + 1, y / scale_i);
            if f != 0.0 {
                acc += w * r[i + 1] * f * self.nested(m, z, r, rule, i + 1, xi, eps);
            }
        }
        acc
    }
}

/// `u_{n,ε}` as a pointwise quadrature: `Σ_k w_k T_{n−1}u(z∘(D_ε η_k)^{-1}, z)`.
#[derive(Clone, Debug)]
pub struct Mollified {
    expander: TaylorExpander,
    kernel: Arc<BumpKernel>,
    eps: f64,
    increments: Vec<[f64; MAX_AXES]>,
    support: BoxDomain,
}

impl Mollified {
    pub fn new(u: &FieldRef, g: &Geometry, n: usize, eps: f64, kernel: Arc<BumpKernel>) -> Result<Self> {
        if n == 0 {
            return Err(param("n", "mollifier order must be at least 1"));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(param("eps", "must lie in (0, 1]"));
        }
        let d = g.dim();
        let expander = TaylorExpander::new(u, g, n - 1)?;
        let increments = kernel
            .nodes
            .iter()
            .map(|eta| {
                let mut w = [0.0; MAX_AXES];
                g.dilate_raw(eps, &eta[..d], &mut w[..d]);
                w
            })
            .collect();
        let kbox = kernel.support().dilated_preimage(g, 1.0 / eps);
        let support = BoxDomain::product_bound(g, &u.support(), &kbox);
        Ok(Self {
            expander,
            kernel,
            eps,
            increments,
            support,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl TestFunction for Mollified {
    fn eval(&self, z: &[f64]) -> f64 {
        let g = &self.expander.geometry;
        let d = z.len();
        let mut inv = [0.0; MAX_AXES];
        let mut base = [0.0; MAX_AXES];
        let mut acc = 0.0;
        for (w, wt) in self.increments.iter().zip(&self.kernel.weights) {
            g.invert_raw(&w[..d], &mut inv[..d]);
            g.compose_raw(z, &inv[..d], &mut base[..d]);
            acc += wt * self.expander.eval_increment(&base[..d], &w[..d]);
        }
        acc
    }
    fn support(&self) -> BoxDomain {
        self.support.clone()
    }
    fn derivative(&self, _g: &Geometry, _dir: Direction) -> Result<FieldRef> {
        Err(Error::Unsupported("sample the mollified function on a grid to differentiate it".into()))
    }
}

/// `u_{n,ε}` sampled on `spec`.
pub fn mollify(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    eps: f64,
    kernel: Arc<BumpKernel>,
    spec: &GridSpec,
    margin: usize,
) -> Result<GridFunction> {
    let m = Mollified::new(u, g, n, eps, kernel)?;
    sample(&m, spec, margin)
}

/// `‖u − u_{n,ε}‖_p` over the ε grid, fitted against ε.
pub fn mollify_rate(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    p: f64,
    eps_grid: &[f64],
    kernel: Arc<BumpKernel>,
    set: &NormSettings,
) -> Result<RateStudy> {
    if eps_grid.len() < 2 {
        return Err(param("eps_grid", "need at least two values"));
    }
    let mut points = Vec::new();
    for &eps in eps_grid {
        let m = Mollified::new(u, g, n, eps, kernel.clone())?;
        let diff = Difference {
            a: u.clone(),
            b: Arc::new(m),
        };
        points.push(RatePoint {
            scale: eps,
            value: lp_norm(&diff, p, set)?,
        });
    }
    let fit = ExponentFit::fit(&points.iter().map(|r| (r.scale, r.value)).collect::<Vec<_>>())?;
    Ok(RateStudy { points, fit })
}

#[derive(Debug)]
struct Difference {
    a: FieldRef,
    b: FieldRef,
}

impl TestFunction for Difference {
    fn eval(&self, z: &[f64]) -> f64 {
        self.a.eval(z) - self.b.eval(z)
    }
    fn support(&self) -> BoxDomain {
        self.a.support().union(&self.b.support())
    }
    fn derivative(&self, _g: &Geometry, _dir: Direction) -> Result<FieldRef> {
        Err(Error::Unsupported("differences are only integrated".into()))
    }
}

/// Grid used to differentiate `u_{n,ε}` in [`mollify_inverse_rate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifyGrid {
    pub points: usize,
    pub margin: usize,
}

impl Default for MollifyGrid {
    fn default() -> Self {
        Self { points: 33, margin: 3 }
    }
}

/// `‖u_{n,ε}‖_{W^{m,p}_B}` over the ε grid with finite-difference derivatives
/// of the sampled mollification.
#[allow(clippy::too_many_arguments)]
pub fn mollify_inverse_rate(
    u: &FieldRef,
    g: &Geometry,
    n: usize,
    m: usize,
    p: f64,
    eps_grid: &[f64],
    kernel: Arc<BumpKernel>,
    grid: &MollifyGrid,
    set: &NormSettings,
) -> Result<RateStudy> {
    if m <= n {
        return Err(param("m", "need m > n"));
    }
    if eps_grid.len() < 2 {
        return Err(param("eps_grid", "need at least two values"));
    }
    let mut points = Vec::new();
    for &eps in eps_grid {
        let mol = Mollified::new(u, g, n, eps, kernel.clone())?;
        let sup = mol.support();
        let h: Vec<f64> = (0..g.dim())
            .map(|a| sup.width(a) / (grid.points - 1 - 2 * grid.margin) as f64)
            .collect();
        let lo = (0..g.dim()).map(|a| sup.lo[a] - grid.margin as f64 * h[a]).collect();
        let hi = (0..g.dim()).map(|a| sup.hi[a] + grid.margin as f64 * h[a]).collect();
        let spec = GridSpec::new(lo, hi, vec![grid.points; g.dim()])?;
        let gf: FieldRef = Arc::new(sample(&mol, &spec, grid.margin)?);
        points.push(RatePoint {
            scale: eps,
            value: sobolev_norm(&gf, g, m, p, SobolevVariant::Full, set)?,
        });
    }
    let fit = ExponentFit::fit(&points.iter().map(|r| (r.scale, r.value)).collect::<Vec<_>>())?;
    Ok(RateStudy { points, fit })
}

/// A flow segment of a horizontal chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Segment {
    /// `e^{δ X_v}` with `X_v = Σ_{i<d} v_i ∂_{x_i}`.
    Horizontal { v: Vec<f64>, delta: f64 },
    /// `e^{h Y}`.
    Drift { h: f64 },
}

impl Segment {
    pub fn apply(&self, g: &Geometry, z: &mut [f64]) {
        match self {
            Segment::Horizontal { v, delta } => {
                for (i, vi) in v.iter().enumerate() {
                    z[i + 1] += delta * vi;
                }
            }
            Segment::Drift { h } => {
                let d = z.len();
                let mut out = [0.0; MAX_AXES];
                flow_y_raw(g, z, *h, &mut out[..d]);
                z.copy_from_slice(&out[..d]);
            }
        }
    }
}

/// One `γ^{(k)}_{v,δ}` block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainBlock {
    pub layer: usize,
    pub v: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainPath {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub blocks: Vec<ChainBlock>,
    pub segments: Vec<Segment>,
    /// `max_k |δ_k| / |ξ|_B`, zero for an empty path.
    pub c_hat: f64,
    /// `|γ(start) − end|_∞` after running every segment.
    pub residual: f64,
}

impl ChainPath {
    pub fn run(&self, g: &Geometry) -> Vec<f64> {
        let mut z = self.start.clone();
        for s in &self.segments {
            s.apply(g, &mut z);
        }
        z
    }
}

/// Segments of `γ^{(k)}_{v,δ}`:
/// `γ^{(0)} = e^{δX_v}`, `γ^{(k)}_δ = e^{−δ²Y} γ^{(k−1)}_{−δ} e^{δ²Y} γ^{(k−1)}_δ`.
pub fn chain_segments(k: usize, v: &[f64], delta: f64) -> Vec<Segment> {
    if k == 0 {
        return vec![Segment::Horizontal {
            v: v.to_vec(),
            delta,
        }];
    }
    let mut s = chain_segments(k - 1, v, delta);
    s.push(Segment::Drift { h: delta * delta });
    s.extend(chain_segments(k - 1, v, -delta));
    s.push(Segment::Drift { h: -delta * delta });
    s
}

/// Horizontal chain from `z` to `z ∘ (0, ξ)`: layer by layer, the block
/// `γ^{(k)}_{v_k,δ_k}` moves layer `k` by `δ_k^{2k+1} B^k v_k` and leaves
/// lower layers fixed.
pub fn connect_chain(g: &Geometry, z: &[f64], xi: &[f64]) -> Result<ChainPath> {
    let d = g.dim();
    let n = g.n();
    if z.len() != d || xi.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: xi.len(),
        });
    }
    let cert = g.check_hormander(false);
    if !cert.holds {
        return Err(Error::NotHormander { rank: cert.rank, n });
    }
    let mut target = vec![0.0; d];
    let mut zx = vec![0.0; d];
    zx[1..].copy_from_slice(xi);
    g.compose_raw(z, &zx, &mut target);
    let xi_norm = g.hom_norm_raw(&zx);
    let mut cur = z.to_vec();
    let mut blocks = Vec::new();
    let mut segments = Vec::new();
    let mut c_hat: f64 = 0.0;
    let offs = g.layer_offsets().to_vec();
    for k in 0..=g.r() {
        // remaining displacement in the frame of the current point
        let mut rest = vec![0.0; d];
        g.increment_raw(&cur, &target, &mut rest);
        let mut want = vec![0.0; n];
        want[offs[k]..offs[k + 1]].copy_from_slice(&rest[1 + offs[k]..1 + offs[k + 1]]);
        let size = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        if size == 0.0 {
            continue;
        }
        let w = g.solve_layer_preimage(k, &want)?;
        let wn = w[..g.d0()].iter().map(|v| v * v).sum::<f64>().sqrt();
        let delta = wn.powf(1.0 / (2 * k + 1) as f64);
        let v: Vec<f64> = w[..g.d0()].iter().map(|c| c / wn).collect();
        let segs = chain_segments(k, &v, delta);
        for s in &segs {
            s.apply(g, &mut cur);
        }
        segments.extend(segs);
        blocks.push(ChainBlock { layer: k, v, delta });
        if xi_norm > 0.0 {
            c_hat = c_hat.max(delta / xi_norm);
        }
    }
    let residual = cur
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ChainPath {
        start: z.to_vec(),
        end: target,
        blocks,
        segments,
        c_hat,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::structure::BlockStructure;

    fn langevin() -> Geometry {
        Geometry::new(BlockStructure::langevin(1)).unwrap()
    }

    fn gauss() -> FieldRef {
        Arc::new(AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.1, -0.2, 0.3], 1.0).unwrap())
    }

    #[test]
    fn zeroth_order_is_the_base_value() {
        let g = langevin();
        let u = gauss();
        let zeta = [0.3, 0.2, -0.1];
        let td = TaylorData::from_field(&u, &g, &zeta, 0).unwrap();
        assert_eq!(td.eval(&g, &[1.0, 2.0, 3.0]).unwrap(), u.eval(&zeta));
    }

    #[test]
    fn velocity_is_reproduced_at_first_order() {
        let g = langevin();
        let u: FieldRef = Arc::new(AnalyticField::polynomial(3, &[(1.0, vec![0, 1, 0])]).unwrap());
        let td = TaylorData::from_field(&u, &g, &[0.7, -0.4, 1.3], 1).unwrap();
        for z in [[0.0, 1.0, 2.0], [-1.5, 0.3, -0.7]] {
            assert!((td.eval(&g, &z).unwrap() - z[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_coefficient_is_reported() {
        let g = langevin();
        let mut td = TaylorData::from_field(&gauss(), &g, &[0.0; 3], 1).unwrap();
        td.coefficients.clear();
        assert!(matches!(td.eval(&g, &[0.0; 3]), Err(Error::MissingCoefficient { .. })));
    }

    #[test]
    fn product_bound_contains_products() {
        use rand::{Rng, SeedableRng};
        let g = Geometry::new(BlockStructure::three_layer()).unwrap();
        let d = g.dim();
        let a = BoxDomain::new(vec![-1.0; d], vec![0.5; d]);
        let b = BoxDomain::new(vec![-0.3; d], vec![1.2; d]);
        let bound = BoxDomain::product_bound(&g, &a, &b);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut out = vec![0.0; d];
        for _ in 0..2000 {
            let x: Vec<f64> = (0..d).map(|i| rng.random_range(a.lo[i]..a.hi[i])).collect();
            let y: Vec<f64> = (0..d).map(|i| rng.random_range(b.lo[i]..b.hi[i])).collect();
            g.compose_raw(&x, &y, &mut out);
            assert!(bound.contains(&out));
        }
    }

    #[test]
    fn bump_is_inside_unit_ball_and_has_unit_mass() {
        for g in [langevin(), Geometry::new(BlockStructure::three_layer()).unwrap()] {
            let k = BumpKernel::new(&g, 6).unwrap();
            let corner: Vec<f64> = k.half_widths().to_vec();
            assert!(g.hom_norm_raw(&corner) <= 1.0 + 1e-12);
            assert!((k.discrete_mass() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_for_layer_one_has_four_segments() {
        let g = langevin();
        let p = connect_chain(&g, &[0.3, -0.2, 0.5], &[0.0, 1.0]).unwrap();
        assert_eq!(p.segments.len(), 4);
        assert!((p.blocks[0].delta - 1.0).abs() < 1e-12);
        assert!(p.residual <= 1e-10);
        let q = connect_chain(&g, &[0.0; 3], &[1.0, 0.0]).unwrap();
        assert_eq!(q.segments.len(), 1);
        assert!(connect_chain(&g, &[0.0; 3], &[0.0, 0.0]).unwrap().segments.is_empty());
    }
}
