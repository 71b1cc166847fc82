//! Covariance `C_t`, the Gaussian fundamental solution `Γ` and potentials
//! built from homogeneous kernels.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::{kolmogorov_apply, FieldRef, TestFunction, MAX_AXES};
use crate::grid::{BoxDomain, GridFunction, GridSpec};
use crate::quadrature::{gauss_on, pairwise_sum};
use crate::structure::{factorial, Geometry};

/// Default log-density floor below which `Γ` is reported as 0.
pub const LOG_FLOOR: f64 = -700.0;

/// `C_t = Σ_{j,k} t^{j+k+1} / ((j+k+1) j! k!) · B^j A₀ (B^k)ᵀ`, stored as
/// polynomial coefficients per entry.
#[derive(Clone, Debug)]
pub struct CovariancePolynomial {
    geometry: Geometry,
    /// `coeffs[deg]` is the matrix coefficient of `t^deg`.
    coeffs: Vec<DMatrix<f64>>,
    log_floor: f64,
}

/// `Γ`, `∇_d Γ` and `YΓ` at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelValue {
    pub gamma: f64,
    pub grad_d: Vec<f64>,
    pub y_gamma: f64,
}

/// Everything the closed form gives at one point.
#[derive(Clone, Debug)]
pub struct KernelDetail {
    pub gamma: f64,
    /// `∇_x Γ` over all `N` coordinates.
    pub grad: Vec<f64>,
    /// `∂_t Γ`.
    pub dt: f64,
    /// `∂²_{x_i x_i} Γ`, all `i`.
    pub hess_diag: Vec<f64>,
    pub y_gamma: f64,
}

impl CovariancePolynomial {
    pub fn new(g: &Geometry) -> Self {
        let n = g.n();
        let r = g.r();
        let d0 = g.d0();
        let a0 = DMatrix::from_fn(n, n, |i, j| if i == j && i < d0 { 1.0 } else { 0.0 });
        let mut coeffs = vec![DMatrix::zeros(n, n); 2 * r + 2];
        for j in 0..=r {
            for k in 0..=r {
                let m = g.b_power(j) * &a0 * g.b_power(k).transpose();
                let deg = j + k + 1;
                coeffs[deg] += m / (deg as f64 * factorial(j) * factorial(k));
            }
        }
        // exact symmetry: average with the transpose (entries are already
        // symmetric up to summation order)
        for c in &mut coeffs {
            let s = (&*c + c.transpose()) * 0.5;
            *c = s;
        }
        Self {
            geometry: g.clone(),
            coeffs,
            log_floor: LOG_FLOOR,
        }
    }

    pub fn with_log_floor(mut self, floor: f64) -> Self {
        self.log_floor = floor;
        self
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Coefficient of `t^deg` in entry `(i, j)`.
    pub fn coefficient(&self, i: usize, j: usize, deg: usize) -> f64 {
        self.coeffs.get(deg).map_or(0.0, |c| c[(i, j)])
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let n = self.geometry.n();
        let mut out = DMatrix::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            out = out * t + c;
        }
        out
    }

    /// `d/dt C_t = e^{tB} A₀ e^{tBᵀ}`.
    pub fn eval_derivative(&self, t: f64) -> DMatrix<f64> {
        let n = self.geometry.n();
        let mut out = DMatrix::zeros(n, n);
        for (deg, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            out = out * t + c * deg as f64;
        }
        out
    }

    fn solve(&self, t: f64) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
        let c = self.eval(t);
        let ch = c.cholesky().ok_or(Error::KernelUndefined { t })?;
        let logdet = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return Err(Error::KernelUndefined { t });
        }
        Ok((ch, logdet))
    }

    /// `log Γ(t, x)`; `-∞` for `t <= 0`.
    pub fn log_gamma(&self, z: &[f64]) -> Result<f64> {
        let t = z[0];
        if t <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let n = self.geometry.n();
        let (ch, logdet) = self.solve(t)?;
        let x = DVector::from_column_slice(&z[1..]);
        let cx = ch.solve(&x);
        let q = x.dot(&cx);
        Ok(-0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * q)
    }

    pub fn detail(&self, z: &[f64]) -> Result<KernelDetail> {
        let g = &self.geometry;
        let n = g.n();
        if z.len() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                got: z.len(),
            });
        }
        let zero = || KernelDetail {
            gamma: 0.0,
            grad: vec![0.0; n],
            dt: 0.0,
            hess_diag: vec![0.0; n],
            y_gamma: 0.0,
        };
        let t = z[0];
        if t <= 0.0 {
            return Ok(zero());
        }
        let (ch, logdet) = self.solve(t)?;
        let x = DVector::from_column_slice(&z[1..]);
        let cx = ch.solve(&x);
        let q = x.dot(&cx);
        let lg = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * q;
        if lg < self.log_floor {
            return Ok(zero());
        }
        let gamma = lg.exp();
        let cinv = ch.inverse();
        let cp = self.eval_derivative(t);
        let tr = (&cinv * &cp).trace();
        let quad = cx.dot(&(&cp * &cx));
        let dlog_t = -0.5 * tr + 0.5 * quad;
        let grad: Vec<f64> = cx.iter().map(|v| -gamma * v).collect();
        let hess_diag: Vec<f64> = (0..n).map(|i| gamma * (cx[i] * cx[i] - cinv[(i, i)])).collect();
        let mut bx = vec![0.0; n];
        g.b_apply(&z[1..], &mut bx);
        let drift: f64 = bx.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let dt = gamma * dlog_t;
        Ok(KernelDetail {
            gamma,
            grad,
            dt,
            hess_diag,
            y_gamma: drift + dt,
        })
    }

    pub fn gamma(&self, z: &[f64]) -> Result<f64> {
        let lg = self.log_gamma(z)?;
        Ok(if lg < self.log_floor { 0.0 } else { lg.exp() })
    }

    /// `Γ(z)`, `∇_d Γ(z)` and `YΓ(z)`.
    pub fn gamma_eval(&self, z: &[f64]) -> Result<KernelValue> {
        let d = self.detail(z)?;
        Ok(KernelValue {
            gamma: d.gamma,
            grad_d: d.grad[..self.geometry.d0()].to_vec(),
            y_gamma: d.y_gamma,
        })
    }
}

/// Sampling plan for the kernel bound suprema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSampling {
    pub t_min: f64,
    pub t_max: f64,
    pub x_max: f64,
    pub n_t: usize,
    pub n_x: usize,
}

impl BoundSampling {
    pub fn refined(&self) -> Self {
        Self {
            n_t: 2 * self.n_t - 1,
            n_x: 2 * self.n_x - 1,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// `sup ‖z‖^{𝐝-2} Γ(z)`
    pub sup_gamma: f64,
    /// `sup ‖z‖^{𝐝} |YΓ(z)|`
    pub sup_y_gamma: f64,
    pub samples: usize,
}

/// Suprema of `‖z‖^{𝐝-2}Γ` and `‖z‖^𝐝|YΓ|` over log-spaced `t` and a uniform
/// `x` grid, with the best grid point of each `t` polished by local ascent.
pub fn kernel_bound_check(cp: &CovariancePolynomial, s: &BoundSampling) -> Result<BoundReport> {
    if s.n_t < 2 || s.n_x < 2 || !(s.t_min > 0.0 && s.t_max > s.t_min) {
        return Err(param("sampling", "need t_max > t_min > 0 and at least 2 points per axis"));
    }
    let g = cp.geometry();
    let n = g.n();
    let hd = g.hom_dim() as f64;
    let nx_total = s.n_x.pow(n as u32);
    let ts: Vec<f64> = (0..s.n_t)
        .map(|i| s.t_min * (s.t_max / s.t_min).powf(i as f64 / (s.n_t - 1) as f64))
        .collect();
    let score = |z: &[f64]| -> Result<(f64, f64)> {
        let d = cp.detail(z)?;
        let nz = g.hom_norm_raw(z);
        Ok((nz.powf(hd - 2.0) * d.gamma, nz.powf(hd) * d.y_gamma.abs()))
    };
    let h0 = 2.0 * s.x_max / (s.n_x - 1) as f64;
    let rows: Vec<Result<(f64, f64)>> = ts
        .par_iter()
        .map(|&t| {
            let mut z = vec![0.0; n + 1];
            z[0] = t;
            let (mut a, mut b) = (0.0f64, 0.0f64);
            let (mut za, mut zb) = (z.clone(), z.clone());
            for k in 0..nx_total {
                let mut rem = k;
                for i in 0..n {
                    let j = rem % s.n_x;
                    rem /= s.n_x;
                    z[i + 1] = -s.x_max + h0 * j as f64;
                }
                let (x, y) = score(&z)?;
                if x > a {
                    a = x;
                    za.copy_from_slice(&z);
                }
                if y > b {
                    b = y;
                    zb.copy_from_slice(&z);
                }
            }
            // polish the best grid points by compass search inside the box
            let a = climb(&mut za, a, h0, s.x_max, |z| Ok(score(z)?.0))?;
            let b = climb(&mut zb, b, h0, s.x_max, |z| Ok(score(z)?.1))?;
            Ok((a, b))
        })
        .collect();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for r in rows {
        let (x, y) = r?;
        a = a.max(x);
        b = b.max(y);
    }
    Ok(BoundReport {
        sup_gamma: a,
        sup_y_gamma: b,
        samples: s.n_t * nx_total,
    })
}

/// Coordinate-wise ascent on `x` from `z`, halving the step down to
/// `1e-9 · x_max`; `t` is left alone. At most 32 sweeps per step size,
/// so a slow creep on a tiny scale cannot stall the search.
fn climb<F>(z: &mut [f64], mut best: f64, h0: f64, x_max: f64, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut h = h0 / 2.0;
    let mut sweeps = 0;
    while h > 1e-9 * x_max {
        let mut moved = false;
        sweeps += 1;
        for i in 1..z.len() {
            for dir in [1.0, -1.0] {
                let old = z[i];
                let new = old + dir * h;
                if new.abs() > x_max {
                    continue;
                }
                z[i] = new;
                let v = f(z)?;
                if v > best {
                    best = v;
                    moved = true;
                    break;
                }
                z[i] = old;
            }
        }
        if !moved || sweeps == 32 {
            h /= 2.0;
            sweeps = 0;
        }
    }
    Ok(best)
}

/// Resolution of the homogeneous shell quadrature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellOptions {
    /// Dyadic shells resolved inside the unit cube; the rest is summed in closed form.
    pub inner_levels: usize,
    /// Sub-intervals per piece of the annulus on each axis.
    pub refine: usize,
    /// Gauss nodes per sub-interval.
    pub gauss: usize,
}

impl Default for ShellOptions {
    fn default() -> Self {
        Self {
            inner_levels: 8,
            refine: 2,
            gauss: 3,
        }
    }
}

/// Quadrature for `∫ k(w) f(z ∘ w^{-1}) dw` with `k` homogeneous of degree
/// `α - 𝐝`, built on the annulus `A = Q \ D_{1/2} Q`, `Q = [-1,1]^{N+1}`,
/// and its dyadic dilates `D_{2^ℓ} A`.
#[derive(Clone, Debug)]
pub struct ShellRule {
    geometry: Geometry,
    alpha: f64,
    nodes: Vec<[f64; MAX_AXES]>,
    weights: Vec<f64>,
    mass: f64,
    inner_levels: usize,
}

impl ShellRule {
    pub fn new<K>(g: &Geometry, alpha: f64, opts: &ShellOptions, kernel: K) -> Self
    where
        K: Fn(&[f64]) -> f64,
    {
        let d = g.dim();
        let mut axis_nodes = Vec::with_capacity(d);
        for a in 0..d {
            let c = 0.5f64.powi(g.axis_weight(a) as i32);
            let pieces = [(-1.0, -c, false), (-c, c, true), (c, 1.0, false)];
            let mut nodes = Vec::new();
            for (lo, hi, centre) in pieces {
                let h = (hi - lo) / opts.refine as f64;
                for s in 0..opts.refine {
                    let (x, w) = gauss_on(lo + s as f64 * h, lo + (s + 1) as f64 * h, opts.gauss);
                    for (x, w) in x.into_iter().zip(w) {
                        nodes.push((x, w, centre));
                    }
                }
            }
            axis_nodes.push(nodes);
        }
        let total: usize = axis_nodes.iter().map(|v| v.len()).product();
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        let mut z = [0.0; MAX_AXES];
        for k in 0..total {
            let mut rem = k;
            let mut w = 1.0;
            let mut all_centre = true;
            for a in (0..d).rev() {
                let m = axis_nodes[a].len();
                let (x, wa, c) = axis_nodes[a][rem % m];
                rem /= m;
                z[a] = x;
                w *= wa;
                all_centre &= c;
            }
            if all_centre {
                continue;
            }
            let kv = kernel(&z[..d]);
            if kv != 0.0 {
                pts.push(z);
                wts.push(w * kv);
            }
        }
        let mass = pairwise_sum(&wts);
        Self {
            geometry: g.clone(),
            alpha,
            nodes: pts,
            weights: wts,
            mass,
            inner_levels: opts.inner_levels,
        }
    }

    /// `∫_A k`.
    pub fn annulus_mass(&self) -> f64 {
        self.mass
    }

    /// Smallest `M` with all increments `ζ^{-1}∘z` (`ζ ∈ support`, `z ∈ out`) inside `D_{2^M} Q`.
    pub fn outer_level(&self, support: &BoxDomain, out: &BoxDomain) -> i32 {
        let g = &self.geometry;
        let tau = (out.lo[0] - support.hi[0], out.hi[0] - support.lo[0]);
        let mut level = -(self.inner_levels as i32);
        let mut fit = |maxabs: f64, w: usize| {
            if maxabs > 0.0 {
                level = level.max((maxabs.log2() / w as f64).ceil() as i32);
            }
        };
        fit(tau.0.abs().max(tau.1.abs()), 2);
        // e^{τB} ξ by interval arithmetic
        for i in 0..g.n() {
            let (mut lo, mut hi) = (out.lo[i + 1], out.hi[i + 1]);
            let mut fact = 1.0;
            for j in 0..=g.r() {
                if j > 0 {
                    fact *= j as f64;
                }
                let bj = g.b_power(j);
                let (mut blo, mut bhi) = (0.0, 0.0);
                for k in 0..g.n() {
                    let c = bj[(i, k)];
                    if c == 0.0 {
                        continue;
                    }
                    let (a, b) = (c * support.lo[k + 1], c * support.hi[k + 1]);
                    blo += a.min(b);
                    bhi += a.max(b);
                }
                let (plo, phi) = if j == 0 {
                    (1.0, 1.0)
                } else {
                    let (a, b) = (tau.0.powi(j as i32), tau.1.powi(j as i32));
                    if j % 2 == 0 && tau.0 < 0.0 && tau.1 > 0.0 {
                        (0.0, a.max(b))
                    } else {
                        (a.min(b), a.max(b))
                    }
                };
                let cands = [blo * plo, blo * phi, bhi * plo, bhi * phi];
                let (mn, mx) = cands
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                // x - e^{τB}ξ
                lo -= mx / fact;
                hi -= mn / fact;
            }
            fit(lo.abs().max(hi.abs()), g.axis_weight(i + 1));
        }
        level + 1
    }

    /// `∫ k(w) f(z ∘ w^{-1}) dw` with shells `-L ..= outer` and the
    /// innermost region approximated by `f(z)`.
    pub fn apply(&self, f: &dyn TestFunction, z: &[f64], outer: i32) -> f64 {
        let g = &self.geometry;
        let d = g.dim();
        let mut shells = Vec::new();
        let mut w = [0.0; MAX_AXES];
        let mut inv = [0.0; MAX_AXES];
        let mut p = [0.0; MAX_AXES];
        let lmin = -(self.inner_levels as i32);
        for l in lmin..=outer {
            let s = 2f64.powi(l);
            let terms: Vec<f64> = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(eta, wt)| {
                    g.dilate_raw(s, &eta[..d], &mut w[..d]);
                    g.invert_raw(&w[..d], &mut inv[..d]);
                    g.compose_raw(z, &inv[..d], &mut p[..d]);
                    wt * f.eval(&p[..d])
                })
                .collect();
            shells.push(s.powf(self.alpha) * pairwise_sum(&terms));
        }
        let tail = 2f64.powf(-(self.inner_levels as f64 + 1.0) * self.alpha) / (1.0 - 2f64.powf(-self.alpha));
        pairwise_sum(&shells) + f.eval(z) * self.mass * tail
    }
}

/// `I_α f(z) = ∫ f(ζ) ‖ζ^{-1}∘z‖^{α-𝐝} dζ` on the nodes of `out`.
pub fn riesz_potential(
    g: &Geometry,
    alpha: f64,
    f: &dyn TestFunction,
    out: &GridSpec,
    opts: &ShellOptions,
) -> Result<GridFunction> {
    let hd = g.hom_dim() as f64;
    if !(alpha > 0.0 && alpha < hd) {
        return Err(param("alpha", format!("need 0 < α < {hd}, got {alpha}")));
    }
    let sup = f.support();
    if !sup.is_finite() {
        return Err(param("f", "potential needs a compactly supported density"));
    }
    let rule = ShellRule::new(g, alpha, opts, |w| g.hom_norm_raw(w).powf(alpha - hd));
    let outer = rule.outer_level(&sup, &out.bounds());
    let d = g.dim();
    let values = (0..out.len())
        .into_par_iter()
        .map(|k| {
            let mut z = [0.0; MAX_AXES];
            out.coords(k, &mut z[..d]);
            rule.apply(f, &z[..d], outer)
        })
        .collect();
    GridFunction::new(out.clone(), values, 0)
}

/// `u(z) = -∫ Γ(ζ^{-1}∘z) Ku(ζ) dζ` on the nodes of `out`, and the relative
/// `L^2` distance to `u` over those nodes.
pub fn reconstruct_from_kernel(
    cp: &CovariancePolynomial,
    u: &FieldRef,
    out: &GridSpec,
    opts: &ShellOptions,
) -> Result<(GridFunction, f64)> {
    let g = cp.geometry();
    let sup = u.support();
    if !sup.is_finite() {
        return Err(param("u", "reconstruction needs a compactly supported field"));
    }
    let ku = kolmogorov_apply(u, g)?;
    let rule = ShellRule::new(g, 2.0, opts, |w| cp.gamma(w).unwrap_or(0.0));
    let outer = rule.outer_level(&sup, &out.bounds());
    let d = g.dim();
    let values: Vec<f64> = (0..out.len())
        .into_par_iter()
        .map(|k| {
            let mut z = [0.0; MAX_AXES];
            out.coords(k, &mut z[..d]);
            -rule.apply(ku.as_ref(), &z[..d], outer)
        })
        .collect();
    let mut diff = Vec::with_capacity(values.len());
    let mut base = Vec::with_capacity(values.len());
    let mut z = [0.0; MAX_AXES];
    for (k, v) in values.iter().enumerate() {
        out.coords(k, &mut z[..d]);
        let uz = u.eval(&z[..d]);
        diff.push((v - uz).powi(2));
        base.push(uz * uz);
    }
    let den = pairwise_sum(&base);
    let err = if den > 0.0 {
        (pairwise_sum(&diff) / den).sqrt()
    } else {
        pairwise_sum(&diff).sqrt()
    };
    Ok((GridFunction::new(out.clone(), values, 0)?, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::BlockStructure;

    fn lang() -> Geometry {
        Geometry::new(BlockStructure::langevin(1)).unwrap()
    }

    #[test]
    fn langevin_covariance_closed_form() {
        let cp = CovariancePolynomial::new(&lang());
        let t: f64 = 1.7;
        let c = cp.eval(t);
        let want = [t, t * t / 2.0, t * t / 2.0, t.powi(3) / 3.0];
        for (i, w) in want.iter().enumerate() {
            assert!((c[(i / 2, i % 2)] - w).abs() < 1e-14);
        }
        assert!((c.determinant() - t.powi(4) / 12.0).abs() < 1e-12);
        let dc = cp.eval_derivative(t);
        assert!((dc[(0, 1)] - t).abs() < 1e-14 && (dc[(1, 1)] - t * t).abs() < 1e-14);
    }

    #[test]
    fn flat_covariance_is_linear() {
        let g = Geometry::new(BlockStructure::new(vec![2], vec![])).unwrap();
        let c = CovariancePolynomial::new(&g).eval(0.3);
        assert!((c[(0, 0)] - 0.3).abs() < 1e-15 && c[(0, 1)] == 0.0);
    }

    #[test]
    fn gamma_examples() {
        let cp = CovariancePolynomial::new(&lang());
        assert_eq!(cp.gamma_eval(&[-1.0, 0.3, 0.2]).unwrap().gamma, 0.0);
        let v = cp.gamma_eval(&[1.0, 0.0, 0.0]).unwrap().gamma;
        assert!((v - 12f64.sqrt() / (2.0 * std::f64::consts::PI)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_kernel_is_undefined() {
        let g = Geometry::new_unchecked(BlockStructure::new(vec![1, 1], vec![vec![0.0]])).unwrap();
        let cp = CovariancePolynomial::new(&g);
        assert!(matches!(cp.gamma_eval(&[1.0, 0.0, 0.0]), Err(Error::KernelUndefined { .. })));
    }

    #[test]
    fn riesz_of_zero_is_zero() {
        let g = lang();
        let f = crate::field::AnalyticField::bump(&[1.0; 3], &[0.0; 3], 0.0).unwrap();
        let out = GridSpec::new(vec![-1.0; 3], vec![1.0; 3], vec![2; 3]).unwrap();
        let opts = ShellOptions { inner_levels: 2, refine: 1, gauss: 2 };
        let r = riesz_potential(&g, 1.0, &f, &out, &opts).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
        assert!(riesz_potential(&g, 6.0, &f, &out, &opts).is_err());
    }

    #[test]
    fn annulus_mass_of_radial_power_matches_shell_sum() {
        // ∫_{Q} ‖w‖^{α-𝐝} dw = mass_A / (1 - 2^{-α})
        let g = lang();
        let opts = ShellOptions { inner_levels: 8, refine: 2, gauss: 4 };
        let r1 = ShellRule::new(&g, 1.0, &opts, |w| g.hom_norm_raw(w).powf(-5.0));
        let r2 = ShellRule::new(&g, 1.0, &ShellOptions { refine: 4, ..opts }, |w| g.hom_norm_raw(w).powf(-5.0));
        let rel = (r1.annulus_mass() - r2.annulus_mass()).abs() / r2.annulus_mass();
        assert!(rel < 1e-2, "{rel}");
    }
}
