//! Boxes, tensor grids, sampled functions and flows of the vector fields.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::field::{Direction, FieldRef, TestFunction, MAX_AXES};
use crate::quadrature::{par_sum, trapezoid_weights};
use crate::structure::{Geometry, GroupPoint, MultiIndex};

/// Axis-aligned box in `(t, x)` coordinates; bounds may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn width(&self, a: usize) -> f64 {
        self.hi[a] - self.lo[a]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a)).product()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .enumerate()
            .all(|(a, &v)| v >= self.lo[a] && v <= self.hi[a])
    }

    pub fn union(&self, o: &BoxDomain) -> BoxDomain {
        BoxDomain::new(
            self.lo.iter().zip(&o.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&o.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    pub fn expanded(&self, frac: f64) -> BoxDomain {
        let pad: Vec<f64> = (0..self.dim()).map(|a| frac * self.width(a)).collect();
        BoxDomain::new(
            self.lo.iter().zip(&pad).map(|(l, p)| l - p).collect(),
            self.hi.iter().zip(&pad).map(|(h, p)| h + p).collect(),
        )
    }

    /// `{z : D_λ z ∈ self}`.
    pub fn dilated_preimage(&self, g: &Geometry, lambda: f64) -> BoxDomain {
        let s: Vec<f64> = (0..self.dim()).map(|a| lambda.powi(g.axis_weight(a) as i32)).collect();
        BoxDomain::new(
            self.lo.iter().zip(&s).map(|(l, s)| l / s).collect(),
            self.hi.iter().zip(&s).map(|(h, s)| h / s).collect(),
        )
    }

    /// Bounding box of `{ζ ∘ w : w ∈ self}` by interval arithmetic in `s`.
    pub fn left_translate_bound(&self, g: &Geometry, zeta: &[f64]) -> BoxDomain {
        let n = g.n();
        let (slo, shi) = (self.lo[0], self.hi[0]);
        let mut lo = vec![zeta[0] + slo];
        let mut hi = vec![zeta[0] + shi];
        let x = nalgebra::DVector::from_column_slice(&zeta[1..]);
        let mut coeffs = Vec::new();
        let mut fact = 1.0;
        for j in 0..=g.r() {
            if j > 0 {
                fact *= j as f64;
            }
            coeffs.push(g.b_power(j) * &x / fact);
        }
        for i in 0..n {
            let (mut l, mut h) = (self.lo[i + 1], self.hi[i + 1]);
            for (j, c) in coeffs.iter().enumerate() {
                let ci = c[i];
                if ci == 0.0 {
                    continue;
                }
                let (pl, ph) = power_range(slo, shi, j as i32);
                let (a, b) = (ci * pl, ci * ph);
                l += a.min(b);
                h += a.max(b);
            }
            lo.push(l);
            hi.push(h);
        }
        BoxDomain::new(lo, hi)
    }

    /// Bounding box of `{a ∘ b : a ∈ left, b ∈ right}` by interval arithmetic.
    pub fn product_bound(g: &Geometry, left: &BoxDomain, right: &BoxDomain) -> BoxDomain {
        let n = g.n();
        let (slo, shi) = (right.lo[0], right.hi[0]);
        let mut lo = vec![left.lo[0] + slo];
        let mut hi = vec![left.hi[0] + shi];
        let mut ranges = Vec::new();
        let mut fact = 1.0;
        for j in 0..=g.r() {
            if j > 0 {
                fact *= j as f64;
            }
            let bj = g.b_power(j);
            let mut r = Vec::with_capacity(n);
            for i in 0..n {
                let (mut l, mut h) = (0.0, 0.0);
                for k in 0..n {
                    let c = bj[(i, k)] / fact;
                    if c == 0.0 {
                        continue;
                    }
                    let (a, b) = (c * left.lo[k + 1], c * left.hi[k + 1]);
                    l += a.min(b);
                    h += a.max(b);
                }
                r.push((l, h));
            }
            ranges.push(r);
        }
        for i in 0..n {
            let (mut l, mut h) = (right.lo[i + 1], right.hi[i + 1]);
            for (j, r) in ranges.iter().enumerate() {
                let (xl, xh) = r[i];
                if xl == 0.0 && xh == 0.0 {
                    continue;
                }
                let (pl, ph) = power_range(slo, shi, j as i32);
                let c = [xl * pl, xl * ph, xh * pl, xh * ph];
                l += c.iter().cloned().fold(f64::INFINITY, f64::min);
                h += c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            lo.push(l);
            hi.push(h);
        }
        BoxDomain::new(lo, hi)
    }

    pub fn point(z: &[f64]) -> BoxDomain {
        BoxDomain::new(z.to_vec(), z.to_vec())
    }
}

fn power_range(lo: f64, hi: f64, j: i32) -> (f64, f64) {
    if j == 0 {
        return (1.0, 1.0);
    }
    let (a, b) = (lo.powi(j), hi.powi(j));
    if j % 2 == 0 && lo < 0.0 && hi > 0.0 {
        (0.0, a.max(b))
    } else {
        (a.min(b), a.max(b))
    }
}

/// Tensor grid with uniform spacing per axis; axis 0 is time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() || lo.len() > MAX_AXES {
            return Err(param("grid", "bounds and counts must have one entry per axis"));
        }
        for a in 0..lo.len() {
            if counts[a] < 2 {
                return Err(param("grid", format!("axis {a} needs at least 2 points")));
            }
            if !(lo[a].is_finite() && hi[a].is_finite() && hi[a] > lo[a]) {
                return Err(param("grid", format!("axis {a} has invalid bounds")));
            }
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn on_box(b: &BoxDomain, n: usize) -> Result<Self> {
        Self::new(b.lo.clone(), b.hi.clone(), vec![n; b.dim()])
    }

    /// The default Langevin grid: `64^3` points on `[-6, 6]^3`.
    pub fn default_for(g: &Geometry) -> Self {
        Self::new(vec![-6.0; g.dim()], vec![6.0; g.dim()], vec![64; g.dim()]).expect("valid default grid")
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, a: usize) -> f64 {
        (self.hi[a] - self.lo[a]) / (self.counts[a] - 1) as f64
    }

    pub fn node(&self, a: usize, i: usize) -> f64 {
        if i + 1 == self.counts[a] {
            self.hi[a]
        } else {
            self.lo[a] + i as f64 * self.spacing(a)
        }
    }

    pub fn bounds(&self) -> BoxDomain {
        BoxDomain::new(self.lo.clone(), self.hi.clone())
    }

    /// Multi-index of flat index `k` (last axis fastest).
    pub fn unravel(&self, mut k: usize, idx: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.counts[a];
            k /= self.counts[a];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for a in 0..self.dim() {
            k = k * self.counts[a] + idx[a];
        }
        k
    }

    pub fn coords(&self, k: usize, z: &mut [f64]) {
        let mut idx = [0usize; MAX_AXES];
        self.unravel(k, &mut idx[..self.dim()]);
        for a in 0..self.dim() {
            z[a] = self.node(a, idx[a]);
        }
    }

    /// Per-axis composite trapezoid weights.
    pub fn trapezoid(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|a| trapezoid_weights(self.counts[a], self.spacing(a)))
            .collect()
    }

    /// `∫ f` by the tensor trapezoid rule, reduced in a fixed order.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let w = self.trapezoid();
        let d = self.dim();
        let inner: usize = self.counts[1..].iter().product();
        par_sum(self.counts[0], |i0| {
            let mut z = [0.0; MAX_AXES];
            let mut idx = [0usize; MAX_AXES];
            let mut acc = 0.0;
            for k in 0..inner {
                self.unravel(i0 * inner + k, &mut idx[..d]);
                let mut wk = 1.0;
                for a in 0..d {
                    z[a] = self.node(a, idx[a]);
                    wk *= w[a][idx[a]];
                }
                acc += wk * f(&z[..d]);
            }
            acc
        })
    }
}

/// Sampled function on a [`GridSpec`], zero on a band of `margin` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
    margin: usize,
}

/// Relative distance to a node below which interpolation snaps to it.
const SNAP: f64 = 1e-9;

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>, margin: usize) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Dimension {
                expected: spec.len(),
                got: values.len(),
            });
        }
        let mut gf = Self { spec, values, margin };
        gf.zero_margin();
        Ok(gf)
    }

    pub fn zeros(spec: GridSpec, margin: usize) -> Self {
        let n = spec.len();
        Self {
            spec,
            values: vec![0.0; n],
            margin,
        }
    }

    fn zero_margin(&mut self) {
        let m = self.margin;
        if m == 0 {
            return;
        }
        let spec = self.spec.clone();
        let d = spec.dim();
        self.values.par_iter_mut().enumerate().for_each(|(k, v)| {
            let mut idx = [0usize; MAX_AXES];
            spec.unravel(k, &mut idx[..d]);
            if (0..d).any(|a| idx[a] < m || idx[a] + m >= spec.counts[a]) {
                *v = 0.0;
            }
        });
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn margin(&self) -> usize {
        self.margin
    }

    /// Box strictly inside the zero band.
    pub fn inner_box(&self) -> BoxDomain {
        let d = self.spec.dim();
        let m = self.margin;
        BoxDomain::new(
            (0..d).map(|a| self.spec.node(a, m.min(self.spec.counts[a] - 1))).collect(),
            (0..d)
                .map(|a| self.spec.node(a, self.spec.counts[a] - 1 - m.min(self.spec.counts[a] - 1)))
                .collect(),
        )
    }

    /// Multilinear interpolation; zero outside the grid box.
    pub fn interp_or_zero(&self, z: &[f64]) -> f64 {
        let d = self.spec.dim();
        let mut base = [0usize; MAX_AXES];
        let mut frac = [0.0; MAX_AXES];
        for a in 0..d {
            let n = self.spec.counts[a];
            let s = (z[a] - self.spec.lo[a]) / self.spec.spacing(a);
            if !(s >= -SNAP && s <= (n - 1) as f64 + SNAP) {
                return 0.0;
            }
            let r = s.round();
            let (i, f) = if (s - r).abs() < SNAP {
                (r as usize, 0.0)
            } else {
                (s.floor() as usize, s - s.floor())
            };
            if i >= n - 1 {
                base[a] = n - 1;
                frac[a] = 0.0;
            } else {
                base[a] = i;
                frac[a] = f;
            }
        }
        let mut acc = 0.0;
        let mut idx = [0usize; MAX_AXES];
        'corner: for c in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (c >> a) & 1 == 1;
                if up {
                    if frac[a] == 0.0 {
                        continue 'corner;
                    }
                    w *= frac[a];
                    idx[a] = base[a] + 1;
                } else {
                    w *= 1.0 - frac[a];
                    idx[a] = base[a];
                }
            }
            acc += w * self.values[self.spec.ravel(&idx[..d])];
        }
        acc
    }

    pub fn interpolate(&self, z: &GroupPoint) -> Result<f64> {
        let v = z.to_vec();
        if v.len() != self.spec.dim() {
            return Err(Error::Dimension {
                expected: self.spec.dim(),
                got: v.len(),
            });
        }
        for (a, &c) in v.iter().enumerate() {
            let tol = SNAP * self.spec.spacing(a);
            if c < self.spec.lo[a] - tol || c > self.spec.hi[a] + tol {
                return Err(Error::OutOfBox { axis: a });
            }
        }
        Ok(self.interp_or_zero(&v))
    }

    /// Central difference along `∂_{x_i}` or the symmetric flow difference
    /// along `Y` with step `Δt`. Consumes one margin cell.
    pub fn fd_derivative(&self, g: &Geometry, dir: Direction) -> Result<GridFunction> {
        if self.margin == 0 {
            return Err(Error::StencilOutOfBounds);
        }
        let d = self.spec.dim();
        let spec = &self.spec;
        let values: Vec<f64> = (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let mut idx = [0usize; MAX_AXES];
                spec.unravel(k, &mut idx[..d]);
                if (0..d).any(|a| idx[a] == 0 || idx[a] + 1 == spec.counts[a]) {
                    return 0.0;
                }
                match dir {
                    Direction::Partial(i) => {
                        let a = i + 1;
                        let mut j = idx;
                        j[a] += 1;
                        let up = self.values[spec.ravel(&j[..d])];
                        j[a] -= 2;
                        let dn = self.values[spec.ravel(&j[..d])];
                        (up - dn) / (2.0 * spec.spacing(a))
                    }
                    Direction::Y => {
                        let h = spec.spacing(0);
                        let mut z = [0.0; MAX_AXES];
                        let mut zp = [0.0; MAX_AXES];
                        let mut zm = [0.0; MAX_AXES];
                        spec.coords(k, &mut z[..d]);
                        flow_y_raw(g, &z[..d], h, &mut zp[..d]);
                        flow_y_raw(g, &z[..d], -h, &mut zm[..d]);
                        (self.interp_or_zero(&zp[..d]) - self.interp_or_zero(&zm[..d])) / (2.0 * h)
                    }
                }
            })
            .collect();
        GridFunction::new(self.spec.clone(), values, self.margin - 1)
    }

    /// `Y^k ∂^β u` by repeated finite differences.
    pub fn intrinsic_derivative(&self, g: &Geometry, idx: &MultiIndex) -> Result<GridFunction> {
        let steps = idx.k + idx.beta.iter().sum::<usize>();
        if steps > self.margin {
            return Err(Error::StencilOutOfBounds);
        }
        let mut cur = self.clone();
        for (i, &b) in idx.beta.iter().enumerate() {
            for _ in 0..b {
                cur = cur.fd_derivative(g, Direction::Partial(i))?;
            }
        }
        for _ in 0..idx.k {
            cur = cur.fd_derivative(g, Direction::Y)?;
        }
        Ok(cur)
    }

    /// Values on the 2-D slice spanned by axes `(a, b)` with the other
    /// indices fixed by `fixed`; rows are `(z_a, z_b, value)`.
    pub fn slice(&self, a: usize, b: usize, fixed: &[usize]) -> Result<Vec<(f64, f64, f64)>> {
        let d = self.spec.dim();
        if a >= d || b >= d || a == b || fixed.len() != d {
            return Err(param("slice", "need two distinct axes and a full index"));
        }
        let mut out = Vec::new();
        let mut idx = fixed.to_vec();
        for i in 0..self.spec.counts[a] {
            for j in 0..self.spec.counts[b] {
                idx[a] = i;
                idx[b] = j;
                if idx.iter().zip(&self.spec.counts).any(|(x, n)| x >= n) {
                    return Err(param("slice", "fixed index out of range"));
                }
                out.push((self.spec.node(a, i), self.spec.node(b, j), self.values[self.spec.ravel(&idx)]));
            }
        }
        Ok(out)
    }

    /// Writes a text header followed by `---` and the values as little-endian f64.
    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = GridHeader {
            lo: self.spec.lo.clone(),
            hi: self.spec.hi.clone(),
            counts: self.spec.counts.clone(),
            margin: self.margin,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(toml::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?.as_bytes())?;
        f.write_all(b"---\n")?;
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let sep = bytes
            .windows(4)
            .position(|w| w == b"---\n")
            .ok_or_else(|| Error::Parse("missing header separator".into()))?;
        let text = std::str::from_utf8(&bytes[..sep]).map_err(|e| Error::Parse(e.to_string()))?;
        let h: GridHeader = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = GridSpec::new(h.lo, h.hi, h.counts)?;
        let data = &bytes[sep + 4..];
        if data.len() != 8 * spec.len() {
            return Err(Error::Parse(format!(
                "expected {} values, found {} bytes",
                spec.len(),
                data.len()
            )));
        }
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFunction::new(spec, values, h.margin)
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
    margin: usize,
}

impl TestFunction for GridFunction {
    fn eval(&self, z: &[f64]) -> f64 {
        self.interp_or_zero(z)
    }
    fn support(&self) -> BoxDomain {
        self.inner_box()
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(self.fd_derivative(g, dir)?))
    }
}

/// Samples `u` at the grid nodes; the support of `u` must fit inside the
/// grid minus its margin.
pub fn sample(u: &dyn TestFunction, spec: &GridSpec, margin: usize) -> Result<GridFunction> {
    let sup = u.support();
    for a in 0..spec.dim() {
        let m = margin as f64 * spec.spacing(a);
        if sup.lo[a] < spec.lo[a] + m - 1e-12 || sup.hi[a] > spec.hi[a] - m + 1e-12 {
            return Err(Error::SupportOverflow { axis: a });
        }
    }
    let d = spec.dim();
    let values = (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let mut z = [0.0; MAX_AXES];
            spec.coords(k, &mut z[..d]);
            u.eval(&z[..d])
        })
        .collect();
    GridFunction::new(spec.clone(), values, margin)
}

/// `e^{h∂_{x_i}} z = (t, x + h e_i)`.
pub fn flow_partial_raw(z: &[f64], i: usize, h: f64, out: &mut [f64]) {
    out.copy_from_slice(z);
    out[i + 1] += h;
}

/// `e^{hY} z = (t + h, e^{hB} x)`.
pub fn flow_y_raw(g: &Geometry, z: &[f64], h: f64, out: &mut [f64]) {
    out[0] = z[0] + h;
    g.exp_apply(h, &z[1..], &mut out[1..]);
}

pub fn flow_raw(g: &Geometry, dir: Direction, z: &[f64], h: f64, out: &mut [f64]) {
    match dir {
        Direction::Partial(i) => flow_partial_raw(z, i, h, out),
        Direction::Y => flow_y_raw(g, z, h, out),
    }
}

pub fn flow_eval(g: &Geometry, z: &GroupPoint, dir: Direction, h: f64) -> Result<GroupPoint> {
    let v = z.to_vec();
    if v.len() != g.dim() {
        return Err(Error::Dimension {
            expected: g.dim(),
            got: v.len(),
        });
    }
    if let Direction::Partial(i) = dir {
        if i >= g.n() {
            return Err(param("direction", format!("space index {i} out of range")));
        }
    }
    let mut out = vec![0.0; v.len()];
    flow_raw(g, dir, &v, h, &mut out);
    Ok(GroupPoint::from_slice(&out))
}

/// `z ↦ ∫ f(z ∘ w^{-1}) k(w) dw` on the nodes of `out`, by the trapezoid
/// rule with `nodes` points per axis over the support box of `k`; this is
/// `∫ f(ζ) k(ζ^{-1}∘z) dζ`.
pub fn group_convolve(
    f: &dyn TestFunction,
    kernel: &dyn TestFunction,
    g: &Geometry,
    out: &GridSpec,
    nodes: usize,
    margin: usize,
) -> Result<GridFunction> {
    let ks = kernel.support();
    if !ks.is_finite() {
        return Err(param("kernel", "kernel must have a bounded support box"));
    }
    let kspec = GridSpec::on_box(&ks, nodes)?;
    let kw = kspec.trapezoid();
    let d = g.dim();
    // kernel values and weights are shared by all output points
    let mut kpts = Vec::new();
    let mut z = [0.0; MAX_AXES];
    let mut idx = [0usize; MAX_AXES];
    for k in 0..kspec.len() {
        kspec.unravel(k, &mut idx[..d]);
        kspec.coords(k, &mut z[..d]);
        let mut w = kernel.eval(&z[..d]);
        for a in 0..d {
            w *= kw[a][idx[a]];
        }
        if w != 0.0 {
            let mut inv = [0.0; MAX_AXES];
            g.invert_raw(&z[..d], &mut inv[..d]);
            kpts.push((inv, w));
        }
    }
    let values = (0..out.len())
        .into_par_iter()
        .map(|k| {
            let mut z = [0.0; MAX_AXES];
            let mut p = [0.0; MAX_AXES];
            out.coords(k, &mut z[..d]);
            let terms: Vec<f64> = kpts
                .iter()
                .map(|(inv, w)| {
                    g.compose_raw(&z[..d], &inv[..d], &mut p[..d]);
                    w * f.eval(&p[..d])
                })
                .collect();
            crate::quadrature::pairwise_sum(&terms)
        })
        .collect();
    GridFunction::new(out.clone(), values, margin)
}
