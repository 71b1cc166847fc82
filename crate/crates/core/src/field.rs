//! Closed-form test functions with exact intrinsic derivatives.
//!
//! An [`AnalyticField`] is a finite sum of terms
//! `c · z^m · Π_a f_a^{(o_a)}(z_a)` where `f_a` is a fixed one-dimensional
//! profile per axis. The class is closed under `∂_{x_i}` and `Y`, so every
//! `Y^k∂^β u` is again an `AnalyticField` evaluated exactly.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::BoxDomain;
use crate::structure::{Geometry, MultiIndex};

/// Axes of `z = (t, x)` supported by the fixed-size buffers.
pub const MAX_AXES: usize = 9;
/// Largest per-axis derivative order plus monomial degree.
pub const MAX_ORDER: usize = 16;
/// `exp(-GAUSS_CUTOFF)` is treated as zero when computing Gaussian supports.
pub const GAUSS_CUTOFF: f64 = 40.0;

/// A vector field acting on test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// `∂_{x_i}`, 0-based space index.
    Partial(usize),
    /// The drift `Y = ⟨Bx, ∇⟩ + ∂_t`.
    Y,
}

impl Direction {
    /// Intrinsic weight: 1 for `∂` in layer 0, `2j+1` in layer `j`, 2 for `Y`.
    pub fn weight(&self, g: &Geometry) -> usize {
        match self {
            Direction::Partial(i) => g.weight(*i),
            Direction::Y => 2,
        }
    }
}

pub trait TestFunction: Send + Sync + Debug {
    fn eval(&self, z: &[f64]) -> f64;
    /// Box outside of which the function vanishes (up to `exp(-40)` for Gaussians).
    fn support(&self) -> BoxDomain;
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef>;
}

pub type FieldRef = Arc<dyn TestFunction>;

/// Applies `dirs` left to right: `[Partial(0), Y]` gives `Y∂_0 u`.
pub fn apply_word(u: &FieldRef, g: &Geometry, dirs: &[Direction]) -> Result<FieldRef> {
    let mut cur = u.clone();
    for d in dirs {
        cur = cur.derivative(g, *d)?;
    }
    Ok(cur)
}

/// `Y^k ∂^β u`.
pub fn multi_derivative(u: &FieldRef, g: &Geometry, idx: &MultiIndex) -> Result<FieldRef> {
    let mut word = Vec::new();
    for (i, &b) in idx.beta.iter().enumerate() {
        word.extend(std::iter::repeat(Direction::Partial(i)).take(b));
    }
    word.extend(std::iter::repeat(Direction::Y).take(idx.k));
    apply_word(u, g, &word)
}

/// `∇_d u` as `d_0` fields.
pub fn horizontal_gradient(u: &FieldRef, g: &Geometry) -> Result<Vec<FieldRef>> {
    (0..g.d0()).map(|i| u.derivative(g, Direction::Partial(i))).collect()
}

/// One-dimensional factor of a separable term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    One,
    /// `exp(-a (s-c)^2)`
    Gauss { a: f64, c: f64 },
    /// `exp(-a (s-c)^2) cos(ω (s-c) + φ)`
    GaussWave { a: f64, c: f64, omega: f64, phase: f64 },
    /// `exp(-1/(1-y^2))`, `y = (s-c)/w`, zero for `|y| >= 1`
    Bump { c: f64, w: f64 },
    /// `|s-c|^γ`
    Power { c: f64, gamma: f64 },
    Product(Box<Profile>, Box<Profile>),
}

impl Profile {
    /// Interval outside of which the profile vanishes, if any.
    pub fn extent(&self) -> Option<(f64, f64)> {
        match self {
            Profile::One | Profile::Power { .. } => None,
            Profile::Gauss { a, c } | Profile::GaussWave { a, c, .. } => {
                let r = (GAUSS_CUTOFF / a).sqrt();
                Some((c - r, c + r))
            }
            Profile::Bump { c, w } => Some((c - w, c + w)),
            Profile::Product(p, q) => match (p.extent(), q.extent()) {
                (Some(a), Some(b)) => Some((a.0.max(b.0), a.1.min(b.1))),
                (Some(a), None) | (None, Some(a)) => Some(a),
                (None, None) => None,
            },
        }
    }

    fn is_one(&self) -> bool {
        matches!(self, Profile::One)
    }

    /// Writes `f^{(m)}(s)` for `m = 0..out.len()`.
    pub fn values(&self, s: f64, out: &mut [f64]) {
        let mmax = out.len();
        match self {
            Profile::One => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = 1.0;
            }
            Profile::Gauss { a, c } => {
                let y = s - c;
                let e = (-a * y * y).exp();
                out[0] = e;
                if mmax > 1 {
                    out[1] = -2.0 * a * y * e;
                }
                for m in 1..mmax.saturating_sub(1) {
                    out[m + 1] = -2.0 * a * (y * out[m] + m as f64 * out[m - 1]);
                }
            }
            Profile::GaussWave { a, c, omega, phase } => {
                let y = s - c;
                let g0 = Complex64::from_polar((-a * y * y).exp(), omega * y + phase);
                let lin = Complex64::new(-2.0 * a * y, *omega);
                let mut prev = Complex64::new(0.0, 0.0);
                let mut cur = g0;
                out[0] = cur.re;
                for m in 0..mmax.saturating_sub(1) {
                    let next = lin * cur - 2.0 * a * m as f64 * prev;
                    prev = cur;
                    cur = next;
                    out[m + 1] = cur.re;
                }
            }
            Profile::Bump { c, w } => {
                let y = (s - c) / w;
                if y.abs() >= 1.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let q = 1.0 - y * y;
                let b = (-1.0 / q).exp();
                let polys = bump_polys();
                let mut scale = 1.0;
                for (m, o) in out.iter_mut().enumerate() {
                    let p = eval_poly(&polys[m], y);
                    *o = scale * p * b / q.powi(2 * m as i32);
                    scale /= w;
                }
            }
            Profile::Power { c, gamma } => {
                let y = s - c;
                let ay = y.abs();
                let sg: f64 = if y < 0.0 { -1.0 } else { 1.0 };
                let mut coef = 1.0;
                for (m, o) in out.iter_mut().enumerate() {
                    *o = if coef == 0.0 {
                        0.0
                    } else {
                        coef * ay.powf(gamma - m as f64) * sg.powi(m as i32)
                    };
                    coef *= gamma - m as f64;
                }
            }
            Profile::Product(p, q) => {
                let mut a = [0.0; MAX_ORDER + 1];
                let mut b = [0.0; MAX_ORDER + 1];
                p.values(s, &mut a[..mmax]);
                q.values(s, &mut b[..mmax]);
                for m in 0..mmax {
                    let mut acc = 0.0;
                    let mut binom = 1.0;
                    for j in 0..=m {
                        acc += binom * a[j] * b[m - j];
                        binom = binom * (m - j) as f64 / (j + 1) as f64;
                    }
                    out[m] = acc;
                }
            }
        }
    }

    /// Profile of `s ↦ f(σ s)` up to the constant factor; derivatives pick
    /// up `σ^m`, which the caller accounts for.
    fn rescaled(&self, sigma: f64) -> Profile {
        match self {
            Profile::One => Profile::One,
            Profile::Gauss { a, c } => Profile::Gauss {
                a: a * sigma * sigma,
                c: c / sigma,
            },
            Profile::GaussWave { a, c, omega, phase } => Profile::GaussWave {
                a: a * sigma * sigma,
                c: c / sigma,
                omega: omega * sigma,
                phase: *phase,
            },
            Profile::Bump { c, w } => Profile::Bump {
                c: c / sigma,
                w: w / sigma,
            },
            Profile::Power { .. } => unreachable!("power profiles are not rescaled"),
            Profile::Product(p, q) => Profile::Product(Box::new(p.rescaled(sigma)), Box::new(q.rescaled(sigma))),
        }
    }
}

fn eval_poly(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * y + v)
}

/// `P_m` with `β^{(m)} = P_m (1-y²)^{-2m} β`, `β = exp(-1/(1-y²))`.
pub(crate) fn bump_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for m in 0..MAX_ORDER {
            let p = &out[m];
            // (1-y²)² P' + (4m y (1-y²) - 2y) P
            let mut dp = vec![0.0; p.len().max(2) - 1];
            for (k, &c) in p.iter().enumerate().skip(1) {
                dp[k - 1] = k as f64 * c;
            }
            let mut next = vec![0.0; p.len() + 4];
            let q2 = [1.0, 0.0, -2.0, 0.0, 1.0];
            for (i, &a) in dp.iter().enumerate() {
                for (j, &b) in q2.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            let mf = m as f64;
            let lin = [0.0, 4.0 * mf - 2.0, 0.0, -4.0 * mf];
            for (i, &a) in p.iter().enumerate() {
                for (j, &b) in lin.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Key {
    mono: [u8; MAX_AXES],
    ord: [u8; MAX_AXES],
}

/// Separable-profile expression with exact derivatives.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    dim: usize,
    profiles: Vec<Profile>,
    terms: Vec<(Key, f64)>,
    max_deg: [usize; MAX_AXES],
    max_ord: [usize; MAX_AXES],
    support: BoxDomain,
}

impl AnalyticField {
    fn from_map(dim: usize, profiles: Vec<Profile>, map: BTreeMap<Key, f64>, support: BoxDomain) -> Result<Self> {
        let terms: Vec<(Key, f64)> = map.into_iter().filter(|(_, c)| *c != 0.0).collect();
        let mut max_deg = [0; MAX_AXES];
        let mut max_ord = [0; MAX_AXES];
        for (k, _) in &terms {
            for a in 0..dim {
                max_deg[a] = max_deg[a].max(k.mono[a] as usize);
                max_ord[a] = max_ord[a].max(k.ord[a] as usize);
            }
        }
        if max_deg.iter().chain(max_ord.iter()).any(|&v| v > MAX_ORDER) {
            return Err(Error::Unsupported(format!(
                "derivative order exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        Ok(Self {
            dim,
            profiles,
            terms,
            max_deg,
            max_ord,
            support,
        })
    }

    /// `amplitude · Π_a profile_a(z_a)` times the monomial `z^mono`.
    pub fn separable(profiles: Vec<Profile>, mono: &[u8], amplitude: f64) -> Result<Self> {
        let dim = profiles.len();
        if dim == 0 || dim > MAX_AXES {
            return Err(param("profiles", format!("need 1..={MAX_AXES} axes, got {dim}")));
        }
        let mut key = Key {
            mono: [0; MAX_AXES],
            ord: [0; MAX_AXES],
        };
        key.mono[..mono.len()].copy_from_slice(mono);
        let mut lo = vec![f64::NEG_INFINITY; dim];
        let mut hi = vec![f64::INFINITY; dim];
        for (a, p) in profiles.iter().enumerate() {
            if let Some((l, h)) = p.extent() {
                lo[a] = l;
                hi[a] = h;
            }
        }
        let mut map = BTreeMap::new();
        map.insert(key, amplitude);
        Self::from_map(dim, profiles, map, BoxDomain::new(lo, hi))
    }

    /// `amplitude · exp(-Σ a_i (z_i - c_i)^2)`.
    pub fn gaussian(a: &[f64], center: &[f64], amplitude: f64) -> Result<Self> {
        if a.len() != center.len() || a.iter().any(|&v| !(v > 0.0)) {
            return Err(param("a", "Gaussian rates must be positive, one per axis"));
        }
        let profiles = a.iter().zip(center).map(|(&a, &c)| Profile::Gauss { a, c }).collect();
        Self::separable(profiles, &[], amplitude)
    }

    /// Product of 1-D bumps with the given half widths.
    pub fn bump(half_widths: &[f64], center: &[f64], amplitude: f64) -> Result<Self> {
        if half_widths.len() != center.len() || half_widths.iter().any(|&v| !(v > 0.0)) {
            return Err(param("half_widths", "bump half widths must be positive, one per axis"));
        }
        let profiles = half_widths
            .iter()
            .zip(center)
            .map(|(&w, &c)| Profile::Bump { c, w })
            .collect();
        Self::separable(profiles, &[], amplitude)
    }

    /// Polynomial `Σ c_j z^{m_j}` with unbounded support.
    pub fn polynomial(dim: usize, terms: &[(f64, Vec<u8>)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (c, m) in terms {
            let mut key = Key {
                mono: [0; MAX_AXES],
                ord: [0; MAX_AXES],
            };
            key.mono[..m.len()].copy_from_slice(m);
            *map.entry(key).or_insert(0.0) += c;
        }
        Self::from_map(
            dim,
            vec![Profile::One; dim],
            map,
            BoxDomain::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim]),
        )
    }

    pub fn zero(dim: usize) -> Self {
        Self::polynomial(dim, &[])
            .expect("zero polynomial")
            .with_support(BoxDomain::cube(dim, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Replace the support box (for polynomial fields restricted to a region).
    pub fn with_support(mut self, support: BoxDomain) -> Self {
        self.support = support;
        self
    }

    fn map(&self) -> BTreeMap<Key, f64> {
        self.terms.iter().copied().collect()
    }

    fn differentiate_axis(&self, map: &BTreeMap<Key, f64>, axis: usize, factor_axis: Option<(usize, f64)>, out: &mut BTreeMap<Key, f64>) {
        for (key, &c) in map {
            let mut base = *key;
            let coef = match factor_axis {
                Some((fa, b)) => {
                    base.mono[fa] += 1;
                    c * b
                }
                None => c,
            };
            let m = base.mono[axis];
            if m > 0 {
                let mut k = base;
                k.mono[axis] -= 1;
                *out.entry(k).or_insert(0.0) += coef * m as f64;
            }
            if !self.profiles[axis].is_one() {
                let mut k = base;
                k.ord[axis] += 1;
                *out.entry(k).or_insert(0.0) += coef;
            }
        }
    }

    /// Exact `∂_{x_i}` or `Y` of this expression.
    pub fn derive(&self, g: &Geometry, dir: Direction) -> Result<AnalyticField> {
        if g.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: g.dim(),
            });
        }
        let map = self.map();
        let mut out = BTreeMap::new();
        match dir {
            Direction::Partial(i) => {
                if i >= g.n() {
                    return Err(param("direction", format!("space index {i} out of range")));
                }
                self.differentiate_axis(&map, i + 1, None, &mut out);
            }
            Direction::Y => {
                self.differentiate_axis(&map, 0, None, &mut out);
                for &(i, j, b) in g.b_sparse() {
                    self.differentiate_axis(&map, i + 1, Some((j + 1, b)), &mut out);
                }
            }
        }
        Self::from_map(self.dim, self.profiles.clone(), out, self.support.clone())
    }

    /// `u ∘ D_λ` as a new expression; exact for all profiles except `Power`.
    pub fn dilated(&self, g: &Geometry, lambda: f64) -> Result<AnalyticField> {
        if self.profiles.iter().any(|p| matches!(p, Profile::Power { .. })) {
            return Err(Error::Unsupported("power profiles cannot be dilated symbolically".into()));
        }
        let profiles: Vec<Profile> = (0..self.dim)
            .map(|a| self.profiles[a].rescaled(lambda.powi(g.axis_weight(a) as i32)))
            .collect();
        let mut map = BTreeMap::new();
        for (key, c) in &self.terms {
            let mut f = *c;
            for a in 0..self.dim {
                let s = lambda.powi(g.axis_weight(a) as i32);
                f *= s.powi(key.mono[a] as i32 - key.ord[a] as i32);
            }
            map.insert(*key, f);
        }
        let support = self.support.dilated_preimage(g, lambda);
        Self::from_map(self.dim, profiles, map, support)
    }
}

impl TestFunction for AnalyticField {
    fn eval(&self, z: &[f64]) -> f64 {
        let mut pv = [[0.0; MAX_ORDER + 1]; MAX_AXES];
        let mut pw = [[0.0; MAX_ORDER + 1]; MAX_AXES];
        for a in 0..self.dim {
            self.profiles[a].values(z[a], &mut pv[a][..=self.max_ord[a]]);
            pw[a][0] = 1.0;
            for k in 1..=self.max_deg[a] {
                pw[a][k] = pw[a][k - 1] * z[a];
            }
        }
        let mut acc = 0.0;
        for (key, c) in &self.terms {
            let mut v = *c;
            for a in 0..self.dim {
                v *= pw[a][key.mono[a] as usize] * pv[a][key.ord[a] as usize];
            }
            acc += v;
        }
        acc
    }

    fn support(&self) -> BoxDomain {
        self.support.clone()
    }

    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(self.derive(g, dir)?))
    }
}

/// `scale · u(D_λ z)`.
#[derive(Clone, Debug)]
pub struct Dilated {
    inner: FieldRef,
    geometry: Geometry,
    lambda: f64,
    scale: f64,
}

impl Dilated {
    pub fn new(inner: FieldRef, g: &Geometry, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(param("lambda", "dilation factor must be positive"));
        }
        Ok(Self {
            inner,
            geometry: g.clone(),
            lambda,
            scale: 1.0,
        })
    }
}

impl TestFunction for Dilated {
    fn eval(&self, z: &[f64]) -> f64 {
        let mut w = [0.0; MAX_AXES];
        let d = z.len();
        self.geometry.dilate_raw(self.lambda, z, &mut w[..d]);
        self.scale * self.inner.eval(&w[..d])
    }
    fn support(&self) -> BoxDomain {
        self.inner.support().dilated_preimage(&self.geometry, self.lambda)
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(Self {
            inner: self.inner.derivative(g, dir)?,
            geometry: self.geometry.clone(),
            lambda: self.lambda,
            scale: self.scale * self.lambda.powi(dir.weight(g) as i32),
        }))
    }
}

/// `u(ζ ∘ z)`; commutes with every left-invariant derivative.
#[derive(Clone, Debug)]
pub struct Translated {
    inner: FieldRef,
    geometry: Geometry,
    zeta: Vec<f64>,
}

impl Translated {
    pub fn new(inner: FieldRef, g: &Geometry, zeta: &[f64]) -> Result<Self> {
        if zeta.len() != g.dim() {
            return Err(Error::Dimension {
                expected: g.dim(),
                got: zeta.len(),
            });
        }
        Ok(Self {
            inner,
            geometry: g.clone(),
            zeta: zeta.to_vec(),
        })
    }
}

impl TestFunction for Translated {
    fn eval(&self, z: &[f64]) -> f64 {
        let mut w = [0.0; MAX_AXES];
        let d = z.len();
        self.geometry.compose_raw(&self.zeta, z, &mut w[..d]);
        self.inner.eval(&w[..d])
    }
    fn support(&self) -> BoxDomain {
        let mut inv = vec![0.0; self.zeta.len()];
        self.geometry.invert_raw(&self.zeta, &mut inv);
        self.inner.support().left_translate_bound(&self.geometry, &inv)
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(Self {
            inner: self.inner.derivative(g, dir)?,
            geometry: self.geometry.clone(),
            zeta: self.zeta.clone(),
        }))
    }
}

/// `Σ c_j u_j`.
#[derive(Clone, Debug)]
pub struct LinearCombination {
    parts: Vec<(f64, FieldRef)>,
}

impl LinearCombination {
    pub fn new(parts: Vec<(f64, FieldRef)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(param("parts", "empty linear combination"));
        }
        Ok(Self { parts })
    }
}

impl TestFunction for LinearCombination {
    fn eval(&self, z: &[f64]) -> f64 {
        self.parts.iter().map(|(c, u)| c * u.eval(z)).sum()
    }
    fn support(&self) -> BoxDomain {
        let mut b = self.parts[0].1.support();
        for (_, u) in &self.parts[1..] {
            b = b.union(&u.support());
        }
        b
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        let parts = self
            .parts
            .iter()
            .map(|(c, u)| Ok((*c, u.derivative(g, dir)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self { parts }))
    }
}

/// `Ku = ½ Σ_{i<d_0} ∂²_{x_i} u − Yu`.
pub fn kolmogorov_apply(u: &FieldRef, g: &Geometry) -> Result<FieldRef> {
    let mut parts = Vec::new();
    for i in 0..g.d0() {
        parts.push((0.5, apply_word(u, g, &[Direction::Partial(i), Direction::Partial(i)])?));
    }
    parts.push((-1.0, u.derivative(g, Direction::Y)?));
    Ok(Arc::new(LinearCombination::new(parts)?))
}

/// Tartar truncation `φ(u) = min(max(|u| - lo, 0), hi - lo)`.
#[derive(Clone, Debug)]
pub struct Truncated {
    inner: FieldRef,
    lo: f64,
    hi: f64,
}

impl Truncated {
    pub fn new(inner: FieldRef, lo: f64, hi: f64) -> Result<Self> {
        if !(hi >= lo && lo >= 0.0) {
            return Err(param("levels", format!("need 0 <= lo <= hi, got ({lo}, {hi})")));
        }
        Ok(Self { inner, lo, hi })
    }

    pub fn apply(v: f64, lo: f64, hi: f64) -> f64 {
        (v.abs() - lo).clamp(0.0, hi - lo)
    }
}

impl TestFunction for Truncated {
    fn eval(&self, z: &[f64]) -> f64 {
        Self::apply(self.inner.eval(z), self.lo, self.hi)
    }
    fn support(&self) -> BoxDomain {
        self.inner.support()
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(TruncatedDerivative {
            inner: self.inner.clone(),
            d_inner: self.inner.derivative(g, dir)?,
            lo: self.lo,
            hi: self.hi,
        }))
    }
}

/// `1_{lo<|u|<hi} sign(u) Xu`, the a.e. derivative of a truncation.
#[derive(Clone, Debug)]
pub struct TruncatedDerivative {
    inner: FieldRef,
    d_inner: FieldRef,
    lo: f64,
    hi: f64,
}

impl TestFunction for TruncatedDerivative {
    fn eval(&self, z: &[f64]) -> f64 {
        let u = self.inner.eval(z);
        let a = u.abs();
        if a > self.lo && a < self.hi {
            u.signum() * self.d_inner.eval(z)
        } else {
            0.0
        }
    }
    fn support(&self) -> BoxDomain {
        self.inner.support()
    }
    fn derivative(&self, _g: &Geometry, _dir: Direction) -> Result<FieldRef> {
        Err(Error::Unsupported("truncations are only Lipschitz".into()))
    }
}

/// Test-function description shared by the CLI and experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(flatten)]
    pub base: BaseField,
    #[serde(default)]
    pub dilate: Option<f64>,
    #[serde(default)]
    pub translate: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseField {
    /// `amplitude · exp(-Σ a_i (z_i - c_i)^2)`, axes ordered `(t, x)`.
    Gaussian {
        a: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Gaussian times `cos(ω z_axis)`.
    Modulated {
        a: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
        axis: usize,
        omega: f64,
    },
    /// Product of compact bumps.
    Bump {
        half_widths: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Gaussian envelope times the monomial `z^monomial`.
    PolyGaussian {
        a: Vec<f64>,
        monomial: Vec<u8>,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn gaussian(a: Vec<f64>) -> Self {
        Self {
            base: BaseField::Gaussian {
                a,
                center: None,
                amplitude: 1.0,
            },
            dilate: None,
            translate: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Number of axes the spec describes.
    pub fn dim(&self) -> usize {
        match &self.base {
            BaseField::Gaussian { a, .. } | BaseField::Modulated { a, .. } | BaseField::PolyGaussian { a, .. } => a.len(),
            BaseField::Bump { half_widths, .. } => half_widths.len(),
        }
    }

    /// The undecorated closed-form field.
    pub fn base_field(&self) -> Result<AnalyticField> {
        let d = self.dim();
        let center = |c: &Option<Vec<f64>>| c.clone().unwrap_or_else(|| vec![0.0; d]);
        match &self.base {
            BaseField::Gaussian { a, center: c, amplitude } => AnalyticField::gaussian(a, &center(c), *amplitude),
            BaseField::Modulated {
                a,
                center: c,
                amplitude,
                axis,
                omega,
            } => {
                if *axis >= d {
                    return Err(param("axis", format!("axis {axis} out of range")));
                }
                let c = center(c);
                let profiles = (0..d)
                    .map(|i| {
                        if i == *axis {
                            Profile::GaussWave {
                                a: a[i],
                                c: c[i],
                                omega: *omega,
                                phase: 0.0,
                            }
                        } else {
                            Profile::Gauss { a: a[i], c: c[i] }
                        }
                    })
                    .collect();
                AnalyticField::separable(profiles, &[], *amplitude)
            }
            BaseField::Bump {
                half_widths,
                center: c,
                amplitude,
            } => AnalyticField::bump(half_widths, &center(c), *amplitude),
            BaseField::PolyGaussian { a, monomial, amplitude } => {
                let profiles = a.iter().map(|&a| Profile::Gauss { a, c: 0.0 }).collect();
                AnalyticField::separable(profiles, monomial, *amplitude)
            }
        }
    }

    /// Base field with the optional dilation and left translation applied.
    pub fn build(&self, g: &Geometry) -> Result<FieldRef> {
        if self.dim() != g.dim() {
            return Err(Error::Dimension {
                expected: g.dim(),
                got: self.dim(),
            });
        }
        let mut u: FieldRef = Arc::new(self.base_field()?);
        if let Some(l) = self.dilate {
            u = Arc::new(Dilated::new(u, g, l)?);
        }
        if let Some(z) = &self.translate {
            u = Arc::new(Translated::new(u, g, z)?);
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::BlockStructure;

    fn lang() -> Geometry {
        Geometry::new(BlockStructure::langevin(1)).unwrap()
    }

    #[test]
    fn polynomial_derivative_examples() {
        let g = lang();
        let v: FieldRef = Arc::new(AnalyticField::polynomial(3, &[(1.0, vec![0, 1, 0])]).unwrap());
        let z = [0.3, -1.2, 2.5];
        assert_eq!(v.derivative(&g, Direction::Y).unwrap().eval(&z), 0.0);
        assert_eq!(v.derivative(&g, Direction::Partial(0)).unwrap().eval(&z), 1.0);
        let p: FieldRef = Arc::new(AnalyticField::polynomial(3, &[(1.0, vec![0, 0, 1])]).unwrap());
        assert_eq!(p.derivative(&g, Direction::Y).unwrap().eval(&z), -1.2);
        let c: FieldRef = Arc::new(AnalyticField::polynomial(3, &[(2.0, vec![0, 0, 0])]).unwrap());
        assert_eq!(c.derivative(&g, Direction::Y).unwrap().eval(&z), 0.0);
    }

    fn fd_error(u: &FieldRef, g: &Geometry, dir: Direction, z: &[f64], h: f64) -> f64 {
        let du = u.derivative(g, dir).unwrap().eval(z);
        let mut zp = vec![0.0; z.len()];
        let mut zm = vec![0.0; z.len()];
        match dir {
            Direction::Partial(i) => {
                zp.copy_from_slice(z);
                zm.copy_from_slice(z);
                zp[i + 1] += h;
                zm[i + 1] -= h;
            }
            Direction::Y => {
                crate::grid::flow_y_raw(g, z, h, &mut zp);
                crate::grid::flow_y_raw(g, z, -h, &mut zm);
            }
        }
        ((u.eval(&zp) - u.eval(&zm)) / (2.0 * h) - du).abs()
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let g = lang();
        let fields: Vec<FieldRef> = vec![
            Arc::new(AnalyticField::gaussian(&[0.5, 1.0, 0.7], &[0.1, -0.2, 0.3], 1.0).unwrap()),
            Arc::new(AnalyticField::bump(&[1.5, 1.2, 2.0], &[0.0, 0.1, 0.0], 2.0).unwrap()),
            Arc::new(
                FieldSpec {
                    base: BaseField::Modulated {
                        a: vec![0.5, 0.5, 0.5],
                        center: None,
                        amplitude: 1.0,
                        axis: 1,
                        omega: 3.0,
                    },
                    dilate: None,
                    translate: None,
                }
                .base_field()
                .unwrap(),
            ),
        ];
        let z = [0.21, 0.33, -0.41];
        for u in &fields {
            for dir in [Direction::Partial(0), Direction::Partial(1), Direction::Y] {
                let e1 = fd_error(u, &g, dir, &z, 1e-2);
                let e2 = fd_error(u, &g, dir, &z, 5e-3);
                let order = (e1 / e2).log2();
                assert!(order >= 1.9, "order {order} for {dir:?}");
            }
        }
    }

    #[test]
    fn symbolic_dilation_matches_wrapper() {
        let g = lang();
        let base = AnalyticField::gaussian(&[0.5, 1.0, 0.7], &[0.1, -0.2, 0.3], 1.0).unwrap();
        let sym = base.dilated(&g, 2.0).unwrap();
        let wrap = Dilated::new(Arc::new(base.clone()), &g, 2.0).unwrap();
        let z = [0.05, 0.1, -0.02];
        assert!((sym.eval(&z) - wrap.eval(&z)).abs() < 1e-14);
        let a = sym.derive(&g, Direction::Y).unwrap().eval(&z);
        let b = wrap.derivative(&g, Direction::Y).unwrap().eval(&z);
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn translation_commutes_with_derivatives() {
        let g = lang();
        let base: FieldRef = Arc::new(AnalyticField::gaussian(&[0.5, 1.0, 0.7], &[0.0; 3], 1.0).unwrap());
        let zeta = [0.4, -0.3, 0.8];
        let tr: FieldRef = Arc::new(Translated::new(base.clone(), &g, &zeta).unwrap());
        let z = [0.1, 0.2, -0.3];
        let e = fd_error(&tr, &g, Direction::Y, &z, 1e-3);
        assert!(e < 1e-5);
        let sup = tr.support();
        let mut w = [0.0; 3];
        g.compose_raw(&zeta, &z, &mut w);
        assert!(sup.contains(&z) == base.support().contains(&w));
    }

    #[test]
    fn bump_polynomials_match_finite_differences() {
        let p = Profile::Bump { c: 0.0, w: 1.0 };
        let mut v = [0.0; 4];
        let mut vp = [0.0; 4];
        let mut vm = [0.0; 4];
        let h = 1e-5;
        p.values(0.3, &mut v);
        p.values(0.3 + h, &mut vp);
        p.values(0.3 - h, &mut vm);
        for m in 0..3 {
            let fd = (vp[m] - vm[m]) / (2.0 * h);
            assert!((fd - v[m + 1]).abs() < 1e-6 * v[m + 1].abs().max(1e-3), "m={m}");
        }
    }
}
