//! Distribution functions, decreasing rearrangements, Lorentz quasi-norms,
//! Tartar level sequences with their truncations, and a mollifier upper
//! bound for K-functionals.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::field::{Direction, FieldRef, TestFunction, Truncated, MAX_AXES};
use crate::fit::ExponentFit;
use crate::grid::{BoxDomain, GridFunction, GridSpec};
use crate::norms::{lp_norm, sobolev_norm, sobolev_seminorm, sup_norm, NormSettings, SeminormForm, SobolevVariant};
use crate::quadrature::pairwise_sum;
use crate::structure::Geometry;
use crate::taylor::{BumpKernel, Mollified};

/// `|u|` as a step function: value `levels[j]` on a set of measure
/// `cum[j] - cum[j-1]`, with `levels` strictly decreasing and positive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rearrangement {
    levels: Vec<f64>,
    cum: Vec<f64>,
}

impl Rearrangement {
    /// From cell values and cell measures. Equal values are merged; sorting
    /// is stable, ties broken by cell index.
    pub fn from_cells(values: &[f64], measures: &[f64]) -> Result<Self> {
        if values.len() != measures.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: measures.len(),
            });
        }
        if measures.iter().any(|m| !(*m >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
            return Err(param("cells", "need finite values and non-negative measures"));
        }
        let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0 && measures[i] > 0.0).collect();
        idx.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut levels: Vec<f64> = Vec::new();
        let mut mass: Vec<Vec<f64>> = Vec::new();
        for i in idx {
            let v = values[i].abs();
            if levels.last() == Some(&v) {
                mass.last_mut().unwrap().push(measures[i]);
            } else {
                levels.push(v);
                mass.push(vec![measures[i]]);
            }
        }
        let mut cum = Vec::with_capacity(levels.len());
        let mut acc = 0.0;
        for m in &mass {
            acc += pairwise_sum(m);
            cum.push(acc);
        }
        Ok(Self { levels, cum })
    }

    /// Steps `(value, length)` already in decreasing order, e.g. a synthetic `u*`.
    pub fn from_steps(steps: &[(f64, f64)]) -> Result<Self> {
        let mut levels = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for &(v, len) in steps {
            if !(len >= 0.0) || !(v >= 0.0) {
                return Err(param("steps", "need non-negative values and lengths"));
            }
            if let Some(&last) = levels.last() {
                if v > last {
                    return Err(param("steps", "values must be non-increasing"));
                }
            }
            if v == 0.0 || len == 0.0 {
                continue;
            }
            acc += len;
            if levels.last() == Some(&v) {
                *cum.last_mut().unwrap() = acc;
            } else {
                levels.push(v);
                cum.push(acc);
            }
        }
        Ok(Self { levels, cum })
    }

    /// Node values with trapezoid weights as cell measures.
    pub fn from_grid(gf: &GridFunction) -> Result<Self> {
        let spec = gf.spec();
        let w = spec.trapezoid();
        let d = spec.dim();
        let mut idx = [0usize; MAX_AXES];
        let measures: Vec<f64> = (0..spec.len())
            .map(|k| {
                spec.unravel(k, &mut idx[..d]);
                (0..d).map(|a| w[a][idx[a]]).product()
            })
            .collect();
        Self::from_cells(gf.values(), &measures)
    }

    /// Samples `u` on `points` nodes per axis over its support box.
    pub fn from_function(u: &dyn TestFunction, points: usize) -> Result<Self> {
        let b = u.support();
        if !b.is_finite() {
            return Err(Error::Unsupported("rearrangement needs a bounded support box".into()));
        }
        if (0..b.dim()).any(|a| b.width(a) <= 0.0) {
            return Ok(Self {
                levels: Vec::new(),
                cum: Vec::new(),
            });
        }
        Self::from_grid(&sample_support(u, points)?)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn max(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    pub fn total_measure(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// `μ_u(λ) = Leb(|u| > λ)`.
    pub fn mu(&self, lambda: f64) -> f64 {
        let j = self.levels.partition_point(|&v| v > lambda);
        if j == 0 {
            0.0
        } else {
            self.cum[j - 1]
        }
    }

    /// `μ_u(λ−) = Leb(|u| ≥ λ)`; infinite at `λ ≤ 0`.
    pub fn mu_left(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return f64::INFINITY;
        }
        let j = self.levels.partition_point(|&v| v >= lambda);
        if j == 0 {
            0.0
        } else {
            self.cum[j - 1]
        }
    }

    /// `u*(t) = inf{λ ≥ 0 : μ_u(λ) ≤ t}`, right-continuous.
    pub fn u_star(&self, t: f64) -> f64 {
        let j = self.cum.partition_point(|&m| m <= t);
        self.levels.get(j).copied().unwrap_or(0.0)
    }

    /// `u*(t−)`.
    pub fn u_star_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::INFINITY;
        }
        let j = self.cum.partition_point(|&m| m < t);
        self.levels.get(j).copied().unwrap_or(0.0)
    }

    /// `‖u*‖_p`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.lorentz_norm(p, p)
    }

    /// `‖t^{1/p} u*(t)‖_{L^q(dt/t)}`, exact on the steps:
    /// `Σ v_j^q (p/q)(M_j^{q/p} − M_{j−1}^{q/p})`; `q = ∞` gives `max_j v_j M_j^{1/p}`.
    pub fn lorentz_norm(&self, p: f64, q: f64) -> Result<f64> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(param("p", "need 1 ≤ p < ∞"));
        }
        if !(q >= 1.0) {
            return Err(param("q", "need q ≥ 1"));
        }
        if self.levels.is_empty() {
            return Ok(0.0);
        }
        if q.is_infinite() {
            return Ok(self
                .levels
                .iter()
                .zip(&self.cum)
                .map(|(v, m)| v * m.powf(1.0 / p))
                .fold(0.0, f64::max));
        }
        let r = q / p;
        let mut prev = 0.0;
        let mut terms = Vec::with_capacity(self.levels.len());
        for (v, m) in self.levels.iter().zip(&self.cum) {
            let piece = if r == 1.0 { m - prev } else { m.powf(r) - prev.powf(r) };
            terms.push(v.powf(q) * piece / r);
            prev = *m;
        }
        Ok(pairwise_sum(&terms).powf(1.0 / q))
    }

    /// `(q/p)^{1/q} ‖u‖_{L^{p,q}}`, non-increasing in `q`.
    pub fn lorentz_normalized(&self, p: f64, q: f64) -> Result<f64> {
        let v = self.lorentz_norm(p, q)?;
        Ok(if q.is_infinite() { v } else { (q / p).powf(1.0 / q) * v })
    }
}

/// `(Σ |v_i|^p m_i)^{1/p}` over cells, for equimeasurability checks.
pub fn cell_lp_norm(values: &[f64], measures: &[f64], p: f64) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .zip(measures)
        .map(|(v, m)| v.abs().powf(p) * m)
        .collect();
    pairwise_sum(&terms).powf(1.0 / p)
}

/// `a_k = u*(e^k)` for `k` in `[k_min, k_max + 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TartarSequence {
    pub k_min: i32,
    pub k_max: i32,
    levels: Vec<f64>,
}

/// Outcome of checking `μ(a_k) ≤ e^k ≤ μ(a_k−) ≤ μ(a_{k+1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCheck {
    pub checked: usize,
    pub violations: Vec<i32>,
    /// `k` with `a_k = a_{k+1}`, where the last inequality does not apply.
    pub plateaus: Vec<i32>,
}

impl LevelCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default search range for the level index.
pub const K_WINDOW: (i32, i32) = (-40, 40);

impl TartarSequence {
    /// Levels on `window`, clipped to start at the last `k` with
    /// `a_k = max|u|` and end at the first `k` with `a_k = 0`.
    pub fn new(r: &Rearrangement, window: (i32, i32)) -> Result<Self> {
        let (lo, hi) = window;
        if lo > hi {
            return Err(param("window", "empty k window"));
        }
        let top = r.max();
        let mut k_min = lo;
        while k_min < hi && r.u_star(((k_min + 1) as f64).exp()) >= top {
            k_min += 1;
        }
        let mut k_max = hi;
        while k_max > k_min && r.u_star((k_max as f64).exp()) == 0.0 {
            k_max -= 1;
        }
        let levels = (k_min..=k_max + 1).map(|k| r.u_star((k as f64).exp())).collect();
        Ok(Self { k_min, k_max, levels })
    }

    pub fn a(&self, k: i32) -> Result<f64> {
        if k < self.k_min || k > self.k_max + 1 {
            return Err(param("k", format!("{k} outside [{}, {}]", self.k_min, self.k_max + 1)));
        }
        Ok(self.levels[(k - self.k_min) as usize])
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<i32> {
        self.k_min..=self.k_max
    }

    /// `a_k − a_{k+1}` for `k` in the window.
    pub fn gaps(&self) -> Vec<(i32, f64)> {
        self.ks()
            .map(|k| {
                let i = (k - self.k_min) as usize;
                (k, self.levels[i] - self.levels[i + 1])
            })
            .collect()
    }

    pub fn check_levels(&self, r: &Rearrangement) -> LevelCheck {
        let mut out = LevelCheck {
            checked: 0,
            violations: Vec::new(),
            plateaus: Vec::new(),
        };
        for k in self.ks() {
            let i = (k - self.k_min) as usize;
            let (ak, ak1) = (self.levels[i], self.levels[i + 1]);
            let ek = (k as f64).exp();
            let tol = 1e-12 * ek;
            let mut ok = r.mu(ak) <= ek + tol && ek <= r.mu_left(ak) + tol;
            if ak1 < ak {
                ok &= r.mu_left(ak) <= r.mu(ak1) + tol;
            } else {
                out.plateaus.push(k);
            }
            out.checked += 1;
            if !ok {
                out.violations.push(k);
            }
        }
        out
    }

    /// Grid values `φ_k(u)`.
    pub fn truncate(&self, gf: &GridFunction, k: i32) -> Result<GridFunction> {
        let (hi, lo) = (self.a(k)?, self.a(k + 1)?);
        if k > self.k_max {
            return Err(param("k", "outside the window"));
        }
        let vals = gf.values().iter().map(|&v| Truncated::apply(v, lo, hi)).collect();
        GridFunction::new(gf.spec().clone(), vals, gf.margin())
    }

    /// `φ_k(u)` as a field with a.e. first derivatives.
    pub fn truncate_field(&self, u: &FieldRef, k: i32) -> Result<FieldRef> {
        if k > self.k_max {
            return Err(param("k", "outside the window"));
        }
        let (hi, lo) = (self.a(k)?, self.a(k + 1)?);
        Ok(Arc::new(Truncated::new(u.clone(), lo, hi)?))
    }
}

pub fn tartar_sequence(r: &Rearrangement, window: (i32, i32)) -> Result<TartarSequence> {
    TartarSequence::new(r, window)
}

/// Growth of partial sums when a window doubles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailGrowth {
    pub half: f64,
    pub full: f64,
}

impl TailGrowth {
    pub fn ratio(&self) -> f64 {
        self.full / self.half
    }
}

/// Synthetic `u*` equal to `f(e^{k+1})` on `[e^k, e^{k+1})` for `|k| < big`,
/// `f(e^{−big})` below `e^{−big}` and zero beyond `e^{big}`.
pub fn synthetic_tail<F: Fn(f64) -> f64>(f: F, big: i32) -> Result<Rearrangement> {
    let mut steps = vec![(f((-big as f64).exp()), (-big as f64).exp())];
    for k in -big..big {
        let (a, b) = ((k as f64).exp(), ((k + 1) as f64).exp());
        steps.push((f(b), b - a));
    }
    Rearrangement::from_steps(&steps)
}

/// For the synthetic tail at `big` and `2·big`: `‖u‖_{L^{p,q}}^q` and
/// `Σ_k (e^{k/p} a_k)^q`, each as a [`TailGrowth`].
pub fn tail_equivalence<F: Fn(f64) -> f64 + Copy>(f: F, p: f64, q: f64, big: i32) -> Result<(TailGrowth, TailGrowth)> {
    let mut norm = [0.0; 2];
    let mut sum = [0.0; 2];
    for (i, b) in [big, 2 * big].into_iter().enumerate() {
        let r = synthetic_tail(f, b)?;
        norm[i] = r.lorentz_norm(p, q)?.powf(q);
        let ts = TartarSequence::new(&r, (-b - 1, b + 1))?;
        let terms: Vec<f64> = ts
            .ks()
            .map(|k| ((k as f64 / p).exp() * ts.a(k).unwrap()).powf(q))
            .collect();
        sum[i] = pairwise_sum(&terms);
    }
    Ok((
        TailGrowth {
            half: norm[0],
            full: norm[1],
        },
        TailGrowth {
            half: sum[0],
            full: sum[1],
        },
    ))
}

/// Second space of a K-functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SpacePair {
    /// `(L^p, L^∞)` with `u_ε = u_{1,ε}`.
    LpLinf,
    /// `(L^p, W^{m,p}_B)` with `u_ε = u_{n,ε}`.
    LpSobolev { n: usize, m: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KPoint {
    pub t: f64,
    /// `min(‖u‖_{Z_1}, t‖u‖_{Z_2}, min_ε ‖u − u_ε‖_{Z_1} + t‖u_ε‖_{Z_2})`.
    pub k: f64,
    /// The mollifier part alone.
    pub mollifier: f64,
    pub best_eps: f64,
}

/// Mollifier upper bound for `K(t, u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KCurve {
    pub label: &'static str,
    pub points: Vec<KPoint>,
    /// `(ε, ‖u − u_ε‖_{Z_1}, ‖u_ε‖_{Z_2})`.
    pub splits: Vec<(f64, f64, f64)>,
    pub u_z1: f64,
    pub u_z2: f64,
}

impl KCurve {
    /// Log-log fit of the mollifier part against `t`.
    pub fn slope(&self) -> Result<ExponentFit> {
        ExponentFit::fit(&self.points.iter().map(|p| (p.t, p.mollifier)).collect::<Vec<_>>())
    }
}

/// Grid resolution used to measure `u_ε` in `Z_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KSettings {
    pub sup_points: usize,
    pub grid_points: usize,
    pub margin: usize,
}

impl Default for KSettings {
    fn default() -> Self {
        Self {
            sup_points: 24,
            grid_points: 25,
            margin: 3,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn k_functional(
    u: &FieldRef,
    g: &Geometry,
    p: f64,
    pair: SpacePair,
    t_grid: &[f64],
    eps_grid: &[f64],
    kernel: Arc<BumpKernel>,
    set: &NormSettings,
    ks: &KSettings,
) -> Result<KCurve> {
    if t_grid.is_empty() {
        return Err(param("t_grid", "empty t grid"));
    }
    if eps_grid.is_empty() {
        return Err(param("eps_grid", "empty ε grid"));
    }
    let u_z1 = lp_norm(u.as_ref(), p, set)?;
    let (n, u_z2) = match pair {
        SpacePair::LpLinf => (1, sup_norm(u.as_ref(), ks.sup_points)?),
        SpacePair::LpSobolev { n, m } => {
            if m <= n {
                return Err(param("m", "need m > n"));
            }
            (n, sobolev_norm(u, g, m, p, SobolevVariant::Full, set)?)
        }
    };
    let mut splits = Vec::new();
    for &eps in eps_grid {
        let mol = Arc::new(Mollified::new(u, g, n, eps, kernel.clone())?);
        let diff = crate::field::LinearCombination::new(vec![(1.0, u.clone()), (-1.0, mol.clone() as FieldRef)])?;
        let z1 = lp_norm(&diff, p, set)?;
        let z2 = match pair {
            SpacePair::LpLinf => sup_norm(mol.as_ref(), ks.sup_points)?,
            SpacePair::LpSobolev { m, .. } => {
                let sup = mol.support();
                let d = g.dim();
                let inner = (ks.grid_points - 1 - 2 * ks.margin) as f64;
                let h: Vec<f64> = (0..d).map(|a| sup.width(a) / inner).collect();
                let lo = (0..d).map(|a| sup.lo[a] - ks.margin as f64 * h[a]).collect();
                let hi = (0..d).map(|a| sup.hi[a] + ks.margin as f64 * h[a]).collect();
                let spec = GridSpec::new(lo, hi, vec![ks.grid_points; d])?;
                let gf: FieldRef = Arc::new(crate::grid::sample(mol.as_ref(), &spec, ks.margin)?);
                sobolev_norm(&gf, g, m, p, SobolevVariant::Full, set)?
            }
        };
        splits.push((eps, z1, z2));
    }
    let points = t_grid
        .iter()
        .map(|&t| {
            let (mut best, mut best_eps) = (f64::INFINITY, f64::NAN);
            for &(eps, a, b) in &splits {
                let v = a + t * b;
                if v < best {
                    best = v;
                    best_eps = eps;
                }
            }
            KPoint {
                t,
                k: best.min(u_z1).min(t * u_z2),
                mollifier: best,
                best_eps,
            }
        })
        .collect();
    Ok(KCurve {
        label: "mollifier upper bound",
        points,
        splits,
        u_z1,
        u_z2,
    })
}

/// `p* = p𝐝/(𝐝 − p)` for `1 ≤ p < 𝐝`.
pub fn critical_exponent(p: f64, hom_dim: f64) -> Result<f64> {
    if !(p >= 1.0 && p < hom_dim) {
        return Err(param("p", format!("need 1 ≤ p < {hom_dim}")));
    }
    Ok(p * hom_dim / (hom_dim - p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    pub k: i32,
    pub a_k: f64,
    pub gap: f64,
    /// `e^{k/p*}(a_k − a_{k+1})`.
    pub weighted_gap: f64,
    /// `|φ_k(u)|_{1,p,B}`.
    pub seminorm: f64,
}

impl LevelRow {
    pub fn ratio(&self) -> Option<f64> {
        (self.gap > 0.0 && self.seminorm > 0.0).then(|| self.weighted_gap / self.seminorm)
    }
}

/// Level gaps against the seminorms of the truncations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub p: f64,
    pub p_star: f64,
    pub rows: Vec<LevelRow>,
}

impl LevelReport {
    /// Smallest `c` with `e^{k/p*}(a_k − a_{k+1}) ≤ c|φ_k(u)|_{1,p,B}` on every row.
    pub fn c_hat(&self) -> f64 {
        self.rows.iter().filter_map(LevelRow::ratio).fold(0.0, f64::max)
    }

    /// `Σ_k |φ_k(u)|^p_{1,p,B}`.
    pub fn seminorm_power_sum(&self) -> f64 {
        pairwise_sum(&self.rows.iter().map(|r| r.seminorm.powf(self.p)).collect::<Vec<_>>())
    }
}

/// `u` restricted to a smaller box known to contain its support.
#[derive(Debug)]
struct Restricted {
    inner: FieldRef,
    support: BoxDomain,
}

impl TestFunction for Restricted {
    fn eval(&self, z: &[f64]) -> f64 {
        if self.support.contains(z) {
            self.inner.eval(z)
        } else {
            0.0
        }
    }
    fn support(&self) -> BoxDomain {
        self.support.clone()
    }
    fn derivative(&self, g: &Geometry, dir: Direction) -> Result<FieldRef> {
        Ok(Arc::new(Restricted {
            inner: self.inner.derivative(g, dir)?,
            support: self.support.clone(),
        }))
    }
}

/// Bounding box of the nodes where `|u| > lo`, grown one spacing at a time
/// until `|u| ≤ lo` on a sample of its faces.
fn level_box(u: &dyn TestFunction, gf: &GridFunction, lo: f64) -> Option<BoxDomain> {
    let spec = gf.spec();
    let d = spec.dim();
    let mut lo_c = vec![f64::INFINITY; d];
    let mut hi_c = vec![f64::NEG_INFINITY; d];
    let mut z = [0.0; MAX_AXES];
    for (k, v) in gf.values().iter().enumerate() {
        if v.abs() > lo {
            spec.coords(k, &mut z[..d]);
            for a in 0..d {
                lo_c[a] = lo_c[a].min(z[a]);
                hi_c[a] = hi_c[a].max(z[a]);
            }
        }
    }
    if lo_c[0] > hi_c[0] {
        return None;
    }
    let full = spec.bounds();
    for grow in 1.. {
        let b = BoxDomain::new(
            (0..d).map(|a| (lo_c[a] - grow as f64 * spec.spacing(a)).max(full.lo[a])).collect(),
            (0..d).map(|a| (hi_c[a] + grow as f64 * spec.spacing(a)).min(full.hi[a])).collect(),
        );
        if b == full || below_on_faces(u, &b, lo) {
            return Some(b);
        }
    }
    unreachable!()
}

fn below_on_faces(u: &dyn TestFunction, b: &BoxDomain, lo: f64) -> bool {
    const N: usize = 9;
    let d = b.dim();
    let mut z = [0.0; MAX_AXES];
    for a in 0..d {
        for side in [b.lo[a], b.hi[a]] {
            for k in 0..N.pow(d as u32 - 1) {
                let mut rest = k;
                for c in 0..d {
                    if c == a {
                        z[c] = side;
                    } else {
                        z[c] = b.lo[c] + b.width(c) * (rest % N) as f64 / (N - 1) as f64;
                        rest /= N;
                    }
                }
                if u.eval(&z[..d]).abs() > lo {
                    return false;
                }
            }
        }
    }
    true
}

/// Rearranges `u` from `points` samples per axis and measures every
/// truncation. Each `φ_k(u)` is integrated over a box around the sampled
/// set `{|u| > a_{k+1}}`, so that thin top levels are resolved as well as
/// the wide ones; this assumes that set has no components between nodes.
pub fn level_report(u: &FieldRef, g: &Geometry, p: f64, points: usize, set: &NormSettings) -> Result<(TartarSequence, LevelReport)> {
    let p_star = critical_exponent(p, g.hom_dim() as f64)?;
    let gf = sample_support(u.as_ref(), points)?;
    let r = Rearrangement::from_grid(&gf)?;
    let ts = TartarSequence::new(&r, K_WINDOW)?;
    let mut rows = Vec::new();
    for (k, gap) in ts.gaps() {
        let seminorm = match level_box(u.as_ref(), &gf, ts.a(k + 1)?) {
            Some(support) if gap > 0.0 => {
                let phi: FieldRef = Arc::new(Restricted {
                    inner: ts.truncate_field(u, k)?,
                    support,
                });
                sobolev_seminorm(&phi, g, 1, p, SeminormForm::Recursive, set)?
            }
            _ => 0.0,
        };
        rows.push(LevelRow {
            k,
            a_k: ts.a(k)?,
            gap,
            weighted_gap: (k as f64 / p_star).exp() * gap,
            seminorm,
        });
    }
    Ok((ts, LevelReport { p, p_star, rows }))
}

/// Node samples of `u` over its support box.
pub fn sample_support(u: &dyn TestFunction, points: usize) -> Result<GridFunction> {
    let b = u.support();
    if !b.is_finite() {
        return Err(Error::Unsupported("rearrangement needs a bounded support box".into()));
    }
    let spec = GridSpec::on_box(&b, points)?;
    let d = spec.dim();
    let values: Vec<f64> = (0..spec.len())
        .map(|k| {
            let mut z = [0.0; MAX_AXES];
            spec.coords(k, &mut z[..d]);
            u.eval(&z[..d])
        })
        .collect();
    GridFunction::new(spec, values, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_rearrangement() {
        let r = Rearrangement::from_cells(&[0.0, 1.0, 1.0, 0.0], &[1.0, 0.5, 0.25, 2.0]).unwrap();
        assert_eq!(r.u_star(0.0), 1.0);
        assert_eq!(r.u_star(0.7), 1.0);
        assert_eq!(r.u_star(0.75), 0.0);
        assert_eq!(r.lorentz_norm(3.0, 3.0).unwrap(), 0.75f64.powf(1.0 / 3.0));
        let ts = TartarSequence::new(&r, K_WINDOW).unwrap();
        for k in ts.ks() {
            let expect = if (k as f64).exp() < 0.75 { 1.0 } else { 0.0 };
            assert_eq!(ts.a(k).unwrap(), expect);
        }
    }

    #[test]
    fn zero_function() {
        let r = Rearrangement::from_cells(&[0.0; 5], &[1.0; 5]).unwrap();
        assert_eq!(r.u_star(0.0), 0.0);
        for q in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(r.lorentz_norm(2.0, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn galois_pair_and_ordering() {
        let vals: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() * (1.0 + i as f64 / 50.0)).collect();
        let meas: Vec<f64> = (0..200).map(|i| 0.01 + 0.001 * (i % 7) as f64).collect();
        let r = Rearrangement::from_cells(&vals, &meas).unwrap();
        for &t in &[0.0, 0.01, 0.3, 1.0, 2.5] {
            for &l in &[0.0, 0.2, 0.9, 1.5, 3.0] {
                assert_eq!(r.u_star(t) > l, r.mu(l) > t);
            }
        }
        let p = 2.0;
        let direct = cell_lp_norm(&vals, &meas, p);
        assert!((r.lp_norm(p).unwrap() - direct).abs() <= 1e-12 * direct);
        let n: Vec<f64> = [1.0, 2.0, 4.0, f64::INFINITY]
            .iter()
            .map(|&q| r.lorentz_normalized(p, q).unwrap())
            .collect();
        assert!(n.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{n:?}");
    }

    #[test]
    fn synthetic_tails_classify() {
        let (p, q) = (2.0, 2.0);
        let conv = |t: f64| t.powf(-1.0 / p) / (2.0 + t.ln().abs());
        let div = |t: f64| t.powf(-1.0 / p) / (2.0 + t.ln().abs()).powf(0.25);
        let (n, s) = tail_equivalence(conv, p, q, 100).unwrap();
        assert!(n.ratio() < 1.05 && s.ratio() < 1.05, "{n:?} {s:?}");
        let (n, s) = tail_equivalence(div, p, q, 100).unwrap();
        assert!(n.ratio() > 1.2 && s.ratio() > 1.2, "{n:?} {s:?}");
    }

    fn lang() -> Geometry {
        Geometry::new(crate::structure::BlockStructure::langevin(1)).unwrap()
    }

    #[test]
    fn gaussian_distribution_matches_ellipsoid_volume() {
        let a = [1.0, 0.5, 2.0];
        let u = crate::field::AnalyticField::gaussian(&a, &[0.3, 0.0, -0.2], 1.0).unwrap();
        let lo: Vec<f64> = a.iter().zip([0.3, 0.0, -0.2]).map(|(a, c)| c - 2.0 / a.sqrt()).collect();
        let hi: Vec<f64> = a.iter().zip([0.3, 0.0, -0.2]).map(|(a, c)| c + 2.0 / a.sqrt()).collect();
        let spec = GridSpec::new(lo, hi, vec![81; 3]).unwrap();
        let vals = (0..spec.len())
            .map(|k| {
                let mut z = [0.0; 3];
                spec.coords(k, &mut z);
                u.eval(&z)
            })
            .collect();
        let gf = GridFunction::new(spec, vals, 0).unwrap();
        let r = Rearrangement::from_grid(&gf).unwrap();
        for lambda in [0.1, 0.3, 0.6] {
            let exact = 4.0 / 3.0 * std::f64::consts::PI * (1.0 / lambda as f64).ln().powf(1.5) / (a[0] * a[1] * a[2]).sqrt();
            let got = r.mu(lambda);
            assert!((got - exact).abs() < 0.01 * exact, "λ={lambda}: {got} vs {exact}");
        }
        assert!((r.max() - 1.0).abs() < 0.01);
        assert!(r.levels().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn level_inequalities_on_gaussian() {
        let u = crate::field::AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap();
        let r = Rearrangement::from_function(&u, 24).unwrap();
        let ts = TartarSequence::new(&r, K_WINDOW).unwrap();
        let chk = ts.check_levels(&r);
        assert!(chk.holds() && chk.checked > 3, "{chk:?}");
        assert_eq!(ts.a(ts.k_min).unwrap(), r.max());
        assert_eq!(ts.a(ts.k_max + 1).unwrap(), 0.0);
        assert!(ts.a(ts.k_max).unwrap() > 0.0);
    }

    #[test]
    fn plateaus_are_reported() {
        // a_0 = a_1 = a_2 = 1
        let r = Rearrangement::from_steps(&[(2.0, 1.0), (1.0, 3f64.exp() - 1.0)]).unwrap();
        let ts = TartarSequence::new(&r, (-5, 5)).unwrap();
        let chk = ts.check_levels(&r);
        assert!(chk.holds());
        assert_eq!(chk.plateaus, vec![0, 1]);
    }

    #[test]
    fn truncations_sandwich_and_telescope() {
        let u = crate::field::AnalyticField::gaussian(&[1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap();
        let gf = sample_support(&u, 16).unwrap();
        let r = Rearrangement::from_grid(&gf).unwrap();
        let ts = TartarSequence::new(&r, K_WINDOW).unwrap();
        let mut total = vec![0.0; gf.values().len()];
        for (k, gap) in ts.gaps() {
            let (hi, lo) = (ts.a(k).unwrap(), ts.a(k + 1).unwrap());
            let phi = ts.truncate(&gf, k).unwrap();
            for ((v, f), t) in gf.values().iter().zip(phi.values()).zip(&mut total) {
                let lower = if v.abs() >= hi { gap } else { 0.0 };
                let upper = if v.abs() >= lo { gap } else { 0.0 };
                assert!(lower <= *f && *f <= upper);
                *t += f;
            }
        }
        let (top, bottom) = (ts.a(ts.k_min).unwrap(), ts.a(ts.k_max + 1).unwrap());
        for (v, t) in gf.values().iter().zip(&total) {
            let expect = (v.abs().min(top) - bottom).max(0.0);
            assert!((t - expect).abs() < 1e-14);
        }
        assert!(ts.truncate(&gf, ts.k_max + 1).is_err());
    }

    #[test]
    fn critical_exponent_langevin() {
        assert_eq!(critical_exponent(2.0, 6.0).unwrap(), 3.0);
        assert!(critical_exponent(6.0, 6.0).is_err());
    }

    #[test]
    fn k_functional_of_zero_vanishes() {
        let g = lang();
        let u: FieldRef = Arc::new(crate::field::AnalyticField::zero(3));
        let kernel = Arc::new(BumpKernel::new(&g, 4).unwrap());
        let c = k_functional(
            &u,
            &g,
            2.0,
            SpacePair::LpLinf,
            &[0.01, 0.1, 1.0],
            &[0.1, 0.5],
            kernel.clone(),
            &NormSettings::default(),
            &KSettings::default(),
        )
        .unwrap();
        assert!(c.points.iter().all(|p| p.k == 0.0));
        let empty = k_functional(&u, &g, 2.0, SpacePair::LpLinf, &[], &[0.1], kernel, &NormSettings::default(), &KSettings::default());
        assert!(empty.is_err());
    }
}
