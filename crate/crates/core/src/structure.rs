//! Block drift matrix, the translation group it induces, dilations and the
//! homogeneous norm.
//!
//! Coordinates of a point are `z = (t, x_1, .., x_N)`; slices passed around
//! the crate always carry `t` in slot 0.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Rank tolerance relative to the largest singular value.
const RANK_RTOL: f64 = 1e-10;
/// Residual accepted for the layer preimage.
pub const PREIMAGE_TOL: f64 = 1e-10;

/// Layer dimensions plus the blocks `B_1..B_r`.
///
/// Block `j` has `d_j` rows and `d_{j-1}` columns, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStructure {
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub blocks: Vec<Vec<f64>>,
}

impl BlockStructure {
    pub fn new(layer_dims: Vec<usize>, blocks: Vec<Vec<f64>>) -> Self {
        Self { layer_dims, blocks }
    }

    /// `d` copies of the Langevin pair `(v, p)` with `B_1 = I_d`.
    pub fn langevin(d: usize) -> Self {
        let mut id = vec![0.0; d * d];
        for i in 0..d {
            id[i * d + i] = 1.0;
        }
        Self::new(vec![d, d], vec![id])
    }

    /// Three layers `(2, 1, 1)` with `B_1 = [1 0]`, `B_2 = [1]`.
    pub fn three_layer() -> Self {
        Self::new(vec![2, 1, 1], vec![vec![1.0, 0.0], vec![1.0]])
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("block structure serializes")
    }

    fn validate(&self, check_rank: bool) -> Result<()> {
        let dims = &self.layer_dims;
        if dims.is_empty() {
            return Err(Error::Validation("layer_dims is empty".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Validation("layer dimensions must be positive".into()));
        }
        if dims.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation(format!(
                "layer dimensions must be non-increasing, got {dims:?}"
            )));
        }
        if self.blocks.len() + 1 != dims.len() {
            return Err(Error::Validation(format!(
                "{} layers need {} blocks, got {}",
                dims.len(),
                dims.len() - 1,
                self.blocks.len()
            )));
        }
        for (j, blk) in self.blocks.iter().enumerate() {
            let (rows, cols) = (dims[j + 1], dims[j]);
            if blk.len() != rows * cols {
                return Err(Error::Validation(format!(
                    "block B_{} must have {}x{} = {} entries, got {}",
                    j + 1,
                    rows,
                    cols,
                    rows * cols,
                    blk.len()
                )));
            }
            if blk.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("block B_{} has non-finite entries", j + 1)));
            }
            let m = DMatrix::from_row_slice(rows, cols, blk);
            let rank = numeric_rank(&m);
            if check_rank && rank != rows {
                return Err(Error::RankDeficient {
                    block: j + 1,
                    rank,
                    expected: rows,
                });
            }
        }
        Ok(())
    }
}

/// A point `(t, x)` of the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl GroupPoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }

    pub fn origin(n: usize) -> Self {
        Self::new(0.0, vec![0.0; n])
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self::new(z[0], z[1..].to_vec())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.len() + 1);
        z.push(self.t);
        z.extend_from_slice(&self.x);
        z
    }
}

/// Power `k` of `Y` and multi-index `beta` of `x`-derivatives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub k: usize,
    pub beta: Vec<usize>,
}

impl MultiIndex {
    pub fn new(k: usize, beta: Vec<usize>) -> Self {
        Self { k, beta }
    }

    pub fn b_length(&self, g: &Geometry) -> usize {
        self.beta
            .iter()
            .enumerate()
            .map(|(i, &b)| b * g.weight(i))
            .sum()
    }

    pub fn intrinsic_order(&self, g: &Geometry) -> usize {
        2 * self.k + self.b_length(g)
    }

    pub fn factorial(&self) -> f64 {
        let mut f = factorial(self.k);
        for &b in &self.beta {
            f *= factorial(b);
        }
        f
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Outcome of the Kalman rank test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderCertificate {
    pub holds: bool,
    pub rank: usize,
    pub n: usize,
    pub min_eig_c1: Option<f64>,
}

/// Everything derived from a validated [`BlockStructure`].
#[derive(Clone, Debug)]
pub struct Geometry {
    structure: BlockStructure,
    b: DMatrix<f64>,
    /// Nonzero entries `(row, col, value)` of `B`.
    b_sparse: Vec<(usize, usize, f64)>,
    b_powers: Vec<DMatrix<f64>>,
    n: usize,
    r: usize,
    hom_dim: usize,
    layer_offsets: Vec<usize>,
    layer_of: Vec<usize>,
    nilpotency_degree: usize,
    exact_integer: bool,
}

impl Geometry {
    pub fn new(bs: BlockStructure) -> Result<Self> {
        bs.validate(true)?;
        Self::assemble(bs)
    }

    /// Skips the block rank test. Used to build degenerate operators on
    /// which the Hörmander test and the kernel are expected to fail.
    pub fn new_unchecked(bs: BlockStructure) -> Result<Self> {
        bs.validate(false)?;
        Self::assemble(bs)
    }

    fn assemble(bs: BlockStructure) -> Result<Self> {
        let dims = &bs.layer_dims;
        let r = dims.len() - 1;
        let n: usize = dims.iter().sum();
        let mut layer_offsets = vec![0];
        for d in dims {
            layer_offsets.push(layer_offsets.last().unwrap() + d);
        }
        let mut layer_of = Vec::with_capacity(n);
        for (i, d) in dims.iter().enumerate() {
            layer_of.extend(std::iter::repeat(i).take(*d));
        }
        let mut b = DMatrix::zeros(n, n);
        for (j, blk) in bs.blocks.iter().enumerate() {
            let (rows, cols) = (dims[j + 1], dims[j]);
            let (r0, c0) = (layer_offsets[j + 1], layer_offsets[j]);
            for a in 0..rows {
                for c in 0..cols {
                    b[(r0 + a, c0 + c)] = blk[a * cols + c];
                }
            }
        }
        let hom_dim = 2 + dims.iter().enumerate().map(|(k, d)| (2 * k + 1) * d).sum::<usize>();
        let exact_integer = bs.blocks.iter().flatten().all(|v| v.fract() == 0.0 && v.abs() < 1e12);
        let nilpotency_degree = if exact_integer {
            integer_nilpotency(&b)
        } else {
            float_nilpotency(&b)
        };
        if nilpotency_degree > r + 1 {
            return Err(Error::Validation(format!(
                "B is not nilpotent of degree at most {}",
                r + 1
            )));
        }
        let mut b_powers = vec![DMatrix::identity(n, n)];
        for _ in 0..r {
            let next = &b * b_powers.last().unwrap();
            b_powers.push(next);
        }
        let mut b_sparse = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if b[(i, j)] != 0.0 {
                    b_sparse.push((i, j, b[(i, j)]));
                }
            }
        }
        Ok(Self {
            structure: bs,
            b,
            b_sparse,
            b_powers,
            n,
            r,
            hom_dim,
            layer_offsets,
            layer_of,
            nilpotency_degree,
            exact_integer,
        })
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn b_sparse(&self) -> &[(usize, usize, f64)] {
        &self.b_sparse
    }
    /// `B^j` for `0 <= j <= r`; higher powers vanish.
    pub fn b_power(&self, j: usize) -> DMatrix<f64> {
        if j <= self.r {
            self.b_powers[j].clone()
        } else {
            DMatrix::zeros(self.n, self.n)
        }
    }
    pub fn n(&self) -> usize {
        self.n
    }
    /// Number of coordinates `N + 1` including time.
    pub fn dim(&self) -> usize {
        self.n + 1
    }
    pub fn r(&self) -> usize {
        self.r
    }
    /// `d_0`, the number of diffusive directions.
    pub fn d0(&self) -> usize {
        self.structure.layer_dims[0]
    }
    pub fn hom_dim(&self) -> usize {
        self.hom_dim
    }
    pub fn layer_offsets(&self) -> &[usize] {
        &self.layer_offsets
    }
    pub fn layer_of(&self, i: usize) -> usize {
        self.layer_of[i]
    }
    /// Dilation weight `2i+1` of space coordinate `i` (0-based, no time slot).
    pub fn weight(&self, i: usize) -> usize {
        2 * self.layer_of[i] + 1
    }
    /// Dilation weight of axis `a` of `z`: 2 for time.
    pub fn axis_weight(&self, a: usize) -> usize {
        if a == 0 {
            2
        } else {
            self.weight(a - 1)
        }
    }
    pub fn nilpotency_degree(&self) -> usize {
        self.nilpotency_degree
    }
    pub fn exact_integer(&self) -> bool {
        self.exact_integer
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }

    /// `e^{sB}` as a dense matrix.
    pub fn matrix_exp(&self, s: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        let mut c = 1.0;
        for j in 0..=self.r {
            if j > 0 {
                c *= s / j as f64;
            }
            out += &self.b_powers[j] * c;
        }
        out
    }

    /// `out = e^{sB} x` without allocating.
    pub fn exp_apply(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert!(n <= MAX_N);
        let mut term = [0.0; MAX_N];
        let mut next = [0.0; MAX_N];
        term[..n].copy_from_slice(x);
        out.copy_from_slice(x);
        for j in 1..=self.r {
            next[..n].iter_mut().for_each(|v| *v = 0.0);
            for &(a, b, v) in &self.b_sparse {
                next[a] += v * term[b];
            }
            let c = s / j as f64;
            for i in 0..n {
                term[i] = c * next[i];
                out[i] += term[i];
            }
        }
    }

    /// `Bx` into `out`.
    pub fn b_apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, v) in &self.b_sparse {
            out[a] += v * x[b];
        }
    }

    /// `z ∘ w` on raw coordinate slices.
    pub fn compose_raw(&self, z: &[f64], w: &[f64], out: &mut [f64]) {
        let s = w[0];
        out[0] = z[0] + s;
        self.exp_apply(s, &z[1..], &mut out[1..]);
        for i in 1..=self.n {
            out[i] += w[i];
        }
    }

    /// `z^{-1}` on raw slices.
    pub fn invert_raw(&self, z: &[f64], out: &mut [f64]) {
        out[0] = -z[0];
        self.exp_apply(-z[0], &z[1..], &mut out[1..]);
        for v in &mut out[1..] {
            *v = -*v;
        }
    }

    /// `w^{-1} ∘ z = (t - s, x - e^{(t-s)B} ξ)` for `w = (s, ξ)`.
    pub fn increment_raw(&self, w: &[f64], z: &[f64], out: &mut [f64]) {
        let dt = z[0] - w[0];
        out[0] = dt;
        self.exp_apply(dt, &w[1..], &mut out[1..]);
        for i in 1..=self.n {
            out[i] = z[i] - out[i];
        }
    }

    pub fn compose(&self, z: &GroupPoint, w: &GroupPoint) -> Result<GroupPoint> {
        self.check_len(z.x.len())?;
        self.check_len(w.x.len())?;
        let mut out = vec![0.0; self.n + 1];
        self.compose_raw(&z.to_vec(), &w.to_vec(), &mut out);
        Ok(GroupPoint::from_slice(&out))
    }

    pub fn invert(&self, z: &GroupPoint) -> Result<GroupPoint> {
        self.check_len(z.x.len())?;
        let mut out = vec![0.0; self.n + 1];
        self.invert_raw(&z.to_vec(), &mut out);
        Ok(GroupPoint::from_slice(&out))
    }

    /// `D_λ` on raw slices.
    pub fn dilate_raw(&self, lambda: f64, z: &[f64], out: &mut [f64]) {
        out[0] = lambda * lambda * z[0];
        for i in 0..self.n {
            out[i + 1] = lambda.powi(self.weight(i) as i32) * z[i + 1];
        }
    }

    pub fn dilate(&self, lambda: f64, z: &GroupPoint) -> Result<GroupPoint> {
        if !(lambda > 0.0) {
            return Err(param("lambda", format!("dilation factor must be positive, got {lambda}")));
        }
        self.check_len(z.x.len())?;
        let mut out = vec![0.0; self.n + 1];
        self.dilate_raw(lambda, &z.to_vec(), &mut out);
        Ok(GroupPoint::from_slice(&out))
    }

    /// `D̂_λ` as a diagonal matrix.
    pub fn dilation_matrix(&self, lambda: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                lambda.powi(self.weight(i) as i32)
            } else {
                0.0
            }
        })
    }

    /// `|t|^{1/2} + Σ_i |x^{[i]}|^{1/(2i+1)}` with Euclidean layer norms.
    pub fn hom_norm_raw(&self, z: &[f64]) -> f64 {
        let mut acc = z[0].abs().sqrt();
        for layer in 0..=self.r {
            let (a, b) = (self.layer_offsets[layer], self.layer_offsets[layer + 1]);
            let sq: f64 = z[1 + a..1 + b].iter().map(|v| v * v).sum();
            let e = 1.0 / (2 * layer + 1) as f64;
            acc += sq.sqrt().powf(e);
        }
        acc
    }

    pub fn homogeneous_norm(&self, z: &GroupPoint) -> f64 {
        self.hom_norm_raw(&z.to_vec())
    }

    /// Kalman rank of `[A₀ | BA₀ | .. | B^r A₀]`; optionally the smallest
    /// eigenvalue of `C_1` as a cross-check.
    pub fn check_hormander(&self, with_covariance: bool) -> HormanderCertificate {
        let d0 = self.d0();
        let mut k = DMatrix::zeros(self.n, d0 * (self.r + 1));
        for j in 0..=self.r {
            let bj = &self.b_powers[j];
            for c in 0..d0 {
                for i in 0..self.n {
                    k[(i, j * d0 + c)] = bj[(i, c)];
                }
            }
        }
        let rank = numeric_rank(&k);
        let min_eig_c1 = with_covariance.then(|| {
            let c1 = crate::kernel::CovariancePolynomial::new(self).eval(1.0);
            c1.symmetric_eigenvalues().min()
        });
        HormanderCertificate {
            holds: rank == self.n,
            rank,
            n: self.n,
            min_eig_c1,
        }
    }

    /// Coefficients of `X^{(n)}_v`, i.e. the vector `B^n v`.
    pub fn commutator_field(&self, v: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        if v[self.d0()..].iter().any(|&c| c != 0.0) {
            return Err(Error::NotInLayer { layer: 0 });
        }
        if n > self.r {
            return Ok(vec![0.0; self.n]);
        }
        let out = &self.b_powers[n] * nalgebra::DVector::from_column_slice(v);
        Ok(out.iter().copied().collect())
    }

    /// Minimal-norm `w` in layer 0 with `B^n w = target`.
    pub fn solve_layer_preimage(&self, n: usize, target: &[f64]) -> Result<Vec<f64>> {
        self.check_len(target.len())?;
        if n > self.r {
            return Err(param("n", format!("layer index {n} exceeds r = {}", self.r)));
        }
        let cert = self.check_hormander(false);
        if !cert.holds {
            return Err(Error::NotHormander {
                rank: cert.rank,
                n: self.n,
            });
        }
        let (a, b) = (self.layer_offsets[n], self.layer_offsets[n + 1]);
        if target
            .iter()
            .enumerate()
            .any(|(i, &v)| (i < a || i >= b) && v != 0.0)
        {
            return Err(Error::NotInLayer { layer: n });
        }
        let d0 = self.d0();
        let m = self.b_powers[n].view((a, 0), (b - a, d0)).into_owned();
        let rhs = nalgebra::DVector::from_column_slice(&target[a..b]);
        let pinv = m
            .clone()
            .pseudo_inverse(1e-13)
            .map_err(|e| Error::Degenerate(e.to_string()))?;
        let w = pinv * &rhs;
        let resid = (&m * &w - &rhs).norm();
        let scale = rhs.norm().max(1.0);
        if resid > PREIMAGE_TOL * scale {
            return Err(Error::Degenerate(format!(
                "layer preimage residual {resid:e} exceeds tolerance"
            )));
        }
        let mut out = vec![0.0; self.n];
        out[..d0].copy_from_slice(w.as_slice());
        Ok(out)
    }

    /// Empirical `sup ‖ζ^{-1}∘z‖ / (‖ζ‖ + ‖z‖)` over random pairs in `[-1,1]^{N+1}`.
    pub fn estimate_quasi_triangle(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        let mut z = vec![0.0; dim];
        let mut w = vec![0.0; dim];
        let mut inc = vec![0.0; dim];
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let scale = 10f64.powf(rng.random_range(-2.0..2.0));
            let scale2 = 10f64.powf(rng.random_range(-2.0..2.0));
            for a in 0..dim {
                z[a] = rng.random_range(-1.0..1.0) * scale;
                w[a] = rng.random_range(-1.0..1.0) * scale2;
            }
            self.increment_raw(&w, &z, &mut inc);
            let den = self.hom_norm_raw(&w) + self.hom_norm_raw(&z);
            if den > 0.0 {
                best = best.max(self.hom_norm_raw(&inc) / den);
            }
        }
        best
    }
}

/// Upper bound on `N` used for stack buffers.
pub const MAX_N: usize = 16;

pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

fn integer_nilpotency(b: &DMatrix<f64>) -> usize {
    let n = b.nrows();
    let bi: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| b[(i, j)] as i128).collect()).collect();
    let mut p: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
    for m in 1..=n + 1 {
        let mut q = vec![vec![0i128; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] == 0 {
                    continue;
                }
                for j in 0..n {
                    q[i][j] += p[i][k] * bi[k][j];
                }
            }
        }
        if q.iter().flatten().all(|&v| v == 0) {
            return m;
        }
        p = q;
    }
    usize::MAX
}

fn float_nilpotency(b: &DMatrix<f64>) -> usize {
    let n = b.nrows();
    let mut p = DMatrix::identity(n, n);
    for m in 1..=n + 1 {
        p = &p * b;
        if p.iter().all(|&v| v == 0.0) {
            return m;
        }
    }
    usize::MAX
}

#[cfg(test)]
mod tests {
    use super::*;

    fn langevin() -> Geometry {
        Geometry::new(BlockStructure::langevin(1)).unwrap()
    }

    #[test]
    fn homogeneous_dimension_examples() {
        assert_eq!(langevin().hom_dim(), 6);
        let single = Geometry::new(BlockStructure::new(vec![3], vec![])).unwrap();
        assert_eq!(single.hom_dim(), 5);
        assert_eq!(single.b().iter().filter(|v| **v != 0.0).count(), 0);
        let g = Geometry::new(BlockStructure::new(vec![2, 1], vec![vec![1.0, 0.0]])).unwrap();
        assert_eq!((g.n(), g.hom_dim()), (3, 7));
    }

    #[test]
    fn rejects_bad_structures() {
        let e = Geometry::new(BlockStructure::new(vec![2, 1], vec![vec![0.0, 0.0]])).unwrap_err();
        assert!(matches!(e, Error::RankDeficient { block: 1, .. }));
        let e = Geometry::new(BlockStructure::new(vec![1, 2], vec![vec![1.0, 1.0]])).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
    }

    #[test]
    fn kalman_examples() {
        let c = langevin().check_hormander(true);
        assert!(c.holds && c.rank == 2);
        assert!(c.min_eig_c1.unwrap() > 0.0);
        let flat = Geometry::new(BlockStructure::new(vec![1], vec![])).unwrap();
        assert!(flat.check_hormander(false).holds);
        let l2 = Geometry::new(BlockStructure::langevin(2)).unwrap().check_hormander(false);
        assert_eq!(l2.rank, 4);
    }

    #[test]
    fn group_law_examples() {
        let g = langevin();
        let z = GroupPoint::new(1.0, vec![1.0, 0.0]);
        let inv = g.invert(&z).unwrap();
        assert_eq!(inv, GroupPoint::new(-1.0, vec![-1.0, 1.0]));
        let a = GroupPoint::new(0.3, vec![0.7, -0.2]);
        let b = GroupPoint::new(-1.1, vec![0.4, 2.0]);
        let c = g.compose(&a, &b).unwrap();
        assert_eq!(c.t, 0.3 - 1.1);
        assert!((c.x[1] - (-0.2 + (-1.1) * 0.7 + 2.0)).abs() < 1e-15);
        let id = g.compose(&a, &g.invert(&a).unwrap()).unwrap();
        assert!(id.t.abs() < 1e-15 && id.x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dilation_and_norm_examples() {
        let g = langevin();
        let d = g.dilate(2.0, &GroupPoint::new(1.0, vec![1.0, 1.0])).unwrap();
        assert_eq!(d, GroupPoint::new(4.0, vec![2.0, 8.0]));
        assert!((g.homogeneous_norm(&d) - 6.0).abs() < 1e-14);
        assert!(g.dilate(0.0, &d).is_err());
    }

    #[test]
    fn exp_and_commutators() {
        let g = langevin();
        let e = g.matrix_exp(2.5);
        assert_eq!(e[(1, 0)], 2.5);
        assert_eq!(e[(0, 1)], 0.0);
        assert_eq!(g.commutator_field(&[1.0, 0.0], 1).unwrap(), vec![0.0, 1.0]);
        assert_eq!(g.commutator_field(&[1.0, 0.0], 2).unwrap(), vec![0.0, 0.0]);
        assert!(g.commutator_field(&[0.0, 1.0], 0).is_err());
        assert_eq!(g.solve_layer_preimage(1, &[0.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(g.solve_layer_preimage(1, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn degenerate_drift_fails_hormander() {
        let g = Geometry::new_unchecked(BlockStructure::new(vec![1, 1], vec![vec![0.0]])).unwrap();
        let c = g.check_hormander(true);
        assert!(!c.holds);
        assert_eq!(c.rank, 1);
        assert!(c.min_eig_c1.unwrap() <= 1e-14);
        assert!(matches!(
            g.solve_layer_preimage(1, &[0.0, 1.0]),
            Err(Error::NotHormander { .. })
        ));
    }

    #[test]
    fn preimage_three_coordinates() {
        let g = Geometry::new(BlockStructure::new(vec![2, 1], vec![vec![1.0, 0.0]])).unwrap();
        let w = g.solve_layer_preimage(1, &[0.0, 0.0, 1.0]).unwrap();
        let bw = g.commutator_field(&w, 1).unwrap();
        assert!((bw[2] - 1.0).abs() < 1e-12 && bw[0] == 0.0 && bw[1] == 0.0);
    }

    #[test]
    fn operator_file_roundtrip() {
        let bs = BlockStructure::three_layer();
        let text = bs.to_toml_string();
        assert_eq!(BlockStructure::from_toml_str(&text).unwrap(), bs);
    }
}
