//! Discretized `L^2(R^d)`, the Schrödinger representations acting on it, and
//! Hilbert–Schmidt operators.
//!
//! Functions live on a uniform grid of spacing `h`; the quadrature weight `h^d`
//! is part of every vector inner product. Dense operators are stored as the
//! matrix acting on sample vectors, so the plain matrix trace of `A B^†` is the
//! Hilbert–Schmidt inner product.
//!
//! Translations are exact index shifts with zero padding. Any translation that
//! would push nonzero samples off the grid is rejected.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;

/// Tolerance for `p in h Z^d`.
pub const ON_GRID_TOL: f64 = 1e-12;

/// Uniform tensor grid with `n_axis` nodes per axis at `lo + h * index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    d: usize,
    lo: Vec<f64>,
    h: f64,
    n_axis: usize,
}

impl SpatialGrid {
    pub fn new(d: usize, lo: Vec<f64>, h: f64, n_axis: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("grid dimension must be at least 1".into()));
        }
        if lo.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: lo.len() });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
        }
        if n_axis < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes per axis".into()));
        }
        n_axis
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
        Ok(Self { d, lo, h, n_axis })
    }

    /// Grid of cells of width `h` covering `[start, end)` on every axis, with
    /// nodes at the cell centres.
    pub fn cell_centered(d: usize, start: f64, end: f64, h: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::InvalidParameter(format!("empty interval [{start}, {end})")));
        }
        let n_axis = ((end - start) / h - 1e-9).ceil().max(2.0) as usize;
        Self::new(d, vec![start + 0.5 * h; d], h, n_axis)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn n_axis(&self) -> usize {
        self.n_axis
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n_axis.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn weight(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Half-open covered region `[lo - h/2, lo + (n - 1/2) h)` on each axis.
    pub fn extent(&self) -> Vec<(f64, f64)> {
        self.lo
            .iter()
            .map(|&l| (l - 0.5 * self.h, l + (self.n_axis as f64 - 0.5) * self.h))
            .collect()
    }

    fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.n_axis;
            flat /= self.n_axis;
        }
    }

    /// Coordinates of node `flat` (row-major, last axis fastest).
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.d];
        self.multi_index(flat, &mut idx);
        idx.iter().zip(&self.lo).map(|(&i, &l)| l + self.h * i as f64).collect()
    }

    /// Index of the node nearest to `x`, or `None` when `x` lies outside
    /// [`extent`](Self::extent).
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for (&xa, &la) in x.iter().zip(&self.lo) {
            let r = ((xa - la) / self.h).round();
            if r < 0.0 || r >= self.n_axis as f64 {
                return None;
            }
            flat = flat * self.n_axis + r as usize;
        }
        Some(flat)
    }

    /// Converts a translation vector to integer node shifts.
    pub fn shift_of(&self, p: &[f64]) -> Result<Vec<i64>> {
        if p.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: p.len() });
        }
        p.iter()
            .map(|&pa| {
                let s = (pa / self.h).round();
                if (pa - s * self.h).abs() > ON_GRID_TOL {
                    Err(Error::OffGridTranslation(pa))
                } else {
                    Ok(s as i64)
                }
            })
            .collect()
    }
}

/// Closed-form (or sampled) window profile `u : R^d -> C`.
///
/// JSON: `{"kind":"box","support":[a,b]}`, `{"kind":"gauss","sigma":s}`, or
/// `{"kind":"samples","values":[..]}` where values are reals or `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    /// Normalized indicator of `[a, b)^d`, value `(b - a)^{-d/2}`.
    Box { support: [f64; 2] },
    /// Unit-norm Gaussian `(2^{1/4} / sqrt(sigma))^d exp(-pi |x|^2 / sigma^2)`.
    Gauss { sigma: f64 },
    /// Raw samples on the grid the window is used with; off-node points take
    /// the value of the nearest node.
    Samples { values: Vec<SampleValue> },
}

/// A sample given either as a real number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleValue {
    Real(f64),
    Complex([f64; 2]),
}

impl From<SampleValue> for Complex64 {
    fn from(v: SampleValue) -> Self {
        match v {
            SampleValue::Real(re) => Complex64::new(re, 0.0),
            SampleValue::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Radius (in units of sigma) beyond which a Gaussian window is treated as
/// zero; `exp(-pi * 4.5^2) < 1e-27`.
const GAUSS_SUPPORT_SIGMAS: f64 = 4.5;

impl Window {
    pub fn unit_box() -> Self {
        Window::Box { support: [0.0, 1.0] }
    }

    fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        match self {
            Window::Box { support: [a, b] } if !(b > a) => {
                Err(Error::InvalidParameter(format!("box support [{a}, {b}) is empty")))
            }
            Window::Gauss { sigma } if !(*sigma > 0.0) => {
                Err(Error::InvalidParameter(format!("gauss sigma must be positive, got {sigma}")))
            }
            Window::Samples { values } if values.len() != grid.len() => Err(Error::GridMismatch(
                format!("{} samples for a grid of {} nodes", values.len(), grid.len()),
            )),
            _ => Ok(()),
        }
    }

    fn eval(&self, x: &[f64], grid: &SpatialGrid) -> Complex64 {
        match self {
            Window::Box { support: [a, b] } => {
                if x.iter().all(|&v| v >= *a && v < *b) {
                    Complex64::new((b - a).powf(-0.5 * x.len() as f64), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Window::Gauss { sigma } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let amp = (2f64.powf(0.25) / sigma.sqrt()).powi(x.len() as i32);
                Complex64::new(amp * (-PI * r2 / (sigma * sigma)).exp(), 0.0)
            }
            Window::Samples { values } => grid
                .nearest(x)
                .map(|i| values[i].into())
                .unwrap_or_else(|| Complex64::new(0.0, 0.0)),
        }
    }

    /// Per-axis interval outside of which `u(lambda x)` vanishes.
    pub(crate) fn scaled_support(&self, lambda: f64) -> Option<(f64, f64)> {
        let (lo, hi) = match self {
            Window::Box { support: [a, b] } => (*a, *b),
            Window::Gauss { sigma } => (-GAUSS_SUPPORT_SIGMAS * sigma, GAUSS_SUPPORT_SIGMAS * sigma),
            Window::Samples { .. } => return None,
        };
        let (x0, x1) = (lo / lambda, hi / lambda);
        Some((x0.min(x1), x0.max(x1)))
    }

    /// Samples `u` on `grid`.
    pub fn sample(&self, grid: &Arc<SpatialGrid>) -> Result<WindowVector> {
        scale_window(self, 1.0, grid)
    }
}

/// `u_lambda(x) = |lambda|^{d/2} u(lambda x)` sampled at the nodes of `grid`.
///
/// Fails when the support of `u_lambda` does not fit inside the grid.
pub fn scale_window(window: &Window, lambda: f64, grid: &Arc<SpatialGrid>) -> Result<WindowVector> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::ZeroFrequency);
    }
    window.validate(grid)?;
    if let Some((s0, s1)) = window.scaled_support(lambda) {
        for (e0, e1) in grid.extent() {
            if s0 < e0 - 1e-12 || s1 > e1 + 1e-12 {
                return Err(Error::SupportLeak(format!(
                    "scaled window support [{s0}, {s1}) exceeds grid [{e0}, {e1}) at lambda = {lambda}"
                )));
            }
        }
    }
    let d = grid.dim();
    let amp = lambda.abs().powf(0.5 * d as f64);
    let values = (0..grid.len())
        .map(|i| {
            let x: Vec<f64> = grid.node(i).iter().map(|v| lambda * v).collect();
            window.eval(&x, grid) * amp
        })
        .collect();
    Ok(WindowVector { grid: Arc::clone(grid), values })
}

/// A sampled element of `L^2(R^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVector {
    grid: Arc<SpatialGrid>,
    values: Vec<Complex64>,
}

impl WindowVector {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `<self, other> = h^d sum self_i conj(other_i)`.
    pub fn inner(&self, other: &WindowVector) -> Result<Complex64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(weighted_inner(self.grid.weight(), &self.values, &other.values))
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.weight() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> WindowVector {
        WindowVector { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Rescaled to unit norm. Fails on the zero vector.
    pub fn normalized(&self) -> Result<WindowVector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn add(&self, other: &WindowVector) -> Result<WindowVector> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(WindowVector { grid: Arc::clone(&self.grid), values })
    }
}

fn weighted_inner(w: f64, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * w
}

pub(crate) fn same_grid(a: &Arc<SpatialGrid>, b: &Arc<SpatialGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch("operands live on different spatial grids".into()))
    }
}

/// `Pi_lambda(p, q, t) f(y) = e^{2 pi i lambda t} e^{-2 pi i lambda q.y} f(y - p)`
/// on raw samples.
fn apply_samples(
    grid: &SpatialGrid,
    lambda: f64,
    x: &GroupElement,
    f: &[Complex64],
) -> Result<Vec<Complex64>> {
    if lambda == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if x.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: x.dim() });
    }
    let shift = grid.shift_of(&x.p)?;
    let central = Complex64::from_polar(1.0, 2.0 * PI * lambda * x.t);
    let modulated = x.q.iter().any(|&v| v != 0.0);
    let n = grid.n_axis as i64;
    let d = grid.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    let mut idx = vec![0usize; d];
    for (src, &value) in f.iter().enumerate() {
        if value == Complex64::new(0.0, 0.0) {
            continue;
        }
        grid.multi_index(src, &mut idx);
        let mut dst = 0usize;
        for (&i, &s) in idx.iter().zip(&shift) {
            let target = i as i64 + s;
            if target < 0 || target >= n {
                return Err(Error::SupportLeak(format!(
                    "translation by {:?} moves a nonzero sample off the grid",
                    x.p
                )));
            }
            dst = dst * grid.n_axis + target as usize;
        }
        let mut phase = central;
        if modulated {
            let y = grid.node(dst);
            let qy: f64 = x.q.iter().zip(&y).map(|(a, b)| a * b).sum();
            phase *= Complex64::from_polar(1.0, -2.0 * PI * lambda * qy);
        }
        out[dst] = value * phase;
    }
    Ok(out)
}

/// Applies the Schrödinger representation `Pi_lambda(x)` to `f`.
pub fn schrodinger_apply(lambda: f64, x: &GroupElement, f: &WindowVector) -> Result<WindowVector> {
    let values = apply_samples(&f.grid, lambda, x, &f.values)?;
    Ok(WindowVector { grid: Arc::clone(&f.grid), values })
}

/// A Hilbert–Schmidt operator on the grid space.
#[derive(Debug, Clone, PartialEq)]
pub enum HSOperator {
    /// Matrix acting on sample vectors, quadrature weight included.
    Dense { grid: Arc<SpatialGrid>, matrix: DMatrix<Complex64> },
    /// `left ⊗ right : f -> <f, right> left`.
    RankOne { left: WindowVector, right: WindowVector },
}

impl HSOperator {
    pub fn rank_one(left: WindowVector, right: WindowVector) -> Result<Self> {
        same_grid(&left.grid, &right.grid)?;
        Ok(HSOperator::RankOne { left, right })
    }

    pub fn dense(grid: Arc<SpatialGrid>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::GridMismatch(format!(
                "{}x{} matrix for a grid of {n} nodes",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(HSOperator::Dense { grid, matrix })
    }

    pub fn identity(grid: Arc<SpatialGrid>) -> Self {
        let n = grid.len();
        HSOperator::Dense { grid, matrix: DMatrix::identity(n, n) }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        match self {
            HSOperator::Dense { grid, .. } => grid,
            HSOperator::RankOne { left, .. } => &left.grid,
        }
    }

    pub fn is_rank_one(&self) -> bool {
        matches!(self, HSOperator::RankOne { .. })
    }

    /// Dense matrix `h^d left right^†` for rank-one operators.
    pub fn densify(&self) -> HSOperator {
        match self {
            HSOperator::Dense { .. } => self.clone(),
            HSOperator::RankOne { left, right } => {
                let n = left.values.len();
                let w = left.grid.weight();
                let matrix = DMatrix::from_fn(n, n, |r, c| left.values[r] * right.values[c].conj() * w);
                HSOperator::Dense { grid: Arc::clone(&left.grid), matrix }
            }
        }
    }

    /// Applies the operator to a vector.
    pub fn apply(&self, f: &WindowVector) -> Result<WindowVector> {
        same_grid(self.grid(), &f.grid)?;
        match self {
            HSOperator::RankOne { left, right } => Ok(left.scale(f.inner(right)?)),
            HSOperator::Dense { grid, matrix } => {
                let values = matrix_vector(matrix, &f.values);
                Ok(WindowVector { grid: Arc::clone(grid), values })
            }
        }
    }

    /// `trace(A B^†)`.
    pub fn hs_inner(&self, other: &HSOperator) -> Result<Complex64> {
        same_grid(self.grid(), other.grid())?;
        use HSOperator::*;
        Ok(match (self, other) {
            (RankOne { left: a, right: b }, RankOne { left: c, right: d }) => {
                let w = a.grid.weight();
                weighted_inner(w, &a.values, &c.values) * weighted_inner(w, &d.values, &b.values)
            }
            (RankOne { left, right }, Dense { matrix, .. }) => {
                let br = matrix_vector(matrix, &right.values);
                weighted_inner(left.grid.weight(), &left.values, &br)
            }
            (Dense { .. }, RankOne { .. }) => other.hs_inner(self)?.conj(),
            (Dense { matrix: a, .. }, Dense { matrix: b, .. }) => {
                a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
            }
        })
    }

    pub fn hs_norm_sq(&self) -> f64 {
        match self {
            HSOperator::RankOne { left, right } => left.norm_sq() * right.norm_sq(),
            HSOperator::Dense { matrix, .. } => matrix.iter().map(|v| v.norm_sqr()).sum(),
        }
    }

    pub fn scale(&self, c: Complex64) -> HSOperator {
        match self {
            HSOperator::RankOne { left, right } => {
                HSOperator::RankOne { left: left.scale(c), right: right.clone() }
            }
            HSOperator::Dense { grid, matrix } => {
                HSOperator::Dense { grid: Arc::clone(grid), matrix: matrix * c }
            }
        }
    }

    /// Sum of two operators; stays rank-one when both share the same right
    /// factor.
    pub fn add(&self, other: &HSOperator) -> Result<HSOperator> {
        same_grid(self.grid(), other.grid())?;
        if let (HSOperator::RankOne { left: a, right: r1 }, HSOperator::RankOne { left: b, right: r2 }) =
            (self, other)
        {
            if r1 == r2 {
                return Ok(HSOperator::RankOne { left: a.add(b)?, right: r1.clone() });
            }
        }
        match (self.densify(), other.densify()) {
            (HSOperator::Dense { grid, matrix: a }, HSOperator::Dense { matrix: b, .. }) => {
                Ok(HSOperator::Dense { grid, matrix: a + b })
            }
            _ => unreachable!("densify always returns Dense"),
        }
    }

    /// `Pi_lambda(x) A`.
    pub fn left_translate(&self, lambda: f64, x: &GroupElement) -> Result<HSOperator> {
        match self {
            HSOperator::RankOne { left, right } => Ok(HSOperator::RankOne {
                left: schrodinger_apply(lambda, x, left)?,
                right: right.clone(),
            }),
            HSOperator::Dense { grid, matrix } => {
                let n = matrix.nrows();
                let mut out = DMatrix::zeros(n, n);
                for c in 0..n {
                    let col: Vec<Complex64> = matrix.column(c).iter().copied().collect();
                    let moved = apply_samples(grid, lambda, x, &col)?;
                    out.column_mut(c).copy_from_slice(&moved);
                }
                Ok(HSOperator::Dense { grid: Arc::clone(grid), matrix: out })
            }
        }
    }
}

fn matrix_vector(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for (c, &vc) in v.iter().enumerate() {
        if vc == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(m.column(c).iter()) {
            *o += a * vc;
        }
    }
    out
}

/// Result of [`conjugate_rankone`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatedOperator {
    pub operator: HSOperator,
    /// Set when the input was dense and a full matrix product was used.
    pub dense_fallback: bool,
}

/// `Pi_lambda(x) (left ⊗ right) = (Pi_lambda(x) left) ⊗ right`.
pub fn conjugate_rankone(lambda: f64, x: &GroupElement, op: &HSOperator) -> Result<ConjugatedOperator> {
    Ok(ConjugatedOperator {
        operator: op.left_translate(lambda, x)?,
        dense_fallback: !op.is_rank_one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, h: f64) -> Arc<SpatialGrid> {
        Arc::new(SpatialGrid::new(1, vec![0.0], h, n).unwrap())
    }

    fn random_vector(rng: &mut ChaCha8Rng, g: &Arc<SpatialGrid>, support: std::ops::Range<usize>) -> WindowVector {
        let values = (0..g.len())
            .map(|i| {
                if support.contains(&i) {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        WindowVector::new(Arc::clone(g), values).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(1, vec![0.0], 0.0, 8).is_err());
        assert!(SpatialGrid::new(1, vec![0.0], 0.1, 1).is_err());
        assert!(SpatialGrid::new(2, vec![0.0], 0.1, 8).is_err());
        let g = SpatialGrid::cell_centered(1, -1.0, 3.0, 0.25).unwrap();
        assert_eq!(g.n_axis(), 16);
        assert_eq!(g.node(0), vec![-0.875]);
        assert!(g.shift_of(&[0.5]).is_ok());
        assert!(matches!(g.shift_of(&[0.3]), Err(Error::OffGridTranslation(_))));
    }

    #[test]
    fn schrodinger_identity_and_center() {
        let g = grid(32, 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_vector(&mut rng, &g, 8..24);
        assert_eq!(schrodinger_apply(0.7, &GroupElement::identity(1), &f).unwrap(), f);
        let t = 0.37;
        let out = schrodinger_apply(0.7, &GroupElement::central(1, t), &f).unwrap();
        let phase = Complex64::from_polar(1.0, 2.0 * PI * 0.7 * t);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!(close(*a, b * phase, 1e-14));
        }
    }

    #[test]
    fn schrodinger_errors() {
        let g = grid(32, 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_vector(&mut rng, &g, 8..24);
        let off = GroupElement::new(vec![0.1], vec![0.0], 0.0).unwrap();
        assert!(matches!(schrodinger_apply(1.0, &off, &f), Err(Error::OffGridTranslation(_))));
        let far = GroupElement::new(vec![2.0], vec![0.0], 0.0).unwrap();
        assert!(matches!(schrodinger_apply(1.0, &far, &f), Err(Error::SupportLeak(_))));
        assert!(matches!(
            schrodinger_apply(0.0, &GroupElement::identity(1), &f),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn schrodinger_is_a_unitary_homomorphism() {
        let g = grid(64, 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = random_vector(&mut rng, &g, 24..40);
            let lambda = rng.gen_range(-2.0..2.0);
            let mk = |rng: &mut ChaCha8Rng| {
                GroupElement::new(
                    vec![0.125 * rng.gen_range(-6i32..=6) as f64],
                    vec![rng.gen_range(-3.0..3.0)],
                    rng.gen_range(-3.0..3.0),
                )
                .unwrap()
            };
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let two_step = schrodinger_apply(lambda, &x, &schrodinger_apply(lambda, &y, &f).unwrap()).unwrap();
            let direct = schrodinger_apply(lambda, &x.compose(&y).unwrap(), &f).unwrap();
            for (a, b) in two_step.values().iter().zip(direct.values()) {
                assert!(close(*a, *b, 1e-10));
            }
            let moved = schrodinger_apply(lambda, &x, &f).unwrap();
            assert!((moved.norm() - f.norm()).abs() <= 1e-12 * f.norm().max(1.0));
        }
    }

    #[test]
    fn hs_inner_conventions() {
        let g = grid(12, 0.25);
        let id = HSOperator::identity(Arc::clone(&g));
        assert!(close(id.hs_inner(&id).unwrap(), Complex64::new(12.0, 0.0), 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_vector(&mut rng, &g, 0..12).normalized().unwrap();
        let p = HSOperator::rank_one(u.clone(), u.clone()).unwrap();
        assert!(close(p.hs_inner(&p).unwrap(), Complex64::new(1.0, 0.0), 1e-12));
        assert!((p.hs_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_matches_densified_trace() {
        let g = grid(10, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let [a, b, c, d] = [0; 4].map(|_| random_vector(&mut rng, &g, 0..10));
            let x = HSOperator::rank_one(a.clone(), b.clone()).unwrap();
            let y = HSOperator::rank_one(c.clone(), d.clone()).unwrap();
            let expected = a.inner(&c).unwrap() * d.inner(&b).unwrap();
            // oracle: explicit trace of the densified product
            let (xd, yd) = match (x.densify(), y.densify()) {
                (HSOperator::Dense { matrix: m1, .. }, HSOperator::Dense { matrix: m2, .. }) => (m1, m2),
                _ => unreachable!(),
            };
            let trace = (&xd * yd.adjoint()).trace();
            assert!(close(trace, expected, 1e-12));
            assert!(close(x.hs_inner(&y).unwrap(), expected, 1e-12));
            assert!(close(x.hs_inner(&y.densify()).unwrap(), expected, 1e-12));
            assert!(close(x.densify().hs_inner(&y).unwrap(), expected, 1e-12));
            assert!(close(x.hs_inner(&y).unwrap(), y.hs_inner(&x).unwrap().conj(), 1e-14));
            let lhs = x.hs_inner(&y).unwrap().norm_sqr();
            assert!(lhs <= x.hs_norm_sq() * y.hs_norm_sq() * (1.0 + 1e-12));

            let f = random_vector(&mut rng, &g, 0..10);
            let via_rank_one = x.apply(&f).unwrap();
            let via_dense = x.densify().apply(&f).unwrap();
            for (p, q) in via_rank_one.values().iter().zip(via_dense.values()) {
                assert!(close(*p, *q, 1e-12));
            }
        }
    }

    #[test]
    fn conjugate_rankone_examples() {
        let g = grid(32, 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_vector(&mut rng, &g, 10..20).normalized().unwrap();
        let p = HSOperator::rank_one(u.clone(), u.clone()).unwrap();
        let lambda = 0.6;

        let same = conjugate_rankone(lambda, &GroupElement::identity(1), &p).unwrap();
        assert_eq!(same.operator, p);
        assert!(!same.dense_fallback);

        let t = 1.3;
        let c = conjugate_rankone(lambda, &GroupElement::central(1, t), &p).unwrap();
        let expected = p.scale(Complex64::from_polar(1.0, 2.0 * PI * lambda * t));
        assert!(close(c.operator.hs_inner(&expected).unwrap(), Complex64::new(1.0, 0.0), 1e-12));

        let x = GroupElement::new(vec![0.25], vec![0.8], 0.4).unwrap();
        let moved = conjugate_rankone(lambda, &x, &p).unwrap().operator;
        let overlap = schrodinger_apply(lambda, &x, &u).unwrap().inner(&u).unwrap();
        assert!(close(moved.hs_inner(&p).unwrap(), overlap, 1e-12));

        let dense = conjugate_rankone(lambda, &x, &p.densify()).unwrap();
        assert!(dense.dense_fallback);
        assert!(close(dense.operator.hs_inner(&p).unwrap(), overlap, 1e-12));
    }

    #[test]
    fn scaled_box_window() {
        let g = Arc::new(SpatialGrid::cell_centered(1, -1.0, 3.0, 1.0 / 64.0).unwrap());
        let u = Window::unit_box().sample(&g).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-12);
        let half = scale_window(&Window::unit_box(), 0.5, &g).unwrap();
        let amp = 0.5f64.sqrt();
        for (i, v) in half.values().iter().enumerate() {
            let x = g.node(i)[0];
            let expected = if (0.0..2.0).contains(&x) { amp } else { 0.0 };
            assert!((v.re - expected).abs() < 1e-15 && v.im == 0.0);
        }
        assert!(matches!(scale_window(&Window::unit_box(), 0.2, &g), Err(Error::SupportLeak(_))));
        assert!(matches!(scale_window(&Window::unit_box(), 0.0, &g), Err(Error::ZeroFrequency)));
    }

    #[test]
    fn window_json() {
        let w: Window = serde_json::from_str(r#"{"kind":"box","support":[0,1]}"#).unwrap();
        assert_eq!(w, Window::unit_box());
        let w: Window = serde_json::from_str(r#"{"kind":"gauss","sigma":0.5}"#).unwrap();
        assert_eq!(w, Window::Gauss { sigma: 0.5 });
        let w: Window = serde_json::from_str(r#"{"kind":"samples","values":[1.0,[0.0,2.0]]}"#).unwrap();
        match w {
            Window::Samples { values } => {
                assert_eq!(Complex64::from(values[1]), Complex64::new(0.0, 2.0));
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn gauss_window_has_unit_norm() {
        let g = Arc::new(SpatialGrid::cell_centered(1, -4.0, 4.0, 1.0 / 32.0).unwrap());
        let u = Window::Gauss { sigma: 0.8 }.sample(&g).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-10);
    }
}
