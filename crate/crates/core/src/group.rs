//! Polarized Heisenberg group `H^d = R^d x R^d x R` and its lattices
//! `A Z^d x B Z^d x Z`.
//!
//! Group law: `(p, q, t)(p', q', t') = (p + p', q + q', t + t' + p.q')`.
//! Lattice points are kept as exact integer triples `(n, m, k)`; products and
//! inverses of lattice points never touch floating point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the integrality test on `A B^t` and `A^t B`.
pub const INTEGRALITY_TOL: f64 = 1e-12;

/// A point `(p, q, t)` of the Heisenberg group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
}

impl GroupElement {
    pub fn new(p: Vec<f64>, q: Vec<f64>, t: f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
        }
        if p.is_empty() {
            return Err(Error::InvalidParameter("group dimension must be at least 1".into()));
        }
        Ok(Self { p, q, t })
    }

    pub fn identity(d: usize) -> Self {
        Self { p: vec![0.0; d], q: vec![0.0; d], t: 0.0 }
    }

    /// Central element `(0, 0, t)`.
    pub fn central(d: usize, t: f64) -> Self {
        Self { p: vec![0.0; d], q: vec![0.0; d], t }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn is_identity(&self) -> bool {
        self.t == 0.0 && self.p.iter().chain(&self.q).all(|&v| v == 0.0)
    }

    /// `self * other` under the polarized law.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| a + b).collect();
        let q = self.q.iter().zip(&other.q).map(|(a, b)| a + b).collect();
        let t = self.t + other.t + dot(&self.p, &other.q);
        Ok(GroupElement { p, q, t })
    }

    /// `(p, q, t)^{-1} = (-p, -q, -t + p.q)`.
    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            p: self.p.iter().map(|v| -v).collect(),
            q: self.q.iter().map(|v| -v).collect(),
            t: -self.t + dot(&self.p, &self.q),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Deserialize)]
struct RawLatticeSpec {
    d: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

/// Lattice `Gamma = A Z^d x B Z^d x Z`.
///
/// Serialized as `{"d": .., "A": [[..]], "B": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLatticeSpec")]
pub struct LatticeSpec {
    d: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    /// `A^t B`, the integer pairing that enters the central coordinate of a
    /// product of lattice points.
    #[serde(skip)]
    pairing: Vec<Vec<i64>>,
}

impl TryFrom<RawLatticeSpec> for LatticeSpec {
    type Error = Error;

    fn try_from(raw: RawLatticeSpec) -> Result<Self> {
        LatticeSpec::new(raw.d, raw.a, raw.b)
    }
}

impl LatticeSpec {
    /// Validates shapes, invertibility and integrality of `A B^t`.
    ///
    /// `A^t B` must be integral as well: it is the matrix through which
    /// `(An).(Bm')` enters the product, so without it the set is not closed.
    /// For diagonal `A`, `B` the two conditions coincide.
    pub fn new(d: usize, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        let am = to_matrix(d, &a, "A")?;
        let bm = to_matrix(d, &b, "B")?;
        for (name, m) in [("A", &am), ("B", &bm)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLattice(format!("{name} has non-finite entries")));
            }
            let det = m.clone().determinant();
            if det.abs() < 1e-14 {
                return Err(Error::InvalidLattice(format!("{name} is singular")));
            }
        }
        integer_matrix(&(&am * bm.transpose()), "A B^t")?;
        let pairing = integer_matrix(&(am.transpose() * &bm), "A^t B")?;
        Ok(Self { d, a, b, pairing })
    }

    /// The diagonal lattice `a Z^d x b Z^d x Z`.
    pub fn scalar(d: usize, a: f64, b: f64) -> Result<Self> {
        let diag = |s: f64| {
            (0..d)
                .map(|r| (0..d).map(|c| if r == c { s } else { 0.0 }).collect())
                .collect()
        };
        Self::new(d, diag(a), diag(b))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<f64>] {
        &self.b
    }

    /// `(An, Bm, k)`.
    pub fn embed(&self, point: &LatticePoint) -> GroupElement {
        GroupElement {
            p: mat_vec(&self.a, &point.n),
            q: mat_vec(&self.b, &point.m),
            t: point.k as f64,
        }
    }

    /// Exact product of two lattice points.
    pub fn compose(&self, x: &LatticePoint, y: &LatticePoint) -> LatticePoint {
        LatticePoint {
            n: x.n.iter().zip(&y.n).map(|(a, b)| a + b).collect(),
            m: x.m.iter().zip(&y.m).map(|(a, b)| a + b).collect(),
            k: x.k + y.k + self.pair(&x.n, &y.m),
        }
    }

    /// Exact inverse of a lattice point.
    pub fn inverse(&self, x: &LatticePoint) -> LatticePoint {
        LatticePoint {
            n: x.n.iter().map(|v| -v).collect(),
            m: x.m.iter().map(|v| -v).collect(),
            k: -x.k + self.pair(&x.n, &x.m),
        }
    }

    /// `n^t (A^t B) m`.
    fn pair(&self, n: &[i64], m: &[i64]) -> i64 {
        self.pairing
            .iter()
            .zip(n)
            .map(|(row, ni)| ni * row.iter().zip(m).map(|(p, mj)| p * mj).sum::<i64>())
            .sum()
    }
}

fn to_matrix(d: usize, rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidLattice(format!("{name} must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
}

fn integer_matrix(m: &DMatrix<f64>, name: &str) -> Result<Vec<Vec<i64>>> {
    let mut out = vec![vec![0i64; m.ncols()]; m.nrows()];
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            let rounded = v.round();
            if (v - rounded).abs() > INTEGRALITY_TOL {
                return Err(Error::InvalidLattice(format!(
                    "{name} has non-integer entry {v} at ({r}, {c})"
                )));
            }
            out[r][c] = rounded as i64;
        }
    }
    Ok(out)
}

fn mat_vec(m: &[Vec<f64>], v: &[i64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, &b)| a * b as f64).sum())
        .collect()
}

/// Integer coordinates `(n, m, k)` of a lattice point `gamma = gamma1 gamma2`
/// with `gamma1 = (An, Bm, 0)` and `gamma2 = (0, 0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub n: Vec<i64>,
    pub m: Vec<i64>,
    pub k: i64,
}

impl LatticePoint {
    pub fn new(n: Vec<i64>, m: Vec<i64>, k: i64) -> Self {
        Self { n, m, k }
    }

    pub fn origin(d: usize) -> Self {
        Self { n: vec![0; d], m: vec![0; d], k: 0 }
    }

    pub fn central(d: usize, k: i64) -> Self {
        Self { n: vec![0; d], m: vec![0; d], k }
    }

    /// The `Gamma_1` factor `(n, m, 0)`.
    pub fn gamma1(&self) -> LatticePoint {
        LatticePoint { n: self.n.clone(), m: self.m.clone(), k: 0 }
    }

    /// The central `Gamma_2` factor.
    pub fn gamma2(&self) -> i64 {
        self.k
    }

    pub fn gamma1_is_zero(&self) -> bool {
        self.n.iter().chain(&self.m).all(|&v| v == 0)
    }

    /// Compact label `(n;m;k)` with vector components joined by `:`.
    pub fn label(&self) -> String {
        let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":");
        format!("({};{};{})", join(&self.n), join(&self.m), self.k)
    }
}

/// All lattice points with `max(|n|_inf, |m|_inf) <= r1` and `|k| <= r2`, in
/// lexicographic order of `(n, m, k)`.
pub fn lattice_ball(spec: &LatticeSpec, r1: usize, r2: usize) -> Vec<LatticePoint> {
    let d = spec.dim();
    let r1 = r1 as i64;
    let r2 = r2 as i64;
    let side = (2 * r1 + 1) as usize;
    let cells = side.pow(2 * d as u32);
    let mut out = Vec::with_capacity(cells * (2 * r2 as usize + 1));
    for cell in 0..cells {
        // digits of `cell` in base `side`, most significant first
        let mut digits = vec![0i64; 2 * d];
        let mut rest = cell;
        for slot in digits.iter_mut().rev() {
            *slot = (rest % side) as i64 - r1;
            rest /= side;
        }
        let n = digits[..d].to_vec();
        let m = digits[d..].to_vec();
        for k in -r2..=r2 {
            out.push(LatticePoint { n: n.clone(), m: m.clone(), k });
        }
    }
    out
}
