//! Operator-valued Plancherel fields `lambda -> F(lambda)` sampled on the
//! frequency grid `lambda = alpha_i + j`.
//!
//! A function on the Heisenberg group is represented only through its field:
//! inner products, translations and brackets are all computed in frequency.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::rep::{same_grid, HSOperator, SpatialGrid};

/// Plancherel density `rho(lambda)`.
#[derive(Clone)]
pub enum PlancherelWeight {
    /// `|lambda|^d`, the Heisenberg group density.
    Power(u32),
    /// Any positive density, e.g. a Pfaffian for other nilpotent groups.
    Custom { name: String, rho: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl PlancherelWeight {
    pub fn custom(name: impl Into<String>, rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PlancherelWeight::Custom { name: name.into(), rho: Arc::new(rho) }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            PlancherelWeight::Power(d) => lambda.abs().powi(*d as i32),
            PlancherelWeight::Custom { rho, .. } => rho(lambda),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PlancherelWeight::Power(d) => format!("|lambda|^{d}"),
            PlancherelWeight::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for PlancherelWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlancherelWeight({})", self.describe())
    }
}

impl PartialEq for PlancherelWeight {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PlancherelWeight::Power(a), PlancherelWeight::Power(b)) => a == b,
            (PlancherelWeight::Custom { rho: a, .. }, PlancherelWeight::Custom { rho: b, .. }) => {
                Arc::ptr_eq(a, b)
            }
            _ => false,
        }
    }
}

/// Midpoints `alpha_i = (i + 1/2) / M` of `(0, 1]` crossed with the band
/// `j_lo..=j_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    m: usize,
    j_lo: i64,
    j_hi: i64,
    weight: PlancherelWeight,
}

impl FrequencyGrid {
    pub fn new(m: usize, j_lo: i64, j_hi: i64, weight: PlancherelWeight) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("alpha resolution must be at least 1".into()));
        }
        if j_lo > j_hi {
            return Err(Error::InvalidParameter(format!("empty band [{j_lo}, {j_hi}]")));
        }
        Ok(Self { m, j_lo, j_hi, weight })
    }

    /// Band `{0}` with the Heisenberg density `|lambda|^d`.
    pub fn heisenberg(m: usize, d: usize) -> Result<Self> {
        Self::new(m, 0, 0, PlancherelWeight::Power(d as u32))
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn band(&self) -> (i64, i64) {
        (self.j_lo, self.j_hi)
    }

    pub fn weight(&self) -> &PlancherelWeight {
        &self.weight
    }

    pub fn alpha(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.m as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.alpha(i)).collect()
    }

    pub fn lambda(&self, i: usize, j: i64) -> f64 {
        self.alpha(i) + j as f64
    }

    pub fn rho(&self, i: usize, j: i64) -> f64 {
        self.weight.eval(self.lambda(i, j))
    }

    pub fn contains(&self, i: usize, j: i64) -> bool {
        i < self.m && (self.j_lo..=self.j_hi).contains(&j)
    }

    /// Largest `|k|` whose character `e^{-2 pi i k alpha}` is treated as
    /// resolved by the midpoint rule.
    pub fn nyquist_cap(&self) -> i64 {
        (self.m / 4) as i64
    }

    pub fn check_resolved(&self, k: i64) -> Result<()> {
        let cap = self.nyquist_cap();
        if k.abs() > cap {
            Err(Error::Nyquist { k, cap, m: self.m })
        } else {
            Ok(())
        }
    }
}

/// Sampled operator field; absent entries are zero operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorField {
    fgrid: FrequencyGrid,
    grid: Arc<SpatialGrid>,
    entries: BTreeMap<(usize, i64), HSOperator>,
}

impl OperatorField {
    pub fn zero(fgrid: FrequencyGrid, grid: Arc<SpatialGrid>) -> Self {
        Self { fgrid, grid, entries: BTreeMap::new() }
    }

    /// Builds a field by evaluating `make(i, j, lambda)` at every sample, in
    /// parallel over `i`.
    pub fn build<F>(fgrid: FrequencyGrid, grid: Arc<SpatialGrid>, make: F) -> Result<Self>
    where
        F: Fn(usize, i64, f64) -> Result<Option<HSOperator>> + Sync,
    {
        let (j_lo, j_hi) = fgrid.band();
        let rows: Vec<Vec<((usize, i64), HSOperator)>> = (0..fgrid.resolution())
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::new();
                for j in j_lo..=j_hi {
                    if let Some(op) = make(i, j, fgrid.lambda(i, j))? {
                        row.push(((i, j), op));
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut field = Self::zero(fgrid, grid);
        for ((i, j), op) in rows.into_iter().flatten() {
            field.insert(i, j, op)?;
        }
        Ok(field)
    }

    pub fn insert(&mut self, i: usize, j: i64, op: HSOperator) -> Result<()> {
        if !self.fgrid.contains(i, j) {
            return Err(Error::InvalidParameter(format!("sample ({i}, {j}) is outside the frequency grid")));
        }
        same_grid(&self.grid, op.grid())?;
        self.entries.insert((i, j), op);
        Ok(())
    }

    pub fn fgrid(&self) -> &FrequencyGrid {
        &self.fgrid
    }

    pub fn spatial_grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn entry(&self, i: usize, j: i64) -> Option<&HSOperator> {
        self.entries.get(&(i, j))
    }

    /// Stored entries in ascending `(i, j)` order.
    pub fn entries(&self) -> impl Iterator<Item = (&(usize, i64), &HSOperator)> {
        self.entries.iter()
    }

    pub fn entries_at(&self, i: usize) -> impl Iterator<Item = (i64, &HSOperator)> {
        self.entries.range((i, i64::MIN)..=(i, i64::MAX)).map(|(&(_, j), op)| (j, op))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_rank_one(&self) -> bool {
        self.entries.values().all(HSOperator::is_rank_one)
    }

    pub fn check_compatible(&self, other: &OperatorField) -> Result<()> {
        if self.fgrid != other.fgrid {
            return Err(Error::GridMismatch("fields use different frequency grids".into()));
        }
        same_grid(&self.grid, &other.grid)
    }

    /// `sum_j <F(alpha_i + j), G(alpha_i + j)>_HS rho(alpha_i + j)`, ascending
    /// in `j`. Compatibility must already be checked.
    pub(crate) fn band_sum(&self, other: &OperatorField, i: usize) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, a) in self.entries_at(i) {
            if let Some(b) = other.entry(i, j) {
                acc += a.hs_inner(b)? * self.fgrid.rho(i, j);
            }
        }
        Ok(acc)
    }

    /// Weighted norm `(1/M) sum rho ||F||_HS^2`.
    pub fn norm_sq(&self) -> f64 {
        let sum: f64 = self
            .entries
            .iter()
            .map(|(&(i, j), op)| op.hs_norm_sq() * self.fgrid.rho(i, j))
            .sum();
        sum / self.fgrid.resolution() as f64
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> OperatorField {
        OperatorField {
            fgrid: self.fgrid.clone(),
            grid: Arc::clone(&self.grid),
            entries: self.entries.iter().map(|(&key, op)| (key, op.scale(c))).collect(),
        }
    }

    pub fn add(&self, other: &OperatorField) -> Result<OperatorField> {
        self.check_compatible(other)?;
        let mut entries = self.entries.clone();
        for (&key, op) in &other.entries {
            let sum = match entries.get(&key) {
                Some(existing) => existing.add(op)?,
                None => op.clone(),
            };
            entries.insert(key, sum);
        }
        Ok(OperatorField { fgrid: self.fgrid.clone(), grid: Arc::clone(&self.grid), entries })
    }

    /// Multiplies every entry by the scalar `c(lambda)`.
    pub fn modulate(&self, c: impl Fn(f64) -> Complex64) -> OperatorField {
        OperatorField {
            fgrid: self.fgrid.clone(),
            grid: Arc::clone(&self.grid),
            entries: self
                .entries
                .iter()
                .map(|(&(i, j), op)| ((i, j), op.scale(c(self.fgrid.lambda(i, j)))))
                .collect(),
        }
    }
}

/// `<F, G> = (1/M) sum_{i, j} <F(lambda), G(lambda)>_HS rho(lambda)`, summed
/// over ascending `i`, then `j`.
pub fn plancherel_inner(f: &OperatorField, g: &OperatorField) -> Result<Complex64> {
    f.check_compatible(g)?;
    let per_alpha: Vec<Complex64> = (0..f.fgrid.resolution())
        .into_par_iter()
        .map(|i| f.band_sum(g, i))
        .collect::<Result<_>>()?;
    let total: Complex64 = per_alpha.iter().sum();
    Ok(total / f.fgrid.resolution() as f64)
}

/// Field of `L_x psi`: every entry becomes `Pi_lambda(x) F(lambda)`.
pub fn left_translate(f: &OperatorField, x: &GroupElement) -> Result<OperatorField> {
    if x.dim() != f.grid.dim() {
        return Err(Error::DimensionMismatch { expected: f.grid.dim(), found: x.dim() });
    }
    f.grid.shift_of(&x.p)?;
    let moved: Vec<((usize, i64), HSOperator)> = f
        .entries
        .par_iter()
        .map(|(&(i, j), op)| Ok(((i, j), op.left_translate(f.fgrid.lambda(i, j), x)?)))
        .collect::<Result<_>>()?;
    Ok(OperatorField {
        fgrid: f.fgrid.clone(),
        grid: Arc::clone(&f.grid),
        entries: moved.into_iter().collect(),
    })
}

/// Field of `L_{(0,0,k)} psi`: multiplies each entry by `e^{2 pi i k lambda}`.
pub fn central_translate(f: &OperatorField, k: i64) -> OperatorField {
    f.modulate(|lambda| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rep::{Window, WindowVector};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> Arc<SpatialGrid> {
        Arc::new(SpatialGrid::new(1, vec![-1.5], 1.0 / 16.0, 48).unwrap())
    }

    fn random_field(rng: &mut ChaCha8Rng, fgrid: &FrequencyGrid, grid: &Arc<SpatialGrid>) -> OperatorField {
        let vec = |rng: &mut ChaCha8Rng| {
            let values = (0..grid.len())
                .map(|n| {
                    if (16..32).contains(&n) {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            WindowVector::new(Arc::clone(grid), values).unwrap()
        };
        let mut field = OperatorField::zero(fgrid.clone(), Arc::clone(grid));
        let (lo, hi) = fgrid.band();
        for i in 0..fgrid.resolution() {
            for j in lo..=hi {
                if rng.gen_bool(0.7) {
                    let op = HSOperator::rank_one(vec(rng), vec(rng)).unwrap();
                    field.insert(i, j, op).unwrap();
                }
            }
        }
        field
    }

    #[test]
    fn frequency_grid_basics() {
        let fg = FrequencyGrid::new(4, -1, 1, PlancherelWeight::Power(1)).unwrap();
        assert_eq!(fg.alphas(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(fg.lambda(0, -1), -0.875);
        assert_eq!(fg.rho(0, -1), 0.875);
        assert!(FrequencyGrid::new(0, 0, 0, PlancherelWeight::Power(1)).is_err());
        assert!(FrequencyGrid::new(4, 1, 0, PlancherelWeight::Power(1)).is_err());
        // midpoints never hit zero
        assert!((0..4).flat_map(|i| (-1..=1).map(move |j| (i, j))).all(|(i, j)| fg.lambda(i, j) != 0.0));
    }

    #[test]
    fn zero_field_inner_is_zero() {
        let fg = FrequencyGrid::heisenberg(8, 1).unwrap();
        let z = OperatorField::zero(fg.clone(), small_grid());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&mut rng, &fg, z.spatial_grid());
        assert_eq!(plancherel_inner(&z, &f).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(z.norm_sq(), 0.0);
    }

    #[test]
    fn plancherel_inner_matches_double_loop() {
        let fg = FrequencyGrid::new(8, -1, 1, PlancherelWeight::Power(1)).unwrap();
        let grid = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&mut rng, &fg, &grid);
        let g = random_field(&mut rng, &fg, &grid);
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..8 {
            for j in -1..=1 {
                if let (Some(a), Some(b)) = (f.entry(i, j), g.entry(i, j)) {
                    // densified trace, independent of the rank-one shortcut
                    let (HSOperator::Dense { matrix: ma, .. }, HSOperator::Dense { matrix: mb, .. }) =
                        (a.densify(), b.densify())
                    else {
                        unreachable!()
                    };
                    let lambda: f64 = (i as f64 + 0.5) / 8.0 + j as f64;
                    oracle += (&ma * mb.adjoint()).trace() * lambda.abs();
                }
            }
        }
        oracle /= 8.0;
        let got = plancherel_inner(&f, &g).unwrap();
        assert!((got - oracle).norm() < 1e-12 * (1.0 + oracle.norm()));
        let rev = plancherel_inner(&g, &f).unwrap();
        assert!((got - rev.conj()).norm() < 1e-14 * (1.0 + got.norm()));
        let ff = plancherel_inner(&f, &f).unwrap();
        assert!(ff.re > 0.0 && ff.im.abs() < 1e-14 * ff.re);
        assert!((ff.re - f.norm_sq()).abs() < 1e-12 * ff.re);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let grid = small_grid();
        let f = OperatorField::zero(FrequencyGrid::heisenberg(8, 1).unwrap(), Arc::clone(&grid));
        let g = OperatorField::zero(FrequencyGrid::heisenberg(16, 1).unwrap(), Arc::clone(&grid));
        assert!(matches!(plancherel_inner(&f, &g), Err(Error::GridMismatch(_))));
        let other = Arc::new(SpatialGrid::new(1, vec![0.0], 0.1, 48).unwrap());
        let h = OperatorField::zero(FrequencyGrid::heisenberg(8, 1).unwrap(), other);
        assert!(matches!(plancherel_inner(&f, &h), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn left_translate_examples() {
        let fg = FrequencyGrid::new(8, -1, 1, PlancherelWeight::Power(1)).unwrap();
        let grid = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mut rng, &fg, &grid);

        assert_eq!(left_translate(&f, &GroupElement::identity(1)).unwrap(), f);

        let k = 3;
        let moved = left_translate(&f, &GroupElement::central(1, k as f64)).unwrap();
        for (&(i, j), op) in moved.entries() {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * k as f64 * fg.lambda(i, j));
            let expected = f.entry(i, j).unwrap().scale(phase);
            let diff = op.add(&expected.scale(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.hs_norm_sq() < 1e-24);
        }
        let central = central_translate(&f, k);
        assert!((plancherel_inner(&central, &moved).unwrap().re - f.norm_sq()).abs() < 1e-10);

        let x = GroupElement::new(vec![0.25], vec![1.7], -0.4).unwrap();
        let moved = left_translate(&f, &x).unwrap();
        assert!((moved.norm() - f.norm()).abs() < 1e-10);
        assert!(moved.all_rank_one());

        let off = GroupElement::new(vec![0.01], vec![0.0], 0.0).unwrap();
        assert!(matches!(left_translate(&f, &off), Err(Error::OffGridTranslation(_))));
    }

    #[test]
    fn left_translate_is_a_homomorphism_on_fields() {
        let fg = FrequencyGrid::new(6, -1, 1, PlancherelWeight::Power(1)).unwrap();
        let grid = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(&mut rng, &fg, &grid);
        for _ in 0..10 {
            let mk = |rng: &mut ChaCha8Rng| {
                GroupElement::new(
                    vec![rng.gen_range(-4i32..=4) as f64 / 16.0],
                    vec![rng.gen_range(-2.0..2.0)],
                    rng.gen_range(-2.0..2.0),
                )
                .unwrap()
            };
            let (x, y) = (mk(&mut rng), mk(&mut rng));
            let two = left_translate(&left_translate(&f, &y).unwrap(), &x).unwrap();
            let one = left_translate(&f, &x.compose(&y).unwrap()).unwrap();
            let diff = two.add(&one.scale(Complex64::new(-1.0, 0.0))).unwrap();
            assert!(diff.norm() < 1e-10);
        }
    }

    #[test]
    fn dense_entries_translate_like_rank_one() {
        let fg = FrequencyGrid::heisenberg(4, 1).unwrap();
        let grid = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&mut rng, &fg, &grid);
        let mut dense = OperatorField::zero(fg.clone(), Arc::clone(&grid));
        for (&(i, j), op) in f.entries() {
            dense.insert(i, j, op.densify()).unwrap();
        }
        let x = GroupElement::new(vec![-0.125], vec![0.6], 0.2).unwrap();
        let a = left_translate(&f, &x).unwrap();
        let b = left_translate(&dense, &x).unwrap();
        let cross = plancherel_inner(&a, &b).unwrap();
        assert!((cross.re - a.norm_sq()).abs() < 1e-12 && cross.im.abs() < 1e-12);
        assert!((b.norm_sq() - a.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn custom_weight_is_used() {
        let w = PlancherelWeight::custom("two", |_| 2.0);
        let fg = FrequencyGrid::new(4, 0, 0, w).unwrap();
        let grid = Arc::new(SpatialGrid::cell_centered(1, 0.0, 1.0, 0.25).unwrap());
        let u = Window::unit_box().sample(&grid).unwrap();
        let p = HSOperator::rank_one(u.clone(), u).unwrap();
        let f = OperatorField::build(fg, grid, |_, _, _| Ok(Some(p.clone()))).unwrap();
        assert!((f.norm_sq() - 2.0).abs() < 1e-12);
        let _ = DMatrix::<f64>::zeros(1, 1);
    }
}
