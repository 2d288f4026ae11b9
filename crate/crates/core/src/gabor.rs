//! Band-limited generators `psi_eps` whose field is `H_eps(lambda) = u_lambda ⊗ u_lambda`
//! for `eps < lambda <= 1` and zero elsewhere.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{frame_certify, CertOptions, CertReport, ConditionResult};
use crate::bracket::{bracket, bracket_profile, BracketProfile};
use crate::error::{Error, Result};
use crate::field::{left_translate, FrequencyGrid, OperatorField};
use crate::group::{GroupElement, LatticePoint, LatticeSpec};
use crate::rep::{scale_window, schrodinger_apply, HSOperator, SpatialGrid, Window, WindowVector};

/// Window, band edge, frequency grid, lattice and spatial grid of one
/// construction.
#[derive(Debug, Clone)]
pub struct GaborConstruction {
    window: Window,
    epsilon: f64,
    fgrid: FrequencyGrid,
    spec: LatticeSpec,
    grid: Arc<SpatialGrid>,
    u: WindowVector,
}

impl GaborConstruction {
    /// Uses the default domain: the window hull over `lambda in (eps, 1]`
    /// widened by `2 r1` lattice steps plus one, snapped outward to multiples
    /// of `h`.
    pub fn new(window: Window, epsilon: f64, spec: LatticeSpec, m: usize, h: f64, r1: usize) -> Result<Self> {
        let grid = default_grid(&window, epsilon, &spec, h, r1)?;
        Self::with_grid(window, epsilon, spec, m, grid)
    }

    pub fn with_grid(
        window: Window,
        epsilon: f64,
        spec: LatticeSpec,
        m: usize,
        grid: Arc<SpatialGrid>,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if grid.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: grid.dim() });
        }
        for axis in 0..spec.dim() {
            let mut n = vec![0; spec.dim()];
            n[axis] = 1;
            grid.shift_of(&spec.embed(&LatticePoint::new(n, vec![0; spec.dim()], 0)).p)?;
        }
        let u = window.sample(&grid)?;
        if (u.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("window norm {} is not 1 on this grid", u.norm())));
        }
        let fgrid = FrequencyGrid::heisenberg(m, spec.dim())?;
        Ok(Self { window, epsilon, fgrid, spec, grid, u })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn fgrid(&self) -> &FrequencyGrid {
        &self.fgrid
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn u(&self) -> &WindowVector {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// True when `eps` lies below every midpoint, so the band covers all of
    /// `(0, 1]`.
    pub fn full_coverage(&self) -> bool {
        self.epsilon < self.fgrid.alpha(0)
    }

    pub fn band_field(&self) -> Result<OperatorField> {
        band_field(&self.window, self.epsilon, &self.fgrid, &self.grid)
    }

    /// `(1 - eps^{d+1}) / (d + 1)`.
    pub fn expected_norm_sq(&self) -> f64 {
        let d = self.dim() as f64;
        (1.0 - self.epsilon.powf(d + 1.0)) / (d + 1.0)
    }

    /// `alpha^d` on `(eps, 1]`, zero below.
    pub fn expected_bracket(&self, alpha: f64) -> f64 {
        if alpha > self.epsilon && alpha <= 1.0 {
            alpha.powi(self.dim() as i32)
        } else {
            0.0
        }
    }
}

/// Domain large enough for every window scale in `(eps, 1]` and every
/// `g^{-1} g'` translate with `|n| <= 2 r1`.
pub fn default_grid(window: &Window, epsilon: f64, spec: &LatticeSpec, h: f64, r1: usize) -> Result<Arc<SpatialGrid>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
    }
    let (Some((a0, a1)), Some((b0, b1))) = (window.scaled_support(epsilon), window.scaled_support(1.0)) else {
        return Err(Error::InvalidParameter("sampled windows need an explicit grid".into()));
    };
    let reach = spec.a().iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let margin = 2.0 * r1 as f64 * reach + 1.0;
    let start = ((a0.min(b0) - margin) / h).floor() * h;
    let end = ((a1.max(b1) + margin) / h).ceil() * h;
    Ok(Arc::new(SpatialGrid::cell_centered(spec.dim(), start, end, h)?))
}

/// Field with rank-one entries `u_lambda ⊗ u_lambda` at every sample
/// `eps < lambda <= 1`.
pub fn band_field(window: &Window, epsilon: f64, fgrid: &FrequencyGrid, grid: &Arc<SpatialGrid>) -> Result<OperatorField> {
    OperatorField::build(fgrid.clone(), Arc::clone(grid), |_, _, lambda| {
        if lambda > epsilon && lambda <= 1.0 {
            let ul = scale_window(window, lambda, grid)?;
            Ok(Some(HSOperator::rank_one(ul.clone(), ul)?))
        } else {
            Ok(None)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoBracketReport {
    pub max_deviation: f64,
    pub worst_alpha: f64,
    pub profile: BracketProfile,
}

/// `max_alpha |[psi_eps, psi_eps](alpha) - alpha^d 1(eps < alpha <= 1)|`.
pub fn auto_bracket_check(c: &GaborConstruction) -> Result<AutoBracketReport> {
    let field = c.band_field()?;
    let profile = bracket_profile(&field, &field)?;
    let mut report = AutoBracketReport { max_deviation: 0.0, worst_alpha: profile.alpha(0), profile };
    for (i, v) in report.profile.values.iter().enumerate() {
        let alpha = report.profile.alpha(i);
        let dev = (v - Complex64::new(c.expected_bracket(alpha), 0.0)).norm();
        if dev > report.max_deviation {
            report.max_deviation = dev;
            report.worst_alpha = alpha;
        }
    }
    Ok(report)
}

/// Cross bracket `[L_{gamma_1} psi_eps, psi_eps](alpha_i)` next to the
/// window overlap it reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossBracket {
    pub alpha: f64,
    /// From the bracket definition.
    pub definition: Complex64,
    /// `<Pi_alpha(gamma_1) u_alpha, u_alpha>`.
    pub overlap: Complex64,
    /// `rho(alpha) * overlap`.
    pub weighted_overlap: Complex64,
    /// `||u_alpha||^2`.
    pub window_norm_sq: f64,
    /// `|definition - weighted_overlap * ||u_alpha||^2|`; exact identity.
    pub identity_gap: f64,
    /// `|definition - overlap|`; the weight and window norm make this nonzero.
    pub factor_gap: f64,
}

pub fn cross_bracket(c: &GaborConstruction, field: &OperatorField, gamma1: &LatticePoint, i: usize) -> Result<CrossBracket> {
    if gamma1.gamma2() != 0 {
        return Err(Error::InvalidParameter(format!("{} has a central component", gamma1.label())));
    }
    let x = c.spec.embed(gamma1);
    let definition = bracket(&left_translate(field, &x)?, field, i)?;
    let alpha = c.fgrid.alpha(i);
    let (overlap, window_norm_sq) = match field.entry(i, 0) {
        Some(HSOperator::RankOne { right, .. }) => (right_overlap(alpha, &x, right)?, right.norm_sq()),
        Some(_) => return Err(Error::InvalidParameter("cross bracket needs rank-one entries".into())),
        None => (Complex64::new(0.0, 0.0), 0.0),
    };
    let weighted_overlap = overlap * c.fgrid.rho(i, 0);
    Ok(CrossBracket {
        alpha,
        definition,
        overlap,
        weighted_overlap,
        window_norm_sq,
        identity_gap: (definition - weighted_overlap * window_norm_sq).norm(),
        factor_gap: (definition - overlap).norm(),
    })
}

fn right_overlap(lambda: f64, x: &GroupElement, u: &WindowVector) -> Result<Complex64> {
    schrodinger_apply(lambda, x, u)?.inner(u)
}

/// `<Pi_lambda(x) u_lambda, u_lambda>` on the grid, for any `lambda != 0`.
pub fn overlap(window: &Window, lambda: f64, x: &GroupElement, grid: &Arc<SpatialGrid>) -> Result<Complex64> {
    right_overlap(lambda, x, &scale_window(window, lambda, grid)?)
}

/// Continuum value of `<Pi_lambda(x) u_lambda, u_lambda>` for a box window
/// on `[s0, s1)^d`, `lambda > 0`.
pub fn box_overlap_exact(support: [f64; 2], lambda: f64, x: &GroupElement) -> Result<Complex64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let [s0, s1] = support;
    let (lo, hi) = (s0 / lambda, s1 / lambda);
    let amp = lambda / (s1 - s0);
    let mut value = Complex64::from_polar(1.0, 2.0 * PI * lambda * x.t);
    for (&p, &q) in x.p.iter().zip(&x.q) {
        let (y0, y1) = (lo.max(lo + p), hi.min(hi + p));
        if y1 <= y0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let omega = -2.0 * PI * lambda * q;
        let integral = if omega == 0.0 {
            Complex64::new(y1 - y0, 0.0)
        } else {
            (Complex64::from_polar(1.0, omega * y1) - Complex64::from_polar(1.0, omega * y0))
                / Complex64::new(0.0, omega)
        };
        value *= integral * amp;
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameExample {
    /// Cross condition over the `gamma_1` ball, evaluated numerically.
    pub hypothesis: ConditionResult,
    /// `max_alpha | ||u_alpha||^2 - 1 |` over the band.
    pub window_norm_deviation: f64,
    pub report: CertReport,
}

/// Band field, hypothesis check and frame certification in one pass. A
/// failed hypothesis yields an inconclusive report with the worst
/// `(gamma_1, alpha, value)` attached.
pub fn build_frame_example(c: &GaborConstruction, opts: &CertOptions) -> Result<FrameExample> {
    let field = c.band_field()?;
    let report = frame_certify(&field, &c.spec, opts)?;
    let checked = crate::group::lattice_ball(&c.spec, opts.r1, 0).len().saturating_sub(1);
    let hypothesis = ConditionResult {
        residual: report.condition_residual,
        worst: report.worst_offender.clone(),
        checked: if report.support_count == 0 { 0 } else { checked },
    };
    let window_norm_deviation = field
        .entries()
        .map(|(_, op)| match op {
            HSOperator::RankOne { right, .. } => (right.norm_sq() - 1.0).abs(),
            HSOperator::Dense { .. } => 0.0,
        })
        .fold(0.0, f64::max);
    Ok(FrameExample { hypothesis, window_norm_deviation, report })
}

/// A one-dimensional field whose lattice translates are orthonormal on the
/// grid: every entry is `(u ⊗ u) / sqrt(rho)` with `u` the normalized box
/// on `2M` unit cells, and the lattice is `a = 2M`, `b = 1`.
///
/// Modulation cross terms vanish exactly since `2M alpha_i m` is an integer
/// and the geometric sum over the box nodes closes; translates by `2M n`
/// are disjoint. The domain leaves room for translates with `|n| <= 2 r1`.
pub fn orthonormal_fixture(m: usize, r1: usize) -> Result<(OperatorField, LatticeSpec)> {
    let width = 2 * m;
    let a = width as f64;
    let pad = 2.0 * r1 as f64 * a;
    let grid = Arc::new(SpatialGrid::cell_centered(1, -pad, a + pad, 1.0)?);
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.node(i)[0];
            if (0.0..a).contains(&x) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let u = WindowVector::new(Arc::clone(&grid), values)?.normalized()?;
    let fgrid = FrequencyGrid::heisenberg(m, 1)?;
    let field = OperatorField::build(fgrid.clone(), Arc::clone(&grid), |i, j, _| {
        let scale = Complex64::new(fgrid.rho(i, j).sqrt().recip(), 0.0);
        Ok(Some(HSOperator::rank_one(u.scale(scale), u.clone())?))
    })?;
    Ok((field, LatticeSpec::scalar(1, a, 1.0)?))
}
