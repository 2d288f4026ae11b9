//! Spectral support, the `S_psi` map, and certifiers for orthonormal, Riesz
//! and frame families of lattice translates, with Gram-matrix oracles.
//!
//! Every "almost everywhere" statement is checked at the `alpha` midpoints
//! only, and every condition over `Gamma_1` only on a finite ball; verdicts
//! are relative to the recorded resolution and radius.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bracket::{bracket_profile, BracketProfile};
use crate::error::{Error, Result};
use crate::field::{left_translate, plancherel_inner, OperatorField};
use crate::group::{lattice_ball, LatticePoint, LatticeSpec};
use crate::rep::HSOperator;

/// Mask `i -> [psi, psi](alpha_i) > tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSupport {
    pub mask: Vec<bool>,
    pub threshold: f64,
}

impl SpectralSupport {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }
}

/// `max(1e-9 * max_alpha [psi, psi], f64::MIN_POSITIVE)`.
pub fn default_tau(auto: &BracketProfile) -> f64 {
    (1e-9 * auto.max_re()).max(f64::MIN_POSITIVE)
}

fn support_from_profile(auto: &BracketProfile, tau: f64) -> SpectralSupport {
    SpectralSupport { mask: auto.values.iter().map(|v| v.re > tau).collect(), threshold: tau }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("support threshold must be positive, got {tau}")))
    }
}

pub fn spectral_support(psi: &OperatorField, tau: f64) -> Result<SpectralSupport> {
    check_tau(tau)?;
    Ok(support_from_profile(&bracket_profile(psi, psi)?, tau))
}

/// `chi_E(alpha) [phi, psi](alpha) / [psi, psi](alpha)` at every midpoint.
pub fn s_map(phi: &OperatorField, psi: &OperatorField, tau: f64) -> Result<Vec<Complex64>> {
    check_tau(tau)?;
    let auto = bracket_profile(psi, psi)?;
    let cross = bracket_profile(phi, psi)?;
    Ok(s_map_from_profiles(&cross, &auto, tau))
}

fn s_map_from_profiles(cross: &BracketProfile, auto: &BracketProfile, tau: f64) -> Vec<Complex64> {
    cross
        .values
        .iter()
        .zip(&auto.values)
        .map(|(c, a)| if a.re > tau { c / a.re } else { Complex64::new(0.0, 0.0) })
        .collect()
}

/// `phi = sum_k a_k L_{(0,0,k)} psi`, assembled entry by entry.
pub fn central_combination(psi: &OperatorField, coeffs: &[(i64, Complex64)]) -> Result<OperatorField> {
    let d = psi.spatial_grid().dim();
    let mut acc = OperatorField::zero(psi.fgrid().clone(), psi.spatial_grid().clone());
    for &(k, a) in coeffs {
        psi.fgrid().check_resolved(k)?;
        let moved = left_translate(psi, &crate::group::GroupElement::central(d, k as f64))?;
        acc = acc.add(&moved.scale(a))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsometryResidual {
    /// `(1/M) sum_i |S_psi phi|^2 [psi, psi]`.
    pub weighted_norm_sq: f64,
    /// `||phi||^2` from the Plancherel inner product.
    pub norm_sq: f64,
    pub residual: f64,
}

/// Compares `||S_psi phi||` in the weighted space against `||phi||` for
/// `phi = sum_k a_k L_{(0,0,k)} psi`.
pub fn isometry_residual(psi: &OperatorField, coeffs: &[(i64, Complex64)], tau: f64) -> Result<IsometryResidual> {
    check_tau(tau)?;
    let phi = central_combination(psi, coeffs)?;
    let norm_sq = plancherel_inner(&phi, &phi)?.re;
    let auto = bracket_profile(psi, psi)?;
    let s = s_map_from_profiles(&bracket_profile(&phi, psi)?, &auto, tau);
    let m = auto.m as f64;
    let weighted_norm_sq = s.iter().zip(&auto.values).map(|(s, a)| s.norm_sqr() * a.re).sum::<f64>() / m;
    Ok(IsometryResidual { weighted_norm_sq, norm_sq, residual: (weighted_norm_sq - norm_sq).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// Location of the largest condition violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub gamma1: String,
    pub alpha: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    /// Max of `|[psi, L_g psi](alpha)|` over `g != 0` in the ball and
    /// `alpha` in the support.
    pub residual: f64,
    pub worst: Option<Offender>,
    pub checked: usize,
}

/// `[psi, L_{gamma_1} psi]` for every `gamma_1` of the `k = 0` ball.
fn cross_profiles(psi: &OperatorField, spec: &LatticeSpec, r1: usize) -> Result<Vec<(LatticePoint, BracketProfile)>> {
    lattice_ball(spec, r1, 0)
        .into_par_iter()
        .map(|g| {
            let moved = left_translate(psi, &spec.embed(&g))?;
            Ok((g.clone(), bracket_profile(psi, &moved)?))
        })
        .collect()
}

fn condition_from_profiles(
    profiles: &[(LatticePoint, BracketProfile)],
    mask: &[bool],
) -> ConditionResult {
    let mut result = ConditionResult { residual: 0.0, worst: None, checked: 0 };
    for (g, p) in profiles.iter().filter(|(g, _)| !g.gamma1_is_zero()) {
        result.checked += 1;
        for (i, v) in p.values.iter().enumerate() {
            if mask[i] && v.norm() > result.residual {
                result.residual = v.norm();
                result.worst = Some(Offender { gamma1: g.label(), alpha: p.alpha(i), re: v.re, im: v.im });
            }
        }
    }
    result
}

/// Cross-bracket condition `[psi, L_{gamma_1} psi] = 0` on the support, for
/// `gamma_1 != 0` in the radius-`r1` ball.
pub fn check_condition(psi: &OperatorField, spec: &LatticeSpec, r1: usize, tau: f64) -> Result<ConditionResult> {
    check_tau(tau)?;
    let auto = bracket_profile(psi, psi)?;
    let support = support_from_profile(&auto, tau);
    Ok(condition_from_profiles(&cross_profiles(psi, spec, r1)?, &support.mask))
}

/// Radii, tolerances and resolution a verdict is relative to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertParameters {
    pub r1: usize,
    pub r2: usize,
    pub m: usize,
    pub band: (i64, i64),
    pub tau: f64,
    pub tol: f64,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertReport {
    pub mode: String,
    pub verdict: Verdict,
    pub a_est: f64,
    pub b_est: f64,
    pub condition_residual: f64,
    pub worst_offender: Option<Offender>,
    pub support_count: usize,
    pub parameters: CertParameters,
    pub reason: String,
}

/// Settings shared by the certifiers; `tau = None` selects [`default_tau`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertOptions {
    pub r1: usize,
    pub r2: usize,
    pub tau: Option<f64>,
    pub tol: f64,
}

impl CertOptions {
    pub fn new(r1: usize, tol: f64) -> Self {
        Self { r1, r2: 0, tau: None, tol }
    }

    fn resolve_tau(&self, auto: &BracketProfile) -> Result<f64> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        let tau = self.tau.unwrap_or_else(|| default_tau(auto));
        check_tau(tau)?;
        Ok(tau)
    }

    fn parameters(&self, psi: &OperatorField, tau: f64) -> CertParameters {
        CertParameters {
            r1: self.r1,
            r2: self.r2,
            m: psi.fgrid().resolution(),
            band: psi.fgrid().band(),
            tau,
            tol: self.tol,
            weight: psi.fgrid().weight().describe(),
        }
    }
}

fn min_max<'a>(values: impl Iterator<Item = &'a Complex64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v.re, v.re)),
        Some((lo, hi)) => Some((lo.min(v.re), hi.max(v.re))),
    })
}

/// Orthonormal basis test: `max_alpha |[psi, L_g psi](alpha) - delta_{g,0}| <= tol`
/// for every `g` in the ball.
pub fn check_onb(psi: &OperatorField, spec: &LatticeSpec, opts: &CertOptions) -> Result<CertReport> {
    let auto = bracket_profile(psi, psi)?;
    let tau = opts.resolve_tau(&auto)?;
    let support = support_from_profile(&auto, tau);
    let profiles = cross_profiles(psi, spec, opts.r1)?;
    let all = vec![true; auto.m];
    let condition = condition_from_profiles(&profiles, &all);
    let diag_dev = auto
        .values
        .iter()
        .map(|v| (v - Complex64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    let (a_est, b_est) = min_max(auto.values.iter()).unwrap_or((0.0, 0.0));
    let worst = condition.residual.max(diag_dev);
    let verdict = if worst <= opts.tol { Verdict::Certified } else { Verdict::Refuted };
    let reason = match verdict {
        Verdict::Certified => format!("bracket within {worst:.3e} of the Kronecker delta on the ball"),
        _ if diag_dev >= condition.residual => {
            format!("auto-bracket deviates from 1 by {diag_dev:.3e}")
        }
        _ => format!("cross-bracket reaches {:.3e}", condition.residual),
    };
    Ok(CertReport {
        mode: "onb".into(),
        verdict,
        a_est,
        b_est,
        condition_residual: condition.residual,
        worst_offender: condition.worst,
        support_count: support.count(),
        parameters: opts.parameters(psi, tau),
        reason,
    })
}

/// Riesz basis test: bounds over every midpoint of `(0, 1]`.
///
/// A vanishing lower bound refutes before the cross condition is consulted:
/// the central translates alone already fail to be a Riesz sequence.
pub fn riesz_certify(psi: &OperatorField, spec: &LatticeSpec, opts: &CertOptions) -> Result<CertReport> {
    let auto = bracket_profile(psi, psi)?;
    let tau = opts.resolve_tau(&auto)?;
    let support = support_from_profile(&auto, tau);
    let (a_est, b_est) = min_max(auto.values.iter()).unwrap_or((0.0, 0.0));
    let mut report = CertReport {
        mode: "riesz".into(),
        verdict: Verdict::Refuted,
        a_est,
        b_est,
        condition_residual: 0.0,
        worst_offender: None,
        support_count: support.count(),
        parameters: opts.parameters(psi, tau),
        reason: String::new(),
    };
    if a_est < opts.tol {
        report.reason = format!("lower bound {a_est:.3e} below tolerance; bracket vanishes on part of (0,1]");
        return Ok(report);
    }
    let condition = condition_from_profiles(&cross_profiles(psi, spec, opts.r1)?, &support.mask);
    report.condition_residual = condition.residual;
    report.worst_offender = condition.worst;
    if condition.residual > opts.tol {
        report.verdict = Verdict::Inconclusive;
        report.reason = format!("cross condition violated: residual {:.3e}", condition.residual);
    } else {
        report.verdict = Verdict::Certified;
        report.reason = format!("bounds ({a_est:.6}, {b_est:.6}) on all of (0,1]");
    }
    Ok(report)
}

/// Frame test: bounds over the spectral support only.
pub fn frame_certify(psi: &OperatorField, spec: &LatticeSpec, opts: &CertOptions) -> Result<CertReport> {
    let auto = bracket_profile(psi, psi)?;
    let tau = opts.resolve_tau(&auto)?;
    let support = support_from_profile(&auto, tau);
    let on_support = auto.values.iter().zip(&support.mask).filter(|(_, &m)| m).map(|(v, _)| v);
    let (a_est, b_est) = min_max(on_support).unwrap_or((0.0, 0.0));
    let mut report = CertReport {
        mode: "frame".into(),
        verdict: Verdict::Refuted,
        a_est,
        b_est,
        condition_residual: 0.0,
        worst_offender: None,
        support_count: support.count(),
        parameters: opts.parameters(psi, tau),
        reason: String::new(),
    };
    if support.is_empty() {
        report.reason = "empty spectral support".into();
        return Ok(report);
    }
    let condition = condition_from_profiles(&cross_profiles(psi, spec, opts.r1)?, &support.mask);
    report.condition_residual = condition.residual;
    report.worst_offender = condition.worst;
    if condition.residual > opts.tol {
        report.verdict = Verdict::Inconclusive;
        report.reason = format!("cross condition violated: residual {:.3e}", condition.residual);
    } else if a_est >= tau {
        report.verdict = Verdict::Certified;
        report.reason = format!("bounds ({a_est:.6}, {b_est:.6}) on the spectral support");
    } else {
        report.reason = format!("lower bound {a_est:.3e} below threshold {tau:.3e}");
    }
    Ok(report)
}

/// Gram matrices over a lattice ball computed two ways.
#[derive(Debug, Clone, PartialEq)]
pub struct GramResult {
    pub points: Vec<LatticePoint>,
    /// `<L_g psi, L_g' psi>` from the Plancherel inner product.
    pub direct: DMatrix<Complex64>,
    /// Fourier coefficients of `[psi, L_{g1''} psi]` after reducing
    /// `g^{-1} g' = g1'' g2''`.
    pub bracket: DMatrix<Complex64>,
}

impl GramResult {
    pub fn max_abs_deviation(&self) -> f64 {
        self.direct.iter().zip(self.bracket.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |a - b| / max |a|`.
    pub fn relative_deviation(&self) -> f64 {
        let scale = self.direct.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            self.max_abs_deviation()
        } else {
            self.max_abs_deviation() / scale
        }
    }
}

/// `max |G - G^†|`.
pub fn hermitian_asymmetry(g: &DMatrix<Complex64>) -> f64 {
    let n = g.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((g[(r, c)] - g[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues of the Hermitian part of `g`.
pub fn hermitian_eigenvalues(g: &DMatrix<Complex64>) -> Vec<f64> {
    let sym = (g + g.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn gram_oracle(psi: &OperatorField, spec: &LatticeSpec, r1: usize, r2: usize) -> Result<GramResult> {
    psi.fgrid().check_resolved(r2 as i64)?;
    let points = lattice_ball(spec, r1, r2);
    let n = points.len();

    let mut reduced = vec![vec![LatticePoint::origin(spec.dim()); n]; n];
    let mut needed: BTreeMap<LatticePoint, ()> = BTreeMap::new();
    for (r, g) in points.iter().enumerate() {
        let inv = spec.inverse(g);
        for (c, h) in points.iter().enumerate() {
            let x = spec.compose(&inv, h);
            needed.insert(x.gamma1(), ());
            reduced[r][c] = x;
        }
    }

    let direct = direct_gram(psi, spec, &points)?;

    let keys: Vec<LatticePoint> = needed.into_keys().collect();
    let profiles: Vec<BracketProfile> = keys
        .par_iter()
        .map(|g1| bracket_profile(psi, &left_translate(psi, &spec.embed(g1))?))
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<&LatticePoint, &BracketProfile> = keys.iter().zip(&profiles).collect();
    let bracket = DMatrix::from_fn(n, n, |r, c| {
        let x = &reduced[r][c];
        lookup[&x.gamma1()].fourier_coefficient(x.gamma2())
    });

    Ok(GramResult { points, direct, bracket })
}

/// `<L_g psi, L_g' psi>` summed per midpoint, then over midpoints in order.
fn direct_gram(psi: &OperatorField, spec: &LatticeSpec, points: &[LatticePoint]) -> Result<DMatrix<Complex64>> {
    let n = points.len();
    let elements: Vec<_> = points.iter().map(|g| spec.embed(g)).collect();
    let fgrid = psi.fgrid();
    for e in &elements {
        psi.spatial_grid().shift_of(&e.p)?;
    }
    let per_alpha: Vec<DMatrix<Complex64>> = (0..fgrid.resolution())
        .into_par_iter()
        .map(|i| {
            let mut acc = DMatrix::zeros(n, n);
            for (j, op) in psi.entries_at(i) {
                let lambda = fgrid.lambda(i, j);
                let rho = fgrid.rho(i, j);
                let moved: Vec<HSOperator> =
                    elements.iter().map(|x| op.left_translate(lambda, x)).collect::<Result<_>>()?;
                for r in 0..n {
                    for c in 0..n {
                        acc[(r, c)] += moved[r].hs_inner(&moved[c])? * rho;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = DMatrix::zeros(n, n);
    for g in &per_alpha {
        total += g;
    }
    Ok(total / Complex64::new(fgrid.resolution() as f64, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max_eigenvalue <= b_est + slack`.
    pub upper_bound_ok: bool,
    pub b_est: f64,
    pub slack: f64,
    /// Largest eigenvalue gap between the central-only Gram and each
    /// diagonal block of the full Gram.
    pub block_spectrum_gap: f64,
    /// Min and max of `||sum c_g L_g psi||^2 / ||c||^2` over random `c`;
    /// diagnostic only.
    pub synthesis_ratio: (f64, f64),
}

/// Eigenvalue summary of the truncated Gram. The lower end is reported but
/// cannot refute anything: truncation destroys the lower bound.
pub fn finite_frame_probe(
    psi: &OperatorField,
    spec: &LatticeSpec,
    r1: usize,
    r2: usize,
    b_est: f64,
    slack: f64,
    seed: u64,
) -> Result<ProbeSummary> {
    let gram = gram_oracle(psi, spec, r1, r2)?;
    probe_from_gram(&gram, r2, b_est, slack, seed)
}

pub fn probe_from_gram(gram: &GramResult, r2: usize, b_est: f64, slack: f64, seed: u64) -> Result<ProbeSummary> {
    let g = &gram.direct;
    if g.nrows() == 0 {
        return Err(Error::InvalidParameter("empty lattice ball".into()));
    }
    let eigenvalues = hermitian_eigenvalues(g);
    let min_eigenvalue = eigenvalues[0];
    let max_eigenvalue = *eigenvalues.last().unwrap();

    // the ball is ordered so each gamma_1 owns a contiguous run of 2 r2 + 1 indices
    let block = 2 * r2 + 1;
    let origin = gram.points.iter().position(LatticePoint::gamma1_is_zero).unwrap_or(0) / block * block;
    let central = hermitian_eigenvalues(&g.view((origin, origin), (block, block)).into_owned());
    let mut block_spectrum_gap = 0.0f64;
    for start in (0..g.nrows()).step_by(block) {
        let ev = hermitian_eigenvalues(&g.view((start, start), (block, block)).into_owned());
        for (a, b) in ev.iter().zip(&central) {
            block_spectrum_gap = block_spectrum_gap.max((a - b).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.nrows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..16 {
        let c = DMatrix::from_fn(n, 1, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let energy = (c.adjoint() * g * &c)[(0, 0)].re;
        let ratio = energy / c.norm_squared();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }

    Ok(ProbeSummary {
        eigenvalues,
        min_eigenvalue,
        max_eigenvalue,
        upper_bound_ok: max_eigenvalue <= b_est + slack,
        b_est,
        slack,
        block_spectrum_gap,
        synthesis_ratio: (lo, hi),
    })
}

/// `e^{2 pi i k alpha}`.
pub fn character(k: i64, alpha: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 * alpha)
}
