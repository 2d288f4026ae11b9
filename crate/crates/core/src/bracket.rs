//! The bracket map `[F, G](alpha) = sum_j <F(alpha + j), G(alpha + j)>_HS rho(alpha + j)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{left_translate, OperatorField};
use crate::group::GroupElement;

/// Bracket values at every midpoint `alpha_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketProfile {
    pub m: usize,
    pub values: Vec<Complex64>,
}

impl BracketProfile {
    pub fn alpha(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.m as f64
    }

    /// Midpoint-rule integral `(1/M) sum_i values_i`.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.m as f64
    }

    /// `(1/M) sum_i values_i e^{-2 pi i k alpha_i}`.
    pub fn fourier_coefficient(&self, k: i64) -> Complex64 {
        let sum: Complex64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * self.alpha(i)))
            .sum();
        sum / self.m as f64
    }

    pub fn l1_mean(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() / self.m as f64
    }

    pub fn max_re(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Bracket at midpoint `i`; sesquilinear in `(F, G)`.
pub fn bracket(f: &OperatorField, g: &OperatorField, i: usize) -> Result<Complex64> {
    f.check_compatible(g)?;
    if i >= f.fgrid().resolution() {
        return Err(Error::InvalidParameter(format!("alpha index {i} out of range")));
    }
    f.band_sum(g, i)
}

/// Bracket at every midpoint; parallel over `alpha`, serial ascending `j`.
pub fn bracket_profile(f: &OperatorField, g: &OperatorField) -> Result<BracketProfile> {
    f.check_compatible(g)?;
    let m = f.fgrid().resolution();
    let values = (0..m).into_par_iter().map(|i| f.band_sum(g, i)).collect::<Result<_>>()?;
    Ok(BracketProfile { m, values })
}

/// `|[F, L_{(0,0,k)} G](alpha_i) - e^{-2 pi i k alpha_i} [F, G](alpha_i)|`.
pub fn modulation_check(f: &OperatorField, g: &OperatorField, k: i64, i: usize) -> Result<f64> {
    let moved = left_translate(g, &GroupElement::central(f.spatial_grid().dim(), k as f64))?;
    let lhs = bracket(f, &moved, i)?;
    let alpha = f.fgrid().alpha(i);
    let rhs = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * alpha) * bracket(f, g, i)?;
    Ok((lhs - rhs).norm())
}

/// `|[L_x F, L_x' G](alpha_i) - [F, L_{x^{-1} x'} G](alpha_i)|`.
pub fn covariance_check(
    f: &OperatorField,
    g: &OperatorField,
    x: &GroupElement,
    x_prime: &GroupElement,
    i: usize,
) -> Result<f64> {
    let lhs = bracket(&left_translate(f, x)?, &left_translate(g, x_prime)?, i)?;
    let reduced = x.inverse().compose(x_prime)?;
    let rhs = bracket(f, &left_translate(g, &reduced)?, i)?;
    Ok((lhs - rhs).norm())
}
