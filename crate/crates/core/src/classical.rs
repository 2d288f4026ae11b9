//! Abelian brackets on the line: the shift bracket of a periodized spectrum
//! and the Gabor bracket built from the Zak transform.
//!
//! Conventions: `T_k f(y) = f(y - k)`, `M_l f(y) = e^{2 pi i l y} f(y)`,
//! `Z f(x, xi) = sum_k e^{-2 pi i k xi} f(x - k)`. With these,
//! `Z f(x + 1, xi) = e^{-2 pi i xi} Z f(x, xi)` and
//! `Z(M_l T_k f) = e^{2 pi i (l x + k xi)} Z f`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples `xi = -L + s / R` covering `[-L, L + 1)`: `R` per unit cell,
/// `L` cells of periodization on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineGrid {
    resolution: usize,
    radius: usize,
}

impl LineGrid {
    pub fn new(resolution: usize, radius: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!("line resolution must be at least 2, got {resolution}")));
        }
        if radius < 1 {
            return Err(Error::InvalidParameter("truncation radius must be at least 1".into()));
        }
        Ok(Self { resolution, radius })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.resolution * (2 * self.radius + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, s: usize) -> f64 {
        s as f64 / self.resolution as f64 - self.radius as f64
    }

    /// Points `xi_s = s / R` of the unit cell.
    pub fn cell_point(&self, s: usize) -> f64 {
        s as f64 / self.resolution as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> Complex64 + Sync) -> SampledLine {
        let values = (0..self.len()).into_par_iter().map(|s| f(self.point(s))).collect();
        SampledLine { grid: *self, values }
    }
}

/// A frequency-domain function sampled on a [`LineGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLine {
    grid: LineGrid,
    values: Vec<Complex64>,
}

impl SampledLine {
    pub fn new(grid: LineGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> LineGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// `sum_{|l| <= L} phi(xi_s + l) conj(psi(xi_s + l))` at `xi_s = s / R`.
pub fn shift_bracket(phi: &SampledLine, psi: &SampledLine, s: usize) -> Result<Complex64> {
    if phi.grid != psi.grid {
        return Err(Error::GridMismatch("spectra sampled on different line grids".into()));
    }
    let g = phi.grid;
    if s >= g.resolution {
        return Err(Error::InvalidParameter(format!("cell index {s} out of range")));
    }
    Ok((0..=2 * g.radius)
        .map(|cell| {
            let idx = cell * g.resolution + s;
            phi.values[idx] * psi.values[idx].conj()
        })
        .sum())
}

/// Shift bracket of closed-form spectra at any `xi`, over `|l| <= radius`.
pub fn shift_bracket_at(
    phi: impl Fn(f64) -> Complex64,
    psi: impl Fn(f64) -> Complex64,
    xi: f64,
    radius: usize,
) -> Complex64 {
    let r = radius as i64;
    (-r..=r).map(|l| phi(xi + l as f64) * psi(xi + l as f64).conj()).sum()
}

pub fn shift_bracket_profile(phi: &SampledLine, psi: &SampledLine) -> Result<Vec<Complex64>> {
    (0..phi.grid.resolution).into_par_iter().map(|s| shift_bracket(phi, psi, s)).collect()
}

/// `int_0^1 b(xi) e^{-2 pi i k xi} d xi` by the equispaced rule.
pub fn periodic_coefficient(profile: &[Complex64], k: i64) -> Complex64 {
    let r = profile.len() as f64;
    profile
        .iter()
        .enumerate()
        .map(|(s, v)| v * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * s as f64 / r))
        .sum::<Complex64>()
        / r
}

/// Magnitude below which a dropped periodization term counts as zero.
pub const ZAK_TAIL_TOL: f64 = 1e-12;

/// Truncated Zak transform over `|k| <= radius`.
///
/// Fails when the first dropped terms exceed [`ZAK_TAIL_TOL`].
pub fn zak_transform(psi: impl Fn(f64) -> Complex64, x: f64, xi: f64, radius: usize) -> Result<Complex64> {
    let r = radius as i64;
    let tail = psi(x - (r + 1) as f64).norm() + psi(x + (r + 1) as f64).norm();
    if tail > ZAK_TAIL_TOL {
        return Err(Error::Truncation { radius, tail });
    }
    Ok((-r..=r)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * xi) * psi(x - k as f64))
        .sum())
}

/// `Z phi(x, xi) conj(Z psi(x, xi))`.
pub fn gabor_bracket(
    phi: impl Fn(f64) -> Complex64,
    psi: impl Fn(f64) -> Complex64,
    x: f64,
    xi: f64,
    radius: usize,
) -> Result<Complex64> {
    Ok(zak_transform(phi, x, xi, radius)? * zak_transform(psi, x, xi, radius)?.conj())
}

/// Gabor bracket sampled at `(x_a, xi_b) = (a / R, b / R)` on `[0, 1)^2`,
/// row-major in `a`.
pub fn gabor_bracket_grid<F, G>(phi: F, psi: G, resolution: usize, radius: usize) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Complex64 + Sync,
    G: Fn(f64) -> Complex64 + Sync,
{
    let r = resolution as f64;
    (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / resolution, idx % resolution);
            gabor_bracket(&phi, &psi, a as f64 / r, b as f64 / r, radius)
        })
        .collect()
}

/// `int int_{[0,1)^2} G(x, xi) e^{-2 pi i (k xi + l x)}`, which equals
/// `<phi, M_l T_k psi>` when `G` is the Gabor bracket of `(phi, psi)`.
pub fn gabor_coefficient(grid_values: &[Complex64], resolution: usize, k: i64, l: i64) -> Complex64 {
    let r = resolution as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..resolution {
        for b in 0..resolution {
            let phase = -2.0 * PI * (k as f64 * b as f64 + l as f64 * a as f64) / r;
            acc += grid_values[a * resolution + b] * Complex64::from_polar(1.0, phase);
        }
    }
    acc / (r * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss(sigma: f64, shift: f64, freq: f64) -> impl Fn(f64) -> Complex64 + Sync + Copy {
        move |x: f64| {
            let amp = 2f64.powf(0.25) / sigma.sqrt();
            Complex64::from_polar(amp * (-PI * (x - shift).powi(2) / (sigma * sigma)).exp(), 2.0 * PI * freq * x)
        }
    }

    fn unit_box(x: f64) -> Complex64 {
        if (0.0..1.0).contains(&x) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    #[test]
    fn line_grid_validation() {
        assert!(LineGrid::new(1, 3).is_err());
        assert!(LineGrid::new(4, 0).is_err());
        let g = LineGrid::new(4, 2).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.point(0), -2.0);
        assert_eq!(g.point(9), 0.25);
        assert!(SampledLine::new(g, vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn box_spectrum_has_unit_shift_bracket() {
        let g = LineGrid::new(64, 4).unwrap();
        let b = g.sample(unit_box);
        for v in shift_bracket_profile(&b, &b).unwrap() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
        }
        let z = g.sample(|_| Complex64::new(0.0, 0.0));
        assert!(shift_bracket_profile(&z, &b).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn gaussian_shift_bracket_coefficients() {
        // spectrum exp(-pi sigma^2 xi^2): Gram entries exp(-pi k^2 / (2 sigma^2)) / (sigma sqrt 2)
        let sigma = 1.3;
        let g = LineGrid::new(64, 8).unwrap();
        let psi = g.sample(|xi| Complex64::new((-PI * sigma * sigma * xi * xi).exp(), 0.0));
        let profile = shift_bracket_profile(&psi, &psi).unwrap();
        for k in -4i64..=4 {
            let expected = (-PI * (k * k) as f64 / (2.0 * sigma * sigma)).exp() / (sigma * 2f64.sqrt());
            let got = periodic_coefficient(&profile, k);
            assert!((got - Complex64::new(expected, 0.0)).norm() < 1e-6, "k={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn zak_of_box_and_zero() {
        for x in [0.0, 0.3, 0.99] {
            for xi in [0.0, 0.4, 0.8] {
                let z = zak_transform(unit_box, x, xi, 2).unwrap();
                assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
                let gb = gabor_bracket(unit_box, unit_box, x, xi, 2).unwrap();
                assert!((gb - Complex64::new(1.0, 0.0)).norm() < 1e-10);
                assert_eq!(zak_transform(|_| Complex64::new(0.0, 0.0), x, xi, 1).unwrap(), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn zak_quasi_periodicity_sign() {
        let psi = gauss(0.9, 0.2, 0.3);
        for (x, xi) in [(0.1, 0.2), (0.7, 0.45), (-0.3, 0.9)] {
            let z0 = zak_transform(psi, x, xi, 8).unwrap();
            let z1 = zak_transform(psi, x + 1.0, xi, 8).unwrap();
            let minus = Complex64::from_polar(1.0, -2.0 * PI * xi) * z0;
            assert!((z1 - minus).norm() < 1e-10);
            let plus = Complex64::from_polar(1.0, 2.0 * PI * xi) * z0;
            assert!((z1 - plus).norm() > 1e-3);
            let zp = zak_transform(psi, x, xi + 1.0, 8).unwrap();
            assert!((zp.norm() - z0.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let wide = gauss(3.0, 0.0, 0.0);
        assert!(matches!(zak_transform(wide, 0.2, 0.1, 2), Err(Error::Truncation { radius: 2, .. })));
        assert!(zak_transform(wide, 0.2, 0.1, 20).is_ok());
    }

    #[test]
    fn gabor_coefficients_match_direct_inner_products() {
        let phi = gauss(1.0, 0.3, 0.0);
        let psi = gauss(0.8, 0.0, 0.2);
        let res = 64;
        let grid = gabor_bracket_grid(phi, psi, res, 10).unwrap();
        // direct <phi, M_l T_k psi> on a fine line grid
        let step = 1.0 / 256.0;
        let nodes: Vec<f64> = (-(12 * 256)..(12 * 256)).map(|n| n as f64 * step).collect();
        for k in -3i64..=3 {
            for l in -3i64..=3 {
                let direct: Complex64 = nodes
                    .iter()
                    .map(|&y| {
                        let mlt = Complex64::from_polar(1.0, 2.0 * PI * l as f64 * y) * psi(y - k as f64);
                        phi(y) * mlt.conj()
                    })
                    .sum::<Complex64>()
                    * step;
                let coeff = gabor_coefficient(&grid, res, k, l);
                assert!((coeff - direct).norm() < 1e-6, "k={k} l={l}: {coeff} vs {direct}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gabor_bracket_cauchy_schwarz_and_periodicity(x in -1.0f64..1.0, xi in 0.0f64..1.0, s1 in 0.5f64..1.5, s2 in 0.5f64..1.5) {
            let phi = gauss(s1, 0.1, 0.4);
            let psi = gauss(s2, -0.2, 0.0);
            let fp = gabor_bracket(phi, psi, x, xi, 10).unwrap();
            let ff = gabor_bracket(phi, phi, x, xi, 10).unwrap();
            let pp = gabor_bracket(psi, psi, x, xi, 10).unwrap();
            prop_assert!(ff.re >= 0.0 && ff.im.abs() < 1e-12);
            prop_assert!(fp.norm_sqr() <= ff.re * pp.re + 1e-12);
            let shifted = gabor_bracket(phi, psi, x + 1.0, xi + 1.0, 10).unwrap();
            prop_assert!((shifted - fp).norm() < 1e-10);
        }

        #[test]
        fn shift_bracket_cauchy_schwarz(s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, f in -1.0f64..1.0) {
            let g = LineGrid::new(16, 8).unwrap();
            let a = g.sample(gauss(s1, f, 0.5));
            let b = g.sample(gauss(s2, 0.0, 0.0));
            let ab = shift_bracket_profile(&a, &b).unwrap();
            let aa = shift_bracket_profile(&a, &a).unwrap();
            let bb = shift_bracket_profile(&b, &b).unwrap();
            for s in 0..16 {
                prop_assert!(ab[s].norm_sqr() <= aa[s].re * bb[s].re + 1e-12);
                let ba = shift_bracket(&b, &a, s).unwrap();
                prop_assert!((ba - ab[s].conj()).norm() < 1e-14);
                let direct = shift_bracket_at(gauss(s1, f, 0.5), gauss(s2, 0.0, 0.0), g.cell_point(s), 8);
                prop_assert!((direct - ab[s]).norm() < 1e-14);
            }
            let xi = 0.37;
            let p0 = shift_bracket_at(gauss(s1, f, 0.5), gauss(s2, 0.0, 0.0), xi, 8);
            let p1 = shift_bracket_at(gauss(s1, f, 0.5), gauss(s2, 0.0, 0.0), xi + 1.0, 8);
            prop_assert!((p0 - p1).norm() < 1e-10);
        }
    }
}
