//! JSON field descriptions and their materialization into fields.
//!
//! ```json
//! {"window": {"kind": "box", "support": [0, 1]}, "epsilon": 0.25,
//!  "a": 4, "b": 1, "alpha_res": 256, "band": [0, 0],
//!  "gamma1_radius": 1, "gamma2_radius": 3, "grid": {"h": 0.015625},
//!  "entries": "rank_one_gabor"}
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{FrequencyGrid, OperatorField, PlancherelWeight};
use crate::gabor::{band_field, default_grid, orthonormal_fixture};
use crate::group::LatticeSpec;
use crate::rep::{HSOperator, SampleValue, SpatialGrid, Window, WindowVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// `u_lambda ⊗ u_lambda` on `eps < lambda <= 1`.
    RankOneGabor,
    Zero,
    /// Orthonormal translates; ignores window, epsilon and lattice.
    OrthonormalFixture,
    /// Seeded random rank-one entries supported in `[0, 1/eps)^d`.
    RandomRankOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitEntry {
    pub i: usize,
    #[serde(default)]
    pub j: i64,
    pub left: Vec<SampleValue>,
    pub right: Vec<SampleValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntriesSpec {
    Kind(EntryKind),
    Explicit(Vec<ExplicitEntry>),
}

/// Spatial grid: spacing alone selects the default domain; `lo` and `n`
/// together pin it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

fn default_d() -> usize {
    1
}
fn default_window() -> Window {
    Window::unit_box()
}
fn default_epsilon() -> f64 {
    0.25
}
fn default_a() -> f64 {
    4.0
}
fn default_b() -> f64 {
    1.0
}
fn default_alpha_res() -> usize {
    256
}
fn default_band() -> [i64; 2] {
    [0, 0]
}
fn default_grid_spec() -> GridSpec {
    GridSpec { h: 1.0 / 64.0, lo: None, n: None }
}
fn default_entries() -> EntriesSpec {
    EntriesSpec::Kind(EntryKind::RankOneGabor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_window")]
    pub window: Window,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Scalar lattice `a Z^d x b Z^d x Z`, unless `lattice` is given.
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default = "default_alpha_res")]
    pub alpha_res: usize,
    #[serde(default = "default_band")]
    pub band: [i64; 2],
    #[serde(default)]
    pub gamma1_radius: usize,
    #[serde(default)]
    pub gamma2_radius: usize,
    #[serde(default = "default_grid_spec")]
    pub grid: GridSpec,
    #[serde(default = "default_entries")]
    pub entries: EntriesSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl FieldSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("malformed field spec: {e}")))
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("field spec serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        let spec = match &self.lattice {
            Some(l) => l.clone(),
            None => LatticeSpec::scalar(self.d, self.a, self.b)?,
        };
        if spec.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: spec.dim() });
        }
        Ok(spec)
    }

    fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.alpha_res, self.band[0], self.band[1], PlancherelWeight::Power(self.d as u32))
    }

    fn spatial_grid(&self, spec: &LatticeSpec) -> Result<Arc<SpatialGrid>> {
        match (&self.grid.lo, self.grid.n) {
            (Some(lo), Some(n)) => Ok(Arc::new(SpatialGrid::new(self.d, lo.clone(), self.grid.h, n)?)),
            (None, None) => default_grid(&self.window, self.epsilon, spec, self.grid.h, self.gamma1_radius),
            _ => Err(Error::InvalidParameter("grid needs both `lo` and `n`, or neither".into())),
        }
    }

    /// Materializes the field and lattice described by this spec.
    pub fn build(&self) -> Result<BuiltField> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if let EntriesSpec::Kind(EntryKind::OrthonormalFixture) = self.entries {
            if self.d != 1 || self.band != [0, 0] {
                return Err(Error::InvalidParameter("the orthonormal fixture is one-dimensional with band [0, 0]".into()));
            }
            let (field, spec) = orthonormal_fixture(self.alpha_res, self.gamma1_radius)?;
            return Ok(BuiltField { field, spec });
        }
        let spec = self.lattice_spec()?;
        let grid = self.spatial_grid(&spec)?;
        let fgrid = self.frequency_grid()?;
        let field = match &self.entries {
            EntriesSpec::Kind(EntryKind::RankOneGabor) => band_field(&self.window, self.epsilon, &fgrid, &grid)?,
            EntriesSpec::Kind(EntryKind::Zero) => OperatorField::zero(fgrid, grid),
            EntriesSpec::Kind(EntryKind::RandomRankOne) => self.random_field(fgrid, grid)?,
            EntriesSpec::Kind(EntryKind::OrthonormalFixture) => unreachable!("handled above"),
            EntriesSpec::Explicit(list) => {
                let mut field = OperatorField::zero(fgrid, Arc::clone(&grid));
                for e in list {
                    let left = samples(&grid, &e.left)?;
                    let right = samples(&grid, &e.right)?;
                    field.insert(e.i, e.j, HSOperator::rank_one(left, right)?)?;
                }
                field
            }
        };
        Ok(BuiltField { field, spec })
    }

    fn random_field(&self, fgrid: FrequencyGrid, grid: Arc<SpatialGrid>) -> Result<OperatorField> {
        let hull: Vec<bool> = (0..grid.len())
            .map(|i| grid.node(i).iter().all(|v| (0.0..1.0 / self.epsilon).contains(v)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng| {
            let values = hull
                .iter()
                .map(|&on| {
                    if on {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            WindowVector::new(Arc::clone(&grid), values)
        };
        let mut field = OperatorField::zero(fgrid.clone(), Arc::clone(&grid));
        let (lo, hi) = fgrid.band();
        for i in 0..fgrid.resolution() {
            for j in lo..=hi {
                let op = HSOperator::rank_one(draw(&mut rng)?, draw(&mut rng)?)?;
                field.insert(i, j, op)?;
            }
        }
        Ok(field)
    }
}

fn samples(grid: &Arc<SpatialGrid>, values: &[SampleValue]) -> Result<WindowVector> {
    WindowVector::new(Arc::clone(grid), values.iter().map(|&v| v.into()).collect())
}

#[derive(Debug, Clone)]
pub struct BuiltField {
    pub field: OperatorField,
    pub spec: LatticeSpec,
}

impl BuiltField {
    /// One-line description of the spatial and frequency grids.
    pub fn grid_summary(&self) -> String {
        let g = self.field.spatial_grid();
        let f = self.field.fgrid();
        let (j_lo, j_hi) = f.band();
        format!(
            "d={} h={} lo={:?} n_axis={} M={} band=[{},{}] weight={}",
            g.dim(),
            g.spacing(),
            g.lo(),
            g.n_axis(),
            f.resolution(),
            j_lo,
            j_hi,
            f.weight().describe()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::bracket_profile;

    #[test]
    fn defaults_describe_the_band_limited_example() {
        let s = FieldSpec::default();
        assert_eq!(s.alpha_res, 256);
        assert_eq!(s.entries, EntriesSpec::Kind(EntryKind::RankOneGabor));
        let parsed = FieldSpec::from_json(r#"{"window":{"kind":"box","support":[0,1]},"epsilon":0.25,"a":4,"b":1,"alpha_res":256,"gamma1_radius":0,"gamma2_radius":0}"#).unwrap();
        assert_eq!(parsed, s);
        assert_eq!(parsed.sha256(), s.sha256());
        assert_eq!(s.sha256().len(), 64);
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = FieldSpec::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(FieldSpec::from_json("{").is_err());
        assert!(FieldSpec::from_json(r#"{"epsilon":"x"}"#).is_err());
        assert!(FieldSpec::from_json(r#"{"unknown":1}"#).is_err());
        assert!(FieldSpec::from_json(r#"{"entries":"nope"}"#).is_err());
        let half = FieldSpec::from_json(r#"{"grid":{"h":0.1,"n":4}}"#).unwrap();
        assert!(half.build().is_err());
    }

    #[test]
    fn builds_each_entry_kind() {
        let base = r#""alpha_res":16,"grid":{"h":0.125}"#;
        let zero = FieldSpec::from_json(&format!(r#"{{{base},"entries":"zero"}}"#)).unwrap().build().unwrap();
        assert!(zero.field.is_zero());
        let gabor = FieldSpec::from_json(&format!("{{{base}}}")).unwrap().build().unwrap();
        assert_eq!(gabor.field.entries().count(), 12);
        let random = FieldSpec::from_json(&format!(r#"{{{base},"entries":"random_rank_one","seed":5}}"#)).unwrap();
        let r1 = random.build().unwrap();
        let r2 = random.build().unwrap();
        assert_eq!(r1.field, r2.field);
        assert_eq!(r1.field.entries().count(), 16);
        let fixture = FieldSpec::from_json(r#"{"alpha_res":8,"entries":"orthonormal_fixture","gamma1_radius":1}"#).unwrap().build().unwrap();
        let p = bracket_profile(&fixture.field, &fixture.field).unwrap();
        assert!(p.values.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        assert!(fixture.grid_summary().contains("M=8"));
    }

    #[test]
    fn explicit_entries_on_a_pinned_grid() {
        let text = r#"{"alpha_res":4,"grid":{"h":0.5,"lo":[0.25],"n":4},
            "entries":[{"i":1,"left":[1,0,0,0],"right":[[0,1],0,0,0]}]}"#;
        let built = FieldSpec::from_json(text).unwrap().build().unwrap();
        let op = built.field.entry(1, 0).unwrap();
        assert!((op.hs_norm_sq() - 0.25).abs() < 1e-15);
        let bad = r#"{"alpha_res":4,"grid":{"h":0.5,"lo":[0.25],"n":4},"entries":[{"i":9,"left":[1,0,0,0],"right":[1,0,0,0]}]}"#;
        assert!(FieldSpec::from_json(bad).unwrap().build().is_err());
    }

    #[test]
    fn general_lattice_in_json() {
        let text = r#"{"lattice":{"d":1,"A":[[2]],"B":[[0.5]]},"alpha_res":8,"grid":{"h":0.25}}"#;
        let s = FieldSpec::from_json(text).unwrap();
        let built = s.build().unwrap();
        assert_eq!(built.spec.a(), &[vec![2.0]]);
    }
}
