use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("translation {0} is not a multiple of the grid spacing")]
    OffGridTranslation(f64),

    #[error("support leaves the grid domain: {0}")]
    SupportLeak(String),

    #[error("representation parameter must be nonzero")]
    ZeroFrequency,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("frequency {k} exceeds the resolvable cap {cap} (alpha resolution {m})")]
    Nyquist { k: i64, cap: i64, m: usize },

    #[error("truncation radius {radius} too small: tail magnitude {tail:e}")]
    Truncation { radius: usize, tail: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors caused by incompatible grids or translations, as opposed
    /// to malformed inputs.
    pub fn is_grid_incompatibility(&self) -> bool {
        matches!(
            self,
            Error::OffGridTranslation(_)
                | Error::SupportLeak(_)
                | Error::GridMismatch(_)
                | Error::Nyquist { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
