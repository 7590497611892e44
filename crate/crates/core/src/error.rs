use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("price vector is not in the open simplex interior: {0}")]
    NotInterior(String),

    #[error("expected {expected} goods, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expected a {expected} price point, got a {found} one")]
    FrameMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid consumer: {0}")]
    InvalidConsumer(String),

    #[error("invalid economy: {0}")]
    InvalidEconomy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scale function evaluated to {value} (must be strictly positive)")]
    NonPositiveScale { value: f64 },

    #[error("target is not tangent to the price sphere: |p.z| = {residual:e}")]
    NonTangent { residual: f64 },

    #[error("positive spanning failed at p = {price:?}: {reason}")]
    PositiveSpanning { price: Vec<f64>, reason: String },

    #[error("decomposition residual {residual:e} exceeds tolerance")]
    ReconstructionFailed { residual: f64 },

    #[error("interpolated multiplier of consumer {consumer} dips to {value:e} near chart point {at:?}")]
    GridTooCoarse {
        consumer: usize,
        value: f64,
        at: Vec<f64>,
    },

    #[error("finite-difference Jacobian is ill-conditioned (step discrepancy {discrepancy:e})")]
    IllConditioned { discrepancy: f64 },

    #[error("field evaluated to a non-finite value")]
    NonFinite,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that indicate a broken internal invariant rather
    /// than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::PositiveSpanning { .. } | Error::ReconstructionFailed { .. }
        )
    }
}
