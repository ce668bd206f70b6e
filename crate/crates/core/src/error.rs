use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid matrix `{matrix}`: {message}")]
    Validation { matrix: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("direction is not a unit vector (|xi| = {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("not hyperbolic: root {re} + {im}i is not real")]
    NotHyperbolic { re: f64, im: f64 },

    #[error("not hyperbolic: dispersion root {root} vanishes")]
    VanishingRoot { root: f64 },

    #[error("leading matrix is near-singular (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error(
        "semi-strict hyperbolicity violated: root {root} has multiplicity {multiplicity} \
         but kernel dimension {kernel_dim}"
    )]
    KernelDimension {
        root: f64,
        multiplicity: usize,
        kernel_dim: usize,
    },

    #[error("degenerate covector: xi0 and xi vanish simultaneously")]
    DegenerateCovector,

    #[error("mode tracking lost: {0}")]
    TrackingLoss(String),

    #[error("structure check failed: {quantity} = {value:e} exceeds {tolerance:e}")]
    StructureViolation {
        quantity: String,
        value: f64,
        tolerance: f64,
    },

    #[error("linear degeneracy violated: indicator {indicator:e} exceeds {threshold:e}")]
    DegeneracyViolation { indicator: f64, threshold: f64 },

    #[error("unknown model `{name}`; available: {available}")]
    UnknownModel { name: String, available: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
