use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("packing fraction {fraction:.4} exceeds the feasibility cap {cap}")]
    Feasibility { fraction: f64, cap: f64 },

    #[error("sampling exhausted at atom {atom} after {attempts} rejected candidates")]
    SamplingExhausted { atom: usize, attempts: u64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("hypergeometric evaluation failed to converge at x = {x}")]
    Hyp2f1Convergence { x: f64 },

    #[error("quadrature missed tolerance: estimate {value:e}, error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("eigensolver failed{}", seed.map(|s| format!(" (realization seed {s})")).unwrap_or_default())]
    Eigen { seed: Option<u64> },

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("insufficient tail data: {0}")]
    InsufficientTailData(String),

    #[error("window [{lo}, {hi}) collected no level spacings")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("insufficient windows: {0}")]
    InsufficientWindows(String),

    #[error("no self-consistent solution at lambda = {lambda}")]
    NonConvergence { lambda: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
