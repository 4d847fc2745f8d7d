use thiserror::Error;

/// Every failure the simulator can report.
///
/// The variants are grouped so that the CLI can map them onto its exit-code
/// contract: configuration problems, convergence-gate failures and numerical
/// integrity violations each have their own code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Fock truncation too small: tail mass {tail:.3e} exceeds {limit:.1e} at n_fock = {n_fock}")]
    Truncation { tail: f64, limit: f64, n_fock: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("numerical integrity violated: {0}")]
    Integrity(String),

    #[error("step-size rule violated: dt = {dt:e}, bound = {bound:e}, dt*bound = {product:.4} > {limit}")]
    StepRule {
        dt: f64,
        bound: f64,
        product: f64,
        limit: f64,
    },

    #[error("trace divergence at t = {t}: |Tr rho - 1| = {error:.3e} > {tolerance:.1e}")]
    TraceDivergence { t: f64, error: f64, tolerance: f64 },

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("convergence gate failed: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParam(_) => 2,
            Error::Convergence(_) => 3,
            Error::Integrity(_)
            | Error::TraceDivergence { .. }
            | Error::StepRule { .. }
            | Error::Truncation { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
