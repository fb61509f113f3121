use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: error estimate {error_estimate:e}, tail bound {tail_bound:e}, tolerance {tolerance:e}")]
    QuadratureFailure {
        error_estimate: f64,
        tail_bound: f64,
        tolerance: f64,
    },

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    /// The boundary potential is not strictly ω-plurisubharmonic.
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("non-finite value at {location}")]
    NonFinite { location: String },

    #[error("envelope sweep did not converge after {sweeps} sweeps (last update {final_update:e})")]
    NonConvergence { sweeps: usize, final_update: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("no admissible cutoff profile found (best margin {best_margin:e})")]
    ConstructiveFailure { best_margin: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure { .. }
                | Error::NonConvergence { .. }
                | Error::InternalConsistency(_)
                | Error::ConstructiveFailure { .. }
        )
    }
}
