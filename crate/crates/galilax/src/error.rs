use thiserror::Error;

/// Error type shared by every module of the crate.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar so
/// the error type stays non-generic and cheap to thread through APIs.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimensions, masses, parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two bodies closer than the collision threshold of a potential that is
    /// singular at zero separation. `time` is populated when the failure
    /// occurs inside an integration.
    #[error("near-collision of bodies {a} and {b} (separation {separation:.3e}, threshold {threshold:.3e}){}", fmt_time(.time))]
    Singularity {
        a: usize,
        b: usize,
        separation: f64,
        threshold: f64,
        time: Option<f64>,
    },

    /// The adaptive integrator could not proceed (step underflow or step
    /// budget exhausted).
    #[error("integration failure at t = {time:.6e}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    /// Rank decisions at the configured tolerance contradict each other
    /// (e.g. the angular momentum matrix has odd numerical rank).
    #[error("tolerance inconsistency: {0}")]
    ToleranceInconsistency(String),

    /// A matrix factorization failed to meet its residual contract.
    #[error("decomposition failure: {reason} (residual {residual:.3e})")]
    DecompositionFailure { reason: String, residual: f64 },

    /// A signature or case outside the implemented families. Never a silent
    /// guess: callers see exactly what was not classified.
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
}

fn fmt_time(time: &Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t = {t:.6e}"),
        None => String::new(),
    }
}

impl Error {
    /// Stamp a time onto a singularity raised during integration.
    pub(crate) fn with_time(self, t: f64) -> Self {
        match self {
            Error::Singularity {
                a,
                b,
                separation,
                threshold,
                time: None,
            } => Error::Singularity {
                a,
                b,
                separation,
                threshold,
                time: Some(t),
            },
            other => other,
        }
    }
}
