use thiserror::Error;

/// Errors raised by the state, bath, dynamics and entropy layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state parameters violate legitimacy constraints: {0}")]
    ConstraintViolation(String),

    #[error("non-physical covariance matrix: {0}")]
    NonPhysical(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("time {t} outside table range [0, {t_max}]")]
    Range { t: f64, t_max: f64 },

    #[error("integration became unstable: {0}")]
    Stability(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular diffusion at t = {t}: |Δ| = {delta:e}")]
    Singularity { t: f64, delta: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("tail criterion unmet: |Π(t_end)| = {last:e} exceeds {tol:e}")]
    Tail { last: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
