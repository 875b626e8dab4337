use thiserror::Error;

/// Failure modes of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: smallest singular value {sigma_min:e} is not above {tol:e}")]
    SingularMatrix { sigma_min: f64, tol: f64 },

    #[error("singular gauge at {point:?}: smallest singular value {sigma_min:e}")]
    SingularGauge { point: Vec<f64>, sigma_min: f64 },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("invalid reparametrization: {0}")]
    InvalidReparametrization(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("inconsistent bundle: {0}")]
    InconsistentBundle(String),

    #[error("not a rotation: {0}")]
    NotARotation(String),

    #[error("composition error: {0}")]
    Composition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
