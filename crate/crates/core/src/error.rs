use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("projection onto pocket {pocket} boundary is ambiguous at this point")]
    AmbiguousProjection { pocket: usize },

    #[error("point is not on the boundary of pocket {pocket} (off by {offset:e})")]
    NotOnBoundary { pocket: usize, offset: f64 },

    #[error("shell width {delta} exceeds the admissible bound {bound}")]
    DeltaTooLarge { delta: f64, bound: f64 },

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{timeouts} of {paths} paths timed out (limit 1%)")]
    TimeoutDominated { timeouts: usize, paths: usize },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("pocket coupling matrix is singular")]
    SingularCouplingMatrix,

    #[error("flux stencil for pocket {pocket} reaches outside the solution domain")]
    InsufficientStencil { pocket: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
