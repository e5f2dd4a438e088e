use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("characteristic function evaluated at mu = {mu} next to a pole; evaluate inside an open bracket only")]
    NearPole { mu: f64 },

    #[error("root {k} did not converge in bracket ({lo}, {hi}); last iterate {last}")]
    NoConvergence { k: usize, lo: f64, hi: f64, last: f64 },

    #[error("mesh mismatch: {left} vs {right} points per unit interval")]
    MeshMismatch { left: usize, right: usize },

    #[error("initial data violates {condition} by {violation:e}")]
    InconsistentData { condition: &'static str, violation: f64 },

    #[error(
        "Gram matrix condition estimate {estimate:.3e} exceeds the cap {cap:.3e}; \
         reduce N, lengthen T or switch to extended precision"
    )]
    IllConditioned { estimate: f64, cap: f64 },

    #[error("Gram factorization lost positive definiteness at pivot {pivot}; reduce N or switch to extended precision")]
    NotPositiveDefinite { pivot: usize },

    #[error("eps = {eps} is not resolved by {mesh_n} points per unit interval: {reason}")]
    EpsilonUnresolved { eps: f64, mesh_n: usize, reason: String },

    #[error("linear solve failed at time step {step}")]
    SolveFailed { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
