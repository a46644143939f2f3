use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time {t} exceeds the flow horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("the cemetery state has no dynamics")]
    CemeteryInput,

    #[error(
        "quadrature did not reach tolerance {tol:e} within {evaluations} evaluations \
         (error estimate {estimate:e})"
    )]
    QuadratureFailure {
        tol: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("jump-time inversion stalled: {0}")]
    InversionFailure(String),

    #[error("kernel cannot act on state {0}")]
    UnsupportedState(String),

    #[error("no closed form available: {0}")]
    MissingOracle(String),

    #[error("density kernel has no tilt envelope for this function")]
    MissingEnvelope,

    #[error("tilt envelope violated: h(z) = {value} exceeds the bound {bound}")]
    EnvelopeViolated { value: f64, bound: f64 },

    #[error("Qh vanishes at {0}")]
    ZeroQh(String),

    #[error("jump value {0} <= -1 in the Stieltjes exponential")]
    DegenerateJump(f64),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("invalid hazard law: {0}")]
    BadHazard(String),

    #[error("invalid stochastic matrix: {0}")]
    BadStochasticMatrix(String),

    #[error("invalid parameters: {0}")]
    BadParameters(String),

    #[error("ODE oracle did not converge: {0}")]
    StiffnessFailure(String),

    #[error("every replication exploded")]
    AllExploded,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
