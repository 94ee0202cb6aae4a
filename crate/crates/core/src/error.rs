use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("representation check failed: {0}")]
    Representation(String),

    #[error("operation requires a semi-direct product group")]
    NotSemiDirect,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        /// Residual norm at every iterate, seed first.
        trace: Vec<f64>,
    },

    #[error("{condition} failed: {source}")]
    Regularity {
        condition: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("singular {which} (|det| = {det:.3e})")]
    Singular { which: &'static str, det: f64 },

    #[error("2-form block {0} is not antisymmetric")]
    NotAntisymmetric(&'static str),

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("coordinate chart singular: {0}")]
    ChartSingularity(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid stepper configuration: {0}")]
    InvalidStepper(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn regularity(condition: &'static str, source: Error) -> Self {
        Error::Regularity {
            condition,
            source: Box::new(source),
        }
    }

    pub(crate) fn at_time(t: f64, source: Error) -> Self {
        match source {
            e @ Error::AtTime { .. } => e,
            e @ Error::StepUnderflow { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
