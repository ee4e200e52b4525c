use thiserror::Error;

/// Errors raised while evaluating models, controllers and simulations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain violation at q = {q:?}{}", fmt_time(*.t))]
    DomainViolation { q: Vec<f64>, t: Option<f64> },

    #[error("mass matrix singular at q = {q:?} (condition estimate {condition:e})")]
    MassMatrixSingular { q: Vec<f64>, condition: f64 },

    #[error("matrix `{what}` is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("G^T G is not invertible at q = {q:?}")]
    SingularNormalMatrix { q: Vec<f64> },

    #[error("input matrix G is rank deficient at q = {q:?}")]
    RankDeficientG { q: Vec<f64> },

    #[error("supplied map is not a left annihilator of G: {reason}")]
    NotAnAnnihilator { reason: String },

    #[error("function evaluation returned a non-finite value")]
    EvalFailed,

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("gains are degenerate: J_c1 - R_c1 is not invertible")]
    GainsDegenerate,

    #[error("assumption {assumption} violated (max violation {violation:e})")]
    AssumptionViolated { assumption: &'static str, violation: f64 },

    #[error("energy shaping invalid: {0}")]
    ShapingInvalid(String),

    #[error("adaptive step fell below the minimum step at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("invalid disturbance schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: String,
        found: String,
    },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown controller `{0}`")]
    UnknownController(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" (t = {t})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at_time(self, time: f64) -> Self {
        match self {
            Error::DomainViolation { q, t: None } => Error::DomainViolation { q, t: Some(time) },
            other => other,
        }
    }

    pub(crate) fn dimension(field: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
