use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input has {got} features, tree expects {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unsupported tree: {0}")]
    Unsupported(String),

    #[error("fault targets position {position} but the traversal has only {path_len} nodes")]
    FaultOutOfRange { position: usize, path_len: usize },

    #[error("glitch failed {attempts} times in a row")]
    GlitchExhausted { attempts: u64 },

    #[error("no threshold in range: feature {feature} gives the baseline label at both ends of [{low}, {high}]")]
    NoThresholdInRange { feature: usize, low: f64, high: f64 },

    #[error("oracle answered inconsistently: {0}")]
    Inconsistent(String),

    #[error("leaf identifiability violated: {0}")]
    Identifiability(String),

    #[error("extraction stalled: {0}")]
    Stalled(String),

    #[error("query budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("cannot assemble recovered paths: {0}")]
    Assembly(String),

    #[error("feature specs differ: {0}")]
    FeatureMismatch(String),

    #[error("infeasible generation spec: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 parse/validation, 3 identifiability, 4 stall/budget, 5 glitch exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension { .. }
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::FeatureMismatch(_)
            | Error::Generation(_)
            | Error::Io(_) => 2,
            Error::Unsupported(_) | Error::Identifiability(_) => 3,
            Error::Stalled(_)
            | Error::BudgetExceeded { .. }
            | Error::Inconsistent(_)
            | Error::NoThresholdInRange { .. }
            | Error::Assembly(_)
            | Error::FaultOutOfRange { .. } => 4,
            Error::GlitchExhausted { .. } => 5,
        }
    }
}
