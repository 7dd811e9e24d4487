use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("no positive constant state: competition is neither weak nor strong")]
    Regime,

    #[error("degenerate kinetics: b2*c1 and b1*c2 coincide ({0:e})")]
    Degenerate(f64),

    #[error("argument {value} outside the domain of {what} (needs {bound})")]
    Domain {
        what: &'static str,
        value: f64,
        bound: String,
    },

    #[error("rates alpha={alpha}, beta={beta} violate the band eta={eta}")]
    Band { eta: f64, alpha: f64, beta: f64 },

    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("iterate left the nonnegative cone (min {min:e})")]
    NegativeState { min: f64 },

    #[error("time march blew up at t={t} (value {value:e} above ceiling {ceiling:e})")]
    BlowUp { t: f64, value: f64, ceiling: f64 },

    #[error("tau collapsed to {tau:e}: complete segregation regime")]
    TauCollapse { tau: f64 },

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("no threshold: {0}")]
    NoThreshold(String),

    #[error("bracket [{lo}, {hi}] does not contain a sign change")]
    Bracket { lo: f64, hi: f64 },

    #[error("flux mismatch does not change sign on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("tiling assembly failed: {0}")]
    Assembly(String),

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("step {step} failed: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config key `{key}`: {msg}")]
    Validation { key: String, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Strips [`Error::Step`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
