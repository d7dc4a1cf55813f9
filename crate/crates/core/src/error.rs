use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no positive root of the Laplace exponent on (0, {theta_max})")]
    NoPositiveRoot { theta_max: f64 },

    #[error("exponential tilt by {theta} is infinite (moment generating function diverges)")]
    InfiniteTilt { theta: f64 },

    #[error("path within safe depth of the barrier at horizon {horizon} (level {level}, barrier {barrier}); extend the horizon")]
    HorizonAmbiguous { horizon: f64, level: f64, barrier: f64 },

    #[error("divergent integral at (a, b) = ({a}, {b})")]
    DivergentIntegral { a: f64, b: f64 },

    #[error("root bracketing failed: {0}")]
    RootBracketFailure(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("no ruin events among {paths} simulated paths")]
    NoRuinEvents { paths: u64 },

    #[error("empty comparison window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
