use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    /// The interaction coefficient lies outside the range an operation supports.
    #[error("r = {r} is outside the supported domain {domain}")]
    Domain { r: f64, domain: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("player index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A zero-variance prior component carries a nonzero covariance.
    #[error("zero-variance convention violated: {0}")]
    Convention(String),

    #[error("infeasible mechanism: {0}")]
    Infeasible(String),

    #[error("incentive constraint violated: {0}")]
    Incentive(String),

    #[error("asymmetric input: {0}")]
    Asymmetric(String),

    /// Root bracketing or another internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("empty feasible grid: {0}")]
    EmptyGrid(String),

    #[error("degenerate comparison: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable, machine-readable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGame(_) => "invalid_game",
            Error::InvalidPrior(_) => "invalid_prior",
            Error::Domain { .. } => "domain",
            Error::Singular(_) => "singular",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Dimension(_) => "dimension",
            Error::Convention(_) => "convention",
            Error::Infeasible(_) => "infeasible",
            Error::Incentive(_) => "incentive",
            Error::Asymmetric(_) => "asymmetric",
            Error::Internal(_) => "internal",
            Error::EmptyGrid(_) => "empty_grid",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}
