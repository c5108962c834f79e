use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid temperature ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite energy {0}")]
    NonFiniteEnergy(f64),

    #[error("beta {beta} outside the domain [{lo}, {hi}] of g")]
    OutOfDomain { beta: f64, lo: f64, hi: f64 },

    #[error("negative KL divergence {value} between levels {from} and {to}")]
    NegativeKl { from: usize, to: usize, value: f64 },

    #[error("importance weights are degenerate")]
    DegenerateWeights,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteEnergy(_) | Error::DegenerateWeights | Error::NegativeKl { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
