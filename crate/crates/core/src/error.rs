use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `exp(exponent)` is not representable in the scalar type.
    #[error("overflow: exp({exponent}) exceeds the representable range")]
    Overflow { exponent: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("data set is empty")]
    EmptyData,

    #[error("degenerate scale: s_n = 0, the statistic is undefined")]
    DegenerateScale,

    #[error("frequency grid too coarse: {points} point(s) inside |t| <= 1/h = {cutoff}")]
    GridTooCoarse { points: usize, cutoff: f64 },

    #[error("every bandwidth on the grid overflowed; no finite MISE to minimise")]
    AllInfinite,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("kernel `{name}` rejected: {reason}")]
    InvalidKernel { name: String, reason: String },

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Overflow { .. }
            | Error::DegenerateScale
            | Error::GridTooCoarse { .. }
            | Error::AllInfinite => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
