use std::path::PathBuf;

use thiserror::Error;

use crate::metrics::MetricIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty auction")]
    EmptyAuction,

    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),

    #[error("duplicate advertiser `{advertiser_id}` in auction `{auction_id}`")]
    DuplicateAdvertiser { auction_id: String, advertiser_id: String },

    #[error("invalid bid for `{advertiser_id}`: {reason}")]
    InvalidBid { advertiser_id: String, reason: String },

    #[error("invalid metric value for candidate `{candidate}`, metric {metric}")]
    InvalidMetricValue { candidate: String, metric: String },

    #[error("incomplete candidate `{candidate}`: {reason}")]
    IncompleteCandidate { candidate: String, reason: String },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("inconsistent candidates in auction `{0}`")]
    InconsistentCandidates(String),

    #[error("degenerate baseline metric {0}: baseline total is zero")]
    DegenerateBaseline(MetricIndex),

    #[error("selections are not aligned: {0}")]
    MisalignedSelections(String),

    #[error("invalid grid step {0}")]
    InvalidGridStep(f64),

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("too few auctions: {auctions} auctions for {folds} folds")]
    TooFewAuctions { auctions: usize, folds: usize },

    #[error("invalid generator config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{path}:{line}: schema violation in field `{field}`: {reason}")]
    Schema {
        path: String,
        line: u64,
        field: String,
        reason: String,
    },

    #[error("duplicate auction id `{0}`")]
    DuplicateAuction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("theta1 = {theta1}, fold {fold}: {source}")]
    InSweep {
        theta1: f64,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("optimizer returned weights that fail re-validation: {0}")]
    Revalidation(String),
}

impl Error {
    /// Whether this error comes from bad input rather than from a runtime fault.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Revalidation(_) | Error::DegenerateBaseline(_) => false,
            Error::InSweep { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
