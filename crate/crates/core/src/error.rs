use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a {rows}x{cols} grid has no neighbouring cells")]
    DegenerateGrid { rows: usize, cols: usize },
    #[error("adjacency list contains no edges")]
    EmptyAdjacency,
    #[error("self-loop on site `{0}`")]
    SelfLoop(String),
    #[error("site index {index} out of range for {n_sites} sites")]
    SiteOutOfRange { index: usize, n_sites: usize },
    #[error("site {0} has no neighbours")]
    IsolatedSite(usize),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("spatial lag is constant, correlation with it is undefined")]
    DegenerateLag,
    #[error("swap requires two distinct sites, got {0} twice")]
    SameSite(usize),
    #[error("target Moran's I {0} lies outside [-1, 1]")]
    TargetOutOfRange(f64),
    #[error("resampler did not converge: target {target}, reached {achieved} after {proposals} proposals")]
    NotConverged {
        target: f64,
        achieved: f64,
        proposals: u64,
    },
    #[error("denominator is not strictly positive at site {0}")]
    NonPositiveDenominator(usize),
    #[error("need at least 2 null values, got {0}")]
    TooFewNullValues(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
