use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("bad header in {file}: expected `{expected}`, found `{found}`")]
    Header {
        file: String,
        expected: String,
        found: String,
    },

    #[error("treatment must be binary (row {row}: a = {value})")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("non-numeric or missing value in column `{column}` at row {row}")]
    BadCell { column: String, row: usize },

    #[error("dimension mismatch: expected {expected} covariates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite covariate value in column `{column}`")]
    NonFinite { column: String },

    #[error("labeled data is empty")]
    EmptyLabeled,

    #[error("labeled data must contain both treatment arms (treated: {treated}, control: {control})")]
    MissingArm { treated: usize, control: usize },

    #[error("too few labeled observations: n = {n}, need at least {required}")]
    TooFewLabeled { n: usize, required: usize },

    #[error("column `{column}` has zero variance and cannot be standardized")]
    ZeroVariance { column: String },

    #[error("propensity fit diverged (|gamma| > 1e3): the arms look separated by the covariates; consider a regularized propensity model")]
    Separation,

    #[error("singular information matrix in propensity fit")]
    SingularInformation,

    #[error("rank-deficient design: column `{column}` is linearly dependent on the others")]
    RankDeficient { column: String },

    #[error("empty arm: no training point with a = {arm}")]
    EmptyArm { arm: u8 },

    #[error("fold {fold} leaves arm {arm} empty in its training complement; use fewer folds")]
    FoldArmEmpty { fold: usize, arm: u8 },

    #[error("unlabeled set is empty; this estimator needs unlabeled covariates (use the TR estimator instead)")]
    NoUnlabeled,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{failed} of {total} replications failed (limit 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl Error {
    /// True for failures of the numerical procedures themselves, as opposed to
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Separation
                | Error::SingularInformation
                | Error::RankDeficient { .. }
                | Error::EmptyArm { .. }
                | Error::FoldArmEmpty { .. }
        )
    }
}
