use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("within-class scatter is numerically singular (pivot ratio {pivot_ratio:.3e}); standardize or drop collinear columns")]
    SingularScatter { pivot_ratio: f64 },

    #[error("feature {feature} is numerically collinear with the selected set (schur complement {schur:.3e})")]
    SingularUpdate { feature: usize, schur: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("candidate was evaluated against a different selection state")]
    StaleCandidate,

    #[error("cannot remove from a subset of size {0}")]
    SubsetTooSmall(usize),

    #[error("no feature reaches the forward threshold {alpha} (best gain {best_gain})")]
    NoAdmissibleFeature { alpha: f64, best_gain: f64 },

    #[error("block count {blocks} must lie in 1..={features}")]
    BadBlockCount { blocks: usize, features: usize },

    #[error("class {0} has no training observations")]
    MissingClass(usize),

    #[error("class {class} has {count} observations, fewer than the {k} folds requested")]
    Stratification { class: usize, count: usize, k: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset has no observations or no feature columns")]
    EmptyDataset,

    #[error("dataset has a single class; at least two are required")]
    SingleClass,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("run exceeded its deadline")]
    TimedOut,

    #[error("cannot open {path}: {source}")]
    Open {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical, 5 no admissible feature.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::BadBlockCount { .. } | Error::Stratification { .. } => 2,
            Error::InvalidDataset(_)
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::SingleClass
            | Error::MissingClass(_)
            | Error::Open { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::SingularScatter { .. }
            | Error::SingularUpdate { .. }
            | Error::RankDeficient
            | Error::StaleCandidate
            | Error::SubsetTooSmall(_) => 4,
            Error::NoAdmissibleFeature { .. } => 5,
            Error::TimedOut => 1,
        }
    }
}
