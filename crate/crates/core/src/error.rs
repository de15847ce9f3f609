use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("duplicate record for subject {subject}, visit {visit}, day {day}, minute {minute} (line {line})")]
    DuplicateRecord {
        subject: String,
        visit: u32,
        day: u32,
        minute: u32,
        line: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("smoothing parameter search failed: target df {target} outside achievable range [{lo}, {hi}]")]
    DfSearch { target: f64, lo: f64, hi: f64 },

    #[error("geodesic integration blew up at step {step}")]
    BlowUp { step: usize },

    #[error("{0}")]
    Degenerate(String),

    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
