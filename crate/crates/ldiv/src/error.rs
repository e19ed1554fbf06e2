use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "table is not {l}-eligible: SA value {value} occurs {count} times out of {total} rows \
         (at most {total}/{l} tuples may share one SA value)"
    )]
    Ineligible {
        value: String,
        count: u64,
        total: u64,
        l: u32,
    },

    #[error("empty histogram has no pillar")]
    NoPillar,

    #[error("group {group} has no tuple with SA value {value}")]
    ValueAbsent { group: usize, value: u32 },

    #[error(
        "instance of size {size} exceeds the oracle cap {cap}; \
         the brute-force solvers are meant for test-scale inputs"
    )]
    CapExceeded { size: usize, cap: usize },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration and input
    /// problems, 3 for ineligible tables, 4 for internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Ineligible { .. } => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}
