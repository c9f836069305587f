use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no events given")]
    NoEvents,
    #[error("credence {value} for event {index} is outside [0, 1]")]
    CredenceOutOfRange { index: usize, value: f64 },
    #[error("weight {value} for event {index} must be positive and finite")]
    BadWeight { index: usize, value: f64 },
    #[error("event `{event}` mentions unknown outcome `{outcome}`")]
    UnknownOutcome { event: String, outcome: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("credence base is incoherent")]
    Incoherent,
    #[error("event is not inferable from the stated credences")]
    NotInferable,
    #[error("extended event matrix has rank {rank}, expected full row rank {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("scoring rule `{0}` failed the properness check")]
    ImproperRule(String),
    #[error("{0} is a half-dissimilarity and only valid for the asymmetric basis method")]
    HalfDissimilarity(&'static str),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("no letter is shared by both contexts")]
    EmptySupport,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
