use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("numeric domain error in `{0}`")]
    Domain(String),

    #[error("division by an expression that simplifies to zero")]
    DivisionByZero,

    #[error("only {found} of {wanted} sample points were in the domain")]
    SamplingExhausted { found: usize, wanted: usize },

    #[error("order overflow: `{coordinate}` would exceed jet order {max}")]
    OrderOverflow { coordinate: String, max: usize },

    #[error("Maurer-Cartan entries have rank {rank}, need {wanted}")]
    RankDeficient { rank: usize, wanted: usize },

    #[error("forms are not a coframe: {0}")]
    NotACoframe(String),

    #[error("normalization equations are not solvable by the sequential strategy; stuck on: {0}")]
    Unsolvable(String),

    #[error("cross-section is inconsistent: {0}")]
    InconsistentCrossSection(String),

    #[error("frame matrix is singular at a sampled point")]
    SingularFrame,

    #[error("coframe forms are dependent: {0}")]
    Dependence(String),

    #[error("immersion is not regular: {0}")]
    Regularity(String),

    #[error("invariant undefined on the comparison grid: {0}")]
    GridDomain(String),

    #[error("invalid input at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
