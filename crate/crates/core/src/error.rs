use thiserror::Error;

/// Errors produced by corpus ingestion, modeling, ranking, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty model: total count is zero")]
    EmptyModel,

    #[error("smoothing weight must lie in (0,1), got {0}")]
    InvalidSmoothingWeight(f64),

    #[error("q has zero mass where p is positive (token id {0})")]
    SupportViolation(u32),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("Dirichlet parameters must be positive (index {0})")]
    NonPositiveAlpha(usize),

    #[error("density is infinite: theta[{0}] = 0 with alpha[{0}] < 1")]
    InfiniteDensity(usize),

    #[error("vector is not on the probability simplex (sum = {0})")]
    NotOnSimplex(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown {kind} id(s): {ids}")]
    UnknownId { kind: &'static str, ids: String },

    #[error("document {0} has no sentences after preprocessing")]
    EmptyDocument(String),

    #[error("token '{0}' has zero probability under every allowed component")]
    UnexplainableToken(String),

    #[error("non-finite value in {context} (last sentence: doc {doc}, sentence {sentence})")]
    NonFinite {
        context: &'static str,
        doc: String,
        sentence: usize,
    },

    #[error("exact evidence refused: sentence has {words} words and {components} allowed components (caps: {word_cap} words, {component_cap} components)")]
    ExactModeTooLarge {
        words: usize,
        components: usize,
        word_cap: usize,
        component_cap: usize,
    },

    #[error("empty document set for query {0}")]
    EmptyDocSet(String),

    #[error("document {doc} is not relevant to query {query} (pass allow_unjudged to override)")]
    NotRelevant { doc: String, query: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ranking contains non-finite score for ({doc}, {sentence})")]
    NonFiniteScore { doc: String, sentence: usize },

    #[error("duplicate ranking entry ({doc}, {sentence})")]
    DuplicateEntry { doc: String, sentence: usize },

    #[error("model directory is inconsistent: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse failure class, used by the CLI to pick an exit code:
    /// data errors versus numerical failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonFiniteScore { .. }
                | Error::InfiniteDensity(_)
                | Error::SupportViolation(_)
        )
    }
}
