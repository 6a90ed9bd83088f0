use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes, split into input errors and violated hypotheses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("undefined gcd: both inputs are zero")]
    UndefinedGcd,
    #[error("division by a non-unit")]
    DivisionByZero,
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("target is not in the column span")]
    NotInSpan,
    #[error("not comaximal: {0}")]
    NotComaximal(String),
    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown embedding {0:?}")]
    UnknownEmbedding(String),
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("{what} index {index} out of range 1..={n}")]
    IndexOutOfRange { what: &'static str, index: usize, n: usize },
    #[error("empty tuple")]
    EmptyTuple,
    #[error("ragged lengths: {0}")]
    Ragged(String),
    #[error("invalid module: {0}")]
    InvalidModule(String),
    #[error("no classification theorem applies to a Plain module")]
    PlainTag,
    #[error("wrong module class: {0}")]
    WrongClass(String),
    #[error("weights are not regular: {0}")]
    NonRegular(String),
    #[error("invertibility gate fails at step {step}: {detail}")]
    GateViolation { step: usize, detail: String },
    #[error("wall violation: {0}")]
    WallViolation(String),
    #[error("degenerate flag: {0}")]
    DegenerateFlag(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("basis is linearly dependent")]
    DependentBasis,
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("regularity lost at positions {position},{next}: {left} vs {right}")]
    RegularityLost { position: usize, next: usize, left: String, right: String },
    #[error("round trip not guaranteed: Q-root {q_root} and S-root {s_root} differ by {diff}")]
    InvertibilityNotGuaranteed { q_root: String, s_root: String, diff: String },
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::UndefinedGcd => "undefined_gcd",
            Error::DivisionByZero => "division_by_zero",
            Error::NotInvertible => "not_invertible",
            Error::NotInSpan => "not_in_span",
            Error::NotComaximal(_) => "not_comaximal",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::UnknownEmbedding(_) => "unknown_embedding",
            Error::UnknownGenerator(_) => "unknown_generator",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::EmptyTuple => "empty_tuple",
            Error::Ragged(_) => "ragged",
            Error::InvalidModule(_) => "invalid_module",
            Error::PlainTag => "plain_tag",
            Error::WrongClass(_) => "wrong_class",
            Error::NonRegular(_) => "non_regular",
            Error::GateViolation { .. } => "gate_violation",
            Error::WallViolation(_) => "wall_violation",
            Error::DegenerateFlag(_) => "degenerate_flag",
            Error::Unsupported(_) => "unsupported",
            Error::DependentBasis => "dependent_basis",
            Error::Mismatch(_) => "mismatch",
            Error::HypothesisViolation(_) => "hypothesis_violation",
            Error::RegularityLost { .. } => "regularity_lost",
            Error::InvertibilityNotGuaranteed { .. } => "invertibility_not_guaranteed",
            Error::TooLarge(_) => "too_large",
            Error::Internal(_) => "internal",
        }
    }

    /// True for malformed or out-of-range input, false for failed mathematical hypotheses.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::ShapeMismatch(_)
                | Error::UnknownEmbedding(_)
                | Error::UnknownGenerator(_)
                | Error::IndexOutOfRange { .. }
                | Error::EmptyTuple
                | Error::Ragged(_)
                | Error::InvalidModule(_)
                | Error::TooLarge(_)
        )
    }
}
