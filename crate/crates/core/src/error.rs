use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number literal `{0}`")]
pub struct ParseNumberError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("duplicate point `{0}`")]
    DuplicatePoint(String),
    #[error("distance matrix is {rows}x{cols} but there are {points} points")]
    Shape { points: usize, rows: usize, cols: usize },
    #[error("d({0},{0}) must be 0")]
    NonzeroDiagonal(String),
    #[error("d({0},{1}) != d({1},{0})")]
    Asymmetric(String, String),
    #[error("triangle inequality fails for {0}, {1}, {2}")]
    Triangle(String, String, String),
    #[error("distinct points {0} and {1} are at distance 0")]
    ZeroDistance(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("unknown operation symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{symbol}` expects {expected} but was given {found}")]
    ArityMismatch { symbol: String, expected: String, found: String },
    #[error("invalid arity: {0}")]
    InvalidArity(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProverError {
    #[error("term `{0}` is not provably well-formed at depth {1}")]
    NotWellFormed(String, usize),
    #[error("term `{0}` exceeds the configured depth {1}")]
    TooDeep(String, usize),
    #[error("the term universe is empty: no closed terms exist")]
    EmptyUniverse,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("unknown builtin theory `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("malformed axiom {index}: {reason}")]
    MalformedAxiom { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map is not total on `{0}`")]
    NotTotal(String),
    #[error("map sends `{0}` outside the codomain")]
    OutOfRange(String),
    #[error("map is not nonexpansive on `{0}`, `{1}`")]
    Expanding(String, String),
    #[error("map is not surjective")]
    NotSurjective,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("no interpretation for `{0}`")]
    MissingOp(String),
    #[error("`{0}` is not in the signature")]
    UnknownSymbol(String),
    #[error("table for `{op}` has {found} entries, expected {expected}")]
    TableSize { op: String, expected: usize, found: usize },
    #[error("table for `{0}` names a point outside the carrier")]
    OutOfRange(String),
    #[error("interpretation of `{0}` is not nonexpansive")]
    Expanding(String),
    #[error("unknown table mode `{0}`")]
    Mode(String),
    #[error("eventual-value mode needs a stream arity (`{0}`)")]
    NotStream(String),
}
