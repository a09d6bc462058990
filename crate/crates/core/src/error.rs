use std::fmt;

use crate::object_store::ObjectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Source position of a token, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // object store
    #[error("type `{0}` already exists")]
    DuplicateType(String),
    #[error("unknown supertype `{0}`")]
    UnknownSupertype(String),
    #[error("type hierarchy cycle through `{0}`")]
    CyclicHierarchy(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("name `{0}` collides with an existing definition")]
    NameCollision(String),
    #[error("function `{0}` is already defined")]
    DuplicateFunction(String),
    #[error("name `{0}` is already bound to an object")]
    NameInUse(String),

    // persistence
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported snapshot format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u64, expected: u64 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    // query language
    #[error("syntax error at {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax { position: Position, expected: Vec<String>, found: String, at_eof: bool },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("recursive call of `{0}` is not allowed")]
    Recursion(String),
    #[error("`{0}` is read-only")]
    ReadOnlyFunction(String),

    // network structure and dynamics
    #[error("cannot connect units of different nets ({from} -> {to})")]
    CrossNetConnection { from: ObjectId, to: ObjectId },
    #[error("containment cycle through {0}")]
    CyclicContainment(ObjectId),
    #[error("{unit} is already contained in {parent}")]
    MultipleParents { unit: ObjectId, parent: ObjectId },
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),
    #[error("link {0} has no weight")]
    UnsetWeight(ObjectId),
    #[error("unit {0} has no activation")]
    UnsetActivation(ObjectId),
    #[error("no target values available for {0}")]
    MissingTargets(ObjectId),
    #[error("no learn rate reachable from {0}")]
    MissingLearnRate(ObjectId),
    #[error("no data bound: {0}")]
    UnboundData(String),
    #[error("input has {inputs} rows but check data has {checks}")]
    RowCountMismatch { inputs: usize, checks: usize },
    #[error("projection `{0}` is not numeric")]
    NonNumericProjection(String),

    // paradigms
    #[error("net {0} is already initialized")]
    AlreadyInitialized(ObjectId),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("layer `{0}` is not empty")]
    LayerNotEmpty(String),
    #[error("invalid layer size {0}")]
    InvalidLayerSize(i64),

    // import
    #[error("csv header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("csv parse error at row {row}: {message}")]
    CsvParse { row: usize, message: String },
}

impl Error {
    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::TypeMismatch(msg.into())
    }

    /// True for syntax errors caused by running out of input, which the REPL
    /// treats as "keep reading".
    pub fn is_incomplete_input(&self) -> bool {
        matches!(self, Error::Syntax { at_eof: true, .. })
    }
}
