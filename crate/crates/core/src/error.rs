use std::fmt;

use thiserror::Error;

/// Line/column location inside a parsed statement or symmetry declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("simplicial number s_{d}({n}) overflows u128")]
    Overflow { d: usize, n: u128 },

    #[error("packed size or offset does not fit in usize")]
    SizeOverflow,

    #[error("syntax error at {span}: {message}")]
    Syntax { span: Span, message: String },

    #[error("index variable `{var}` repeated in access to `{tensor}` at {span}")]
    RepeatedIndex {
        tensor: String,
        var: String,
        span: Span,
    },

    #[error("output variable `{var}` does not appear in term {term}")]
    OutputVarMissing { var: String, term: usize },

    #[error("tensor `{0}` is both written and read")]
    OutputReadBack(String),

    #[error("tensor `{tensor}` accessed with {found} indices, expected {expected}")]
    ArityMismatch {
        tensor: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),

    #[error("`{var}` is not an index of tensor `{tensor}`")]
    NotAnIndex { tensor: String, var: String },

    #[error("`{var}` appears in more than one symmetry part of `{tensor}`")]
    DuplicatePartMember { tensor: String, var: String },

    #[error("no extent given for index variable `{0}`")]
    MissingExtent(String),

    #[error("inconsistent extents for `{var}`: {first} vs {second}")]
    InconsistentExtent {
        var: String,
        first: usize,
        second: usize,
    },

    #[error("symmetric dimensions of `{tensor}` have unequal extents ({first} vs {second})")]
    UnequalPartExtents {
        tensor: String,
        first: usize,
        second: usize,
    },

    #[error("coordinate list has length {found}, tensor order is {expected}")]
    CoordArity { expected: usize, found: usize },

    #[error("coordinate {coord} out of bounds for dimension {dim} with extent {extent}")]
    OutOfBounds {
        dim: usize,
        coord: usize,
        extent: usize,
    },

    #[error("non-canonical coordinates {coords:?}: symmetry part {part:?} is not non-increasing")]
    NonCanonical {
        coords: Vec<usize>,
        part: Vec<String>,
    },

    #[error("non-canonical packed read of `{access}` at {coords:?}")]
    NonCanonicalRead { access: String, coords: Vec<usize> },

    #[error(
        "tensor violates declared symmetry: {first_coords:?} = {first_value} but {second_coords:?} = {second_value}"
    )]
    SymmetryViolation {
        first_coords: Vec<usize>,
        first_value: String,
        second_coords: Vec<usize>,
        second_value: String,
    },

    #[error("invalid tensor layout: {0}")]
    InvalidLayout(String),

    #[error(
        "cannot rewrite `{access}`: `{a}` and `{b}` are symmetric but unordered in this region"
    )]
    UnorderedPair {
        access: String,
        a: String,
        b: String,
    },

    #[error("dependency graph leaves symmetric pair `{a}`, `{b}` unordered")]
    GraphInvariant { a: String, b: String },

    #[error("missing input tensor `{0}`")]
    MissingInput(String),

    #[error("input `{tensor}` does not match its signature: {reason}")]
    InputMismatch { tensor: String, reason: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("cannot emit C: {0}")]
    Emit(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
