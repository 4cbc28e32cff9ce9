use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("node {node} has an empty label space")]
    EmptyLabelSpace { node: usize },
    #[error("{edges} edges but {tables} pairwise tables")]
    EdgeTableCount { edges: usize, tables: usize },
    #[error("edge {edge} references a node outside 0..{num_nodes}")]
    NodeOutOfRange { edge: usize, num_nodes: usize },
    #[error("edge {edge} is ({u},{v}); edges must satisfy u < v")]
    NonCanonicalEdge { edge: usize, u: usize, v: usize },
    #[error("duplicate edge ({u},{v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("table has {found} entries, expected {expected}")]
    TableSize { expected: usize, found: usize },
    #[error("costs must be finite")]
    NonFiniteCost,
    #[error("labeling has {found} entries, model has {expected} nodes")]
    LabelingLength { expected: usize, found: usize },
    #[error("label {label} of node {node} is outside 0..{count}")]
    LabelOutOfRange { node: usize, label: usize, count: usize },
    #[error("state space of {size} labelings exceeds the enumeration limit {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Model file parse failure. `line` is 1-based; 0 means end of file.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}
