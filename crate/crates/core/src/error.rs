use std::path::PathBuf;

use crate::taxonomy::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("hierarchy is empty")]
    EmptyHierarchy,
    #[error("self-edge on node {0}")]
    SelfEdge(NodeId),
    #[error("node {node} has two parents ({first} and {second})")]
    TwoParents {
        node: NodeId,
        first: NodeId,
        second: NodeId,
    },
    #[error("hierarchy has multiple roots: {0:?}")]
    MultipleRoots(Vec<NodeId>),
    #[error("cycle detected through node {0}")]
    Cycle(NodeId),
    #[error("node {0} is not in the taxonomy")]
    UnknownNode(NodeId),
    #[error("cannot remove node {node}: {reason}")]
    InvalidPlan { node: NodeId, reason: &'static str },
    #[error("invalid level selection: {0}")]
    InvalidLevels(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input file is empty")]
    EmptyFile,
    #[error("negative term count {value} at index {index}")]
    NegativeCount { index: u32, value: f64 },
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("binary label must be +1 or -1, found {0}")]
    InvalidBinaryLabel(f64),
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("leaf {0} has no training examples")]
    LeafWithoutExamples(NodeId),
    #[error("label {0} is not a leaf of the taxonomy")]
    NotALeaf(NodeId),
    #[error("the root cannot carry a node model")]
    RootModel,

    #[error("codebook: {0}")]
    Codebook(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("corrupt model bundle: {0}")]
    CorruptBundle(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidRatio(_) | Error::InvalidLevels(_) => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
