use alloc::string::String;
use core::fmt;

/// Errors raised by the completion toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A mode index outside `0..order`.
    ModeOutOfRange { mode: usize, order: usize },
    /// Shapes or lengths that do not agree.
    ShapeMismatch(String),
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// Fewer observed fibers than `k + 1`.
    TooFewObserved { observed: usize, required: usize },
    /// A node id outside `0..n`.
    NodeOutOfRange { id: usize, n: usize },
    /// A connected component of missing nodes with no observed node in it.
    UnreachableComponent { nodes: usize },
    /// A retained node has zero degree where the degree matrix must be inverted.
    SingularDegree { node: usize },
    /// The graph has no edges.
    EmptyGraph,
    /// A missing fraction that cannot satisfy the coverage condition.
    InfeasibleFraction { fraction: f64, acquisitions: usize },
    /// Metric evaluated on an empty set of missing entries.
    NoMissingEntries,
    /// Evaluation set for accuracy is empty.
    EmptyEvaluation,
    /// HaLRTC input with no observed entry.
    AllMissing,
    /// Invalid parameter value.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ModeOutOfRange { mode, order } => {
                write!(f, "mode {mode} out of range for order-{order} tensor")
            }
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::TooFewObserved { observed, required } => {
                write!(f, "{observed} observed fibers, need at least {required}")
            }
            Error::NodeOutOfRange { id, n } => write!(f, "node id {id} out of range (n = {n})"),
            Error::UnreachableComponent { nodes } => {
                write!(f, "{nodes} missing node(s) lie in components without any observed node")
            }
            Error::SingularDegree { node } => write!(f, "node {node} has zero degree"),
            Error::EmptyGraph => write!(f, "graph has no edges"),
            Error::InfeasibleFraction { fraction, acquisitions } => write!(
                f,
                "missing fraction {fraction} cannot be covered by {acquisitions} acquisition(s)"
            ),
            Error::NoMissingEntries => write!(f, "no missing entries to evaluate"),
            Error::EmptyEvaluation => write!(f, "empty evaluation set"),
            Error::AllMissing => write!(f, "no observed entries"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
