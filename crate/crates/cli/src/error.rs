use std::path::PathBuf;

use sepgraph_core::graph::GraphError;
use sepgraph_core::mesh::MeshError;
use sepgraph_core::trace::TraceError;
use sepgraph_core::SearchError;
use thiserror::Error;

/// Process exit codes. The table is part of the command-line contract.
pub mod code {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const NON_QUAD_FACE: u8 = 4;
    pub const BOUNDARY_EDGE: u8 = 5;
    pub const NON_MANIFOLD: u8 = 6;
    pub const VALENCE_OUT_OF_RANGE: u8 = 7;
    pub const TOO_SMALL: u8 = 8;
    pub const CLOSED_STREAMLINE: u8 = 9;
    pub const INVALID_GRAPH: u8 = 10;
    pub const CONFIG: u8 = 11;
    pub const BUDGET_EXCEEDED: u8 = 12;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("node budget {budget} exceeded after {visited} visited nodes")]
    BudgetExceeded { budget: usize, visited: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } => code::IO,
            CliError::Usage(_) => code::USAGE,
            CliError::Mesh(e) => match e {
                MeshError::Parse { .. } => code::PARSE,
                MeshError::NonQuadFace { .. } | MeshError::DegenerateFace { .. } => code::NON_QUAD_FACE,
                MeshError::BoundaryEdge(..) => code::BOUNDARY_EDGE,
                MeshError::NonManifold { .. } => code::NON_MANIFOLD,
                MeshError::ValenceOutOfRange { .. } => code::VALENCE_OUT_OF_RANGE,
                MeshError::TooSmall { .. } | MeshError::SurgeryFailed { .. } => code::TOO_SMALL,
            },
            CliError::Trace(TraceError::ClosedStreamline { .. }) => code::CLOSED_STREAMLINE,
            CliError::Trace(_) | CliError::InvalidGraph(_) => code::INVALID_GRAPH,
            CliError::Config(_) => code::CONFIG,
            CliError::BudgetExceeded { .. } => code::BUDGET_EXCEEDED,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::InvalidGraph(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(m) => CliError::Config(m),
            SearchError::BudgetExceeded { budget, visited } => CliError::BudgetExceeded { budget, visited },
            other => CliError::InvalidGraph(other.to_string()),
        }
    }
}
