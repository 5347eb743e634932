//! Extraction and simplification of the separatrix graph of a cross field
//! induced by a closed quad mesh.

pub mod drift;
pub mod graph;
pub mod mesh;
pub mod ops;
pub mod search;
pub mod trace;

pub use drift::{compute_region, drift_value, staircase, DriftError, RegionQ};
pub use graph::{
    Defect, DefectKind, DartId, EdgeId, SeparatrixGraph, SeparatrixId, Transition, VertexId, VertexKind,
};
pub use mesh::QuadMesh;
pub use ops::{
    delete_separatrix, macro_operation, repair_defect, replay, switch_separatrix, DeleteConfig, Endpoint, LogEntry,
    OpError, RepairDirection, SwitchResult,
};
pub use search::{
    energy_of, exhaustive_search, greedy_simplify, select_initial_separatrix, EnergyConfig, OracleResult, SearchConfig,
    SearchError, StopCriteria,
};
pub use trace::{trace_separatrices, Extraction};
