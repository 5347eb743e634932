//! Rewrite operations on the separatrix graph.
//!
//! A repair fills the vacant slot of a defected vertex `v`: with `e'` the
//! edge next to the slot in the chosen rotation and `v'` its other end,
//! the edge `e''` next to `e'` around `v'` is cut and `v` is joined to its far
//! end `v''`. This leaves a regular defect at `v'` whose opposite edge starts
//! the dangling branch.
//!
//! * Delete-separatrix removes a whole separatrix, dissolves the regular
//!   vertices on it, then repairs one of the two singular defects.
//! * Switch-separatrix repairs the remaining singular defect and deletes the
//!   new dangling branch. The branch either ends at another singular vertex,
//!   which inherits the defect, or runs into the regular defect through its
//!   stem, which removes both defects.
//!
//! Every operation either succeeds or leaves the graph untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::{compute_region, diagonal_polyline, repair_site, RegionQ};
use crate::graph::{
    Defect, DefectKind, DartId, Edge, EdgeId, GraphError, LineEnd, Segment, SeparatrixGraph, SeparatrixId, Step,
    VertexId, VertexKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairDirection {
    Ccw,
    Cw,
}

impl RepairDirection {
    pub const BOTH: [RepairDirection; 2] = [RepairDirection::Ccw, RepairDirection::Cw];

    pub fn sign(self) -> isize {
        match self {
            RepairDirection::Ccw => 1,
            RepairDirection::Cw => -1,
        }
    }
}

/// End of the deleted separatrix whose defect gets repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeleteConfig {
    pub endpoint: Endpoint,
    pub direction: RepairDirection,
}

impl DeleteConfig {
    pub const ALL: [DeleteConfig; 4] = [
        DeleteConfig { endpoint: Endpoint::First, direction: RepairDirection::Ccw },
        DeleteConfig { endpoint: Endpoint::First, direction: RepairDirection::Cw },
        DeleteConfig { endpoint: Endpoint::Second, direction: RepairDirection::Ccw },
        DeleteConfig { endpoint: Endpoint::Second, direction: RepairDirection::Cw },
    ];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error("slot {} of vertex {} is not vacant", .0.slot, .0.vertex)]
    NotADefect(Defect),
    #[error("neighbour of defect at vertex {} towards {direction:?} is singular", defect.vertex)]
    NeighborSingular { defect: Defect, direction: RepairDirection },
    #[error("slot next to defect at vertex {} towards {direction:?} is vacant", defect.vertex)]
    NeighborVacant { defect: Defect, direction: RepairDirection },
    #[error("no edge to cut for defect at vertex {} towards {direction:?}", defect.vertex)]
    NoCut { defect: Defect, direction: RepairDirection },
    #[error("dangling branch from vertex {vertex} runs through a defected vertex")]
    BlockedBranch { vertex: VertexId },
    #[error("defect at vertex {} cannot be repaired in either direction", .0.vertex)]
    Stuck(Defect),
    #[error("graph has {s} singular and {r} regular defects")]
    DefectState { s: usize, r: usize },
    #[error("unknown separatrix {0}")]
    UnknownSeparatrix(SeparatrixId),
    #[error("graph has no regular vertices")]
    NoRegularVertices,
    #[error("rewritten graph is not a valid layout: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl OpError {
    /// Errors meaning "this option cannot be used here" rather than a broken
    /// graph or a misuse of the API.
    pub fn is_dead_option(&self) -> bool {
        matches!(
            self,
            OpError::NeighborSingular { .. }
                | OpError::NeighborVacant { .. }
                | OpError::NoCut { .. }
                | OpError::BlockedBranch { .. }
                | OpError::Stuck(_)
                | OpError::Invalid(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    /// Removed edge `e''` (its id is dead afterwards).
    pub cut_edge: EdgeId,
    pub new_edge: EdgeId,
    /// Regular defect left at `v'`.
    pub r_defect: Defect,
    /// Dart of `v'` the dangling branch leaves through.
    pub dangling: DartId,
    pub region: RegionQ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeleteOutcome {
    pub removed: usize,
    pub s_defect: Defect,
    pub repair: RepairOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchResult {
    Continue { defect: Defect },
    Terminated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchOutcome {
    pub removed: usize,
    pub repair: RepairOutcome,
    pub result: SwitchResult,
}

fn guarded<T>(g: &mut SeparatrixGraph, f: impl FnOnce(&mut SeparatrixGraph) -> Result<T, OpError>) -> Result<T, OpError> {
    let mark = g.mark();
    let out = f(g);
    if out.is_err() {
        g.rollback(mark);
    }
    out
}

/// The sub-atomic repair. Does not touch the defect list.
pub fn repair_defect(g: &mut SeparatrixGraph, d: Defect, dir: RepairDirection) -> Result<RepairOutcome, OpError> {
    let site = repair_site(g, &d, dir)?;
    let region = compute_region(g, &d, dir)?;
    let polyline = diagonal_polyline(g, &site, dir);
    let length = g.edge(site.along).length.hypot(g.edge(site.across).length);
    let jj = g.dart(site.cut_dart).slot;
    g.remove_edge(site.along);
    let new_edge = g.add_edge(Edge {
        darts: [site.defect_dart, site.far_dart],
        length,
        polyline,
        provenance: vec![region.segment()],
    });
    Ok(RepairOutcome {
        cut_edge: site.along,
        new_edge,
        r_defect: Defect { vertex: site.neighbor, slot: jj, kind: DefectKind::R },
        dangling: g.dart_at(site.neighbor, jj as isize + 2),
        region,
    })
}

fn dedup_traced(mut segments: Vec<Segment>) -> Vec<Segment> {
    segments.dedup_by(|b, a| matches!((&*a, &*b), (Segment::Traced { .. }, Segment::Traced { .. })) && a == b);
    segments
}

/// Joins the two opposite edges left at regular vertex `v` into one edge and
/// removes `v`.
fn merge_through(g: &mut SeparatrixGraph, v: VertexId, p: DartId, q: DartId) -> Result<EdgeId, OpError> {
    let (ep, eq) = (g.dart(p).edge.expect("occupied"), g.dart(q).edge.expect("occupied"));
    if ep == eq {
        return Err(OpError::Graph(GraphError::ClosedLine(p)));
    }
    let (edge_p, edge_q) = (g.edge(ep).clone(), g.edge(eq).clone());
    let a = edge_p.other(p);
    let b = edge_q.other(q);
    let mut polyline = edge_p.polyline_from(a);
    polyline.pop();
    polyline.extend(edge_q.polyline_from(q));
    let mut provenance = edge_p.provenance_from(a);
    provenance.extend(edge_q.provenance_from(q));
    g.remove_edge(ep);
    g.remove_edge(eq);
    g.remove_vertex(v);
    Ok(g.add_edge(Edge {
        darts: [a, b],
        length: edge_p.length + edge_q.length,
        polyline,
        provenance: dedup_traced(provenance),
    }))
}

/// Removes a regular vertex that lost one or both of its crossing lines.
fn dissolve(g: &mut SeparatrixGraph, v: VertexId) -> Result<(), OpError> {
    debug_assert_eq!(g.kind(v), VertexKind::Regular4);
    let occ: Vec<DartId> = g.vertex(v).darts.iter().copied().filter(|&d| !g.is_vacant(d)).collect();
    match occ.as_slice() {
        [] => {
            g.remove_vertex(v);
            Ok(())
        }
        [p, q] if (g.dart(*q).slot + 4 - g.dart(*p).slot) % 4 == 2 => merge_through(g, v, *p, *q).map(|_| ()),
        _ => Err(OpError::Invalid(format!("vertex {v} keeps {} non-crossing edges", occ.len()))),
    }
}

/// Deletes the edges of a straight walk and dissolves its interior vertices.
/// Returns the number of distinct regular vertices removed.
fn delete_line(g: &mut SeparatrixGraph, steps: &[Step]) -> Result<usize, OpError> {
    let mut interior: Vec<VertexId> = Vec::new();
    for s in &steps[..steps.len() - 1] {
        let v = g.dart_vertex(s.to);
        if !interior.contains(&v) {
            interior.push(v);
        }
    }
    for s in steps {
        if g.try_edge(s.edge).is_some() {
            g.remove_edge(s.edge);
        }
    }
    for &v in &interior {
        if g.try_vertex(v).is_some() {
            dissolve(g, v)?;
        }
    }
    Ok(interior.len())
}

/// Removes the edges of a registered separatrix and dissolves its interior
/// vertices, leaving a singular defect at each end.
pub(crate) fn strip_separatrix(g: &mut SeparatrixGraph, sep: SeparatrixId) -> Result<(Defect, Defect, usize), OpError> {
    if !g.defects().is_empty() {
        return Err(defect_state(g));
    }
    let start = g.separatrix(sep).ok_or(OpError::UnknownSeparatrix(sep))?.start;
    let walk = g.walk_line(start)?;
    let LineEnd::Singular(end) = walk.end else {
        return Err(OpError::Graph(GraphError::OpenLine(start)));
    };
    let at = |g: &SeparatrixGraph, d: DartId| Defect { vertex: g.dart_vertex(d), slot: g.dart(d).slot, kind: DefectKind::S };
    let (first, second) = (at(g, start), at(g, end));
    let removed = delete_line(g, &walk.steps)?;
    Ok((first, second, removed))
}

fn defect_state(g: &SeparatrixGraph) -> OpError {
    let s = g.defects().iter().filter(|d| d.kind == DefectKind::S).count();
    OpError::DefectState { s, r: g.defects().len() - s }
}

pub fn delete_separatrix(g: &mut SeparatrixGraph, sep: SeparatrixId, cfg: DeleteConfig) -> Result<DeleteOutcome, OpError> {
    guarded(g, |g| {
        let (first, second, removed) = strip_separatrix(g, sep)?;
        let (fix, keep) = match cfg.endpoint {
            Endpoint::First => (first, second),
            Endpoint::Second => (second, first),
        };
        let repair = repair_defect(g, fix, cfg.direction)?;
        g.set_defects(vec![keep, repair.r_defect]);
        Ok(DeleteOutcome { removed, s_defect: keep, repair })
    })
}

/// The unique singular and regular defect.
pub fn defect_pair(g: &SeparatrixGraph) -> Result<(Defect, Defect), OpError> {
    match g.defects() {
        [a, b] if a.kind == DefectKind::S && b.kind == DefectKind::R => Ok((*a, *b)),
        [a, b] if a.kind == DefectKind::R && b.kind == DefectKind::S => Ok((*b, *a)),
        _ => Err(defect_state(g)),
    }
}

pub fn switch_separatrix(g: &mut SeparatrixGraph, dir: RepairDirection) -> Result<SwitchOutcome, OpError> {
    let (s, r) = defect_pair(g)?;
    guarded(g, |g| {
        let t = r.vertex;
        let stem = (r.slot + 2) % 4;
        let repair = repair_defect(g, s, dir)?;
        let cut = repair.r_defect;
        if cut.vertex == t {
            // cutting the stem of the regular defect leaves it with its
            // through line only; anything else would open a second gap
            if cut.slot != stem {
                return Err(OpError::BlockedBranch { vertex: t });
            }
            dissolve(g, t)?;
            g.set_defects(Vec::new());
            return Ok(SwitchOutcome { removed: 1, repair, result: SwitchResult::Terminated });
        }

        let walk = g.walk_line(repair.dangling)?;
        let n = walk.steps.len();
        for st in &walk.steps[..n - 1] {
            let v = g.dart_vertex(st.to);
            if v == t || v == cut.vertex {
                return Err(OpError::BlockedBranch { vertex: v });
            }
        }
        let end = walk.end;
        let terminated = match end {
            LineEnd::Singular(_) => false,
            LineEnd::Vacant(d) if g.dart_vertex(d) == t && g.dart(d).slot == stem => true,
            LineEnd::Vacant(d) => return Err(OpError::BlockedBranch { vertex: g.dart_vertex(d) }),
        };
        let mut removed = delete_line(g, &walk.steps)?;
        dissolve(g, cut.vertex)?;
        removed += 1;
        let result = if terminated {
            dissolve(g, t)?;
            removed += 1;
            g.set_defects(Vec::new());
            SwitchResult::Terminated
        } else {
            let d = end.dart();
            let defect = Defect { vertex: g.dart_vertex(d), slot: g.dart(d).slot, kind: DefectKind::S };
            g.set_defects(vec![defect, r]);
            SwitchResult::Continue { defect }
        };
        Ok(SwitchOutcome { removed, repair, result })
    })
}

/// Closes a macro-operation: rebuilds the separatrix registry, renumbers ids
/// densely and checks the layout. `expected` is the separatrix count before
/// the operation.
pub fn finish_macro(g: &mut SeparatrixGraph, expected: usize) -> Result<(), OpError> {
    guarded(g, |g| {
        if !g.defects().is_empty() {
            return Err(defect_state(g));
        }
        let registry = g.trace_registry().map_err(|e| OpError::Invalid(e.to_string()))?;
        if registry.len() != expected {
            return Err(OpError::Invalid(format!("{} separatrices, expected {expected}", registry.len())));
        }
        g.set_separatrices(registry);
        g.compact();
        let report = g.validate();
        if !report.is_valid() {
            return Err(OpError::Invalid(report.to_string()));
        }
        Ok(())
    })
}

/// One entry of an operation log, serialised as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogEntry {
    Delete {
        macro_index: usize,
        separatrix: SeparatrixId,
        config: DeleteConfig,
        /// Configurations tried and abandoned before this one.
        frozen: Vec<DeleteConfig>,
        removed: usize,
        drift: f64,
    },
    Switch {
        macro_index: usize,
        defect: Defect,
        direction: RepairDirection,
        frozen: Vec<RepairDirection>,
        removed: usize,
        drift: f64,
        outcome: SwitchResult,
    },
}

impl LogEntry {
    pub fn macro_index(&self) -> usize {
        match self {
            LogEntry::Delete { macro_index, .. } | LogEntry::Switch { macro_index, .. } => *macro_index,
        }
    }

    pub fn removed(&self) -> usize {
        match self {
            LogEntry::Delete { removed, .. } | LogEntry::Switch { removed, .. } => *removed,
        }
    }

    pub fn drift(&self) -> f64 {
        match self {
            LogEntry::Delete { drift, .. } | LogEntry::Switch { drift, .. } => *drift,
        }
    }
}

/// A successful macro-operation.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroReport {
    pub log: Vec<LogEntry>,
    pub switches: usize,
    pub removed: usize,
}

/// Delete `sep` with `cfg`, then switch along the first usable direction
/// proposed by `policy` until no defect is left. No backtracking: a defect
/// that cannot be repaired makes the whole operation fail, and the graph is
/// restored.
pub fn macro_operation(
    g: &mut SeparatrixGraph,
    sep: SeparatrixId,
    cfg: DeleteConfig,
    macro_index: usize,
    mut policy: impl FnMut(&SeparatrixGraph, &Defect) -> Vec<RepairDirection>,
) -> Result<MacroReport, (OpError, Vec<LogEntry>)> {
    if g.regular_count() == 0 {
        return Err((OpError::NoRegularVertices, Vec::new()));
    }
    let n = g.separatrices().len();
    let mark = g.mark();
    let mut log = Vec::new();
    let fail = |g: &mut SeparatrixGraph, e: OpError, log: Vec<LogEntry>| {
        g.rollback(mark);
        Err((e, log))
    };
    let del = match delete_separatrix(g, sep, cfg) {
        Ok(d) => d,
        Err(e) => return fail(g, e, log),
    };
    let mut removed = del.removed;
    log.push(LogEntry::Delete {
        macro_index,
        separatrix: sep,
        config: cfg,
        frozen: Vec::new(),
        removed: del.removed,
        drift: del.repair.region.drift(),
    });
    let mut switches = 0;
    loop {
        let (s, _) = defect_pair(g).expect("one defect of each kind");
        let mut frozen = Vec::new();
        let mut done = None;
        for dir in policy(g, &s) {
            match switch_separatrix(g, dir) {
                Ok(out) => {
                    done = Some((dir, out));
                    break;
                }
                Err(e) if e.is_dead_option() => frozen.push(dir),
                Err(e) => return fail(g, e, log),
            }
        }
        let Some((dir, out)) = done else {
            return fail(g, OpError::Stuck(s), log);
        };
        switches += 1;
        removed += out.removed;
        log.push(LogEntry::Switch {
            macro_index,
            defect: s,
            direction: dir,
            frozen,
            removed: out.removed,
            drift: out.repair.region.drift(),
            outcome: out.result,
        });
        if out.result == SwitchResult::Terminated {
            break;
        }
    }
    if let Err(e) = finish_macro(g, n) {
        return fail(g, e, log);
    }
    Ok(MacroReport { log, switches, removed })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("entry {index}: {source}")]
    Op { index: usize, source: OpError },
    #[error("entry {index} does not match the replayed operation")]
    Mismatch { index: usize },
    #[error("log ends in the middle of macro-operation {0}")]
    Truncated(usize),
}

/// Re-applies a log produced by the search, closing every macro-operation
/// the way the search does.
pub fn replay(g: &mut SeparatrixGraph, log: &[LogEntry]) -> Result<(), ReplayError> {
    let mut n = g.separatrices().len();
    let mut open: Option<usize> = None;
    for (index, entry) in log.iter().enumerate() {
        let op = |source| ReplayError::Op { index, source };
        match entry {
            LogEntry::Delete { macro_index, separatrix, config, removed, .. } => {
                if open.is_some() {
                    return Err(ReplayError::Mismatch { index });
                }
                n = g.separatrices().len();
                let out = delete_separatrix(g, *separatrix, *config).map_err(op)?;
                if out.removed != *removed {
                    return Err(ReplayError::Mismatch { index });
                }
                open = Some(*macro_index);
            }
            LogEntry::Switch { macro_index, defect, direction, removed, outcome, .. } => {
                if open != Some(*macro_index) || defect_pair(g).map(|p| p.0) != Ok(*defect) {
                    return Err(ReplayError::Mismatch { index });
                }
                let out = switch_separatrix(g, *direction).map_err(op)?;
                if out.removed != *removed || out.result != *outcome {
                    return Err(ReplayError::Mismatch { index });
                }
                if out.result == SwitchResult::Terminated {
                    finish_macro(g, n).map_err(op)?;
                    open = None;
                }
            }
        }
    }
    match open {
        Some(m) => Err(ReplayError::Truncated(m)),
        None => Ok(()),
    }
}
