//! Greedy simplification with backtracking, and an exhaustive oracle over a
//! single macro-operation.
//!
//! The choices of one macro-operation form a tree: the root picks a
//! separatrix and one of four delete configurations, every inner node picks
//! one of two switch directions. Leaves either terminate (no defect left) or
//! get stuck. The greedy search walks one path of this tree guided by the
//! drift heuristic and backtracks from stuck leaves; the oracle visits every
//! leaf of every tree.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::compute_region;
use crate::graph::{Defect, DefectKind, JournalMark, SeparatrixGraph, SeparatrixId};
use crate::ops::{
    defect_pair, delete_separatrix, finish_macro, strip_separatrix, switch_separatrix, DeleteConfig, Endpoint,
    LogEntry, OpError, RepairDirection, SwitchResult,
};

pub const DEFAULT_ORACLE_BUDGET: usize = 1_000_000;
pub const DEFAULT_GREEDY_BUDGET: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("graph has no regular vertices")]
    NoRegularVertices,
    #[error("energy is undefined while the graph has {0} defects")]
    DefectsPresent(usize),
    #[error("node budget of {budget} exceeded")]
    BudgetExceeded { budget: usize, visited: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Op(#[from] OpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub lambda_r: f64,
    pub lambda_w: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { lambda_r: 1.0, lambda_w: 1.0 }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.lambda_r) || !ok(self.lambda_w) || (self.lambda_r == 0.0 && self.lambda_w == 0.0) {
            return Err(SearchError::Config("energy weights must be non-negative and not both zero".into()));
        }
        Ok(())
    }
}

/// Weighted regular-vertex count plus weighted total drift of the rewired
/// stretches.
pub fn energy_of(g: &SeparatrixGraph, cfg: &EnergyConfig) -> Result<f64, SearchError> {
    if !g.defects().is_empty() {
        return Err(SearchError::DefectsPresent(g.defects().len()));
    }
    Ok(cfg.lambda_r * g.regular_count() as f64 + cfg.lambda_w * g.warping())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Stop once `|R| <= target_regular`.
    pub target_regular: Option<usize>,
    /// Stop once `|R|` is at most this percentage of the initial count.
    pub target_percent: Option<f64>,
    /// Options whose drift exceeds this value are never taken.
    pub max_drift: Option<f64>,
    pub max_macro_ops: Option<usize>,
}

impl StopCriteria {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.target_regular.is_none()
            && self.target_percent.is_none()
            && self.max_drift.is_none()
            && self.max_macro_ops.is_none()
        {
            return Err(SearchError::Config("at least one stop criterion is required".into()));
        }
        if let Some(p) = self.target_percent {
            if !(0.0..=100.0).contains(&p) {
                return Err(SearchError::Config(format!("target percentage {p} outside [0, 100]")));
            }
        }
        if let Some(d) = self.max_drift {
            if d.is_nan() || d <= 0.0 {
                return Err(SearchError::Config(format!("maximum drift {d} must be positive")));
            }
        }
        Ok(())
    }

    fn reached(&self, regular: usize, initial: usize, macros: usize) -> Option<StopReason> {
        if self.max_macro_ops.is_some_and(|k| macros >= k) {
            return Some(StopReason::MaxMacroOps);
        }
        if self.target_regular.is_some_and(|t| regular <= t) {
            return Some(StopReason::TargetReached);
        }
        if self.target_percent.is_some_and(|p| regular as f64 <= p / 100.0 * initial as f64) {
            return Some(StopReason::TargetReached);
        }
        if regular == 0 {
            return Some(StopReason::NoRegularVertices);
        }
        None
    }

    fn admits(&self, drift: f64) -> bool {
        self.max_drift.is_none_or(|d| drift <= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub stop: StopCriteria,
    pub energy: EnergyConfig,
    /// Nodes the greedy search may visit per separatrix before giving up on it.
    pub node_budget: usize,
}

impl SearchConfig {
    pub fn new(stop: StopCriteria) -> Self {
        SearchConfig { stop, energy: EnergyConfig::default(), node_budget: DEFAULT_GREEDY_BUDGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    MaxMacroOps,
    NoRegularVertices,
    NoProgress,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub macro_index: usize,
    pub regular: usize,
    pub warping: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchStats {
    /// Atomic operations attempted, failed ones included.
    pub nodes: usize,
    /// Options that could not be applied.
    pub dead_options: usize,
    /// Stuck leaves.
    pub stuck: usize,
    /// Backtracking steps out of exhausted nodes.
    pub backtracks: usize,
    /// Terminated leaves rejected by the final layout check.
    pub invalid_leaves: usize,
    /// Separatrices whose whole tree failed.
    pub abandoned: usize,
    /// Trees cut short by the node budget.
    pub budget_hits: usize,
}

/// One applied atomic operation on the search stack, with the options
/// frozen at its node and the journal position that undoes it.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationRecord {
    pub entry: LogEntry,
    pub undo: JournalMark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifyReport {
    pub log: Vec<LogEntry>,
    pub trace: Vec<EnergySample>,
    pub stats: SearchStats,
    pub stop: StopReason,
    /// Journal position of the input graph: rolling back to it undoes the
    /// whole run.
    pub start: JournalMark,
    /// Switch count of every accepted macro-operation, with `|R|` before it.
    pub switches: Vec<(usize, usize)>,
}

impl SimplifyReport {
    pub fn macro_count(&self) -> usize {
        self.switches.len()
    }
}

fn sample(g: &SeparatrixGraph, cfg: &EnergyConfig, macro_index: usize) -> EnergySample {
    let warping = g.warping();
    EnergySample {
        macro_index,
        regular: g.regular_count(),
        warping,
        energy: cfg.lambda_r * g.regular_count() as f64 + cfg.lambda_w * warping,
    }
}

/// Separatrices by decreasing number of interior vertices, then by id.
pub fn separatrix_order(g: &SeparatrixGraph) -> Vec<SeparatrixId> {
    let mut seps: Vec<_> = g.separatrices().iter().map(|s| (s.interior_count(), s.id)).collect();
    seps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    seps.into_iter().map(|(_, id)| id).collect()
}

pub fn select_initial_separatrix(g: &SeparatrixGraph) -> Result<SeparatrixId, SearchError> {
    if g.regular_count() == 0 {
        return Err(SearchError::NoRegularVertices);
    }
    separatrix_order(g).first().copied().ok_or(SearchError::NoRegularVertices)
}

/// Sorts feasible options by drift; the sort is stable, so ties keep the
/// input order.
fn by_drift<T: Copy>(mut options: Vec<(T, f64)>) -> Vec<(T, f64)> {
    options.sort_by(|a, b| a.1.total_cmp(&b.1));
    options
}

/// Directions whose region exists, by increasing drift, CCW first on ties.
pub fn direction_order(g: &SeparatrixGraph, d: &Defect) -> Vec<(RepairDirection, f64)> {
    by_drift(
        RepairDirection::BOTH
            .into_iter()
            .filter_map(|dir| compute_region(g, d, dir).ok().map(|q| (dir, q.drift())))
            .collect(),
    )
}

pub fn choose_min_drift(g: &SeparatrixGraph, d: &Defect) -> Result<RepairDirection, OpError> {
    direction_order(g, d).first().map(|o| o.0).ok_or(OpError::Stuck(*d))
}

/// Delete configurations of `sep` whose first repair exists, by increasing
/// drift. Drifts are measured on the graph with the separatrix removed,
/// which is then restored.
pub fn config_order(g: &mut SeparatrixGraph, sep: SeparatrixId) -> Vec<(DeleteConfig, f64)> {
    let mark = g.mark();
    let Ok((first, second, _)) = strip_separatrix(g, sep) else {
        g.rollback(mark);
        return Vec::new();
    };
    let options = DeleteConfig::ALL
        .into_iter()
        .filter_map(|cfg| {
            let d = match cfg.endpoint {
                Endpoint::First => first,
                Endpoint::Second => second,
            };
            compute_region(g, &d, cfg.direction).ok().map(|q| (cfg, q.drift()))
        })
        .collect();
    g.rollback(mark);
    by_drift(options)
}

struct Node {
    mark: JournalMark,
    defect: Defect,
    options: Vec<(RepairDirection, f64)>,
    next: usize,
    frozen: Vec<RepairDirection>,
    progressed: bool,
}

enum TreeResult {
    Solved(Vec<OperationRecord>),
    Exhausted,
    Budget,
}

/// Depth-first walk of the switch tree below the current state (which must
/// hold one defect of each kind). Returns the first terminated path in
/// option order; the graph holds its final state.
fn solve_tree(
    g: &mut SeparatrixGraph,
    macro_index: usize,
    n: usize,
    stop: &StopCriteria,
    budget: usize,
    stats: &mut SearchStats,
) -> TreeResult {
    let open = |g: &SeparatrixGraph| {
        let (s, _) = defect_pair(g).expect("one defect of each kind");
        let options = direction_order(g, &s).into_iter().filter(|o| stop.admits(o.1)).collect();
        Node { mark: g.mark(), defect: s, options, next: 0, frozen: Vec::new(), progressed: false }
    };
    let mut stack = vec![open(g)];
    let mut path: Vec<OperationRecord> = Vec::new();
    let mut visited = 0;
    while let Some(top) = stack.last_mut() {
        if top.next == top.options.len() {
            if !top.progressed {
                stats.stuck += 1;
            }
            stack.pop();
            if let Some(parent) = stack.last_mut() {
                let rec = path.pop().expect("path follows the stack");
                g.rollback(rec.undo);
                parent.frozen.push(parent.options[parent.next - 1].0);
                stats.backtracks += 1;
            }
            continue;
        }
        let (dir, drift) = top.options[top.next];
        top.next += 1;
        g.rollback(top.mark);
        visited += 1;
        stats.nodes += 1;
        if visited > budget {
            stats.budget_hits += 1;
            g.rollback(stack[0].mark);
            return TreeResult::Budget;
        }
        let out = match switch_separatrix(g, dir) {
            Ok(out) => out,
            Err(e) => {
                if !e.is_dead_option() {
                    log::warn!("switch failed unexpectedly: {e}");
                }
                stats.dead_options += 1;
                top.frozen.push(dir);
                continue;
            }
        };
        top.progressed = true;
        let entry = LogEntry::Switch {
            macro_index,
            defect: top.defect,
            direction: dir,
            frozen: top.frozen.clone(),
            removed: out.removed,
            drift,
            outcome: out.result,
        };
        let undo = top.mark;
        match out.result {
            SwitchResult::Terminated => match finish_macro(g, n) {
                Ok(()) => {
                    path.push(OperationRecord { entry, undo });
                    return TreeResult::Solved(path);
                }
                Err(e) => {
                    log::debug!("terminated leaf rejected: {e}");
                    stats.invalid_leaves += 1;
                    g.rollback(undo);
                    top.frozen.push(dir);
                }
            },
            SwitchResult::Continue { .. } => {
                path.push(OperationRecord { entry, undo });
                stack.push(open(g));
            }
        }
    }
    TreeResult::Exhausted
}

/// One greedy macro-operation with backtracking. On failure the graph is
/// unchanged.
fn greedy_macro(
    g: &mut SeparatrixGraph,
    macro_index: usize,
    cfg: &SearchConfig,
    stats: &mut SearchStats,
) -> Option<Vec<LogEntry>> {
    let n = g.separatrices().len();
    for sep in separatrix_order(g) {
        let mut frozen = Vec::new();
        let visited_before = stats.nodes;
        for (config, drift) in config_order(g, sep) {
            if !cfg.stop.admits(drift) {
                continue;
            }
            let mark = g.mark();
            stats.nodes += 1;
            let del = match delete_separatrix(g, sep, config) {
                Ok(d) => d,
                Err(_) => {
                    stats.dead_options += 1;
                    frozen.push(config);
                    continue;
                }
            };
            let spent = stats.nodes - visited_before;
            let budget = cfg.node_budget.saturating_sub(spent);
            match solve_tree(g, macro_index, n, &cfg.stop, budget, stats) {
                TreeResult::Solved(path) => {
                    let mut log = vec![LogEntry::Delete {
                        macro_index,
                        separatrix: sep,
                        config,
                        frozen,
                        removed: del.removed,
                        drift,
                    }];
                    log.extend(path.into_iter().map(|r| r.entry));
                    return Some(log);
                }
                TreeResult::Exhausted => {
                    g.rollback(mark);
                    stats.backtracks += 1;
                    frozen.push(config);
                }
                TreeResult::Budget => {
                    g.rollback(mark);
                    log::warn!("node budget exhausted on separatrix {sep}");
                    break;
                }
            }
        }
        stats.abandoned += 1;
    }
    None
}

/// Repeats greedy macro-operations until a stop criterion fires or no
/// macro-operation succeeds. The journal of `g` keeps every change, so
/// rolling back to `report.start` restores the input.
pub fn greedy_simplify(g: &mut SeparatrixGraph, cfg: &SearchConfig) -> Result<SimplifyReport, SearchError> {
    cfg.stop.validate()?;
    cfg.energy.validate()?;
    if !g.defects().is_empty() {
        return Err(SearchError::DefectsPresent(g.defects().len()));
    }
    let start = g.mark();
    let initial = g.regular_count();
    let mut report = SimplifyReport {
        log: Vec::new(),
        trace: vec![sample(g, &cfg.energy, 0)],
        stats: SearchStats::default(),
        stop: StopReason::NoProgress,
        start,
        switches: Vec::new(),
    };
    let mut macros = 0;
    loop {
        if let Some(reason) = cfg.stop.reached(g.regular_count(), initial, macros) {
            report.stop = reason;
            break;
        }
        let before = g.regular_count();
        let Some(entries) = greedy_macro(g, macros, cfg, &mut report.stats) else {
            report.stop = StopReason::NoProgress;
            break;
        };
        let switches = entries.iter().filter(|e| matches!(e, LogEntry::Switch { .. })).count();
        report.switches.push((switches, before));
        report.log.extend(entries);
        macros += 1;
        report.trace.push(sample(g, &cfg.energy, macros));
        log::info!("macro-operation {macros}: |R| {before} -> {}", g.regular_count());
    }
    Ok(report)
}

/// Best single macro-operation found by the oracle.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub graph: SeparatrixGraph,
    pub log: Vec<LogEntry>,
    pub energy: f64,
    /// Position of the winning root in (separatrix, configuration) order.
    pub root: usize,
}

#[derive(Debug, Clone)]
pub enum OracleResult {
    Found(OracleSolution),
    NoSolution,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub result: OracleResult,
    pub visited: usize,
    pub roots: usize,
    pub leaves: usize,
    pub stuck: usize,
}

struct Best {
    energy: f64,
    log: Vec<LogEntry>,
}

struct RootOutcome {
    best: Option<Best>,
    leaves: usize,
    stuck: usize,
}

/// Visits every leaf of the tree rooted at (`sep`, `config`).
fn explore_root(
    g: &mut SeparatrixGraph,
    sep: SeparatrixId,
    config: DeleteConfig,
    energy: &EnergyConfig,
    visited: &AtomicUsize,
    budget: usize,
    abort: &AtomicBool,
) -> RootOutcome {
    let mut out = RootOutcome { best: None, leaves: 0, stuck: 0 };
    let n = g.separatrices().len();
    let tick = || {
        let v = visited.fetch_add(1, Ordering::Relaxed) + 1;
        if v > budget {
            abort.store(true, Ordering::Relaxed);
        }
        !abort.load(Ordering::Relaxed)
    };
    if !tick() {
        return out;
    }
    let Ok(del) = delete_separatrix(g, sep, config) else {
        out.stuck += 1;
        return out;
    };
    let head = LogEntry::Delete {
        macro_index: 0,
        separatrix: sep,
        config,
        frozen: Vec::new(),
        removed: del.removed,
        drift: del.repair.region.drift(),
    };

    struct Frame {
        mark: JournalMark,
        defect: Defect,
        next: usize,
        progressed: bool,
    }
    let open = |g: &SeparatrixGraph| Frame {
        mark: g.mark(),
        defect: defect_pair(g).expect("one defect of each kind").0,
        next: 0,
        progressed: false,
    };
    let mut stack = vec![open(g)];
    let mut path: Vec<LogEntry> = Vec::new();
    while let Some(top) = stack.last_mut() {
        if top.next == RepairDirection::BOTH.len() {
            if !top.progressed {
                out.stuck += 1;
            }
            stack.pop();
            path.pop();
            continue;
        }
        let dir = RepairDirection::BOTH[top.next];
        top.next += 1;
        g.rollback(top.mark);
        if !tick() {
            return out;
        }
        let drift = compute_region(g, &top.defect, dir).map(|q| q.drift()).unwrap_or(0.0);
        let Ok(sw) = switch_separatrix(g, dir) else { continue };
        top.progressed = true;
        let entry = LogEntry::Switch {
            macro_index: 0,
            defect: top.defect,
            direction: dir,
            frozen: Vec::new(),
            removed: sw.removed,
            drift,
            outcome: sw.result,
        };
        match sw.result {
            SwitchResult::Continue { .. } => {
                path.push(entry);
                stack.push(open(g));
            }
            SwitchResult::Terminated => {
                let mark = top.mark;
                if finish_macro(g, n).is_ok() {
                    out.leaves += 1;
                    let e = energy_of(g, energy).expect("no defects after a macro-operation");
                    if out.best.as_ref().is_none_or(|b| e < b.energy) {
                        let mut log = vec![head.clone()];
                        log.extend(path.iter().cloned());
                        log.push(entry);
                        out.best = Some(Best { energy: e, log });
                    }
                }
                g.rollback(mark);
            }
        }
    }
    out
}

/// Exhaustive search over the `4n` trees of a single macro-operation. Roots
/// run in parallel; the answer is the terminated leaf of least energy, ties
/// going to the earliest root and then the earliest leaf.
pub fn exhaustive_search(
    g: &SeparatrixGraph,
    energy: &EnergyConfig,
    node_budget: usize,
) -> Result<OracleReport, SearchError> {
    energy.validate()?;
    if !g.defects().is_empty() {
        return Err(SearchError::DefectsPresent(g.defects().len()));
    }
    let roots: Vec<(SeparatrixId, DeleteConfig)> = g
        .separatrices()
        .iter()
        .flat_map(|s| DeleteConfig::ALL.into_iter().map(move |c| (s.id, c)))
        .collect();
    let visited = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let outcomes: Vec<RootOutcome> = roots
        .par_iter()
        .map(|&(sep, config)| {
            let mut local = g.clone();
            local.commit();
            explore_root(&mut local, sep, config, energy, &visited, node_budget, &abort)
        })
        .collect();
    let total = visited.load(Ordering::Relaxed);
    if abort.load(Ordering::Relaxed) {
        return Err(SearchError::BudgetExceeded { budget: node_budget, visited: total });
    }
    let leaves = outcomes.iter().map(|o| o.leaves).sum();
    let stuck = outcomes.iter().map(|o| o.stuck).sum();
    let winner = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.best.map(|b| (i, b)))
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)));
    let result = match winner {
        None => OracleResult::NoSolution,
        Some((root, best)) => {
            let mut graph = g.clone();
            crate::ops::replay(&mut graph, &best.log).map_err(|e| SearchError::Config(e.to_string()))?;
            graph.commit();
            OracleResult::Found(OracleSolution { graph, log: best.log, energy: best.energy, root })
        }
    };
    Ok(OracleReport { result, visited: total, roots: roots.len(), leaves, stuck })
}

/// Number of singular and regular defects.
pub fn defect_counts(g: &SeparatrixGraph) -> (usize, usize) {
    let s = g.defects().iter().filter(|d| d.kind == DefectKind::S).count();
    (s, g.defects().len() - s)
}
