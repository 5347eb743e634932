//! The embedded separatrix graph, stored as a rotation system.
//!
//! Every vertex owns a fixed ring of darts, one per radial slot. A dart is
//! either attached to an edge or vacant; vacant darts are the defects the
//! rewrite operations create and repair. Slots never move, so a defect keeps
//! its radial position until it is repaired.
//!
//! All mutations go through a journal so that any sequence of operations can
//! be rolled back exactly (see [`SeparatrixGraph::mark`] and
//! [`SeparatrixGraph::rollback`]).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshVertex, QuadMesh};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(VertexId);
id_type!(DartId);
id_type!(EdgeId);
id_type!(SeparatrixId);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("vertex {0} is not a regular vertex")]
    NotRegular(VertexId),
    #[error("edge {edge} is not incident to vertex {vertex}")]
    NotIncident { edge: EdgeId, vertex: VertexId },
    #[error("the incoming and outgoing edge are the same edge {0}")]
    SameEdge(EdgeId),
    #[error("line starting at dart {0} never reaches an end")]
    ClosedLine(DartId),
    #[error("line starting at dart {0} stops at a vacant slot")]
    OpenLine(DartId),
    #[error("malformed graph document: {0}")]
    Import(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    /// Index +1/4 singularity.
    Singular3,
    /// Index -1/4 singularity.
    Singular5,
    /// Crossing of two separatrices.
    Regular4,
}

impl VertexKind {
    pub fn valence(self) -> usize {
        match self {
            VertexKind::Singular3 => 3,
            VertexKind::Singular5 => 5,
            VertexKind::Regular4 => 4,
        }
    }

    pub fn is_singular(self) -> bool {
        !matches!(self, VertexKind::Regular4)
    }

    pub fn from_valence(valence: usize) -> Option<Self> {
        match valence {
            3 => Some(VertexKind::Singular3),
            4 => Some(VertexKind::Regular4),
            5 => Some(VertexKind::Singular5),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub kind: VertexKind,
    pub mesh_vertex: MeshVertex,
    pub position: [f64; 3],
    /// Dart ring, indexed by radial slot (counter-clockwise).
    pub darts: Vec<DartId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dart {
    pub vertex: VertexId,
    pub slot: u8,
    pub edge: Option<EdgeId>,
}

/// Where a stretch of an edge came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    Traced { separatrix: u32 },
    Diagonal { a: f64, b: f64, drift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// `darts[0]` is the end the polyline starts from.
    pub darts: [DartId; 2],
    pub length: f64,
    pub polyline: Vec<[f64; 3]>,
    pub provenance: Vec<Segment>,
}

impl Edge {
    pub fn other(&self, d: DartId) -> DartId {
        if self.darts[0] == d {
            self.darts[1]
        } else {
            self.darts[0]
        }
    }

    /// Polyline oriented to start at the end owning dart `from`.
    pub fn polyline_from(&self, from: DartId) -> Vec<[f64; 3]> {
        let mut p = self.polyline.clone();
        if self.darts[0] != from {
            p.reverse();
        }
        p
    }

    /// Provenance oriented like [`Edge::polyline_from`].
    pub fn provenance_from(&self, from: DartId) -> Vec<Segment> {
        let mut p = self.provenance.clone();
        if self.darts[0] != from {
            p.reverse();
        }
        p
    }

    pub fn drift_sum(&self) -> f64 {
        self.provenance
            .iter()
            .map(|s| match s {
                Segment::Diagonal { drift, .. } => *drift,
                Segment::Traced { .. } => 0.0,
            })
            .fold(0.0, |acc, d| acc + d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefectKind {
    S,
    R,
}

/// A vacant radial slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Defect {
    pub vertex: VertexId,
    pub slot: u8,
    pub kind: DefectKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separatrix {
    pub id: SeparatrixId,
    /// Dart the chain leaves its first singularity from.
    pub start: DartId,
    /// Dart the chain arrives at its last singularity through.
    pub end: DartId,
    pub edges: Vec<EdgeId>,
}

impl Separatrix {
    /// Regular vertices the chain passes, counted with multiplicity.
    pub fn interior_count(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Crosses,
    Turns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub edge: EdgeId,
    pub from: DartId,
    pub to: DartId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineEnd {
    /// Arrived at a singular vertex through this dart.
    Singular(DartId),
    /// Arrived through this dart at a regular vertex whose opposite slot is
    /// vacant.
    Vacant(DartId),
}

impl LineEnd {
    pub fn dart(self) -> DartId {
        match self {
            LineEnd::Singular(d) | LineEnd::Vacant(d) => d,
        }
    }
}

/// A maximal straight walk through regular vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LineWalk {
    pub steps: Vec<Step>,
    pub end: LineEnd,
}

impl LineWalk {
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.steps.iter().map(|s| s.edge)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Change {
    Vertex(u32, Option<Vertex>),
    Dart(u32, Option<Dart>),
    Edge(u32, Option<Edge>),
    PushVertex,
    PushDart,
    PushEdge,
    Defects(Vec<Defect>),
    Separatrices(Vec<Separatrix>),
    Replace(Box<Arenas>),
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Arenas {
    vertices: Vec<Option<Vertex>>,
    darts: Vec<Option<Dart>>,
    edges: Vec<Option<Edge>>,
}

/// Position in the change journal; rolling back to it restores the graph
/// exactly as it was when the mark was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct JournalMark(usize);

#[derive(Debug, Clone, Default)]
pub struct SeparatrixGraph {
    arenas: Arenas,
    separatrices: Vec<Separatrix>,
    defects: Vec<Defect>,
    journal: Vec<Change>,
    mesh: Option<Arc<QuadMesh>>,
}

impl PartialEq for SeparatrixGraph {
    fn eq(&self, other: &Self) -> bool {
        self.arenas == other.arenas
            && self.separatrices == other.separatrices
            && self.defects == other.defects
    }
}

impl SeparatrixGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mesh the graph was traced from, used to embed new edges on the grid.
    pub fn mesh(&self) -> Option<&QuadMesh> {
        self.mesh.as_deref()
    }

    pub fn set_mesh(&mut self, mesh: Option<Arc<QuadMesh>>) {
        self.mesh = mesh;
    }

    // ----- queries --------------------------------------------------------

    pub fn is_empty(&self) -> bool {
        self.vertex_ids().next().is_none()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        self.arenas.vertices[v.index()].as_ref().expect("live vertex")
    }

    pub fn try_vertex(&self, v: VertexId) -> Option<&Vertex> {
        self.arenas.vertices.get(v.index()).and_then(Option::as_ref)
    }

    pub fn dart(&self, d: DartId) -> &Dart {
        self.arenas.darts[d.index()].as_ref().expect("live dart")
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        self.arenas.edges[e.index()].as_ref().expect("live edge")
    }

    pub fn try_edge(&self, e: EdgeId) -> Option<&Edge> {
        self.arenas.edges.get(e.index()).and_then(Option::as_ref)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        live_ids(&self.arenas.vertices).map(VertexId)
    }

    pub fn dart_ids(&self) -> impl Iterator<Item = DartId> + '_ {
        live_ids(&self.arenas.darts).map(DartId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        live_ids(&self.arenas.edges).map(EdgeId)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids().count()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_ids().count()
    }

    pub fn regular_count(&self) -> usize {
        self.vertex_ids().filter(|&v| self.vertex(v).kind == VertexKind::Regular4).count()
    }

    pub fn singular_vertices(&self) -> Vec<VertexId> {
        self.vertex_ids().filter(|&v| self.vertex(v).kind.is_singular()).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edge_ids().map(|e| self.edge(e).length).fold(0.0, |acc, l| acc + l)
    }

    /// Sum of drift over every diagonal stretch still present in the graph.
    pub fn warping(&self) -> f64 {
        self.edge_ids().map(|e| self.edge(e).drift_sum()).fold(0.0, |acc, d| acc + d)
    }

    pub fn separatrices(&self) -> &[Separatrix] {
        &self.separatrices
    }

    pub fn separatrix(&self, id: SeparatrixId) -> Option<&Separatrix> {
        self.separatrices.get(id.index())
    }

    pub fn defects(&self) -> &[Defect] {
        &self.defects
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.vertex(v).darts.len()
    }

    /// Dart of `v` at `slot`, taken modulo the valence.
    pub fn dart_at(&self, v: VertexId, slot: isize) -> DartId {
        let ring = &self.vertex(v).darts;
        ring[slot.rem_euclid(ring.len() as isize) as usize]
    }

    pub fn occupied(&self, v: VertexId) -> usize {
        self.vertex(v).darts.iter().filter(|&&d| self.dart(d).edge.is_some()).count()
    }

    pub fn twin(&self, d: DartId) -> Option<DartId> {
        self.dart(d).edge.map(|e| self.edge(e).other(d))
    }

    pub fn dart_vertex(&self, d: DartId) -> VertexId {
        self.dart(d).vertex
    }

    pub fn is_vacant(&self, d: DartId) -> bool {
        self.dart(d).edge.is_none()
    }

    pub fn kind(&self, v: VertexId) -> VertexKind {
        self.vertex(v).kind
    }

    /// Walks straight from the occupied dart `start` until reaching a
    /// singular vertex or a regular vertex whose opposite slot is vacant.
    pub fn walk_line(&self, start: DartId) -> Result<LineWalk, GraphError> {
        let limit = self.arenas.edges.len() + 1;
        let mut steps = Vec::new();
        let mut d = start;
        loop {
            let Some(edge) = self.dart(d).edge else {
                return Err(GraphError::OpenLine(d));
            };
            let to = self.edge(edge).other(d);
            steps.push(Step { edge, from: d, to });
            let w = self.dart(to).vertex;
            if self.kind(w).is_singular() {
                return Ok(LineWalk { steps, end: LineEnd::Singular(to) });
            }
            let next = self.dart_at(w, self.dart(to).slot as isize + 2);
            if self.is_vacant(next) {
                return Ok(LineWalk { steps, end: LineEnd::Vacant(to) });
            }
            if steps.len() > limit {
                return Err(GraphError::ClosedLine(start));
            }
            d = next;
        }
    }

    /// Whether a chain entering `v` on `edge_in` and leaving on `edge_out`
    /// crosses `v` or turns there.
    pub fn classify_transition(
        &self,
        edge_in: EdgeId,
        v: VertexId,
        edge_out: EdgeId,
    ) -> Result<Transition, GraphError> {
        if self.kind(v) != VertexKind::Regular4 {
            return Err(GraphError::NotRegular(v));
        }
        if edge_in == edge_out {
            return Err(GraphError::SameEdge(edge_in));
        }
        let slot_of = |e: EdgeId| {
            self.try_edge(e)
                .and_then(|edge| edge.darts.iter().copied().find(|&d| self.dart(d).vertex == v))
                .map(|d| self.dart(d).slot as i32)
                .ok_or(GraphError::NotIncident { edge: e, vertex: v })
        };
        let (a, b) = (slot_of(edge_in)?, slot_of(edge_out)?);
        Ok(if (a - b).rem_euclid(4) == 2 { Transition::Crosses } else { Transition::Turns })
    }

    /// Next dart on the face lying to the right of `d`'s edge, i.e. the first
    /// occupied dart counter-clockwise after the twin of `d`.
    pub fn face_next(&self, d: DartId) -> Option<DartId> {
        let t = self.twin(d)?;
        let w = self.dart(t).vertex;
        let slot = self.dart(t).slot as isize;
        let val = self.valence(w) as isize;
        (1..=val).map(|k| self.dart_at(w, slot + k)).find(|&n| !self.is_vacant(n))
    }

    pub fn face_census(&self) -> FaceCensus {
        let mut seen = vec![false; self.arenas.darts.len()];
        let mut degrees = BTreeMap::new();
        let mut faces = 0usize;
        for d in self.dart_ids() {
            if seen[d.index()] || self.is_vacant(d) {
                continue;
            }
            let mut degree = 0;
            let mut cur = d;
            while !seen[cur.index()] {
                seen[cur.index()] = true;
                degree += 1;
                match self.face_next(cur) {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            faces += 1;
            *degrees.entry(degree).or_insert(0) += 1;
        }
        let euler = self.vertex_count() as i64 - self.edge_count() as i64 + faces as i64;
        FaceCensus { degrees, faces, euler }
    }

    /// Rebuilds the separatrix registry by walking every line leaving a
    /// singular dart, in vertex then slot order.
    pub fn trace_registry(&self) -> Result<Vec<Separatrix>, GraphError> {
        let mut covered = vec![false; self.arenas.darts.len()];
        let mut out = Vec::new();
        for v in self.singular_vertices() {
            for &d in &self.vertex(v).darts {
                if covered[d.index()] || self.is_vacant(d) {
                    continue;
                }
                let walk = self.walk_line(d)?;
                let LineEnd::Singular(end) = walk.end else {
                    return Err(GraphError::OpenLine(d));
                };
                covered[d.index()] = true;
                covered[end.index()] = true;
                out.push(Separatrix {
                    id: SeparatrixId(out.len() as u32),
                    start: d,
                    end,
                    edges: walk.edges().collect(),
                });
            }
        }
        Ok(out)
    }

    pub fn refresh_registry(&mut self) -> Result<(), GraphError> {
        let registry = self.trace_registry()?;
        self.set_separatrices(registry);
        Ok(())
    }

    // ----- journal --------------------------------------------------------

    pub fn mark(&self) -> JournalMark {
        JournalMark(self.journal.len())
    }

    /// Undoes every change made after `mark`.
    pub fn rollback(&mut self, mark: JournalMark) {
        while self.journal.len() > mark.0 {
            match self.journal.pop().expect("non-empty journal") {
                Change::Vertex(i, old) => self.arenas.vertices[i as usize] = old,
                Change::Dart(i, old) => self.arenas.darts[i as usize] = old,
                Change::Edge(i, old) => self.arenas.edges[i as usize] = old,
                Change::PushVertex => {
                    self.arenas.vertices.pop();
                }
                Change::PushDart => {
                    self.arenas.darts.pop();
                }
                Change::PushEdge => {
                    self.arenas.edges.pop();
                }
                Change::Defects(old) => self.defects = old,
                Change::Separatrices(old) => self.separatrices = old,
                Change::Replace(old) => self.arenas = *old,
            }
        }
    }

    /// Forgets the journal; earlier marks become invalid.
    pub fn commit(&mut self) {
        self.journal.clear();
    }

    pub fn journal_len(&self) -> usize {
        self.journal.len()
    }

    // ----- mutation -------------------------------------------------------

    pub(crate) fn push_vertex(&mut self, kind: VertexKind, mesh_vertex: MeshVertex, position: [f64; 3]) -> VertexId {
        let id = VertexId(self.arenas.vertices.len() as u32);
        let mut darts = Vec::with_capacity(kind.valence());
        for slot in 0..kind.valence() {
            let d = DartId(self.arenas.darts.len() as u32);
            self.arenas.darts.push(Some(Dart { vertex: id, slot: slot as u8, edge: None }));
            self.journal.push(Change::PushDart);
            darts.push(d);
        }
        self.arenas.vertices.push(Some(Vertex { kind, mesh_vertex, position, darts }));
        self.journal.push(Change::PushVertex);
        id
    }

    pub(crate) fn add_edge(&mut self, edge: Edge) -> EdgeId {
        let id = EdgeId(self.arenas.edges.len() as u32);
        for d in edge.darts {
            assert!(self.is_vacant(d), "dart {d} already occupied");
            self.set_dart_edge(d, Some(id));
        }
        self.arenas.edges.push(Some(edge));
        self.journal.push(Change::PushEdge);
        id
    }

    pub(crate) fn remove_edge(&mut self, e: EdgeId) -> Edge {
        let edge = self.arenas.edges[e.index()].take().expect("live edge");
        self.journal.push(Change::Edge(e.0, Some(edge.clone())));
        for d in edge.darts {
            self.set_dart_edge(d, None);
        }
        edge
    }

    fn set_dart_edge(&mut self, d: DartId, edge: Option<EdgeId>) {
        let slot = self.arenas.darts[d.index()].as_mut().expect("live dart");
        let old = *slot;
        slot.edge = edge;
        self.journal.push(Change::Dart(d.0, Some(old)));
    }

    /// Removes a vertex whose darts are all vacant.
    pub(crate) fn remove_vertex(&mut self, v: VertexId) {
        let vertex = self.arenas.vertices[v.index()].take().expect("live vertex");
        for &d in &vertex.darts {
            let old = self.arenas.darts[d.index()].take();
            debug_assert!(old.is_none_or(|o| o.edge.is_none()));
            self.journal.push(Change::Dart(d.0, old));
        }
        self.journal.push(Change::Vertex(v.0, Some(vertex)));
    }

    pub(crate) fn set_defects(&mut self, defects: Vec<Defect>) {
        let old = std::mem::replace(&mut self.defects, defects);
        self.journal.push(Change::Defects(old));
    }

    pub(crate) fn set_separatrices(&mut self, separatrices: Vec<Separatrix>) {
        let old = std::mem::replace(&mut self.separatrices, separatrices);
        self.journal.push(Change::Separatrices(old));
    }

    /// Renumbers vertices, darts and edges densely, preserving their order.
    pub fn compact(&mut self) {
        let vmap = dense_map(&self.arenas.vertices);
        let dmap = dense_map(&self.arenas.darts);
        let emap = dense_map(&self.arenas.edges);
        let dm = |d: DartId| DartId(dmap[d.index()].expect("live dart"));
        let em = |e: EdgeId| EdgeId(emap[e.index()].expect("live edge"));
        let vm = |v: VertexId| VertexId(vmap[v.index()].expect("live vertex"));

        let vertices = self
            .arenas
            .vertices
            .iter()
            .flatten()
            .map(|v| Some(Vertex { darts: v.darts.iter().map(|&d| dm(d)).collect(), ..v.clone() }))
            .collect();
        let darts = self
            .arenas
            .darts
            .iter()
            .flatten()
            .map(|d| Some(Dart { vertex: vm(d.vertex), slot: d.slot, edge: d.edge.map(em) }))
            .collect();
        let edges = self
            .arenas
            .edges
            .iter()
            .flatten()
            .map(|e| Some(Edge { darts: e.darts.map(dm), ..e.clone() }))
            .collect();
        let defects = self
            .defects
            .iter()
            .map(|d| Defect { vertex: vm(d.vertex), ..*d })
            .collect();
        let separatrices = self
            .separatrices
            .iter()
            .map(|s| Separatrix {
                id: s.id,
                start: dm(s.start),
                end: dm(s.end),
                edges: s.edges.iter().map(|&e| em(e)).collect(),
            })
            .collect();
        let old = std::mem::replace(&mut self.arenas, Arenas { vertices, darts, edges });
        self.journal.push(Change::Replace(Box::new(old)));
        self.set_defects(defects);
        self.set_separatrices(separatrices);
    }

    // ----- validation -----------------------------------------------------

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for v in self.vertex_ids() {
            let vertex = self.vertex(v);
            if vertex.darts.len() != vertex.kind.valence() {
                violations.push(Violation::RingSize { vertex: v, len: vertex.darts.len() });
            }
            for (slot, &d) in vertex.darts.iter().enumerate() {
                match self.arenas.darts.get(d.index()).and_then(Option::as_ref) {
                    Some(dart) if dart.vertex == v && dart.slot as usize == slot => {}
                    _ => violations.push(Violation::SlotOrder { vertex: v, slot }),
                }
            }
            let occupied = self.occupied(v);
            if occupied != vertex.kind.valence() {
                violations.push(Violation::Valence { vertex: v, kind: vertex.kind, occupied });
            }
        }
        for e in self.edge_ids() {
            let edge = self.edge(e);
            for d in edge.darts {
                match self.arenas.darts.get(d.index()).and_then(Option::as_ref) {
                    Some(dart) if dart.edge == Some(e) => {}
                    Some(dart) if dart.edge.is_none() => violations.push(Violation::VacantTwin { edge: e, dart: d }),
                    _ => violations.push(Violation::TwinMismatch { dart: d }),
                }
            }
            if edge.length.is_nan() || edge.length <= 0.0 {
                violations.push(Violation::NonPositiveLength { edge: e });
            }
            let ends = edge.darts.map(|d| {
                self.arenas.darts.get(d.index()).and_then(Option::as_ref).and_then(|dart| self.try_vertex(dart.vertex))
            });
            if let [Some(a), Some(b)] = ends {
                if edge.polyline.first() != Some(&a.position) || edge.polyline.last() != Some(&b.position) {
                    violations.push(Violation::PolylineEnds { edge: e });
                }
            }
        }
        for d in self.dart_ids() {
            if let Some(e) = self.dart(d).edge {
                match self.try_edge(e) {
                    Some(edge) if edge.darts.contains(&d) => {}
                    _ => violations.push(Violation::TwinMismatch { dart: d }),
                }
            }
        }
        if !self.defects.is_empty() {
            violations.push(Violation::DefectsPresent(self.defects.len()));
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }

        let census = self.face_census();
        for (&degree, &count) in &census.degrees {
            if degree != 4 {
                violations.push(Violation::FaceDegree { degree, count });
            }
        }
        match self.trace_registry() {
            Ok(registry) => {
                let covered: usize = registry.iter().map(|s| s.edges.len()).sum();
                if covered != self.edge_count() {
                    violations.push(Violation::EdgesOffSeparatrices {
                        covered,
                        total: self.edge_count(),
                    });
                }
                if registry != self.separatrices {
                    violations.push(Violation::StaleRegistry);
                }
            }
            Err(err) => violations.push(Violation::BrokenLine(err)),
        }
        violations.extend(self.check_registry_chains());
        ValidationReport { violations }
    }

    /// Checks the stored registry: chains connected, crossing at every
    /// interior vertex, ending at singular vertices.
    fn check_registry_chains(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for sep in &self.separatrices {
            let ends_ok = self.try_edge(sep.edges[0]).is_some()
                && self.kind(self.dart_vertex(sep.start)).is_singular()
                && self.kind(self.dart_vertex(sep.end)).is_singular();
            if !ends_ok {
                out.push(Violation::ChainEnds { separatrix: sep.id });
                continue;
            }
            let mut at = sep.start;
            for (k, &e) in sep.edges.iter().enumerate() {
                let Some(edge) = self.try_edge(e) else {
                    out.push(Violation::ChainEnds { separatrix: sep.id });
                    break;
                };
                if !edge.darts.contains(&at) {
                    out.push(Violation::ChainDisconnected { separatrix: sep.id, position: k });
                    break;
                }
                let arrive = edge.other(at);
                if k + 1 == sep.edges.len() {
                    if arrive != sep.end {
                        out.push(Violation::ChainEnds { separatrix: sep.id });
                    }
                    break;
                }
                let w = self.dart_vertex(arrive);
                let next = sep.edges[k + 1];
                let leave = self.dart_at(w, self.dart(arrive).slot as isize + 2);
                if self.kind(w) != VertexKind::Regular4
                    || self.dart(leave).edge != Some(next)
                {
                    out.push(Violation::NotCrossing { separatrix: sep.id, vertex: w });
                    break;
                }
                at = leave;
            }
        }
        out
    }

    // ----- documents ------------------------------------------------------

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            format: GRAPH_FORMAT.to_string(),
            version: GRAPH_VERSION,
            vertices: self
                .vertex_ids()
                .map(|id| {
                    let v = self.vertex(id);
                    VertexDoc {
                        id,
                        kind: v.kind,
                        mesh_vertex: v.mesh_vertex,
                        position: v.position,
                        darts: v.darts.clone(),
                    }
                })
                .collect(),
            darts: self
                .dart_ids()
                .map(|id| {
                    let d = self.dart(id);
                    DartDoc { id, vertex: d.vertex, slot: d.slot, edge: d.edge, twin: self.twin(id) }
                })
                .collect(),
            edges: self
                .edge_ids()
                .map(|id| {
                    let e = self.edge(id);
                    EdgeDoc {
                        id,
                        darts: e.darts,
                        length: e.length,
                        polyline: e.polyline.clone(),
                        provenance: e.provenance.clone(),
                    }
                })
                .collect(),
            separatrices: self.separatrices.clone(),
            defects: self.defects.clone(),
        }
    }

    /// Canonical JSON: sorted ids, fixed field order, pretty printed.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(source: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(source).map_err(|e| GraphError::Import(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self, GraphError> {
        if doc.format != GRAPH_FORMAT || doc.version != GRAPH_VERSION {
            return Err(GraphError::Import(format!(
                "unsupported format {} v{}",
                doc.format, doc.version
            )));
        }
        fn place<T>(arena: &mut Vec<Option<T>>, id: usize, item: T) -> Result<(), GraphError> {
            if arena.len() <= id {
                arena.resize_with(id + 1, || None);
            }
            if arena[id].is_some() {
                return Err(GraphError::Import(format!("duplicate id {id}")));
            }
            arena[id] = Some(item);
            Ok(())
        }
        let mut arenas = Arenas::default();
        for v in doc.vertices {
            place(
                &mut arenas.vertices,
                v.id.index(),
                Vertex { kind: v.kind, mesh_vertex: v.mesh_vertex, position: v.position, darts: v.darts },
            )?;
        }
        for d in doc.darts {
            place(&mut arenas.darts, d.id.index(), Dart { vertex: d.vertex, slot: d.slot, edge: d.edge })?;
        }
        for e in doc.edges {
            place(
                &mut arenas.edges,
                e.id.index(),
                Edge { darts: e.darts, length: e.length, polyline: e.polyline, provenance: e.provenance },
            )?;
        }
        // referential integrity, so later queries cannot panic
        let dart_ok = |d: DartId| arenas.darts.get(d.index()).is_some_and(Option::is_some);
        for v in arenas.vertices.iter().flatten() {
            if !v.darts.iter().all(|&d| dart_ok(d)) {
                return Err(GraphError::Import("vertex references a missing dart".into()));
            }
        }
        for d in arenas.darts.iter().flatten() {
            let v_ok = arenas.vertices.get(d.vertex.index()).is_some_and(Option::is_some);
            let e_ok = d.edge.is_none_or(|e| arenas.edges.get(e.index()).is_some_and(Option::is_some));
            if !v_ok || !e_ok {
                return Err(GraphError::Import("dart references a missing vertex or edge".into()));
            }
        }
        for e in arenas.edges.iter().flatten() {
            if !e.darts.iter().all(|&d| dart_ok(d)) {
                return Err(GraphError::Import("edge references a missing dart".into()));
            }
        }
        for s in &doc.separatrices {
            let edges_ok = !s.edges.is_empty()
                && s.edges.iter().all(|e| arenas.edges.get(e.index()).is_some_and(Option::is_some));
            if !edges_ok || !dart_ok(s.start) || !dart_ok(s.end) {
                return Err(GraphError::Import(format!("separatrix {} is malformed", s.id)));
            }
        }
        for d in &doc.defects {
            if !arenas.vertices.get(d.vertex.index()).is_some_and(Option::is_some) {
                return Err(GraphError::Import("defect on a missing vertex".into()));
            }
        }
        Ok(SeparatrixGraph {
            arenas,
            separatrices: doc.separatrices,
            defects: doc.defects,
            journal: Vec::new(),
            mesh: None,
        })
    }
}

fn dense_map<T>(slots: &[Option<T>]) -> Vec<Option<u32>> {
    let mut next = 0;
    slots
        .iter()
        .map(|s| {
            s.as_ref().map(|_| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn live_ids<T>(arena: &[Option<T>]) -> impl Iterator<Item = u32> + '_ {
    arena.iter().enumerate().filter(|(_, x)| x.is_some()).map(|(i, _)| i as u32)
}

pub const GRAPH_FORMAT: &str = "sepgraph";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub format: String,
    pub version: u32,
    pub vertices: Vec<VertexDoc>,
    pub darts: Vec<DartDoc>,
    pub edges: Vec<EdgeDoc>,
    pub separatrices: Vec<Separatrix>,
    pub defects: Vec<Defect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: VertexId,
    pub kind: VertexKind,
    pub mesh_vertex: MeshVertex,
    pub position: [f64; 3],
    pub darts: Vec<DartId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DartDoc {
    pub id: DartId,
    pub vertex: VertexId,
    pub slot: u8,
    pub twin: Option<DartId>,
    pub edge: Option<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: EdgeId,
    pub darts: [DartId; 2],
    pub length: f64,
    pub polyline: Vec<[f64; 3]>,
    pub provenance: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceCensus {
    /// Face degree -> number of faces.
    pub degrees: BTreeMap<usize, usize>,
    pub faces: usize,
    /// V - E + F of the rotation system.
    pub euler: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RingSize { vertex: VertexId, len: usize },
    SlotOrder { vertex: VertexId, slot: usize },
    Valence { vertex: VertexId, kind: VertexKind, occupied: usize },
    VacantTwin { edge: EdgeId, dart: DartId },
    TwinMismatch { dart: DartId },
    NonPositiveLength { edge: EdgeId },
    PolylineEnds { edge: EdgeId },
    DefectsPresent(usize),
    FaceDegree { degree: usize, count: usize },
    BrokenLine(GraphError),
    EdgesOffSeparatrices { covered: usize, total: usize },
    StaleRegistry,
    ChainEnds { separatrix: SeparatrixId },
    ChainDisconnected { separatrix: SeparatrixId, position: usize },
    NotCrossing { separatrix: SeparatrixId, vertex: VertexId },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v:?}")?;
        }
        Ok(())
    }
}
