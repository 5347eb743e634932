//! Separatrix tracing on a quad mesh.
//!
//! A separatrix leaves an irregular vertex along one of its mesh edges and
//! goes straight through every valence-4 vertex until it meets another
//! irregular vertex. Mesh vertices where two traced lines cross become the
//! regular vertices of the graph; vertices passed by a single line only add
//! to edge length.

use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Edge, Segment, SeparatrixGraph, VertexId, VertexKind};
use crate::mesh::{HalfEdge, MeshVertex, QuadMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("streamline from half-edge {start} closes on itself after {steps} steps")]
    ClosedStreamline { start: HalfEdge, steps: usize },
    #[error("traced graph is inconsistent: {0}")]
    Inconsistent(String),
}

/// Result of extraction: a mesh without singularities has no separatrices.
#[derive(Debug, Clone)]
pub enum Extraction {
    Empty,
    Graph(SeparatrixGraph),
}

impl Extraction {
    pub fn into_graph(self) -> SeparatrixGraph {
        match self {
            Extraction::Empty => SeparatrixGraph::new(),
            Extraction::Graph(g) => g,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Extraction::Empty)
    }
}

/// One directed walk over mesh half-edges, from an irregular vertex to the
/// next irregular vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshWalk {
    pub half_edges: Vec<HalfEdge>,
}

impl MeshWalk {
    pub fn start(&self) -> HalfEdge {
        self.half_edges[0]
    }

    pub fn reversed(&self, mesh: &QuadMesh) -> MeshWalk {
        MeshWalk { half_edges: self.half_edges.iter().rev().map(|&h| mesh.twin(h)).collect() }
    }

    /// (origin vertex, slot) of the first half-edge.
    fn key(&self, mesh: &QuadMesh) -> (MeshVertex, usize) {
        let h = self.start();
        (mesh.origin(h), mesh.slot(h))
    }
}

/// Every directed walk leaving an irregular vertex, in (vertex, slot) order.
/// Each separatrix appears twice, once per direction.
pub fn mesh_walks(mesh: &QuadMesh) -> Result<Vec<MeshWalk>, TraceError> {
    let limit = mesh.edge_count() * 2;
    let mut walks = Vec::new();
    for s in mesh.singularities() {
        for &h0 in mesh.fan(s.vertex) {
            let mut half_edges = vec![h0];
            let mut h = h0;
            while let Some(next) = mesh.straight_on(h) {
                if next == h0 || half_edges.len() > limit {
                    return Err(TraceError::ClosedStreamline { start: h0, steps: half_edges.len() });
                }
                half_edges.push(next);
                h = next;
            }
            walks.push(MeshWalk { half_edges });
        }
    }
    Ok(walks)
}

/// Keeps one walk per separatrix: the direction whose starting
/// (vertex, slot) is lexicographically smaller.
pub fn deduplicate(mesh: &QuadMesh, walks: Vec<MeshWalk>) -> Vec<MeshWalk> {
    walks
        .into_iter()
        .filter(|w| w.key(mesh) < w.reversed(mesh).key(mesh))
        .collect()
}

pub fn trace_separatrices(mesh: &QuadMesh) -> Result<Extraction, TraceError> {
    trace_shared(Arc::new(mesh.clone()))
}

/// Same as [`trace_separatrices`] but keeps a handle on an already shared mesh.
pub fn trace_shared(mesh: Arc<QuadMesh>) -> Result<Extraction, TraceError> {
    let singular = mesh.singularities();
    if singular.is_empty() {
        return Ok(Extraction::Empty);
    }
    let walks = deduplicate(&mesh, mesh_walks(&mesh)?);

    let mut covered = vec![false; mesh.face_count() * 4];
    for w in &walks {
        for &h in &w.half_edges {
            covered[h as usize] = true;
            covered[mesh.twin(h) as usize] = true;
        }
    }
    let is_crossing = |v: MeshVertex| mesh.valence(v) == 4 && mesh.fan(v).iter().all(|&h| covered[h as usize]);

    let mut graph = SeparatrixGraph::new();
    let mut ids: Vec<Option<VertexId>> = vec![None; mesh.vertex_count()];
    for s in &singular {
        let kind = VertexKind::from_valence(mesh.valence(s.vertex)).expect("irregular valence");
        ids[s.vertex as usize] = Some(graph.push_vertex(kind, s.vertex, mesh.position(s.vertex)));
    }
    for w in &walks {
        for &h in &w.half_edges {
            let t = mesh.target(h);
            if ids[t as usize].is_none() && is_crossing(t) {
                ids[t as usize] = Some(graph.push_vertex(VertexKind::Regular4, t, mesh.position(t)));
            }
        }
    }

    for (sep, w) in walks.iter().enumerate() {
        let mut from = mesh.origin(w.start());
        let mut first = w.start();
        let mut polyline = vec![mesh.position(from)];
        let mut length = 0.0;
        for (k, &h) in w.half_edges.iter().enumerate() {
            let t = mesh.target(h);
            polyline.push(mesh.position(t));
            length += 1.0;
            let Some(tv) = ids[t as usize] else { continue };
            let fv = ids[from as usize].expect("segment starts at a graph vertex");
            let d0 = graph.dart_at(fv, mesh.slot(first) as isize);
            let d1 = graph.dart_at(tv, mesh.slot(mesh.twin(h)) as isize);
            graph.add_edge(Edge {
                darts: [d0, d1],
                length,
                polyline: std::mem::take(&mut polyline),
                provenance: vec![Segment::Traced { separatrix: sep as u32 }],
            });
            polyline.push(mesh.position(t));
            length = 0.0;
            from = t;
            if let Some(&next) = w.half_edges.get(k + 1) {
                first = next;
            }
        }
    }

    graph
        .refresh_registry()
        .map_err(|e| TraceError::Inconsistent(e.to_string()))?;
    if graph.separatrices().len() != walks.len() {
        return Err(TraceError::Inconsistent(format!(
            "{} walks but {} registered separatrices",
            walks.len(),
            graph.separatrices().len()
        )));
    }
    graph.commit();
    graph.set_mesh(Some(mesh));
    Ok(Extraction::Graph(graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Transition;
    use crate::mesh::{generate_cube_grid, generate_dipole_grid, generate_torus_grid};

    fn graph_of(mesh: &QuadMesh) -> SeparatrixGraph {
        match trace_separatrices(mesh).unwrap() {
            Extraction::Graph(g) => g,
            Extraction::Empty => panic!("expected singularities"),
        }
    }

    #[test]
    fn cube_separatrices_follow_cube_edges() {
        for n in [1, 2, 3, 5] {
            let g = graph_of(&generate_cube_grid(n).unwrap());
            assert_eq!(g.separatrices().len(), 12);
            assert_eq!(g.regular_count(), 0);
            assert_eq!(g.vertex_count(), 8);
            for e in g.edge_ids() {
                assert_eq!(g.edge(e).length, n as f64);
            }
            assert!(g.validate().is_valid(), "{}", g.validate());
            let census = g.face_census();
            assert_eq!(census.degrees.into_iter().collect::<Vec<_>>(), vec![(4, 6)]);
            assert_eq!(census.euler, 2);
        }
    }

    #[test]
    fn torus_is_empty() {
        assert!(trace_separatrices(&generate_torus_grid(8, 8).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn walks_come_in_reverse_pairs() {
        let mesh = generate_dipole_grid(7, 8).unwrap();
        let walks = mesh_walks(&mesh).unwrap();
        let unique = deduplicate(&mesh, walks.clone());
        assert_eq!(walks.len(), 2 * unique.len());
        for w in &walks {
            let r = w.reversed(&mesh);
            assert!(walks.contains(&r));
            assert_ne!(&r, w);
        }
        let prongs: usize = mesh.singularities().iter().map(|s| mesh.valence(s.vertex)).sum();
        assert_eq!(prongs, 2 * unique.len());
    }

    #[test]
    fn dipole_graph_is_a_quad_layout() {
        for (r, c) in [(5, 5), (6, 6), (7, 9), (10, 8)] {
            let mesh = generate_dipole_grid(r, c).unwrap();
            let g = graph_of(&mesh);
            let report = g.validate();
            assert!(report.is_valid(), "{r}x{c}: {report}");
            let census = g.face_census();
            assert!(census.degrees.keys().all(|&d| d == 4));
            assert_eq!(census.euler, mesh.euler_characteristic());
            assert!(g.regular_count() > 0);
        }
    }

    #[test]
    fn separatrices_cross_at_interior_vertices() {
        let g = graph_of(&generate_dipole_grid(6, 6).unwrap());
        for sep in g.separatrices() {
            let mut at = sep.start;
            for pair in sep.edges.windows(2) {
                let arrive = g.edge(pair[0]).other(at);
                let v = g.dart_vertex(arrive);
                assert_eq!(g.classify_transition(pair[0], v, pair[1]).unwrap(), Transition::Crosses);
                at = g.dart_at(v, g.dart(arrive).slot as isize + 2);
            }
        }
    }

    #[test]
    fn edge_polylines_match_endpoints() {
        let g = graph_of(&generate_dipole_grid(6, 7).unwrap());
        for e in g.edge_ids() {
            let edge = g.edge(e);
            let a = g.vertex(g.dart_vertex(edge.darts[0])).position;
            let b = g.vertex(g.dart_vertex(edge.darts[1])).position;
            assert_eq!(edge.polyline.first(), Some(&a));
            assert_eq!(edge.polyline.last(), Some(&b));
            assert_eq!(edge.polyline.len(), edge.length as usize + 1);
        }
    }
}
