//! Drift of candidate repairs and the grid embedding of rewired edges.
//!
//! A repair at vertex `v` cuts edge `e''` at the neighbour `v'` and joins `v`
//! to the far end `v''`. The candidate is scored on the strip `Q` bounded by
//! the chain through `e'` (width `b`) and the line from `v'` through `e''` to
//! the singular vertex it ends at (length `a`):
//!
//! ```text
//! drift(a, b) = a * b / (a^2 + b^2)
//! ```
//!
//! The new edge itself is drawn as a digital staircase across the `e' x e''`
//! cell of the mesh, whenever that cell is still an intact rectangular grid.

use thiserror::Error;

use crate::graph::{Defect, DartId, EdgeId, LineEnd, Segment, SeparatrixGraph, VertexId};
use crate::mesh::{MeshVertex, QuadMesh};
use crate::ops::{OpError, RepairDirection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("strip dimensions must be positive, got a={a}, b={b}")]
    NonPositiveDimension { a: f64, b: f64 },
    #[error("repair cell is not a rectangular mesh grid: {0}")]
    NotAGrid(String),
}

pub fn drift_value(a: f64, b: f64) -> Result<f64, DriftError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(DriftError::NonPositiveDimension { a, b });
    }
    Ok(a * b / (a * a + b * b))
}

/// Quadrangular strip scored by a candidate repair.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionQ {
    /// Defected vertex and the vacant slot being repaired.
    pub corner: VertexId,
    pub slot: u8,
    pub direction: RepairDirection,
    /// Chain leaving the corner through `e'`.
    pub s0_prime: Vec<EdgeId>,
    /// Line leaving `v'` through `e''`.
    pub s1: Vec<EdgeId>,
    /// Vertex where `s1` stops.
    pub far_end: VertexId,
    /// Length of `s1`.
    pub a: f64,
    /// Length of `e'`.
    pub b: f64,
}

impl RegionQ {
    pub fn area(&self) -> f64 {
        self.a * self.b
    }

    pub fn diagonal(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn drift(&self) -> f64 {
        self.area() / (self.diagonal() * self.diagonal())
    }

    pub fn segment(&self) -> Segment {
        Segment::Diagonal { a: self.a, b: self.b, drift: self.drift() }
    }
}

/// The darts and edges a repair of `d` in direction `dir` would use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairSite {
    /// Vacant dart being repaired.
    pub defect_dart: DartId,
    /// `e'` and its dart at the corner.
    pub across: EdgeId,
    pub across_dart: DartId,
    /// `v'`, with the dart `e''` leaves it through.
    pub neighbor: VertexId,
    pub cut_dart: DartId,
    /// `e''` and its dart at `v''`.
    pub along: EdgeId,
    pub far_dart: DartId,
}

/// Locates `e'`, `v'`, `e''` and `v''` without touching the graph.
pub fn repair_site(g: &SeparatrixGraph, d: &Defect, dir: RepairDirection) -> Result<RepairSite, OpError> {
    let x = d.vertex;
    let defect_dart = g.dart_at(x, d.slot as isize);
    if !g.is_vacant(defect_dart) {
        return Err(OpError::NotADefect(*d));
    }
    let across_dart = g.dart_at(x, d.slot as isize + dir.sign());
    let across = g.dart(across_dart).edge.ok_or(OpError::NeighborVacant { defect: *d, direction: dir })?;
    let arrive = g.edge(across).other(across_dart);
    let neighbor = g.dart_vertex(arrive);
    if g.kind(neighbor).is_singular() {
        return Err(OpError::NeighborSingular { defect: *d, direction: dir });
    }
    let cut_dart = g.dart_at(neighbor, g.dart(arrive).slot as isize + dir.sign());
    let along = g.dart(cut_dart).edge.ok_or(OpError::NoCut { defect: *d, direction: dir })?;
    let far_dart = g.edge(along).other(cut_dart);
    if along == across || g.dart_vertex(far_dart) == neighbor {
        return Err(OpError::NoCut { defect: *d, direction: dir });
    }
    Ok(RepairSite { defect_dart, across, across_dart, neighbor, cut_dart, along, far_dart })
}

pub fn compute_region(g: &SeparatrixGraph, d: &Defect, dir: RepairDirection) -> Result<RegionQ, OpError> {
    let site = repair_site(g, d, dir)?;
    let s0 = g.walk_line(site.across_dart)?;
    let s1 = g.walk_line(site.cut_dart)?;
    let far_end = match s1.end {
        LineEnd::Singular(e) | LineEnd::Vacant(e) => g.dart_vertex(e),
    };
    let a = s1.edges().map(|e| g.edge(e).length).sum();
    Ok(RegionQ {
        corner: d.vertex,
        slot: d.slot,
        direction: dir,
        s0_prime: s0.edges().collect(),
        s1: s1.edges().collect(),
        far_end,
        a,
        b: g.edge(site.across).length,
    })
}

/// Lattice points of the digital segment from `(0, 0)` to `(cols, rows)`.
///
/// Each step moves one column or one row, choosing the point closest to the
/// real segment; ties keep the lower row.
pub fn staircase(cols: usize, rows: usize) -> Vec<(usize, usize)> {
    let (a, b) = (cols as i64, rows as i64);
    let mut out = Vec::with_capacity(cols + rows + 1);
    let (mut x, mut y) = (0i64, 0i64);
    out.push((0, 0));
    while x < a || y < b {
        let err_x = (b * (x + 1) - a * y).abs();
        let err_y = (b * x - a * (y + 1)).abs();
        if y == b || (x < a && err_x <= err_y) {
            x += 1;
        } else {
            y += 1;
        }
        out.push((x as usize, y as usize));
    }
    out
}

/// Oriented frame at a mesh vertex: the slots pointing along `e'` (`u`) and
/// along the defect direction (`w`).
#[derive(Debug, Clone, Copy)]
struct Frame {
    vertex: MeshVertex,
    axes: Option<(usize, usize)>,
}

fn step(mesh: &QuadMesh, from: Frame, along_u: bool, sign: i64) -> Result<Frame, DriftError> {
    let (su, sw) = from
        .axes
        .ok_or_else(|| DriftError::NotAGrid(format!("irregular vertex {} inside the cell", from.vertex)))?;
    let h = mesh.outgoing(from.vertex, if along_u { su } else { sw });
    let t = mesh.target(h);
    if mesh.valence(t) != 4 {
        return Ok(Frame { vertex: t, axes: None });
    }
    let fwd = mesh.slot(mesh.twin(h)) as i64 + 2;
    let (u, w) = if along_u { (fwd, fwd - sign) } else { (fwd + sign, fwd) };
    Ok(Frame { vertex: t, axes: Some((u.rem_euclid(4) as usize, w.rem_euclid(4) as usize)) })
}

fn grid_extent(g: &SeparatrixGraph, e: EdgeId) -> Result<usize, DriftError> {
    let edge = g.edge(e);
    let traced = edge.provenance.iter().all(|s| matches!(s, Segment::Traced { .. }));
    let n = edge.length.round();
    if !traced || (edge.length - n).abs() > 1e-9 || edge.polyline.len() != n as usize + 1 {
        return Err(DriftError::NotAGrid(format!("edge {e} is not a straight mesh path")));
    }
    Ok(n as usize)
}

/// Staircase polyline of the repair at `site`, walked on the mesh.
pub fn embed_diagonal(g: &SeparatrixGraph, site: &RepairSite, dir: RepairDirection) -> Result<Vec<[f64; 3]>, DriftError> {
    let mesh = g.mesh().ok_or_else(|| DriftError::NotAGrid("graph carries no mesh".into()))?;
    let rows = grid_extent(g, site.across)?;
    let cols = grid_extent(g, site.along)?;
    let x = g.dart_vertex(site.defect_dart);
    let corner = g.vertex(x).mesh_vertex;
    let val = mesh.valence(corner);
    if val != g.valence(x) {
        return Err(DriftError::NotAGrid("corner valence differs from the mesh".into()));
    }
    let k = g.dart(site.defect_dart).slot as i64;
    let sign = dir.sign() as i64;
    let start = Frame {
        vertex: corner,
        axes: Some(((k + sign).rem_euclid(val as i64) as usize, k as usize)),
    };

    let mut grid: Vec<Vec<MeshVertex>> = Vec::with_capacity(rows + 1);
    let mut left = start;
    for y in 0..=rows {
        if y > 0 {
            left = step(mesh, left, true, sign)?;
        }
        let mut row = vec![left.vertex];
        let mut at = left;
        for _ in 0..cols {
            at = step(mesh, at, false, sign)?;
            row.push(at.vertex);
        }
        grid.push(row);
    }

    let pos = |v: MeshVertex| mesh.position(v);
    let column: Vec<[f64; 3]> = grid.iter().map(|r| pos(r[0])).collect();
    if column != g.edge(site.across).polyline_from(site.across_dart) {
        return Err(DriftError::NotAGrid("first column does not follow e'".into()));
    }
    let top: Vec<[f64; 3]> = grid[rows].iter().map(|&v| pos(v)).collect();
    if top != g.edge(site.along).polyline_from(site.cut_dart) {
        return Err(DriftError::NotAGrid("top row does not follow e''".into()));
    }
    Ok(staircase(cols, rows).into_iter().map(|(c, r)| pos(grid[r][c])).collect())
}

/// Like [`embed_diagonal`] but falls back to the path `e'` then `e''`.
pub fn diagonal_polyline(g: &SeparatrixGraph, site: &RepairSite, dir: RepairDirection) -> Vec<[f64; 3]> {
    match embed_diagonal(g, site, dir) {
        Ok(p) => p,
        Err(err) => {
            log::debug!("falling back to the boundary path: {err}");
            let mut p = g.edge(site.across).polyline_from(site.across_dart);
            p.pop();
            p.extend(g.edge(site.along).polyline_from(site.cut_dart));
            p
        }
    }
}
