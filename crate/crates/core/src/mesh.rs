//! Closed all-quad manifold meshes acting as discrete cross fields.
//!
//! Mesh edges are taken to be aligned with the field, so irregular vertices
//! (valence 3 or 5) carry the field's singularities. Connectivity is kept as
//! an implicit half-edge structure: half-edge `4 * f + i` runs from corner `i`
//! of face `f` to corner `i + 1`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type MeshVertex = u32;
pub type HalfEdge = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} has {corners} corners, expected 4")]
    NonQuadFace { face: usize, corners: usize },
    #[error("face {face} repeats a vertex")]
    DegenerateFace { face: usize },
    #[error("edge ({0}, {1}) lies on the boundary")]
    BoundaryEdge(MeshVertex, MeshVertex),
    #[error("non-manifold configuration at vertex {vertex}: {reason}")]
    NonManifold { vertex: MeshVertex, reason: String },
    #[error("vertex {vertex} has valence {valence}, expected 3, 4 or 5")]
    ValenceOutOfRange { vertex: MeshVertex, valence: usize },
    #[error("grid {rows}x{cols} is too small (need at least {min}x{min})")]
    TooSmall { rows: usize, cols: usize, min: usize },
    #[error("no rotatable edge found after {attempts} attempts")]
    SurgeryFailed { attempts: usize },
}

/// Index of a first-order singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityIndex {
    /// Valence 3, index +1/4.
    PlusQuarter,
    /// Valence 5, index -1/4.
    MinusQuarter,
}

impl SingularityIndex {
    pub fn value(self) -> f64 {
        match self {
            SingularityIndex::PlusQuarter => 0.25,
            SingularityIndex::MinusQuarter => -0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singularity {
    pub vertex: MeshVertex,
    pub index: SingularityIndex,
}

#[derive(Debug, Clone)]
pub struct QuadMesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[MeshVertex; 4]>,
    twins: Vec<HalfEdge>,
    /// Outgoing half-edges of each vertex in counter-clockwise order,
    /// starting from the smallest half-edge id.
    fans: Vec<Vec<HalfEdge>>,
    /// Position of each half-edge inside the fan of its origin.
    slots: Vec<u8>,
}

impl QuadMesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[MeshVertex; 4]>) -> Result<Self, MeshError> {
        let nv = positions.len();
        for (f, face) in faces.iter().enumerate() {
            for (i, &v) in face.iter().enumerate() {
                if v as usize >= nv {
                    return Err(MeshError::Parse {
                        line: 0,
                        message: format!("face {f} references missing vertex {v}"),
                    });
                }
                if face[i + 1..].contains(&v) {
                    return Err(MeshError::DegenerateFace { face: f });
                }
            }
        }

        let mut directed: HashMap<(MeshVertex, MeshVertex), HalfEdge> =
            HashMap::with_capacity(faces.len() * 4);
        for (f, face) in faces.iter().enumerate() {
            for i in 0..4 {
                let key = (face[i], face[(i + 1) % 4]);
                let h = (4 * f + i) as HalfEdge;
                if directed.insert(key, h).is_some() {
                    return Err(MeshError::NonManifold {
                        vertex: key.0,
                        reason: format!(
                            "directed edge ({}, {}) used by two faces (more than two faces or inconsistent winding)",
                            key.0, key.1
                        ),
                    });
                }
            }
        }

        let mut twins = vec![0; faces.len() * 4];
        for (&(a, b), &h) in &directed {
            match directed.get(&(b, a)) {
                Some(&t) => twins[h as usize] = t,
                None => return Err(MeshError::BoundaryEdge(a.min(b), a.max(b))),
            }
        }

        let mut outgoing: Vec<Vec<HalfEdge>> = vec![Vec::new(); nv];
        for h in 0..faces.len() * 4 {
            let origin = faces[h / 4][h % 4];
            outgoing[origin as usize].push(h as HalfEdge);
        }

        let mut fans = Vec::with_capacity(nv);
        let mut slots = vec![0u8; faces.len() * 4];
        for (v, out) in outgoing.iter().enumerate() {
            let valence = out.len();
            let Some(&start) = out.iter().min() else {
                return Err(MeshError::ValenceOutOfRange { vertex: v as MeshVertex, valence });
            };
            let mut fan = Vec::with_capacity(valence);
            let mut h = start;
            loop {
                fan.push(h);
                h = twins[prev(h) as usize];
                if h == start || fan.len() > valence {
                    break;
                }
            }
            if fan.len() != valence {
                return Err(MeshError::NonManifold {
                    vertex: v as MeshVertex,
                    reason: "incident faces do not form a single fan".into(),
                });
            }
            if !(3..=5).contains(&valence) {
                return Err(MeshError::ValenceOutOfRange { vertex: v as MeshVertex, valence });
            }
            for (s, &h) in fan.iter().enumerate() {
                slots[h as usize] = s as u8;
            }
            fans.push(fan);
        }

        Ok(QuadMesh { positions, faces, twins, fans, slots })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.faces.len() * 2
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn faces(&self) -> &[[MeshVertex; 4]] {
        &self.faces
    }

    pub fn position(&self, v: MeshVertex) -> [f64; 3] {
        self.positions[v as usize]
    }

    pub fn valence(&self, v: MeshVertex) -> usize {
        self.fans[v as usize].len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    pub fn origin(&self, h: HalfEdge) -> MeshVertex {
        self.faces[h as usize / 4][h as usize % 4]
    }

    pub fn target(&self, h: HalfEdge) -> MeshVertex {
        self.faces[h as usize / 4][(h as usize + 1) % 4]
    }

    pub fn twin(&self, h: HalfEdge) -> HalfEdge {
        self.twins[h as usize]
    }

    /// Radial slot of `h` around its origin.
    pub fn slot(&self, h: HalfEdge) -> usize {
        self.slots[h as usize] as usize
    }

    /// Outgoing half-edge of `v` at radial slot `slot` (taken modulo valence).
    pub fn outgoing(&self, v: MeshVertex, slot: usize) -> HalfEdge {
        let fan = &self.fans[v as usize];
        fan[slot % fan.len()]
    }

    pub fn fan(&self, v: MeshVertex) -> &[HalfEdge] {
        &self.fans[v as usize]
    }

    /// Continues a streamline arriving along `h`: the outgoing half-edge
    /// opposite to the arrival direction. `None` at irregular vertices.
    pub fn straight_on(&self, h: HalfEdge) -> Option<HalfEdge> {
        let w = self.target(h);
        if self.valence(w) != 4 {
            return None;
        }
        let back = self.slot(self.twin(h));
        Some(self.outgoing(w, back + 2))
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        (0..self.vertex_count() as MeshVertex)
            .filter_map(|v| match self.valence(v) {
                3 => Some(Singularity { vertex: v, index: SingularityIndex::PlusQuarter }),
                5 => Some(Singularity { vertex: v, index: SingularityIndex::MinusQuarter }),
                _ => None,
            })
            .collect()
    }

    pub fn valence_histogram(&self) -> [usize; 3] {
        let mut hist = [0; 3];
        for v in 0..self.vertex_count() {
            hist[self.fans[v].len() - 3] += 1;
        }
        hist
    }

    /// Parses the OBJ dialect: `v x y z` and `f a b c d` records, 1-based.
    pub fn from_obj(source: &str) -> Result<Self, MeshError> {
        let mut positions = Vec::new();
        let mut faces = Vec::new();
        let mut warned = false;
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let keyword = parts.next().unwrap_or_default();
            match keyword {
                "v" => {
                    let coords: Vec<&str> = parts.collect();
                    if coords.len() < 3 || coords.len() > 4 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            message: format!("vertex record needs 3 coordinates, got {}", coords.len()),
                        });
                    }
                    let mut p = [0.0; 3];
                    for (k, c) in coords.iter().take(3).enumerate() {
                        p[k] = c.parse().map_err(|_| MeshError::Parse {
                            line: line_no,
                            message: format!("invalid coordinate `{c}`"),
                        })?;
                    }
                    positions.push(p);
                }
                "f" => {
                    let corners = parts
                        .map(|tok| {
                            let head = tok.split('/').next().unwrap_or(tok);
                            match head.parse::<usize>() {
                                Ok(i) if i >= 1 => Ok((i - 1) as MeshVertex),
                                _ => Err(MeshError::Parse {
                                    line: line_no,
                                    message: format!("invalid face index `{tok}`"),
                                }),
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if corners.len() != 4 {
                        return Err(MeshError::NonQuadFace { face: faces.len(), corners: corners.len() });
                    }
                    faces.push([corners[0], corners[1], corners[2], corners[3]]);
                }
                "vt" | "vn" | "vp" => {
                    if !warned {
                        log::warn!("line {line_no}: ignoring texture/normal records");
                        warned = true;
                    }
                }
                "o" | "g" | "s" | "usemtl" | "mtllib" => {}
                other => {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("unsupported record `{other}`"),
                    })
                }
            }
        }
        QuadMesh::new(positions, faces)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for p in &self.positions {
            let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1);
        }
        out
    }
}

fn prev(h: HalfEdge) -> HalfEdge {
    (h & !3) | ((h + 3) & 3)
}

fn torus_faces(rows: usize, cols: usize) -> (Vec<[f64; 3]>, Vec<[MeshVertex; 4]>) {
    let id = |i: usize, j: usize| ((i % rows) * cols + (j % cols)) as MeshVertex;
    let (major, minor) = (3.0, 1.0);
    let mut positions = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let phi = std::f64::consts::TAU * i as f64 / rows as f64;
        for j in 0..cols {
            let theta = std::f64::consts::TAU * j as f64 / cols as f64;
            let ring = major + minor * phi.cos();
            positions.push([ring * theta.cos(), ring * theta.sin(), minor * phi.sin()]);
        }
    }
    let mut faces = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            faces.push([id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    (positions, faces)
}

/// Regular `rows x cols` grid on a torus: genus one, every valence 4.
pub fn generate_torus_grid(rows: usize, cols: usize) -> Result<QuadMesh, MeshError> {
    if rows < 3 || cols < 3 {
        return Err(MeshError::TooSmall { rows, cols, min: 3 });
    }
    let (positions, faces) = torus_faces(rows, cols);
    QuadMesh::new(positions, faces)
}

/// Surface of a cube with every side split into `n x n` quads.
pub fn generate_cube_grid(n: usize) -> Result<QuadMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::TooSmall { rows: 0, cols: 0, min: 1 });
    }
    let n32 = n as u32;
    // (fixed axis, fixed value, u axis, v axis) with u x v pointing outwards.
    let sides: [(usize, u32, usize, usize); 6] = [
        (0, n32, 1, 2),
        (0, 0, 2, 1),
        (1, n32, 2, 0),
        (1, 0, 0, 2),
        (2, n32, 0, 1),
        (2, 0, 1, 0),
    ];
    let mut index: HashMap<[u32; 3], MeshVertex> = HashMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::with_capacity(6 * n * n);
    let mut vertex = |c: [u32; 3], positions: &mut Vec<[f64; 3]>| -> MeshVertex {
        *index.entry(c).or_insert_with(|| {
            positions.push([
                c[0] as f64 / n as f64 - 0.5,
                c[1] as f64 / n as f64 - 0.5,
                c[2] as f64 / n as f64 - 0.5,
            ]);
            (positions.len() - 1) as MeshVertex
        })
    };
    for &(axis, value, u, v) in &sides {
        let at = |i: u32, j: u32| {
            let mut c = [0u32; 3];
            c[axis] = value;
            c[u] = i;
            c[v] = j;
            c
        };
        for i in 0..n32 {
            for j in 0..n32 {
                let quad = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let ids = quad.map(|c| vertex(c, &mut positions));
                faces.push(ids);
            }
        }
    }
    QuadMesh::new(positions, faces)
}

/// Replaces the diagonal shared by the two faces around edge `(a, b)` with
/// the next diagonal of their hexagon. Valences of `a` and `b` drop by one,
/// two opposite hexagon corners gain one.
fn rotate_edge(faces: &mut [[MeshVertex; 4]], a: MeshVertex, b: MeshVertex) -> bool {
    let find = |faces: &[[MeshVertex; 4]], x: MeshVertex, y: MeshVertex| {
        faces.iter().enumerate().find_map(|(f, q)| {
            (0..4).find(|&i| q[i] == x && q[(i + 1) % 4] == y).map(|i| (f, i))
        })
    };
    let (Some((f1, i1)), Some((f2, i2))) = (find(faces, a, b), find(faces, b, a)) else {
        return false;
    };
    let q1 = faces[f1];
    let q2 = faces[f2];
    let (c, d) = (q1[(i1 + 2) % 4], q1[(i1 + 3) % 4]);
    let (e, f) = (q2[(i2 + 2) % 4], q2[(i2 + 3) % 4]);
    let exists = faces.iter().any(|q| (0..4).any(|i| q[i] == c && q[(i + 1) % 4] == e || q[i] == e && q[(i + 1) % 4] == c));
    if c == e || exists {
        return false;
    }
    faces[f1] = [c, d, a, e];
    faces[f2] = [e, f, b, c];
    true
}

/// Torus grid with one edge rotated near its centre, producing two adjacent
/// valence-3/valence-5 pairs.
pub fn generate_dipole_grid(rows: usize, cols: usize) -> Result<QuadMesh, MeshError> {
    if rows < 5 || cols < 5 {
        return Err(MeshError::TooSmall { rows, cols, min: 5 });
    }
    let (positions, mut faces) = torus_faces(rows, cols);
    let a = ((rows / 2) * cols + cols / 2) as MeshVertex;
    let b = ((rows / 2) * cols + (cols / 2 + 1) % cols) as MeshVertex;
    if !rotate_edge(&mut faces, a, b) {
        return Err(MeshError::SurgeryFailed { attempts: 1 });
    }
    QuadMesh::new(positions, faces)
}

/// Torus grid with `rotations` edge rotations at seeded random positions.
/// Rotations that would push a valence outside 3..=5 or duplicate an edge
/// are skipped.
pub fn generate_random_dipoles(
    rows: usize,
    cols: usize,
    rotations: usize,
    seed: u64,
) -> Result<QuadMesh, MeshError> {
    if rows < 5 || cols < 5 {
        return Err(MeshError::TooSmall { rows, cols, min: 5 });
    }
    let (positions, mut faces) = torus_faces(rows, cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut applied = 0;
    let mut attempts = 0;
    let budget = 200 * rotations.max(1);
    while applied < rotations {
        if attempts >= budget {
            return Err(MeshError::SurgeryFailed { attempts });
        }
        attempts += 1;
        let face = *faces.choose(&mut rng).expect("grid is non-empty");
        let corner = attempts % 4;
        let (a, b) = (face[corner], face[(corner + 1) % 4]);
        let mut trial = faces.clone();
        if !rotate_edge(&mut trial, a, b) {
            continue;
        }
        match QuadMesh::new(positions.clone(), trial.clone()) {
            Ok(_) => {
                faces = trial;
                applied += 1;
            }
            Err(_) => continue,
        }
    }
    QuadMesh::new(positions, faces)
}
