//! Shared fixtures for the criterion benches.

use sepgraph_core::mesh::generate_random_dipoles;
use sepgraph_core::{trace_separatrices, QuadMesh, SeparatrixGraph};

/// Square grid with `rotations` seeded edge rotations.
pub fn dipole_mesh(size: usize, rotations: usize) -> QuadMesh {
    (0..64)
        .find_map(|seed| {
            let mesh = generate_random_dipoles(size, size, rotations, seed).ok()?;
            trace_separatrices(&mesh).ok()?;
            Some(mesh)
        })
        .expect("some seed yields a traceable mesh")
}

pub fn dipole_graph(size: usize, rotations: usize) -> SeparatrixGraph {
    trace_separatrices(&dipole_mesh(size, rotations)).expect("traceable").into_graph()
}
