//! SVG 1.1 drawing of a separatrix graph.
//!
//! Positions go through a fixed isometric projection:
//! `u = (x - z) cos 30°`, `v = (x + z) sin 30° - y`.

use std::fmt::Write as _;

use sepgraph_core::graph::Segment;
use sepgraph_core::{SeparatrixGraph, VertexKind};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2"];
const DIAGONAL: &str = "#d62728";
const MIXED: &str = "#ff7f0e";

fn project(p: [f64; 3]) -> (f64, f64) {
    let (s, c) = (0.5, 3f64.sqrt() / 2.0);
    ((p[0] - p[2]) * c, (p[0] + p[2]) * s - p[1])
}

fn edge_colour(provenance: &[Segment]) -> &'static str {
    let diagonal = provenance.iter().filter(|s| matches!(s, Segment::Diagonal { .. })).count();
    if diagonal == provenance.len() {
        return DIAGONAL;
    }
    if diagonal > 0 {
        return MIXED;
    }
    match provenance.first() {
        Some(Segment::Traced { separatrix }) => PALETTE[*separatrix as usize % PALETTE.len()],
        _ => PALETTE[0],
    }
}

pub fn render(g: &SeparatrixGraph) -> String {
    let points: Vec<(f64, f64)> = g
        .edge_ids()
        .flat_map(|e| g.edge(e).polyline.iter().map(|&p| project(p)))
        .chain(g.vertex_ids().map(|v| project(g.vertex(v).position)))
        .collect();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(u, v) in &points {
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
    }
    if points.is_empty() {
        lo = (0.0, 0.0);
        hi = (1.0, 1.0);
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: [f64; 3]| {
        let (u, v) = project(p);
        (MARGIN + (u - lo.0) * scale, MARGIN + (v - lo.1) * scale)
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<g id="edges" fill="none" stroke-width="1.5">"#);
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let pts: Vec<String> = edge
            .polyline
            .iter()
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline id="e{}" stroke="{}" points="{}"/>"#,
            e,
            edge_colour(&edge.provenance),
            pts.join(" ")
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g id="vertices" stroke="#000000" stroke-width="0.5">"##);
    for v in g.vertex_ids() {
        let vertex = g.vertex(v);
        let (x, y) = map(vertex.position);
        match vertex.kind {
            VertexKind::Regular4 => {
                let _ = writeln!(
                    out,
                    r##"<rect id="v{v}" x="{:.2}" y="{:.2}" width="5" height="5" fill="#ffffff"/>"##,
                    x - 2.5,
                    y - 2.5
                );
            }
            kind => {
                let fill = if kind == VertexKind::Singular3 { "#1f3fbf" } else { "#bf1f1f" };
                let _ = writeln!(out, r#"<circle id="v{v}" cx="{x:.2}" cy="{y:.2}" r="4.5" fill="{fill}"/>"#);
            }
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
