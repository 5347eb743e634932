use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use sepgraph_core::mesh::{generate_cube_grid, generate_dipole_grid, generate_random_dipoles, generate_torus_grid};
use sepgraph_core::search::SimplifyReport;
use sepgraph_core::trace::trace_shared;
use sepgraph_core::{
    energy_of, exhaustive_search, greedy_simplify, EnergyConfig, LogEntry, OracleResult, QuadMesh, SearchConfig,
    SearchError, SeparatrixGraph, StopCriteria,
};

use crate::error::CliError;
use crate::output::{GraphStats, OutDir, RunManifest};
use crate::{svg, EnergyArgs, MeshKind, StopArgs};

struct Input {
    bytes: Vec<u8>,
    graph: SeparatrixGraph,
    mesh_euler: Option<i64>,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(CliError::io(path))
}

fn text(bytes: &[u8]) -> Result<&str, CliError> {
    std::str::from_utf8(bytes).map_err(|e| CliError::Mesh(sepgraph_core::mesh::MeshError::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    }))
}

fn load_mesh(path: &Path) -> Result<(Vec<u8>, Arc<QuadMesh>), CliError> {
    let bytes = read(path)?;
    let mesh = QuadMesh::from_obj(text(&bytes)?)?;
    Ok((bytes, Arc::new(mesh)))
}

/// Reads an OBJ mesh (traced on the fly) or a graph JSON document.
fn load_input(path: &Path) -> Result<Input, CliError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let bytes = read(path)?;
        let graph = SeparatrixGraph::from_json(text(&bytes)?)?;
        let report = graph.validate();
        if !report.is_valid() {
            return Err(CliError::InvalidGraph(report.to_string()));
        }
        return Ok(Input { bytes, graph, mesh_euler: None });
    }
    let (bytes, mesh) = load_mesh(path)?;
    let euler = mesh.euler_characteristic();
    let graph = trace_shared(mesh)?.into_graph();
    Ok(Input { bytes, graph, mesh_euler: Some(euler) })
}

fn energy_config(args: &EnergyArgs) -> Result<EnergyConfig, CliError> {
    let cfg = EnergyConfig { lambda_r: args.energy_lr, lambda_w: args.energy_lw };
    cfg.validate()?;
    Ok(cfg)
}

fn write_graph(out: &mut OutDir, prefix: &str, g: &SeparatrixGraph) -> Result<(), CliError> {
    out.write(&format!("{prefix}.json"), &g.to_json())?;
    out.write(&format!("{prefix}.svg"), &svg::render(g))
}

pub fn extract(mesh_path: &Path, out: &Path) -> Result<(), CliError> {
    let (bytes, mesh) = load_mesh(mesh_path)?;
    let euler = mesh.euler_characteristic();
    let extraction = trace_shared(mesh)?;
    if extraction.is_empty() {
        println!("empty graph: the mesh has no singular vertices");
    }
    let g = extraction.into_graph();
    let stats = GraphStats::of(&g, Some(euler));
    stats.print();
    let mut dir = OutDir::create(out, RunManifest::new("extract", mesh_path, &bytes, json!({})))?;
    write_graph(&mut dir, "graph", &g)?;
    dir.write_json("stats.json", &stats)?;
    dir.finish()
}

fn log_lines(log: &[LogEntry]) -> String {
    log.iter()
        .map(|e| serde_json::to_string(e).expect("serializable") + "\n")
        .collect()
}

fn step_table(report: &SimplifyReport) -> String {
    let mut s = String::from("macro_index\tregular\twarping\tenergy\tswitches\n");
    for sample in &report.trace {
        let switches = match sample.macro_index {
            0 => 0,
            i => report.switches[i - 1].0,
        };
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            sample.macro_index, sample.regular, sample.warping, sample.energy, switches
        ));
    }
    s
}

pub fn simplify(
    input: &Path,
    out: &Path,
    stop: &StopArgs,
    energy: &EnergyArgs,
    node_budget: usize,
) -> Result<(), CliError> {
    let criteria = StopCriteria {
        target_regular: stop.target_regular,
        target_percent: stop.target_percent,
        max_drift: stop.max_drift,
        max_macro_ops: stop.max_macro_ops,
    };
    let cfg = SearchConfig { stop: criteria, energy: energy_config(energy)?, node_budget };
    criteria.validate().map_err(CliError::from)?;
    let Input { bytes, mut graph, mesh_euler } = load_input(input)?;
    let report = greedy_simplify(&mut graph, &cfg)?;
    graph.commit();

    let stats = GraphStats::of(&graph, mesh_euler);
    stats.print();
    println!("macro_ops\t{}", report.macro_count());
    println!("stop\t{}", serde_json::to_value(report.stop).expect("serializable").as_str().unwrap_or_default());

    let config = serde_json::to_value(cfg).expect("serializable");
    let mut dir = OutDir::create(out, RunManifest::new("simplify", input, &bytes, config))?;
    write_graph(&mut dir, "graph", &graph)?;
    dir.write("log.jsonl", &log_lines(&report.log))?;
    dir.write("stats.tsv", &step_table(&report))?;
    dir.write_json(
        "summary.json",
        &json!({
            "stop": report.stop,
            "macro_ops": report.macro_count(),
            "search": report.stats,
            "trace": report.trace,
            "final": stats,
        }),
    )?;
    dir.finish()
}

fn greedy_single(g: &SeparatrixGraph, energy: EnergyConfig) -> Result<(SeparatrixGraph, SimplifyReport), CliError> {
    let mut greedy = g.clone();
    let cfg = SearchConfig {
        energy,
        ..SearchConfig::new(StopCriteria { max_macro_ops: Some(1), ..Default::default() })
    };
    let report = greedy_simplify(&mut greedy, &cfg)?;
    greedy.commit();
    Ok((greedy, report))
}

pub fn oracle(input: &Path, out: &Path, node_budget: usize, energy: &EnergyArgs) -> Result<(), CliError> {
    let energy = energy_config(energy)?;
    let Input { bytes, graph, .. } = load_input(input)?;
    let (greedy, greedy_report) = greedy_single(&graph, energy)?;
    let greedy_energy = energy_of(&greedy, &energy)?;
    let greedy_json = json!({
        "energy": greedy_energy,
        "regular": greedy.regular_count(),
        "warping": greedy.warping(),
        "macro_ops": greedy_report.macro_count(),
        "stats": greedy_report.stats,
        "log": greedy_report.log,
    });
    let config = json!({ "node_budget": node_budget, "energy": energy });
    let mut dir = OutDir::create(out, RunManifest::new("oracle", input, &bytes, config))?;

    let report = match exhaustive_search(&graph, &energy, node_budget) {
        Ok(r) => r,
        Err(SearchError::BudgetExceeded { budget, visited }) => {
            println!("status\tbudget_exceeded");
            dir.write_json(
                "oracle.json",
                &json!({
                    "status": "budget_exceeded",
                    "budget": budget,
                    "oracle": null,
                    "greedy": greedy_json,
                    "gap": null,
                }),
            )?;
            dir.finish()?;
            return Err(CliError::BudgetExceeded { budget, visited });
        }
        Err(e) => return Err(e.into()),
    };
    let counters = json!({
        "budget": node_budget,
        "visited": report.visited,
        "roots": report.roots,
        "leaves": report.leaves,
        "stuck": report.stuck,
    });
    let doc = match &report.result {
        OracleResult::NoSolution => {
            println!("status\tno_solution");
            json!({ "status": "no_solution", "search": counters, "oracle": null, "greedy": greedy_json, "gap": null })
        }
        OracleResult::Found(best) => {
            let gap = greedy_energy - best.energy;
            println!("status\tfound");
            println!("oracle_energy\t{}", best.energy);
            println!("greedy_energy\t{greedy_energy}");
            println!("gap\t{gap}");
            write_graph(&mut dir, "oracle_graph", &best.graph)?;
            json!({
                "status": "found",
                "search": counters,
                "oracle": {
                    "energy": best.energy,
                    "root": best.root,
                    "regular": best.graph.regular_count(),
                    "warping": best.graph.warping(),
                    "log": best.log,
                },
                "greedy": greedy_json,
                "gap": gap,
            })
        }
    };
    write_graph(&mut dir, "greedy_graph", &greedy)?;
    dir.write_json("oracle.json", &doc)?;
    dir.finish()
}

pub fn gen(kind: MeshKind, dims: &[usize], rotations: Option<usize>, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let want = match kind {
        MeshKind::Cube => 1,
        MeshKind::Torus | MeshKind::Dipole => 2,
    };
    if dims.len() != want {
        return Err(CliError::Usage(format!("{kind:?} takes {want} dimension(s), got {}", dims.len())));
    }
    if rotations.is_some() && !matches!(kind, MeshKind::Dipole) {
        return Err(CliError::Usage("--rotations applies to dipole meshes only".into()));
    }
    let mesh = match kind {
        MeshKind::Torus => generate_torus_grid(dims[0], dims[1])?,
        MeshKind::Cube => generate_cube_grid(dims[0])?,
        MeshKind::Dipole => match rotations {
            Some(k) => generate_random_dipoles(dims[0], dims[1], k, seed)?,
            None => generate_dipole_grid(dims[0], dims[1])?,
        },
    };
    let obj = mesh.to_obj();
    match out {
        Some(path) => fs::write(path, obj).map_err(CliError::io(path)),
        None => {
            print!("{obj}");
            Ok(())
        }
    }
}
