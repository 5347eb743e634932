//! `sepgraph`: extract, simplify and inspect separatrix graphs of quad meshes.

mod commands;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{code, CliError};

/// Environment variable holding the log filter (`error`, `warn`, `info`, `debug`).
pub const LOG_ENV: &str = "SEPGRAPH_LOG";

#[derive(Debug, Parser)]
#[command(name = "sepgraph", version, about = "Separatrix graph extraction and simplification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the separatrix graph of an OBJ quad mesh.
    Extract {
        mesh: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run greedy simplification until a stop criterion fires.
    Simplify {
        /// OBJ mesh or graph JSON.
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        stop: StopArgs,
        #[command(flatten)]
        energy: EnergyArgs,
        /// Nodes the search may visit per separatrix.
        #[arg(long, default_value_t = sepgraph_core::search::DEFAULT_GREEDY_BUDGET)]
        node_budget: usize,
    },
    /// Exhaustive search over one macro-operation, compared with greedy.
    Oracle {
        /// OBJ mesh or graph JSON.
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = sepgraph_core::search::DEFAULT_ORACLE_BUDGET)]
        node_budget: usize,
        #[command(flatten)]
        energy: EnergyArgs,
    },
    /// Write a synthetic OBJ mesh.
    Gen {
        kind: MeshKind,
        /// torus: ROWS COLS; cube: N; dipole: ROWS COLS.
        #[arg(required = true)]
        dims: Vec<usize>,
        /// Number of random edge rotations (dipole only).
        #[arg(long)]
        rotations: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeshKind {
    Torus,
    Cube,
    Dipole,
}

#[derive(Debug, Clone, Args)]
pub struct StopArgs {
    #[arg(long)]
    pub target_regular: Option<usize>,
    /// Stop once |R| is at most this percentage of its initial value.
    #[arg(long)]
    pub target_percent: Option<f64>,
    /// Never take a repair whose drift exceeds this value.
    #[arg(long)]
    pub max_drift: Option<f64>,
    #[arg(long)]
    pub max_macro_ops: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EnergyArgs {
    /// Weight of the regular-vertex count.
    #[arg(long, default_value_t = 1.0)]
    pub energy_lr: f64,
    /// Weight of the total drift of rewired edges.
    #[arg(long, default_value_t = 1.0)]
    pub energy_lw: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract { mesh, out } => commands::extract(&mesh, &out),
        Command::Simplify { input, out, stop, energy, node_budget } => {
            commands::simplify(&input, &out, &stop, &energy, node_budget)
        }
        Command::Oracle { input, out, node_budget, energy } => commands::oracle(&input, &out, node_budget, &energy),
        Command::Gen { kind, dims, rotations, seed, out } => commands::gen(kind, &dims, rotations, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { code::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(code::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
