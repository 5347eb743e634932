use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use sepgraph_core::SeparatrixGraph;

use crate::error::CliError;

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub input_sha256: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, input: &Path, bytes: &[u8], config: serde_json::Value) -> Self {
        RunManifest {
            tool: "sepgraph",
            version: env!("CARGO_PKG_VERSION"),
            command,
            input: input.display().to_string(),
            input_sha256: hex::encode(Sha256::digest(bytes)),
            config,
            outputs: Vec::new(),
        }
    }
}

/// Collects files for one output directory and records them in the manifest.
pub struct OutDir {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl OutDir {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(OutDir { dir: dir.to_path_buf(), manifest })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(CliError::io(&path))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &to_json(value))
    }

    pub fn finish(self) -> Result<(), CliError> {
        let path = self.dir.join("manifest.json");
        fs::write(&path, to_json(&self.manifest)).map_err(CliError::io(&path))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub singularities: usize,
    pub separatrices: usize,
    pub regular: usize,
    pub total_length: f64,
    pub euler: i64,
}

impl GraphStats {
    pub fn of(g: &SeparatrixGraph, mesh_euler: Option<i64>) -> Self {
        let euler = if g.is_empty() { mesh_euler.unwrap_or(0) } else { g.face_census().euler };
        GraphStats {
            singularities: g.singular_vertices().len(),
            separatrices: g.separatrices().len(),
            regular: g.regular_count(),
            total_length: g.total_length(),
            euler,
        }
    }

    pub fn print(&self) {
        println!("singularities\t{}", self.singularities);
        println!("separatrices\t{}", self.separatrices);
        println!("regular\t{}", self.regular);
        println!("total_length\t{}", self.total_length);
        println!("euler\t{}", self.euler);
    }
}
