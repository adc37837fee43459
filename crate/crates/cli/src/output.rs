//! Artifact emission: CSV tables and JSON reports written through a
//! content-hashing directory handle, plus the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! repeated run with the same config and seed produces byte-identical
//! files. Timings live only in the manifest, which is written last and is
//! the one artifact excluded from its own listing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Shortest round-trip decimal form; the hyphen-less exponent style of
/// Display keeps the tables grep-friendly.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Normalize -0.0 so bitwise-equal runs cannot diverge in sign.
        "0".to_string()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Output directory handle that records every file it writes.
pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            write!(hex, "{b:02x}").unwrap();
        }
        let path = self.root.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.artifacts.push(ArtifactRecord {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: hex,
        });
        Ok(())
    }

    /// CSV table: header row plus one row per record, all floats in
    /// round-trip form.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl Iterator<Item = Vec<f64>>,
    ) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    text.push(',');
                }
                text.push_str(&fmt_f64(*v));
            }
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn artifacts(&self) -> &[ArtifactRecord] {
        &self.artifacts
    }

    /// Write the manifest itself (not listed among the artifacts) and
    /// finish the directory.
    pub fn finish(mut self, manifest: &RunManifest) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(manifest)
            .map_err(|e| CliError::Io(format!("serializing manifest: {e}")))?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text.as_bytes())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.artifacts.clear();
        Ok(())
    }
}

/// Machine-readable failure report, written next to any partial outputs
/// and printed to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub error: ErrorBody<'a>,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub kind: &'a str,
    pub message: &'a str,
    pub exit_code: i32,
}

pub fn error_json(err: &CliError) -> String {
    let report = ErrorReport {
        error: ErrorBody {
            kind: err.kind(),
            message: err.message(),
            exit_code: err.exit_code(),
        },
    };
    serde_json::to_string_pretty(&report).unwrap_or_else(|_| err.to_string())
}

/// Solver bookkeeping copied into the manifest.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverSummary {
    pub steps: usize,
    pub t_end: f64,
    pub max_conservation_defect: f64,
    pub max_defect_per_time: f64,
}

impl From<&twoshock::solver::RunReport> for SolverSummary {
    fn from(r: &twoshock::solver::RunReport) -> Self {
        Self {
            steps: r.steps,
            t_end: r.t_end,
            max_conservation_defect: r.max_conservation_defect,
            max_defect_per_time: r.max_defect_per_time,
        }
    }
}

/// Startup and closing audits attached to the manifest.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AuditBlock {
    /// |integral of (U0 - ansatz at t 0)| over (rho, m1, E).
    pub initial_mass_defect: Option<f64>,
    /// Largest |residual| of the diffusion-wave PDE sampled on the grid.
    pub wave_pde_residual: Option<f64>,
    /// Transverse Parseval splitting defect on seeded random fields.
    pub parseval_defect: Option<f64>,
    /// Largest Poincare ratio on seeded random band-limited fields.
    pub poincare_max: Option<f64>,
    /// Orthonormality defect of the collision-invariant basis.
    pub gram_defect: Option<f64>,
    /// Macro/micro projection identity defects.
    pub projection_defect: Option<f64>,
    /// Moment drift of one BGK collision application.
    pub collision_drift: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub package: String,
    pub version: String,
    pub config_path: String,
    /// Verbatim text of the scenario file.
    pub config_echo: String,
    pub overrides: crate::config::Overrides,
    pub seed: u64,
    pub wall_seconds: f64,
    pub solver: Option<SolverSummary>,
    pub audits: AuditBlock,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config_echo: String) -> Self {
        Self {
            command: command.to_string(),
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: config_path.display().to_string(),
            config_echo,
            overrides: Default::default(),
            seed: 0,
            wall_seconds: 0.0,
            solver: None,
            audits: Default::default(),
            artifacts: Vec::new(),
        }
    }
}
