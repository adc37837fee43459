//! Verify a finished run directory against its manifest (re-hashing every
//! listed artifact) and emit a compact summary.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::{ArtifactRecord, OutDir, RunManifest};
use crate::CliError;

use super::{seal, Invocation};

/// The manifest fields the verifier consumes; solver and audit blocks are
/// passed through untyped.
#[derive(Debug, Deserialize)]
struct ManifestIn {
    command: String,
    package: String,
    version: String,
    seed: u64,
    wall_seconds: f64,
    solver: Option<serde_json::Value>,
    audits: serde_json::Value,
    artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub manifest: String,
    pub command: String,
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub wall_seconds: f64,
    pub artifact_count: usize,
    pub total_bytes: usize,
    pub verified: bool,
    pub missing: Vec<String>,
    pub mismatched: Vec<String>,
    pub solver: Option<serde_json::Value>,
    pub audits: serde_json::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

pub fn verify(manifest_path: &Path) -> Result<RunSummary, CliError> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", manifest_path.display())))?;
    let m: ManifestIn = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a run manifest: {e}", manifest_path.display())))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut missing = Vec::new();
    let mut mismatched = Vec::new();
    let mut total_bytes = 0usize;
    for a in &m.artifacts {
        total_bytes += a.bytes;
        match std::fs::read(dir.join(&a.path)) {
            Err(_) => missing.push(a.path.clone()),
            Ok(bytes) => {
                if bytes.len() != a.bytes || sha256_hex(&bytes) != a.sha256 {
                    mismatched.push(a.path.clone());
                }
            }
        }
    }
    Ok(RunSummary {
        manifest: manifest_path.display().to_string(),
        command: m.command,
        package: m.package,
        version: m.version,
        seed: m.seed,
        wall_seconds: m.wall_seconds,
        artifact_count: m.artifacts.len(),
        total_bytes,
        verified: missing.is_empty() && mismatched.is_empty(),
        missing,
        mismatched,
        solver: m.solver,
        audits: m.audits,
    })
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let clock = std::time::Instant::now();
    let summary = verify(&inv.config)?;
    println!(
        "{} run ({} {}), seed {}, {:.2}s wall",
        summary.command, summary.package, summary.version, summary.seed, summary.wall_seconds
    );
    println!(
        "artifacts: {} files, {} bytes, {}",
        summary.artifact_count,
        summary.total_bytes,
        if summary.verified { "all hashes match" } else { "HASH VERIFICATION FAILED" }
    );
    for p in &summary.missing {
        println!("  missing: {p}");
    }
    for p in &summary.mismatched {
        println!("  mismatched: {p}");
    }
    if let Some(s) = &summary.solver {
        println!("solver: {s}");
    }
    println!("audits: {}", summary.audits);

    let mut out = OutDir::create(&inv.out)?;
    out.write_json("summary.json", &summary)?;
    let text = std::fs::read_to_string(&inv.config)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", inv.config.display())))?;
    let mut manifest = RunManifest::new("report", &inv.config, text);
    manifest.seed = summary.seed;
    let failed = !summary.verified;
    let detail = summary
        .missing
        .iter()
        .chain(summary.mismatched.iter())
        .cloned()
        .collect::<Vec<_>>()
        .join(", ");
    seal(out, manifest, clock)?;
    if failed {
        return Err(CliError::Io(format!("artifact verification failed: {detail}")));
    }
    Ok(())
}
