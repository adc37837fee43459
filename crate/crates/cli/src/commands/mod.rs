//! Subcommand implementations. Each takes a parsed invocation, drives the
//! core crate, and leaves a manifest plus artifacts in the output
//! directory.

pub mod kinetic;
pub mod profile;
pub mod report;
pub mod riemann;
pub mod stability;
pub mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Overrides, ScenarioConfig};
use crate::output::{OutDir, RunManifest};
use crate::CliError;

/// A subcommand invocation: scenario file, output directory, and the
/// command-line overrides layered on top of the file.
pub struct Invocation {
    pub config: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl Invocation {
    /// Load, override, and re-validate the scenario; open the output
    /// directory; start the manifest and the wall clock.
    pub fn prepare(
        &self,
        command: &str,
    ) -> Result<(ScenarioConfig, OutDir, RunManifest, Instant), CliError> {
        let (mut cfg, echo) = ScenarioConfig::load(&self.config)?;
        cfg.apply(&self.overrides);
        cfg.validate()?;
        let out = OutDir::create(&self.out)?;
        let mut manifest = RunManifest::new(command, &self.config, echo);
        manifest.overrides = self.overrides.clone();
        manifest.seed = cfg.seed;
        Ok((cfg, out, manifest, Instant::now()))
    }

    pub fn out_path(&self) -> &Path {
        &self.out
    }
}

/// Record wall time and the artifact list, then write the manifest.
pub fn seal(out: OutDir, mut manifest: RunManifest, clock: Instant) -> Result<(), CliError> {
    manifest.wall_seconds = clock.elapsed().as_secs_f64();
    manifest.artifacts = out.artifacts().to_vec();
    out.finish(&manifest)
}
