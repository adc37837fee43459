use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use twoshock_cli::commands::{self, Invocation};
use twoshock_cli::config::{Fidelity, Overrides};
use twoshock_cli::output::error_json;
use twoshock_cli::CliError;

#[derive(Parser)]
#[command(
    name = "twoshock",
    version,
    about = "Planar two-shock stability laboratory: Riemann solutions, viscous profiles, \
             perturbed evolution at fluid and kinetic fidelity, and run diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file, TOML (or JSON by extension); the report command takes
    /// a run manifest here instead
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for artifacts and the run manifest
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override the scenario RNG seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Drop the diffusion-wave mass from the constructed background (keeps
    /// the profile shifts): the ablation control
    #[arg(long)]
    ablate_diffusion_wave: bool,
    /// Override the solver fidelity
    #[arg(long, value_enum, value_name = "ns|bgk")]
    fidelity: Option<Fidelity>,
    /// Override the transverse resolution, e.g. 24x24
    #[arg(long, value_name = "N2xN3", value_parser = parse_transverse)]
    transverse: Option<(usize, usize)>,
}

fn parse_transverse(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("expected N2xN3, got {s}"))?;
    let n2 = a.trim().parse().map_err(|e| format!("bad N2 in {s}: {e}"))?;
    let n3 = b.trim().parse().map_err(|e| format!("bad N3 in {s}: {e}"))?;
    Ok((n2, n3))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the two-shock Riemann problem and print the solution table
    Riemann(RunArgs),
    /// Solve viscous shock profiles; write tables and structural checks
    Profile(RunArgs),
    /// Evolve a perturbed scenario and emit trajectory diagnostics
    Stability(RunArgs),
    /// Velocity-lattice structure audits, plus a BGK run when configured
    Kinetic(RunArgs),
    /// Parameter sweep: nu_ref ladder against a fluid reference, or
    /// delta/amplitude families of stability runs
    Sweep(RunArgs),
    /// Re-hash a finished run directory against its manifest
    Report(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Riemann(a)
            | Command::Profile(a)
            | Command::Stability(a)
            | Command::Kinetic(a)
            | Command::Sweep(a)
            | Command::Report(a) => a,
        }
    }
}

impl RunArgs {
    fn invocation(&self) -> Invocation {
        Invocation {
            config: self.config.clone(),
            out: self.out.clone(),
            overrides: Overrides {
                seed: self.seed,
                fidelity: self.fidelity,
                ablate_diffusion_wave: self.ablate_diffusion_wave,
                transverse: self.transverse,
            },
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    let inv = cmd.args().invocation();
    match cmd {
        Command::Riemann(_) => commands::riemann::run(&inv),
        Command::Profile(_) => commands::profile::run(&inv),
        Command::Stability(_) => commands::stability::run(&inv),
        Command::Kinetic(_) => commands::kinetic::run(&inv),
        Command::Sweep(_) => commands::sweep::run(&inv),
        Command::Report(_) => commands::report::run(&inv),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli.command) {
        let json = error_json(&e);
        eprintln!("{json}");
        let out = &cli.command.args().out;
        // best effort: leave the same report next to any partial outputs
        if std::fs::create_dir_all(out).is_ok() {
            let _ = std::fs::write(out.join("error.json"), format!("{json}\n"));
        }
        std::process::exit(e.exit_code());
    }
}
