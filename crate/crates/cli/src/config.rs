//! Scenario files: TOML (JSON also accepted) descriptions of a run.
//!
//! Every physical constant is spelled out in the file; the only defaulted
//! values are numerical knobs with documented defaults (CFL 0.4, RK2 time
//! scheme, profile tail tolerance 1e-9, diagnostics toggles). Configs are
//! validated on load and echoed verbatim into the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use twoshock::euler::{
    solve_intermediate_state, strength_for_delta, symmetric_two_shock, two_shock_data,
    CompositeWaveSolution, RiemannData,
};
use twoshock::gas::GasState;
use twoshock::profile::GridParams;
use twoshock::solver::TimeScheme;
use twoshock::transport::Transport;

use crate::CliError;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    #[default]
    Ns,
    Bgk,
}

impl std::fmt::Display for Fidelity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Fidelity::Ns => "ns",
            Fidelity::Bgk => "bgk",
        })
    }
}

/// Primitive far-field state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl StateSpec {
    pub fn to_state(&self) -> GasState {
        GasState::new(self.rho, self.u, self.theta)
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(cfg_err(format!("states.{name}.rho must be positive, got {}", self.rho)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(cfg_err(format!(
                "states.{name}.theta must be positive, got {}",
                self.theta
            )));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(cfg_err(format!("states.{name}.u must be finite")));
        }
        Ok(())
    }
}

/// End states, given either directly, as a left state plus forward shock
/// strengths, or as an intermediate state plus a symmetric total strength.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesSpec {
    pub left: Option<StateSpec>,
    pub right: Option<StateSpec>,
    pub strength1: Option<f64>,
    pub strength3: Option<f64>,
    pub mid: Option<StateSpec>,
    pub delta: Option<f64>,
}

/// End states after resolving the spec form.
pub enum ResolvedStates {
    /// Identical end states: a constant background, no wave structure.
    Constant(GasState),
    /// A two-shock composite datum with its intermediate state.
    Composite { data: RiemannData, sol: CompositeWaveSolution },
}

impl StatesSpec {
    pub fn resolve(&self) -> Result<ResolvedStates, CliError> {
        match (&self.left, &self.right, &self.mid) {
            (Some(l), Some(r), None) => {
                if self.strength1.is_some() || self.strength3.is_some() || self.delta.is_some() {
                    return Err(cfg_err(
                        "states: left+right form takes no strength1/strength3/delta",
                    ));
                }
                l.validate("left")?;
                r.validate("right")?;
                let (left, right) = (l.to_state(), r.to_state());
                let jump = (right.to_conserved().sub(&left.to_conserved())).norm();
                if jump <= 1e-13 * left.to_conserved().norm().max(1.0) {
                    return Ok(ResolvedStates::Constant(left));
                }
                let data = RiemannData::new(left, right);
                let sol = solve_intermediate_state(&data)?;
                Ok(ResolvedStates::Composite { data, sol })
            }
            (Some(l), None, None) => {
                let (s1, s3) = match (self.strength1, self.strength3) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(cfg_err(
                            "states: left-state form needs both strength1 and strength3",
                        ))
                    }
                };
                if self.delta.is_some() {
                    return Err(cfg_err("states: strength form takes no delta"));
                }
                l.validate("left")?;
                if !(s1 > 0.0) || !(s3 > 0.0) {
                    return Err(cfg_err(format!(
                        "states.strength1/strength3 must be positive, got {s1} and {s3}"
                    )));
                }
                let (data, sol) = two_shock_data(&l.to_state(), s1, s3)?;
                Ok(ResolvedStates::Composite { data, sol })
            }
            (None, None, Some(m)) => {
                let delta = self
                    .delta
                    .ok_or_else(|| cfg_err("states: mid form needs a target delta"))?;
                if self.strength1.is_some() || self.strength3.is_some() {
                    return Err(cfg_err("states: mid form takes no strength1/strength3"));
                }
                m.validate("mid")?;
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(cfg_err(format!(
                        "states.delta must be positive, got {delta}"
                    )));
                }
                let strength = strength_for_delta(&m.to_state(), delta)?;
                let data = symmetric_two_shock(&m.to_state(), strength)?;
                let sol = solve_intermediate_state(&data)?;
                Ok(ResolvedStates::Composite { data, sol })
            }
            _ => Err(cfg_err(
                "states: give either left+right, left+strength1+strength3, or mid+delta",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n1: usize,
    /// Transverse resolutions over the unit torus; 1 means planar.
    #[serde(default = "one")]
    pub n2: usize,
    #[serde(default = "one")]
    pub n3: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    pub mu_ref: f64,
    pub theta_ref: f64,
    /// Defaults to the monatomic 2/3.
    pub prandtl: Option<f64>,
}

impl TransportSpec {
    pub fn to_transport(&self) -> Result<Transport, CliError> {
        if !(self.mu_ref >= 0.0 && self.mu_ref.is_finite()) {
            return Err(cfg_err(format!(
                "transport.mu_ref must be nonnegative, got {}",
                self.mu_ref
            )));
        }
        if !(self.theta_ref > 0.0) {
            return Err(cfg_err(format!(
                "transport.theta_ref must be positive, got {}",
                self.theta_ref
            )));
        }
        let pr = self.prandtl.unwrap_or(2.0 / 3.0);
        if !(pr > 0.0) {
            return Err(cfg_err(format!("transport.prandtl must be positive, got {pr}")));
        }
        Ok(Transport::new(self.mu_ref, self.theta_ref, pr))
    }
}

/// Velocity lattice and collision frequency for kinetic runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSpec {
    pub v_max: f64,
    pub n_per_axis: usize,
    pub nu_ref: f64,
    pub theta_ref: f64,
}

impl KineticSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.v_max > 0.0) {
            return Err(cfg_err(format!("kinetic.v_max must be positive, got {}", self.v_max)));
        }
        if self.n_per_axis < 2 {
            return Err(cfg_err(format!(
                "kinetic.n_per_axis must be at least 2, got {}",
                self.n_per_axis
            )));
        }
        if !(self.nu_ref > 0.0) {
            return Err(cfg_err(format!("kinetic.nu_ref must be positive, got {}", self.nu_ref)));
        }
        if !(self.theta_ref > 0.0) {
            return Err(cfg_err(format!(
                "kinetic.theta_ref must be positive, got {}",
                self.theta_ref
            )));
        }
        Ok(())
    }
}

/// Shock profile solver controls and the delta sweep for profile reports.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub spacing: Option<f64>,
    pub half_width: Option<f64>,
    /// Tail truncation tolerance; defaults to 1e-9.
    pub tail_tol: Option<f64>,
    /// Wave strengths delta for the profile sweep (profile command only).
    pub deltas: Option<Vec<f64>>,
}

impl ProfileSpec {
    pub fn grid_params(&self) -> GridParams {
        let mut p = GridParams::default();
        p.spacing = self.spacing;
        p.half_width = self.half_width;
        if let Some(tol) = self.tail_tol {
            p.tail_tol = tol;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    /// Seeded multi-bump pencil with exactly zero discrete mass.
    Bumps,
    /// A single bump carrying a prescribed excess mass along the wave
    /// directions (r1, r2, r3).
    Excess,
    /// Density bump at constant pressure and velocity: a pure second-family
    /// (contact) deviation.
    Contact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransverseSpec {
    pub amplitude: f64,
    /// Weights applied to the band-limited scalar in each conserved slot.
    pub components: [f64; 5],
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Bump amplitude (bumps/contact kinds).
    pub amplitude: Option<f64>,
    /// Number of random bumps (bumps kind).
    pub count: Option<usize>,
    /// Random bump centers stay within this distance of the origin.
    pub inner: Option<f64>,
    /// Random bump width range.
    pub width: Option<[f64; 2]>,
    /// Excess mass coefficients along (r1, r2, r3) (excess kind).
    pub coefficients: Option<[f64; 3]>,
    /// Carrier bump geometry (excess/contact kinds).
    pub center: Option<f64>,
    pub bump_width: Option<f64>,
    pub transverse: Option<TransverseSpec>,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let need = |field: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(cfg_err(format!(
                    "perturbation.{field} is required for kind {:?}",
                    self.kind
                )))
            }
        };
        match self.kind {
            PerturbationKind::None => {}
            PerturbationKind::Bumps => {
                need("amplitude", self.amplitude.is_some())?;
                need("count", self.count.is_some())?;
                need("inner", self.inner.is_some())?;
                need("width", self.width.is_some())?;
                let w = self.width.unwrap();
                if !(w[0] > 0.0 && w[1] > w[0]) {
                    return Err(cfg_err(format!(
                        "perturbation.width must be an increasing positive pair, got {w:?}"
                    )));
                }
            }
            PerturbationKind::Excess => {
                need("coefficients", self.coefficients.is_some())?;
                need("center", self.center.is_some())?;
                need("bump_width", self.bump_width.is_some())?;
            }
            PerturbationKind::Contact => {
                need("amplitude", self.amplitude.is_some())?;
                need("center", self.center.is_some())?;
                need("bump_width", self.bump_width.is_some())?;
            }
        }
        if let Some(t) = &self.transverse {
            if !(t.width > 0.0) {
                return Err(cfg_err(format!(
                    "perturbation.transverse.width must be positive, got {}",
                    t.width
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeSpec {
    Rk2,
    Rk3,
}

impl SchemeSpec {
    pub fn to_scheme(self) -> TimeScheme {
        match self {
            SchemeSpec::Rk2 => TimeScheme::Rk2,
            SchemeSpec::Rk3 => TimeScheme::Rk3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub t_end: f64,
    /// Snapshot times strictly inside (0, t_end); 0 and t_end always fire.
    #[serde(default)]
    pub output_times: Vec<f64>,
    /// Safety factor on the stability bound; defaults to 0.4.
    pub cfl: Option<f64>,
    /// Defaults to rk2.
    pub scheme: Option<SchemeSpec>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(cfg_err(format!("run.t_end must be positive, got {}", self.t_end)));
        }
        if let Some(c) = self.cfl {
            if !(c > 0.0 && c <= 1.0) {
                return Err(cfg_err(format!("run.cfl must lie in (0, 1], got {c}")));
            }
        }
        if self.output_times.iter().any(|t| !t.is_finite()) {
            return Err(cfg_err("run.output_times must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MicroSpec {
    #[default]
    Skip,
    Surrogate,
    Kinetic,
}

/// Per-snapshot observable toggles. Everything defaults on except the
/// microscopic terms, which need a velocity grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    pub energy: bool,
    pub micro: MicroSpec,
    /// Velocity lattice for the surrogate microscopic terms on fluid runs.
    pub micro_v_max: Option<f64>,
    pub micro_n: Option<usize>,
    pub entropy: bool,
    pub frame: bool,
    pub snapshots: bool,
    /// Times at which characteristic-variable profiles are written; must be
    /// a subset of the snapshot times.
    pub z_times: Vec<f64>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            energy: true,
            micro: MicroSpec::Skip,
            micro_v_max: None,
            micro_n: None,
            entropy: true,
            frame: true,
            snapshots: true,
            z_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NuRef,
    Delta,
    Amplitude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// One scenario file. Sections are optional at parse time; each command
/// checks for the sections it needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: Option<String>,
    #[serde(default)]
    pub fidelity: Fidelity,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ablate_diffusion_wave: bool,
    pub states: Option<StatesSpec>,
    pub grid: Option<GridSpec>,
    pub transport: Option<TransportSpec>,
    pub kinetic: Option<KineticSpec>,
    pub profile: Option<ProfileSpec>,
    pub perturbation: Option<PerturbationSpec>,
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    pub sweep: Option<SweepSpec>,
}

/// Command-line overrides layered on top of the file, recorded in the
/// manifest next to the verbatim config echo.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fidelity: Option<Fidelity>,
    pub ablate_diffusion_wave: bool,
    pub transverse: Option<(usize, usize)>,
}

impl ScenarioConfig {
    /// Parse TOML (or JSON, by file extension) and validate field ranges.
    /// Returns the config together with the verbatim file text.
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let cfg: ScenarioConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(f) = ov.fidelity {
            self.fidelity = f;
        }
        if ov.ablate_diffusion_wave {
            self.ablate_diffusion_wave = true;
        }
        if let Some((n2, n3)) = ov.transverse {
            if let Some(g) = &mut self.grid {
                g.n2 = n2;
                g.n3 = n3;
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(g) = &self.grid {
            if g.n1 < 5 {
                return Err(cfg_err(format!("grid.n1 must be at least 5, got {}", g.n1)));
            }
            if !(g.half_width > 0.0) {
                return Err(cfg_err(format!(
                    "grid.half_width must be positive, got {}",
                    g.half_width
                )));
            }
            if g.n2 == 0 || g.n3 == 0 {
                return Err(cfg_err("grid.n2 and grid.n3 must be at least 1"));
            }
        }
        if let Some(t) = &self.transport {
            t.to_transport()?;
        }
        if let Some(k) = &self.kinetic {
            k.validate()?;
        }
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        if let Some(r) = &self.run {
            r.validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(cfg_err("sweep.values must be nonempty"));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(cfg_err("sweep.values must be finite"));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> Result<&StatesSpec, CliError> {
        self.states.as_ref().ok_or_else(|| cfg_err("missing [states] section"))
    }

    pub fn grid_spec(&self) -> Result<&GridSpec, CliError> {
        self.grid.as_ref().ok_or_else(|| cfg_err("missing [grid] section"))
    }

    pub fn transport_spec(&self) -> Result<&TransportSpec, CliError> {
        self.transport.as_ref().ok_or_else(|| cfg_err("missing [transport] section"))
    }

    pub fn kinetic_spec(&self) -> Result<&KineticSpec, CliError> {
        self.kinetic.as_ref().ok_or_else(|| cfg_err("missing [kinetic] section"))
    }

    pub fn run_spec(&self) -> Result<&RunSpec, CliError> {
        self.run.as_ref().ok_or_else(|| cfg_err("missing [run] section"))
    }

    /// Effective transport law: the configured one at Navier-Stokes
    /// fidelity, the collision-matched Chapman-Enskog limit at BGK fidelity.
    pub fn effective_transport(&self) -> Result<Transport, CliError> {
        match self.fidelity {
            Fidelity::Ns => self.transport_spec()?.to_transport(),
            Fidelity::Bgk => {
                let k = self.kinetic_spec()?;
                Ok(Transport::bgk_limit(k.nu_ref, k.theta_ref))
            }
        }
    }
}
