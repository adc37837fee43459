//! From a validated config to a runnable scene: composite wave, profiles,
//! mass-decomposed ansatz, and the synthesized initial field.
//!
//! The unperturbed object is the plain superposition of the two profiles;
//! the perturbation pencil (and optional band-limited transverse part) is
//! added on top. The shifted-profile-plus-diffusion-wave ansatz is then
//! built from the pencil's exact excess mass, so the perturbation seen by
//! the diagnostics carries zero total mass up to quadrature tails.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twoshock::ansatz::{
    build_ansatz, decompose_initial_mass, wave_directions, CompositeAnsatz, MassDecomposition,
};
use twoshock::euler::{CompositeWaveSolution, Family, RiemannData};
use twoshock::gas::GasState;
use twoshock::kinetic::{CollisionFrequency, VelocityGrid};
use twoshock::profile::{solve_profile, ShockProfile};
use twoshock::solver::perturb::{
    add_pencil, band_limited_transverse, pencil_field, random_zero_mass, set_exact_mass,
    BumpShape, BumpSpec,
};
use twoshock::solver::{
    BgkSystem, FluidField, Grid, KahanSum, KineticField, NsSystem, RunConfig, TimeScheme,
};
use twoshock::transport::Transport;

use crate::config::{
    Fidelity, PerturbationKind, PerturbationSpec, ResolvedStates, ScenarioConfig,
};
use crate::CliError;

pub struct ComposedWave {
    pub data: RiemannData,
    pub sol: CompositeWaveSolution,
    pub p1: ShockProfile,
    pub p3: ShockProfile,
}

pub enum Background {
    Composite { wave: Box<ComposedWave>, dec: MassDecomposition, ansatz: CompositeAnsatz },
    Constant(GasState),
}

pub struct Scenario {
    pub grid: Grid,
    pub transport: Transport,
    pub background: Background,
    pub pencil: Vec<[f64; 5]>,
    /// Band-limited transverse scalar and its per-component weights.
    pub transverse: Option<(Vec<f64>, [f64; 5])>,
    /// Exact excess mass of the pencil in (rho, m1, E).
    pub excess: [f64; 3],
    pub run: RunConfig,
    pub seed: u64,
    pub fidelity: Fidelity,
    pub ablated: bool,
}

/// Solve both viscous fronts of a composite datum.
pub fn solve_fronts(
    sol: &CompositeWaveSolution,
    transport: Transport,
    params: &twoshock::profile::GridParams,
) -> Result<(ShockProfile, ShockProfile), CliError> {
    let p1 = solve_profile(&sol.left, &sol.intermediate, sol.s1, Family::One, transport, params)?;
    let p3 =
        solve_profile(&sol.right, &sol.intermediate, sol.s3, Family::Three, transport, params)?;
    Ok((p1, p3))
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let gs = cfg.grid_spec()?;
        let grid = Grid::new(gs.half_width, gs.n1, gs.n2, gs.n3)
            .map_err(|e| CliError::Config(format!("grid: {e}")))?;
        let transport = cfg.effective_transport()?;
        let run_spec = cfg.run_spec()?;
        let run = RunConfig {
            scheme: run_spec.scheme.map(|s| s.to_scheme()).unwrap_or(TimeScheme::Rk2),
            cfl: run_spec.cfl.unwrap_or(0.4),
            t_end: run_spec.t_end,
            output_times: run_spec.output_times.clone(),
        };
        if cfg.fidelity == Fidelity::Bgk && !grid.is_planar() {
            return Err(CliError::Config(
                "bgk fidelity needs a planar grid (n2 = n3 = 1)".into(),
            ));
        }

        let resolved = cfg.states()?.resolve()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        // Perturbation pencil first, so its excess can steer the ansatz.
        let default_pert =
            PerturbationSpec {
                kind: PerturbationKind::None,
                amplitude: None,
                count: None,
                inner: None,
                width: None,
                coefficients: None,
                center: None,
                bump_width: None,
                transverse: None,
            };
        let pert = cfg.perturbation.as_ref().unwrap_or(&default_pert);
        let (pencil, excess) = build_pencil(&grid, pert, &resolved, &mut rng)?;

        let background = match resolved {
            ResolvedStates::Constant(s) => Background::Constant(s),
            ResolvedStates::Composite { data, sol } => {
                let params = cfg.profile.clone().unwrap_or_default().grid_params();
                let (p1, p3) = solve_fronts(&sol, transport, &params)?;
                let mut dec = decompose_initial_mass(excess, &sol)?;
                if cfg.ablate_diffusion_wave {
                    // Control: keep the front shifts, drop the second-family
                    // mass so the wave correction vanishes.
                    dec.alpha[1] = 0.0;
                }
                let ansatz = build_ansatz(&sol, &p1, &p3, &dec);
                Background::Composite {
                    wave: Box::new(ComposedWave { data, sol, p1, p3 }),
                    dec,
                    ansatz,
                }
            }
        };

        let transverse = match &pert.transverse {
            None => None,
            Some(t) => {
                if grid.is_planar() {
                    return Err(CliError::Config(
                        "perturbation.transverse needs grid.n2 or grid.n3 above 1".into(),
                    ));
                }
                let envelope = BumpShape { center: t.center, width: t.width };
                let g = band_limited_transverse(&grid, &mut rng, &envelope, t.amplitude);
                Some((g, t.components))
            }
        };

        Ok(Self {
            grid,
            transport,
            background,
            pencil,
            transverse,
            excess,
            run,
            seed: cfg.seed,
            fidelity: cfg.fidelity,
            ablated: cfg.ablate_diffusion_wave,
        })
    }

    pub fn left_state(&self) -> GasState {
        match &self.background {
            Background::Composite { wave, .. } => wave.sol.left,
            Background::Constant(s) => *s,
        }
    }

    pub fn right_state(&self) -> GasState {
        match &self.background {
            Background::Composite { wave, .. } => wave.sol.right,
            Background::Constant(s) => *s,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match &self.background {
            Background::Composite { wave, .. } => Some(wave.sol.delta),
            Background::Constant(_) => None,
        }
    }

    pub fn ansatz(&self) -> Option<&CompositeAnsatz> {
        match &self.background {
            Background::Composite { ansatz, .. } => Some(ansatz),
            Background::Constant(_) => None,
        }
    }

    /// Unperturbed background plus pencil plus transverse part.
    pub fn initial_field(&self) -> Result<FluidField, CliError> {
        let mut field = match &self.background {
            Background::Composite { ansatz, .. } => {
                FluidField::from_fn(self.grid, |x1, _, _| ansatz.superposition_at(x1, 0.0))
            }
            Background::Constant(s) => FluidField::constant(self.grid, s),
        };
        add_pencil(&mut field, &self.pencil);
        if let Some((g, weights)) = &self.transverse {
            for (c, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                for (dst, src) in field.comp_mut(c).iter_mut().zip(g.iter()) {
                    *dst += w * src;
                }
            }
        }
        field.validate()?;
        Ok(field)
    }

    /// Local Maxwellians matched cell-by-cell to the initial macro field.
    pub fn initial_kinetic(&self, vgrid: &VelocityGrid) -> Result<KineticField, CliError> {
        if self.transverse.is_some() {
            return Err(CliError::Config(
                "kinetic runs take no transverse perturbation".into(),
            ));
        }
        let macro_field = self.initial_field()?;
        let grid = self.grid;
        let dx = grid.dx();
        let field = KineticField::from_macro(grid, vgrid.clone(), |x1| {
            let i = (((x1 + grid.half_width) / dx - 0.5).round() as usize).min(grid.n1 - 1);
            macro_field.state_at(i).expect("initial field validated")
        })?;
        Ok(field)
    }

    pub fn ns_system(&self) -> NsSystem {
        NsSystem::new(self.grid, self.transport, self.left_state(), self.right_state())
    }

    pub fn bgk_system(
        &self,
        vgrid: VelocityGrid,
        collision: CollisionFrequency,
    ) -> Result<BgkSystem, CliError> {
        Ok(BgkSystem::new(self.grid, vgrid, collision, self.left_state(), self.right_state())?)
    }

    /// |totals(U0) - integral of the ansatz| over (rho, m1, E): how exactly
    /// the constructed ansatz absorbed the pencil's excess mass.
    pub fn initial_mass_defect(&self, field0: &FluidField) -> Option<f64> {
        let ansatz = self.ansatz()?;
        let totals = field0.totals();
        let dx = self.grid.dx();
        let mut acc = [KahanSum::default(); 3];
        for i in 0..self.grid.n1 {
            let c = ansatz.conserved_at(self.grid.x1(i), 0.0);
            acc[0].add(c.rho);
            acc[1].add(c.m[0]);
            acc[2].add(c.e);
        }
        let defect = [
            totals[0] - acc[0].value() * dx,
            totals[1] - acc[1].value() * dx,
            totals[4] - acc[2].value() * dx,
        ];
        Some(defect.iter().fold(0.0_f64, |m, d| m.max(d.abs())))
    }
}

/// Synthesize the pencil and report its exact excess mass in (rho, m1, E).
fn build_pencil(
    grid: &Grid,
    pert: &PerturbationSpec,
    resolved: &ResolvedStates,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<[f64; 5]>, [f64; 3]), CliError> {
    match pert.kind {
        PerturbationKind::None => Ok((vec![[0.0; 5]; grid.n1], [0.0; 3])),
        PerturbationKind::Bumps => {
            let pencil = random_zero_mass(
                grid,
                rng,
                pert.count.unwrap(),
                pert.inner.unwrap(),
                (pert.width.unwrap()[0], pert.width.unwrap()[1]),
                pert.amplitude.unwrap(),
            );
            Ok((pencil, [0.0; 3]))
        }
        PerturbationKind::Excess => {
            let sol = match resolved {
                ResolvedStates::Composite { sol, .. } => sol,
                ResolvedStates::Constant(_) => {
                    return Err(CliError::Config(
                        "perturbation.kind excess needs a composite background".into(),
                    ))
                }
            };
            let (r1, r2, r3) = wave_directions(sol);
            let c = pert.coefficients.unwrap();
            let target = [
                c[0] * r1[0] + c[1] * r2[0] + c[2] * r3[0],
                c[0] * r1[1] + c[1] * r2[1] + c[2] * r3[1],
                c[0] * r1[2] + c[1] * r2[2] + c[2] * r3[2],
            ];
            let shape = BumpShape { center: pert.center.unwrap(), width: pert.bump_width.unwrap() };
            let mut pencil = vec![[0.0; 5]; grid.n1];
            set_exact_mass(grid, &mut pencil, &shape, [target[0], target[1], 0.0, 0.0, target[2]]);
            Ok((pencil, target))
        }
        PerturbationKind::Contact => {
            let state = match resolved {
                ResolvedStates::Composite { sol, .. } => sol.intermediate,
                ResolvedStates::Constant(s) => *s,
            };
            let u1 = state.u[0];
            let a = pert.amplitude.unwrap();
            // rho moves, u and p stay: in conserved slots that is the
            // linearly degenerate direction (1, u1, u1^2/2) exactly.
            let shape = BumpShape { center: pert.center.unwrap(), width: pert.bump_width.unwrap() };
            let pencil = pencil_field(
                grid,
                &[BumpSpec { shape, amplitude: [a, a * u1, 0.0, 0.0, a * 0.5 * u1 * u1] }],
            );
            let mut sum = KahanSum::default();
            for cell in &pencil {
                sum.add(cell[0]);
            }
            let mass = sum.value() * grid.dx();
            Ok((pencil, [mass, mass * u1, mass * 0.5 * u1 * u1]))
        }
    }
}
