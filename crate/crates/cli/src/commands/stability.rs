//! Evolve a perturbed scenario at either fidelity and emit trajectory
//! diagnostics: time-series CSV, snapshot CSVs, and the JSON report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twoshock::diagnostics::modes::zero_mode_l2_sq;
use twoshock::diagnostics::{l2_norm_sq, mode_decompose, poincare_check};
use twoshock::kinetic::{CollisionFrequency, VelocityGrid};
use twoshock::solver::perturb::{band_limited_transverse, BumpShape};
use twoshock::solver::Grid;

use crate::config::{Fidelity, ScenarioConfig};
use crate::observer::{DiagnosticsReport, Observer};
use crate::output::{OutDir, RunManifest, SolverSummary};
use crate::scenario::Scenario;
use crate::CliError;

use super::{seal, Invocation};

/// Parseval-splitting and Poincare-ratio audits on seeded random in-band
/// transverse fields, reported as the worst case over `count` draws.
pub fn transverse_audits(grid: &Grid, seed: u64, count: usize) -> (f64, f64) {
    // distinct stream from the perturbation draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let envelope = BumpShape { center: 0.0, width: 0.5 * grid.half_width };
    let mut parseval = 0.0_f64;
    let mut poincare = 0.0_f64;
    for _ in 0..count {
        let f = band_limited_transverse(grid, &mut rng, &envelope, 1.0);
        let total = l2_norm_sq(&f, grid);
        let (zero, rest) = mode_decompose(&f, grid);
        let split = zero_mode_l2_sq(&zero, grid) + l2_norm_sq(&rest, grid);
        parseval = parseval.max((total - split).abs() / total.max(f64::MIN_POSITIVE));
        poincare = poincare.max(poincare_check(&f, grid));
    }
    (parseval, poincare)
}

/// Build the scenario, run it, and leave report.json plus the CSVs in
/// `out`. Shared with the sweep driver.
pub fn execute(
    cfg: &ScenarioConfig,
    out: &mut OutDir,
    manifest: &mut RunManifest,
) -> Result<DiagnosticsReport, CliError> {
    let scenario = Scenario::from_config(cfg)?;
    let grid = scenario.grid;

    if let Some(ansatz) = scenario.ansatz() {
        let mut residual = 0.0_f64;
        let mut rows = Vec::with_capacity(grid.n1);
        for i in 0..grid.n1 {
            let x1 = grid.x1(i);
            let c = ansatz.conserved_at(x1, 0.0);
            residual = residual.max(ansatz.wave.pde_residual(x1, 0.0).abs());
            rows.push(vec![x1, c.rho, c.m[0], c.e, ansatz.wave.eval(x1, 0.0, 0)]);
        }
        out.write_csv("ansatz_0000.csv", &["x1", "rho", "m1", "e", "wave"], rows.into_iter())?;
        manifest.audits.wave_pde_residual = Some(residual);
    }

    if !grid.is_planar() {
        let (parseval, poincare) = transverse_audits(&grid, scenario.seed, 100);
        manifest.audits.parseval_defect = Some(parseval);
        manifest.audits.poincare_max = Some(poincare);
    }

    let run_collision = match scenario.fidelity {
        Fidelity::Bgk => {
            let k = cfg.kinetic_spec()?;
            Some(CollisionFrequency::new(k.nu_ref, k.theta_ref))
        }
        Fidelity::Ns => None,
    };
    let mut observer = Observer::new(&scenario, &cfg.diagnostics, run_collision)?;

    let report = match scenario.fidelity {
        Fidelity::Ns => {
            let mut field = scenario.initial_field()?;
            let system = scenario.ns_system();
            system.run(&mut field, &scenario.run, |t, f| observer.record(t, f, None, out))?
        }
        Fidelity::Bgk => {
            let k = cfg.kinetic_spec()?;
            let vgrid = VelocityGrid::trapezoid(k.v_max, k.n_per_axis)?;
            let system = scenario.bgk_system(vgrid.clone(), run_collision.unwrap())?;
            let mut kin = scenario.initial_kinetic(&vgrid)?;
            system.run(&mut kin, &scenario.run, |t, f| {
                let macro_field = f.macro_field();
                observer.record(t, &macro_field, Some(f), out);
            })?
        }
    };

    let summary = SolverSummary::from(&report);
    manifest.solver = Some(summary.clone());
    let diag = observer.finish(out, cfg.label.clone(), Some(summary))?;
    manifest.audits.initial_mass_defect = diag.initial_mass_defect;
    out.write_json("report.json", &diag)?;
    Ok(diag)
}

fn combined_sup(diag: &DiagnosticsReport, k: usize) -> f64 {
    diag.sup.phi[k]
        .max(diag.sup.psi1[k])
        .max(diag.sup.psi2[k])
        .max(diag.sup.psi3[k])
        .max(diag.sup.zeta[k])
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let (cfg, mut out, mut manifest, clock) = inv.prepare("stability")?;
    let diag = execute(&cfg, &mut out, &mut manifest)?;
    let last = diag.times.len() - 1;
    println!(
        "{} background, {} steps to t={}: sup|(phi,psi,zeta)| {:.6e} -> {:.6e}",
        diag.background,
        diag.solver.as_ref().map_or(0, |s| s.steps),
        diag.times[last],
        combined_sup(&diag, 0),
        combined_sup(&diag, last),
    );
    if let Some(anti) = &diag.anti {
        println!(
            "anti-derivative endpoints at t_end: Phi={:.6e} Psi1={:.6e} W={:.6e}",
            anti.phi_end[last], anti.psi1_end[last], anti.w_end[last],
        );
    }
    if let Some(d) = diag.initial_mass_defect {
        println!("initial mass defect {:.3e} (excess norm {:.3e})", d, diag.excess_norm);
    }
    seal(out, manifest, clock)
}
