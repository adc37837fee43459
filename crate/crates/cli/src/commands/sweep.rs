//! Parameter sweeps: the BGK-vs-fluid consistency ladder over nu_ref, and
//! strength/amplitude families of stability runs.

use std::time::Instant;

use serde::Serialize;
use twoshock::kinetic::{CollisionFrequency, VelocityGrid};
use twoshock::solver::FluidField;

use crate::config::{Fidelity, ScenarioConfig, SweepParameter, SweepSpec};
use crate::output::{fmt_f64, OutDir, RunManifest, SolverSummary};
use crate::scenario::Scenario;
use crate::CliError;

use super::{seal, stability, Invocation};

#[derive(Debug, Serialize)]
pub struct NuSweepEntry {
    pub nu_ref: f64,
    pub steps: usize,
    /// Per-component sup distance to the fluid reference at t_end.
    pub sup_error_components: [f64; 5],
    pub sup_error: f64,
}

#[derive(Debug, Serialize)]
pub struct NuSweepReport {
    pub parameter: &'static str,
    pub reference: SolverSummary,
    pub entries: Vec<NuSweepEntry>,
    /// sup_error(nu) / sup_error(next larger nu), ascending order: the
    /// Chapman-Enskog error is O(1/nu), so a nu doubling should halve it.
    pub error_ratios: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioSweepEntry {
    pub value: f64,
    pub dir: String,
    pub sup_initial: f64,
    pub sup_final: f64,
    pub energy_initial: Option<f64>,
    pub energy_final: Option<f64>,
    /// Largest anti-derivative endpoint magnitude over the run.
    pub phi_end_max: Option<f64>,
}

fn plane_rows(f: &FluidField) -> Vec<Vec<f64>> {
    let g = &f.grid;
    (0..g.n1).map(|i| vec![g.x1(i), f.rho[i], f.m1[i], f.e[i]]).collect()
}

fn max5(d: [f64; 5]) -> f64 {
    d.iter().fold(0.0_f64, |m, &x| m.max(x))
}

/// BGK runs at each nu_ref against one fluid run with the configured
/// transport, all from the same initial macro field.
fn nu_sweep(
    cfg: &ScenarioConfig,
    values: &[f64],
    out: &mut OutDir,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    if values[0] <= 0.0 {
        return Err(CliError::Config(format!(
            "sweep.values must be positive for nu_ref, got {}",
            values[0]
        )));
    }

    let mut ns_cfg = cfg.clone();
    ns_cfg.fidelity = Fidelity::Ns;
    ns_cfg.sweep = None;
    let scenario = Scenario::from_config(&ns_cfg)?;
    let mut field = scenario.initial_field()?;
    let system = scenario.ns_system();
    let mut ref_snaps: Vec<(f64, FluidField)> = Vec::new();
    let report = system.run(&mut field, &scenario.run, |t, f| ref_snaps.push((t, f.clone())))?;
    manifest.solver = Some(SolverSummary::from(&report));
    out.write_csv(
        "reference_ns.csv",
        &["x1", "rho", "m1", "e"],
        plane_rows(&ref_snaps.last().unwrap().1).into_iter(),
    )?;

    let mut entries = Vec::new();
    for &nu in &values {
        let mut sub = cfg.clone();
        sub.fidelity = Fidelity::Bgk;
        sub.sweep = None;
        sub.kinetic
            .as_mut()
            .ok_or_else(|| CliError::Config("missing [kinetic] section".into()))?
            .nu_ref = nu;
        let sc = Scenario::from_config(&sub)?;
        let k = sub.kinetic_spec()?;
        let vgrid = VelocityGrid::trapezoid(k.v_max, k.n_per_axis)?;
        let system = sc.bgk_system(vgrid.clone(), CollisionFrequency::new(nu, k.theta_ref))?;
        let mut kin = sc.initial_kinetic(&vgrid)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut last_err = [0.0_f64; 5];
        let mut last_macro: Option<FluidField> = None;
        let mut snap = 0usize;
        let rep = system.run(&mut kin, &sc.run, |t, f| {
            let mac = f.macro_field();
            // both runs snapshot at exactly the configured output times
            let (_, reference) = &ref_snaps[snap];
            let d = mac.sup_distance(reference);
            rows.push(vec![t, d[0], d[1], d[2], d[3], d[4]]);
            last_err = d;
            last_macro = Some(mac);
            snap += 1;
        })?;
        let tag = fmt_f64(nu);
        out.write_csv(
            &format!("bgk_nu{tag}_error.csv"),
            &["t", "rho", "m1", "m2", "m3", "e"],
            rows.into_iter(),
        )?;
        out.write_csv(
            &format!("bgk_nu{tag}_final.csv"),
            &["x1", "rho", "m1", "e"],
            plane_rows(&last_macro.unwrap()).into_iter(),
        )?;
        println!("nu_ref={tag}: {} steps, sup error {:.6e}", rep.steps, max5(last_err));
        entries.push(NuSweepEntry {
            nu_ref: nu,
            steps: rep.steps,
            sup_error_components: last_err,
            sup_error: max5(last_err),
        });
    }

    let ratios: Vec<f64> =
        entries.windows(2).map(|w| w[0].sup_error / w[1].sup_error).collect();
    let report = NuSweepReport {
        parameter: "nu_ref",
        reference: manifest.solver.clone().unwrap(),
        entries,
        error_ratios: ratios,
    };
    out.write_csv(
        "sweep.csv",
        &["nu_ref", "sup_error"],
        report.entries.iter().map(|e| vec![e.nu_ref, e.sup_error]),
    )?;
    out.write_json("sweep.json", &report)
}

/// Independent stability runs, one output subdirectory per value.
fn scenario_sweep(
    cfg: &ScenarioConfig,
    sweep: &SweepSpec,
    inv: &Invocation,
    out: &mut OutDir,
) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for &value in &sweep.values {
        let mut sub = cfg.clone();
        sub.sweep = None;
        match sweep.parameter {
            SweepParameter::Delta => {
                sub.states
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing [states] section".into()))?
                    .delta = Some(value);
            }
            SweepParameter::Amplitude => {
                sub.perturbation
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing [perturbation] section".into()))?
                    .amplitude = Some(value);
            }
            SweepParameter::NuRef => unreachable!("dispatched separately"),
        }
        sub.validate()?;
        let tag = fmt_f64(value);
        let clock = Instant::now();
        let mut sub_out = OutDir::create(&out.root().join(format!("run_{tag}")))?;
        let echo = serde_json::to_string_pretty(&sub)
            .map_err(|e| CliError::Io(format!("echoing sweep config: {e}")))?;
        let mut sub_manifest = RunManifest::new("stability", &inv.config, echo);
        sub_manifest.seed = sub.seed;
        let diag = stability::execute(&sub, &mut sub_out, &mut sub_manifest)?;
        let last = diag.times.len() - 1;
        let sup_at = |k: usize| {
            diag.sup.phi[k]
                .max(diag.sup.psi1[k])
                .max(diag.sup.psi2[k])
                .max(diag.sup.psi3[k])
                .max(diag.sup.zeta[k])
        };
        entries.push(ScenarioSweepEntry {
            value,
            dir: format!("run_{tag}"),
            sup_initial: sup_at(0),
            sup_final: sup_at(last),
            energy_initial: diag.energy.first().map(|e| e.energy),
            energy_final: diag.energy.last().map(|e| e.energy),
            phi_end_max: diag
                .anti
                .as_ref()
                .map(|a| a.phi_end.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))),
        });
        seal(sub_out, sub_manifest, clock)?;
    }
    out.write_csv(
        "sweep.csv",
        &["value", "sup_initial", "sup_final"],
        entries.iter().map(|e| vec![e.value, e.sup_initial, e.sup_final]),
    )?;
    out.write_json("sweep.json", &entries)
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let (cfg, mut out, mut manifest, clock) = inv.prepare("sweep")?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    match sweep.parameter {
        SweepParameter::NuRef => nu_sweep(&cfg, &sweep.values, &mut out, &mut manifest)?,
        SweepParameter::Delta | SweepParameter::Amplitude => {
            scenario_sweep(&cfg, &sweep, inv, &mut out)?
        }
    }
    seal(out, manifest, clock)
}
