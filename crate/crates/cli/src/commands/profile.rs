//! Solve viscous shock profiles, write the tabulated waves, and report the
//! structural checks: monotonicity, compressibility, endpoint match, tail
//! decay, and the delta-squared slope scaling across a strength sweep.

use serde::Serialize;
use twoshock::euler::{
    solve_intermediate_state, strength_for_delta, symmetric_two_shock, CompositeWaveSolution,
};
use twoshock::profile::{fit_tail_decay, ShockProfile, TailFit};
use twoshock::GasState;

use crate::config::{ResolvedStates, ScenarioConfig};
use crate::output::{fmt_f64, OutDir};
use crate::scenario::solve_fronts;
use crate::CliError;

use super::{seal, Invocation};

#[derive(Debug, Serialize)]
pub struct FamilyReport {
    pub family: u8,
    /// Strength of this front (conserved-variable jump).
    pub delta_front: f64,
    pub s: f64,
    pub monotone_u1: bool,
    /// Centered finite differences of lambda_family strictly negative at
    /// every interior node.
    pub compressive: bool,
    pub endpoint_mismatch: f64,
    pub max_slope_u1: f64,
    /// First-integral re-integration residual of the solved wave.
    pub ode_residual: f64,
    pub tail: TailFit,
    pub csv: String,
}

#[derive(Debug, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub s1: f64,
    pub s3: f64,
    pub intermediate: GasState,
    pub family1: FamilyReport,
    pub family3: FamilyReport,
}

#[derive(Debug, Serialize)]
pub struct ProfileReport {
    pub runs: Vec<DeltaReport>,
    /// max slope ratios between successive entries of the (descending)
    /// delta list; the delta-squared law puts halving ratios near 4.
    pub slope_ratio_1: Vec<f64>,
    pub slope_ratio_3: Vec<f64>,
}

fn monotone(v: &[f64]) -> bool {
    let up = v.last().unwrap() >= v.first().unwrap();
    v.windows(2).all(|w| if up { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn compressive(p: &ShockProfile) -> bool {
    let lam = p.speed_field();
    if lam.len() < 3 {
        return false;
    }
    lam.windows(3).all(|w| w[2] < w[0])
}

fn endpoint_mismatch(p: &ShockProfile) -> f64 {
    let n = p.len();
    let probe = |i: usize, end: &GasState| {
        (p.rho[i] - end.rho)
            .abs()
            .max((p.u1[i] - end.u[0]).abs())
            .max((p.theta[i] - end.theta).abs())
    };
    probe(0, &p.left).max(probe(n - 1, &p.right))
}

pub fn analyze(p: &ShockProfile, csv: String) -> Result<FamilyReport, CliError> {
    Ok(FamilyReport {
        family: match p.family {
            twoshock::euler::Family::One => 1,
            twoshock::euler::Family::Three => 3,
        },
        delta_front: p.delta,
        s: p.s,
        monotone_u1: monotone(&p.u1),
        compressive: compressive(p),
        endpoint_mismatch: endpoint_mismatch(p),
        max_slope_u1: p.d_u1.iter().fold(0.0_f64, |m, &d| m.max(d.abs())),
        ode_residual: p.residual,
        tail: fit_tail_decay(p)?,
        csv,
    })
}

fn write_profile(out: &mut OutDir, name: &str, p: &ShockProfile) -> Result<(), CliError> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf).map_err(|e| CliError::Io(format!("tabulating {name}: {e}")))?;
    out.write_bytes(name, &buf)
}

fn run_one(
    cfg: &ScenarioConfig,
    sol: &CompositeWaveSolution,
    out: &mut OutDir,
) -> Result<DeltaReport, CliError> {
    let transport = cfg.effective_transport()?;
    let params = cfg.profile.clone().unwrap_or_default().grid_params();
    let (p1, p3) = solve_fronts(sol, transport, &params)?;
    let tag = fmt_f64(sol.delta);
    let name1 = format!("profile_f1_{tag}.csv");
    let name3 = format!("profile_f3_{tag}.csv");
    write_profile(out, &name1, &p1)?;
    write_profile(out, &name3, &p3)?;
    Ok(DeltaReport {
        delta: sol.delta,
        s1: sol.s1,
        s3: sol.s3,
        intermediate: sol.intermediate,
        family1: analyze(&p1, name1)?,
        family3: analyze(&p3, name3)?,
    })
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let (cfg, mut out, manifest, clock) = inv.prepare("profile")?;
    let states_spec = cfg.states()?;
    let deltas = cfg.profile.as_ref().and_then(|p| p.deltas.clone());

    let mut runs = Vec::new();
    match deltas {
        Some(list) => {
            let mid = match (&states_spec.mid, &states_spec.left, &states_spec.right) {
                (Some(m), None, None) => m.to_state(),
                _ => {
                    return Err(CliError::Config(
                        "profile.deltas sweep needs the states mid form".into(),
                    ))
                }
            };
            for &delta in &list {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(CliError::Config(format!(
                        "profile.deltas must be positive, got {delta}"
                    )));
                }
                let strength = strength_for_delta(&mid, delta)?;
                let data = symmetric_two_shock(&mid, strength)?;
                let sol = solve_intermediate_state(&data)?;
                runs.push(run_one(&cfg, &sol, &mut out)?);
            }
        }
        None => match states_spec.resolve()? {
            ResolvedStates::Composite { sol, .. } => runs.push(run_one(&cfg, &sol, &mut out)?),
            ResolvedStates::Constant(_) => {
                return Err(CliError::Config(
                    "profile needs a composite datum with delta > 0".into(),
                ))
            }
        },
    }

    // Slope-scaling table over the sweep, largest delta first.
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[b].delta.total_cmp(&runs[a].delta));
    let mut ratio1 = Vec::new();
    let mut ratio3 = Vec::new();
    let mut scaling_rows = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let r = &runs[i];
        let mut row = vec![r.delta, r.family1.max_slope_u1, r.family3.max_slope_u1];
        if k + 1 < order.len() {
            let next = &runs[order[k + 1]];
            ratio1.push(r.family1.max_slope_u1 / next.family1.max_slope_u1);
            ratio3.push(r.family3.max_slope_u1 / next.family3.max_slope_u1);
            row.push(*ratio1.last().unwrap());
            row.push(*ratio3.last().unwrap());
        } else {
            row.push(f64::NAN);
            row.push(f64::NAN);
        }
        scaling_rows.push(row);
    }
    if runs.len() > 1 {
        out.write_csv(
            "scaling.csv",
            &["delta", "max_slope_f1", "max_slope_f3", "ratio_f1", "ratio_f3"],
            scaling_rows.into_iter(),
        )?;
    }

    let report = ProfileReport { runs, slope_ratio_1: ratio1, slope_ratio_3: ratio3 };
    for r in &report.runs {
        println!(
            "delta={} family1: monotone={} compressive={} endpoint={:.2e}; family3: monotone={} compressive={} endpoint={:.2e}",
            fmt_f64(r.delta),
            r.family1.monotone_u1,
            r.family1.compressive,
            r.family1.endpoint_mismatch,
            r.family3.monotone_u1,
            r.family3.compressive,
            r.family3.endpoint_mismatch,
        );
    }
    out.write_json("profile.json", &report)?;
    seal(out, manifest, clock)
}
