//! Velocity-lattice structure audits (collision-invariant Gram matrix,
//! macro/micro projections, collision moment conservation) and, when a run
//! horizon is configured, a full BGK evolution.

use serde::Serialize;
use twoshock::kinetic::{
    maxwellian, moments, CollisionFrequency, DiscreteMaxwellian, MicroBasis, VelocityGrid,
};
use twoshock::GasState;

use crate::config::{Fidelity, ResolvedStates};
use crate::CliError;

use super::{seal, stability, Invocation};

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ProjectionDefects {
    /// sup-normalized weighted norms of P0 P0 h - P0 h and P1 P1 h - P1 h.
    pub p0_idempotence: f64,
    pub p1_idempotence: f64,
    /// P0 applied to the microscopic part, and P1 to the fluid part.
    pub p0_of_p1: f64,
    pub p1_of_p0: f64,
    /// P0 h + P1 h - h.
    pub completeness: f64,
}

impl ProjectionDefects {
    pub fn worst(&self) -> f64 {
        self.p0_idempotence
            .max(self.p1_idempotence)
            .max(self.p0_of_p1)
            .max(self.p1_of_p0)
            .max(self.completeness)
    }

    fn take_max(&mut self, other: &Self) {
        self.p0_idempotence = self.p0_idempotence.max(other.p0_idempotence);
        self.p1_idempotence = self.p1_idempotence.max(other.p1_idempotence);
        self.p0_of_p1 = self.p0_of_p1.max(other.p0_of_p1);
        self.p1_of_p0 = self.p1_of_p0.max(other.p1_of_p0);
        self.completeness = self.completeness.max(other.completeness);
    }
}

#[derive(Debug, Serialize)]
pub struct KineticStructureReport {
    pub v_max: f64,
    pub n_per_axis: usize,
    pub nu_ref: f64,
    pub theta_ref: f64,
    pub audited_states: Vec<GasState>,
    pub gram_defect: f64,
    pub projection: ProjectionDefects,
    pub projection_defect: f64,
    pub collision_drift: f64,
}

fn gram_defect(basis: &MicroBasis, vgrid: &VelocityGrid) -> f64 {
    let g = basis.gram(vgrid);
    let mut worst = 0.0_f64;
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    worst
}

/// A deterministic non-equilibrium test function: the local Maxwellian
/// modulated by a polynomial with even and odd velocity content.
fn test_function(state: &GasState, vgrid: &VelocityGrid) -> Vec<f64> {
    let mut h = maxwellian(state, vgrid);
    vgrid.for_each_node(|flat, v, _| {
        let p = 0.3 + 0.1 * v[0] - 0.2 * v[1] * v[2]
            + 0.05 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            + 0.02 * v[0] * v[0] * v[0];
        h[flat] *= p;
    });
    h
}

fn projection_defects(basis: &MicroBasis, vgrid: &VelocityGrid) -> ProjectionDefects {
    let h = test_function(&basis.state, vgrid);
    let norm = |f: &[f64]| basis.inner_product(f, f, vgrid).max(0.0).sqrt();
    let scale = norm(&h).max(f64::MIN_POSITIVE);
    let p0 = basis.project_p0(&h, vgrid);
    let p1 = basis.project_p1(&h, vgrid);
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let p0p0 = basis.project_p0(&p0, vgrid);
    let p1p1 = basis.project_p1(&p1, vgrid);
    let p0p1 = basis.project_p0(&p1, vgrid);
    let p1p0 = basis.project_p1(&p0, vgrid);
    let mut complete = diff(&p0, &h);
    for (c, v) in complete.iter_mut().zip(&p1) {
        *c += v;
    }
    ProjectionDefects {
        p0_idempotence: norm(&diff(&p0p0, &p0)) / scale,
        p1_idempotence: norm(&diff(&p1p1, &p1)) / scale,
        p0_of_p1: norm(&p0p1) / scale,
        p1_of_p0: norm(&p1p0) / scale,
        completeness: norm(&complete) / scale,
    }
}

/// Moment drift of one BGK collision application nu (M[f] - f) on a
/// two-stream mixture: zero up to the Maxwellian-fit tolerance.
fn collision_drift(
    state: &GasState,
    freq: &CollisionFrequency,
    vgrid: &VelocityGrid,
) -> Result<f64, CliError> {
    let mut a = *state;
    a.u[0] += 0.3;
    let mut b = *state;
    b.u[0] -= 0.2;
    b.theta *= 1.1;
    let fa = maxwellian(&a, vgrid);
    let fb = maxwellian(&b, vgrid);
    let f: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
    let target = moments(&f, vgrid);
    let u = [
        target.m[0] / target.rho,
        target.m[1] / target.rho,
        target.m[2] / target.rho,
    ];
    let theta = target.e / target.rho - 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    let dm = DiscreteMaxwellian::fit(&target, state, vgrid)?;
    let mut m = vec![0.0; vgrid.len()];
    dm.write_values(vgrid, &mut m);
    let nu = freq.nu(target.rho, theta);
    let q: Vec<f64> = m.iter().zip(&f).map(|(x, y)| nu * (x - y)).collect();
    let drift = moments(&q, vgrid);
    Ok(drift
        .rho
        .abs()
        .max(drift.m[0].abs())
        .max(drift.m[1].abs())
        .max(drift.m[2].abs())
        .max(drift.e.abs()))
}

pub fn structure_report(
    states: &[GasState],
    v_max: f64,
    n_per_axis: usize,
    nu_ref: f64,
    theta_ref: f64,
) -> Result<KineticStructureReport, CliError> {
    let vgrid = VelocityGrid::trapezoid(v_max, n_per_axis)?;
    let freq = CollisionFrequency::new(nu_ref, theta_ref);
    let mut gram = 0.0_f64;
    let mut proj = ProjectionDefects::default();
    let mut drift = 0.0_f64;
    for s in states {
        let basis = MicroBasis::new(s, &vgrid);
        gram = gram.max(gram_defect(&basis, &vgrid));
        proj.take_max(&projection_defects(&basis, &vgrid));
        drift = drift.max(collision_drift(s, &freq, &vgrid)?);
    }
    Ok(KineticStructureReport {
        v_max,
        n_per_axis,
        nu_ref,
        theta_ref,
        audited_states: states.to_vec(),
        gram_defect: gram,
        projection_defect: proj.worst(),
        projection: proj,
        collision_drift: drift,
    })
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let (cfg, mut out, mut manifest, clock) = inv.prepare("kinetic")?;
    if cfg.fidelity != Fidelity::Bgk {
        return Err(CliError::Config("kinetic command needs fidelity = \"bgk\"".into()));
    }
    let k = cfg.kinetic_spec()?.clone();
    let states = match cfg.states()?.resolve()? {
        ResolvedStates::Constant(s) => vec![s],
        ResolvedStates::Composite { sol, .. } => vec![sol.left, sol.intermediate, sol.right],
    };
    let report = structure_report(&states, k.v_max, k.n_per_axis, k.nu_ref, k.theta_ref)?;
    manifest.audits.gram_defect = Some(report.gram_defect);
    manifest.audits.projection_defect = Some(report.projection_defect);
    manifest.audits.collision_drift = Some(report.collision_drift);
    println!(
        "lattice {}^3, v_max {}: gram {:.3e}, projections {:.3e}, collision drift {:.3e}",
        report.n_per_axis,
        report.v_max,
        report.gram_defect,
        report.projection_defect,
        report.collision_drift,
    );
    out.write_json("kinetic.json", &report)?;

    if cfg.run.is_some() {
        stability::execute(&cfg, &mut out, &mut manifest)?;
    }
    seal(out, manifest, clock)
}
