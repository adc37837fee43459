//! Planar discrete-velocity BGK integrator.
//!
//! The distribution is stored cell-major (`f[i * nv + q]`), streamed along
//! x1 with per-sign MUSCL/minmod upwind fluxes in conservation form, and
//! relaxed toward the moment-matched discrete Maxwellian of each cell at
//! rate nu(rho, theta). Ghost cells hold the discrete Maxwellians of the
//! far-field states, mirroring the Navier-Stokes clamp. Because the
//! relaxation target matches the cell moments to roundoff, the macroscopic
//! totals obey the same boundary-ledger audit as the fluid solver.

use crate::error::SolverError;
use crate::gas::{Conserved, GasState};
use crate::kinetic::{CollisionFrequency, DiscreteMaxwellian, VelocityGrid};
use crate::par;

use super::{
    output_schedule, BoundaryFlux, ConservationAudit, FluidField, Grid, KahanSum, RunConfig,
    RunReport, TimeScheme,
};

/// Distribution values over a planar spatial grid times a velocity lattice.
#[derive(Debug, Clone)]
pub struct KineticField {
    pub grid: Grid,
    pub vgrid: VelocityGrid,
    /// Cell-major values: `f[i * nv + q]`.
    pub f: Vec<f64>,
}

impl KineticField {
    /// Local discrete Maxwellians of a macroscopic profile: every cell's
    /// moments match `macro_of(x1)` exactly.
    pub fn from_macro(
        grid: Grid,
        vgrid: VelocityGrid,
        macro_of: impl Fn(f64) -> GasState,
    ) -> Result<Self, SolverError> {
        if !grid.is_planar() {
            return Err(SolverError::BadConfig("kinetic solver requires a planar grid".into()));
        }
        let nv = vgrid.len();
        let mut f = vec![0.0; grid.n1 * nv];
        for i in 0..grid.n1 {
            let state = macro_of(grid.x1(i));
            let dm = DiscreteMaxwellian::fit(&state.to_conserved(), &state, &vgrid)
                .map_err(|e| SolverError::NonPhysicalState(format!("cell {i}: {e}")))?;
            dm.write_values(&vgrid, &mut f[i * nv..(i + 1) * nv]);
        }
        Ok(Self { grid, vgrid, f })
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let nv = self.vgrid.len();
        &self.f[i * nv..(i + 1) * nv]
    }

    /// Conserved moments of one cell.
    pub fn moments_at(&self, i: usize) -> Conserved {
        crate::kinetic::moments(self.cell(i), &self.vgrid)
    }

    /// Macroscopic field induced by the moments of every cell.
    pub fn macro_field(&self) -> FluidField {
        let mut out = FluidField::constant(self.grid, &GasState::planar(1.0, 0.0, 1.0));
        for i in 0..self.grid.n1 {
            let c = self.moments_at(i);
            out.rho[i] = c.rho;
            out.m1[i] = c.m[0];
            out.m2[i] = c.m[1];
            out.m3[i] = c.m[2];
            out.e[i] = c.e;
        }
        out
    }
}

pub struct BgkSystem {
    pub grid: Grid,
    pub vgrid: VelocityGrid,
    pub collision: CollisionFrequency,
    pub left: GasState,
    pub right: GasState,
    ghost_left: Vec<f64>,
    ghost_right: Vec<f64>,
    /// Node v1 values, hoisted out of the flux loops.
    v1: Vec<f64>,
    /// Moment weights w * (1, v1, v2, v3, |v|^2 / 2) per node.
    wpsi: [Vec<f64>; 5],
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

impl BgkSystem {
    pub fn new(
        grid: Grid,
        vgrid: VelocityGrid,
        collision: CollisionFrequency,
        left: GasState,
        right: GasState,
    ) -> Result<Self, SolverError> {
        if !grid.is_planar() {
            return Err(SolverError::BadConfig("kinetic solver requires a planar grid".into()));
        }
        let nv = vgrid.len();
        let mut ghost_left = vec![0.0; nv];
        let mut ghost_right = vec![0.0; nv];
        for (state, buf) in [(&left, &mut ghost_left), (&right, &mut ghost_right)] {
            DiscreteMaxwellian::fit(&state.to_conserved(), state, &vgrid)
                .map_err(|e| SolverError::BadConfig(format!("far-field state: {e}")))?
                .write_values(&vgrid, buf);
        }
        let mut v1 = vec![0.0; nv];
        let mut wpsi: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; nv]);
        vgrid.for_each_node(|q, v, w| {
            v1[q] = v[0];
            wpsi[0][q] = w;
            wpsi[1][q] = w * v[0];
            wpsi[2][q] = w * v[1];
            wpsi[3][q] = w * v[2];
            wpsi[4][q] = 0.5 * w * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        });
        Ok(Self { grid, vgrid, collision, left, right, ghost_left, ghost_right, v1, wpsi })
    }

    /// Moments of one distribution row via the precomputed weights.
    fn row_moments(&self, row: &[f64]) -> Conserved {
        let mut acc = [0.0_f64; 5];
        for q in 0..row.len() {
            let fv = row[q];
            acc[0] += self.wpsi[0][q] * fv;
            acc[1] += self.wpsi[1][q] * fv;
            acc[2] += self.wpsi[2][q] * fv;
            acc[3] += self.wpsi[3][q] * fv;
            acc[4] += self.wpsi[4][q] * fv;
        }
        Conserved { rho: acc[0], m: [acc[1], acc[2], acc[3]], e: acc[4] }
    }

    /// Interior totals of the conserved moments (for the audit).
    pub fn totals(&self, field: &KineticField) -> [f64; 5] {
        let dx = self.grid.dx();
        let mut acc = [KahanSum::default(); 5];
        for i in 0..self.grid.n1 {
            let c = self.row_moments(field.cell(i));
            acc[0].add(c.rho);
            acc[1].add(c.m[0]);
            acc[2].add(c.m[1]);
            acc[3].add(c.m[2]);
            acc[4].add(c.e);
        }
        std::array::from_fn(|c| acc[c].value() * dx)
    }

    /// Upwind face flux between `rows[f + 1]` and `rows[f + 2]` of the
    /// 4-row window, written into `out[q] = v1 f_face`.
    fn face_flux(&self, w: [&[f64]; 4], out: &mut [f64]) {
        for (q, slot) in out.iter_mut().enumerate() {
            let v = self.v1[q];
            let fv = if v > 0.0 {
                w[1][q] + 0.5 * minmod(w[1][q] - w[0][q], w[2][q] - w[1][q])
            } else if v < 0.0 {
                w[2][q] - 0.5 * minmod(w[2][q] - w[1][q], w[3][q] - w[2][q])
            } else {
                0.0
            };
            *slot = v * fv;
        }
    }

    fn row<'a>(&'a self, field: &'a KineticField, ii: isize) -> &'a [f64] {
        let n1 = self.grid.n1 as isize;
        if ii < 0 {
            &self.ghost_left
        } else if ii >= n1 {
            &self.ghost_right
        } else {
            field.cell(ii as usize)
        }
    }

    /// d f / dt plus the transverse-mean conserved flux through the two x1
    /// boundary faces.
    pub fn rhs(&self, field: &KineticField) -> Result<(Vec<f64>, BoundaryFlux), SolverError> {
        if field.grid != self.grid || field.vgrid != self.vgrid {
            return Err(SolverError::BadConfig("field grids differ from system grids".into()));
        }
        let n1 = self.grid.n1;
        let nv = self.vgrid.len();
        let dx = self.grid.dx();
        let inv_dx = 1.0 / dx;
        let mut rhs = vec![0.0_f64; n1 * nv];

        // Per-cell relaxation targets, fitted to the cell's own moments.
        let params: Vec<(DiscreteMaxwellian, f64)> = par::try_map_indexed(n1, |i| {
            let c = self.row_moments(field.cell(i));
            let state = c.to_primitive().map_err(|e| {
                SolverError::NonPhysicalState(format!("cell {i} moments: {e}"))
            })?;
            let dm = DiscreteMaxwellian::fit(&c, &state, &self.vgrid)
                .map_err(|e| SolverError::NonPhysicalState(format!("cell {i}: {e}")))?;
            Ok((dm, self.collision.nu(state.rho, state.theta)))
        })?;

        // Collision part, row-parallel: nu (M[f] - f).
        par::chunks_mut_indexed(&mut rhs, nv, |i, out| {
            let (dm, nu) = params[i];
            let row = field.cell(i);
            let factors = dm.axis_factors(&self.vgrid);
            let amp = dm.a0.exp();
            let n = self.vgrid.n_per_axis;
            let mut q = 0;
            for a in 0..n {
                let ga = amp * factors[0][a];
                for b in 0..n {
                    let gab = ga * factors[1][b];
                    for g in 0..n {
                        out[q] = nu * (gab * factors[2][g] - row[q]);
                        q += 1;
                    }
                }
            }
        });

        // Streaming part in conservation form, block-parallel over cells;
        // the face shared by two blocks is recomputed identically in each.
        let block = 64.min(n1);
        par::chunks_mut_indexed(&mut rhs, block * nv, |bi, chunk| {
            let start = bi * block;
            let cells = chunk.len() / nv;
            let mut prev = vec![0.0_f64; nv];
            let mut cur = vec![0.0_f64; nv];
            let window = |f: isize| -> [&[f64]; 4] {
                [
                    self.row(field, f - 2),
                    self.row(field, f - 1),
                    self.row(field, f),
                    self.row(field, f + 1),
                ]
            };
            self.face_flux(window(start as isize), &mut prev);
            for local in 0..cells {
                let f = (start + local + 1) as isize;
                self.face_flux(window(f), &mut cur);
                let row = &mut chunk[local * nv..(local + 1) * nv];
                for q in 0..nv {
                    row[q] -= (cur[q] - prev[q]) * inv_dx;
                }
                std::mem::swap(&mut prev, &mut cur);
            }
        });

        // Boundary ledger: conserved moments of the two boundary face fluxes.
        let mut face = vec![0.0_f64; nv];
        let mut flux = BoundaryFlux::default();
        for (slot, f) in [(0_usize, 0_isize), (1, n1 as isize)] {
            self.face_flux(
                [
                    self.row(field, f - 2),
                    self.row(field, f - 1),
                    self.row(field, f),
                    self.row(field, f + 1),
                ],
                &mut face,
            );
            let mut acc = [0.0_f64; 5];
            for q in 0..nv {
                for c in 0..5 {
                    acc[c] += self.wpsi[c][q] * face[q];
                }
            }
            if slot == 0 {
                flux.left = acc;
            } else {
                flux.right = acc;
            }
        }
        Ok((rhs, flux))
    }

    /// Largest stable explicit step: advection off the fastest lattice
    /// velocity and relaxation at the stiffest collision rate.
    pub fn cfl_dt(&self, field: &KineticField) -> f64 {
        let mut dt = self.grid.dx() / self.vgrid.v_max;
        let mut nu_max = 0.0_f64;
        for i in 0..self.grid.n1 {
            let c = self.row_moments(field.cell(i));
            if let Ok(s) = c.to_primitive() {
                nu_max = nu_max.max(self.collision.nu(s.rho, s.theta));
            }
        }
        if nu_max > 0.0 {
            dt = dt.min(1.0 / nu_max);
        }
        dt
    }

    pub fn step(
        &self,
        field: &mut KineticField,
        dt: f64,
        scheme: TimeScheme,
        mut audit: Option<&mut ConservationAudit>,
    ) -> Result<(), SolverError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SolverError::BadConfig(format!("dt = {dt}")));
        }
        let bound = self.cfl_dt(field);
        if dt > bound * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation(format!(
                "dt = {dt:.3e} exceeds the stable bound {bound:.3e}"
            )));
        }
        let w = scheme.stage_weights();
        match scheme {
            TimeScheme::Rk2 => {
                let (l0, b0) = self.rhs(field)?;
                let mut s1 = field.clone();
                axpy(&mut s1.f, &l0, dt);
                let (l1, b1) = self.rhs(&s1)?;
                axpy(&mut field.f, &l0, w[0] * dt);
                axpy(&mut field.f, &l1, w[1] * dt);
                if let Some(a) = audit.as_deref_mut() {
                    a.record_stage(&b0, w[0] * dt);
                    a.record_stage(&b1, w[1] * dt);
                }
            }
            TimeScheme::Rk3 => {
                let (l0, b0) = self.rhs(field)?;
                let mut s1 = field.clone();
                axpy(&mut s1.f, &l0, dt);
                let (l1, b1) = self.rhs(&s1)?;
                let mut s2 = field.clone();
                axpy(&mut s2.f, &l0, 0.25 * dt);
                axpy(&mut s2.f, &l1, 0.25 * dt);
                let (l2, b2) = self.rhs(&s2)?;
                axpy(&mut field.f, &l0, w[0] * dt);
                axpy(&mut field.f, &l1, w[1] * dt);
                axpy(&mut field.f, &l2, w[2] * dt);
                if let Some(a) = audit.as_deref_mut() {
                    a.record_stage(&b0, w[0] * dt);
                    a.record_stage(&b1, w[1] * dt);
                    a.record_stage(&b2, w[2] * dt);
                }
            }
        }
        Ok(())
    }

    pub fn run(
        &self,
        field: &mut KineticField,
        cfg: &RunConfig,
        mut on_snapshot: impl FnMut(f64, &KineticField),
    ) -> Result<RunReport, SolverError> {
        if !(cfg.t_end > 0.0) || !(cfg.cfl > 0.0) || cfg.cfl > 1.0 {
            return Err(SolverError::BadConfig(format!(
                "t_end = {}, cfl = {}",
                cfg.t_end, cfg.cfl
            )));
        }
        let mut audit = ConservationAudit::new(self.totals(field));
        on_snapshot(0.0, field);
        let mut t = 0.0_f64;
        let mut steps = 0_usize;
        for target in output_schedule(cfg) {
            while t < target {
                let remaining = target - t;
                if remaining <= 1e-12 * target.max(1.0) {
                    break;
                }
                let dt = (cfg.cfl * self.cfl_dt(field)).min(remaining);
                self.step(field, dt, cfg.scheme, Some(&mut audit))?;
                t += dt;
                steps += 1;
            }
            t = target;
            audit.check(&self.totals(field), t);
            on_snapshot(t, field);
        }
        Ok(RunReport {
            steps,
            t_end: t,
            max_conservation_defect: audit.max_defect,
            max_defect_per_time: audit.max_defect_per_time,
        })
    }
}

fn axpy(dst: &mut [f64], src: &[f64], s: f64) {
    let chunk = 4096.min(dst.len()).max(1);
    par::chunks_mut_indexed(dst, chunk, |q, out| {
        let base = q * chunk;
        for (i, v) in out.iter_mut().enumerate() {
            *v += s * src[base + i];
        }
    });
}
