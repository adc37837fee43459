//! Per-snapshot observables: sup norms, anti-derivative endpoints, energy
//! functionals, frame identities, and the CSV/JSON artifacts built from
//! them while a run advances.

use serde::Serialize;
use twoshock::diagnostics::{
    antiderivatives, characteristic_frame, energy_functionals, heat_kernel_weights, perturbation,
    relative_entropy, tilde_variables, transverse_mean, AnsatzSlice, EnergyReport, MicroContext,
    MicroMode,
};
use twoshock::diagnostics::modes::nonzero_mode_energy;
use twoshock::gas::GAS_R;
use twoshock::kinetic::{CollisionFrequency, VelocityGrid};
use twoshock::solver::{FluidField, KahanSum, KineticField, NsSystem};

use crate::config::{DiagnosticsSpec, Fidelity, MicroSpec};
use crate::output::{OutDir, SolverSummary};
use crate::scenario::{Background, Scenario};
use crate::CliError;

/// Frame-identity and weight-range checks at one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct FrameSample {
    pub t: f64,
    pub lr_defect: f64,
    pub diag_defect: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub eta1_min: f64,
    pub eta1_max: f64,
    pub n_sup: f64,
    pub wave_residual: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SupSeries {
    pub phi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub psi3: Vec<f64>,
    pub zeta: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AntiSeries {
    /// Values at the right domain end (the left end is pinned at zero).
    pub phi_end: Vec<f64>,
    pub psi1_end: Vec<f64>,
    pub w_end: Vec<f64>,
    pub phi_sup: Vec<f64>,
    pub psi1_sup: Vec<f64>,
    pub w_sup: Vec<f64>,
}

/// Everything a stability-style run reports, JSON-serialized as
/// `report.json`.
#[derive(Debug, Serialize)]
pub struct DiagnosticsReport {
    pub label: Option<String>,
    pub background: &'static str,
    pub fidelity: Fidelity,
    pub seed: u64,
    pub ablate_diffusion_wave: bool,
    pub delta: Option<f64>,
    pub rho_sharp: Option<f64>,
    pub excess: [f64; 3],
    pub excess_norm: f64,
    pub mass_decomposition: Option<twoshock::ansatz::MassDecomposition>,
    pub shifts: Option<[f64; 2]>,
    pub initial_mass_defect: Option<f64>,
    pub times: Vec<f64>,
    pub sup: SupSeries,
    pub anti: Option<AntiSeries>,
    pub energy: Vec<EnergyReport>,
    pub entropy: Vec<f64>,
    pub frame: Vec<FrameSample>,
    /// Sup over x1 of |transverse-mean density - background| (constant
    /// background only).
    pub zero_mode_density_sup: Vec<f64>,
    pub nonzero_mode_energy: Vec<f64>,
    pub solver: Option<SolverSummary>,
}

/// Collects observables at every snapshot and writes the per-time CSVs.
pub struct Observer<'a> {
    scenario: &'a Scenario,
    spec: &'a DiagnosticsSpec,
    system: NsSystem,
    micro_vgrid: Option<VelocityGrid>,
    collision: Option<CollisionFrequency>,
    times: Vec<f64>,
    sup: SupSeries,
    anti: AntiSeries,
    energy: Vec<EnergyReport>,
    entropy: Vec<f64>,
    frame: Vec<FrameSample>,
    zero_mode_density_sup: Vec<f64>,
    dneq: Vec<f64>,
    snap_index: usize,
    initial_mass_defect: Option<f64>,
    pub failure: Option<CliError>,
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

impl<'a> Observer<'a> {
    /// `collision` is required when the microscopic terms are evaluated on
    /// a kinetic snapshot; fluid runs derive the matched collision
    /// frequency from the transport law.
    pub fn new(
        scenario: &'a Scenario,
        spec: &'a DiagnosticsSpec,
        collision: Option<CollisionFrequency>,
    ) -> Result<Self, CliError> {
        let system = scenario.ns_system();
        let micro_vgrid = match spec.micro {
            MicroSpec::Surrogate => {
                let v_max = spec.micro_v_max.ok_or_else(|| {
                    CliError::Config("diagnostics.micro_v_max is required for micro surrogate".into())
                })?;
                let n = spec.micro_n.ok_or_else(|| {
                    CliError::Config("diagnostics.micro_n is required for micro surrogate".into())
                })?;
                Some(VelocityGrid::trapezoid(v_max, n)?)
            }
            _ => None,
        };
        let collision = match spec.micro {
            MicroSpec::Skip => None,
            MicroSpec::Surrogate => Some(collision.unwrap_or_else(|| {
                // nu = p / mu: the frequency whose Chapman-Enskog limit is
                // the run's transport law.
                let tr = scenario.transport;
                CollisionFrequency::new(GAS_R * tr.theta_ref / tr.mu_ref, tr.theta_ref)
            })),
            MicroSpec::Kinetic => Some(collision.ok_or_else(|| {
                CliError::Config("diagnostics.micro = kinetic needs a kinetic run".into())
            })?),
        };
        Ok(Self {
            scenario,
            spec,
            system,
            micro_vgrid,
            collision,
            times: Vec::new(),
            sup: SupSeries::default(),
            anti: AntiSeries::default(),
            energy: Vec::new(),
            entropy: Vec::new(),
            frame: Vec::new(),
            zero_mode_density_sup: Vec::new(),
            dneq: Vec::new(),
            snap_index: 0,
            initial_mass_defect: None,
            failure: None,
        })
    }

    pub fn record(
        &mut self,
        t: f64,
        field: &FluidField,
        kinetic: Option<&KineticField>,
        out: &mut OutDir,
    ) {
        if self.failure.is_some() {
            return;
        }
        if let Err(e) = self.record_inner(t, field, kinetic, out) {
            self.failure = Some(e);
        }
    }

    fn record_inner(
        &mut self,
        t: f64,
        field: &FluidField,
        kinetic: Option<&KineticField>,
        out: &mut OutDir,
    ) -> Result<(), CliError> {
        let grid = &self.scenario.grid;
        self.times.push(t);
        if t == 0.0 {
            self.initial_mass_defect = self.scenario.initial_mass_defect(field);
        }

        match &self.scenario.background {
            Background::Constant(s) => {
                let c = s.to_conserved();
                let reference = [c.rho, c.m[0], c.m[1], c.m[2], c.e];
                let mut sups = [0.0_f64; 5];
                for (comp, slot) in sups.iter_mut().enumerate() {
                    for &v in field.comp(comp) {
                        *slot = slot.max((v - reference[comp]).abs());
                    }
                }
                self.sup.phi.push(sups[0]);
                self.sup.psi1.push(sups[1]);
                self.sup.psi2.push(sups[2]);
                self.sup.psi3.push(sups[3]);
                self.sup.omega.push(sups[4]);
                // zeta needs the pointwise primitive; derive it directly.
                let mut zeta_sup = 0.0_f64;
                for p in 0..grid.len() {
                    let st = field.state_at(p)?;
                    zeta_sup = zeta_sup.max((st.theta - s.theta).abs());
                }
                self.sup.zeta.push(zeta_sup);
                let mean = transverse_mean(field.comp(0), grid);
                self.zero_mode_density_sup
                    .push(mean.iter().fold(0.0_f64, |m, &v| m.max((v - c.rho).abs())));
            }
            Background::Composite { ansatz, .. } => {
                let pert = perturbation(field, ansatz, t)?;
                self.sup.phi.push(sup_abs(&pert.phi));
                self.sup.psi1.push(sup_abs(&pert.psi[0]));
                self.sup.psi2.push(sup_abs(&pert.psi[1]));
                self.sup.psi3.push(sup_abs(&pert.psi[2]));
                self.sup.zeta.push(sup_abs(&pert.zeta));
                self.sup.omega.push(sup_abs(&pert.omega));

                let anti = antiderivatives(&pert, grid);
                let slice = AnsatzSlice::sample(ansatz, grid, t);
                let tilde = tilde_variables(&anti, &slice);
                self.anti.phi_end.push(*anti.phi.last().unwrap());
                self.anti.psi1_end.push(*anti.psi1.last().unwrap());
                self.anti.w_end.push(*anti.w.last().unwrap());
                self.anti.phi_sup.push(sup_abs(&anti.phi));
                self.anti.psi1_sup.push(sup_abs(&anti.psi1));
                self.anti.w_sup.push(sup_abs(&anti.w));

                if self.spec.energy {
                    let ctx = match self.spec.micro {
                        MicroSpec::Skip => None,
                        MicroSpec::Surrogate => Some(MicroContext::for_ansatz(
                            self.micro_vgrid.as_ref().unwrap(),
                            self.collision.unwrap(),
                            ansatz,
                        )),
                        MicroSpec::Kinetic => {
                            let kin = kinetic.ok_or_else(|| {
                                CliError::Config(
                                    "diagnostics.micro = kinetic needs a kinetic run".into(),
                                )
                            })?;
                            Some(MicroContext::for_ansatz(
                                &kin.vgrid,
                                self.collision.unwrap(),
                                ansatz,
                            ))
                        }
                    };
                    let kin_arg = match self.spec.micro {
                        MicroSpec::Kinetic => kinetic,
                        _ => None,
                    };
                    let report =
                        energy_functionals(field, t, ansatz, &self.system, kin_arg, ctx.as_ref())?;
                    debug_assert!(matches!(
                        (self.spec.micro, report.micro_mode),
                        (MicroSpec::Skip, MicroMode::Skipped)
                            | (MicroSpec::Surrogate, MicroMode::Surrogate)
                            | (MicroSpec::Kinetic, MicroMode::Kinetic)
                    ));
                    self.energy.push(report);
                }

                if self.spec.entropy {
                    self.entropy.push(relative_entropy(field, ansatz, t)?.1);
                }

                let delta = self.scenario.delta().unwrap();
                let want_z = self
                    .spec
                    .z_times
                    .iter()
                    .any(|&z| (z - t).abs() <= 1e-9 * z.abs().max(1.0));
                if self.spec.frame || want_z {
                    let frame = characteristic_frame(ansatz, grid, t, delta);
                    if self.spec.frame {
                        let weights = heat_kernel_weights(&ansatz.wave, t, grid);
                        let (a_lo, a_hi) = min_max(&frame.alpha);
                        let (b_lo, b_hi) = min_max(&frame.beta);
                        let (e_lo, e_hi) = min_max(&weights.eta1);
                        let mut wave_residual = 0.0_f64;
                        for i in 0..grid.n1 {
                            wave_residual = wave_residual
                                .max(ansatz.wave.pde_residual(grid.x1(i), t).abs());
                        }
                        self.frame.push(FrameSample {
                            t,
                            lr_defect: frame.lr_defect,
                            diag_defect: frame.diag_defect,
                            alpha_min: a_lo,
                            alpha_max: a_hi,
                            beta_min: b_lo,
                            beta_max: b_hi,
                            eta1_min: e_lo,
                            eta1_max: e_hi,
                            n_sup: sup_abs(&weights.n),
                            wave_residual,
                        });
                    }
                    if want_z {
                        let z = frame.characteristic_variables(&anti.phi, &tilde);
                        let name = format!("zprofile_{:04}.csv", self.snap_index);
                        let rows = (0..grid.n1)
                            .map(|i| vec![grid.x1(i), z[0][i], z[1][i], z[2][i]]);
                        out.write_csv(&name, &["x1", "z1", "z2", "z3"], rows)?;
                    }
                }
            }
        }

        if !grid.is_planar() {
            self.dneq.push(nonzero_mode_energy(field));
        }

        if self.spec.snapshots {
            self.write_snapshot(field, out)?;
        }
        self.snap_index += 1;
        Ok(())
    }

    /// Transverse means of the conserved fields; 3-D runs also get the
    /// per-x1 rms amplitude of the mean-free part.
    fn write_snapshot(&mut self, field: &FluidField, out: &mut OutDir) -> Result<(), CliError> {
        let grid = &self.scenario.grid;
        let name = format!("snapshot_{:04}.csv", self.snap_index);
        let planar = grid.is_planar();
        let mut header = vec!["x1", "rho", "m1", "m2", "m3", "e"];
        if !planar {
            header.extend_from_slice(&["rms_rho", "rms_m1", "rms_m2", "rms_m3", "rms_e"]);
        }
        let means: Vec<Vec<f64>> = (0..5).map(|c| transverse_mean(field.comp(c), grid)).collect();
        let area = (grid.n2 * grid.n3) as f64;
        let mut rows = Vec::with_capacity(grid.n1);
        for i in 0..grid.n1 {
            let mut row = Vec::with_capacity(header.len());
            row.push(grid.x1(i));
            for mean in &means {
                row.push(mean[i]);
            }
            if !planar {
                for (c, mean) in means.iter().enumerate() {
                    let mut acc = KahanSum::default();
                    for k in 0..grid.n3 {
                        for j in 0..grid.n2 {
                            let d = field.comp(c)[grid.idx(i, j, k)] - mean[i];
                            acc.add(d * d);
                        }
                    }
                    row.push((acc.value() / area).sqrt());
                }
            }
            rows.push(row);
        }
        out.write_csv(&name, &header, rows.into_iter())
    }

    /// Write the time-series CSV and assemble the JSON report.
    pub fn finish(
        self,
        out: &mut OutDir,
        label: Option<String>,
        solver: Option<SolverSummary>,
    ) -> Result<DiagnosticsReport, CliError> {
        if let Some(e) = self.failure {
            return Err(e);
        }
        let composite = matches!(self.scenario.background, Background::Composite { .. });
        let mut header: Vec<&str> =
            vec!["t", "sup_phi", "sup_psi1", "sup_psi2", "sup_psi3", "sup_zeta", "sup_omega"];
        if composite {
            header.extend_from_slice(&["phi_end", "psi1_end", "w_end"]);
        } else {
            header.push("zero_mode_rho_sup");
        }
        let with_energy = !self.energy.is_empty();
        if with_energy {
            header.extend_from_slice(&["energy", "dissipation"]);
        }
        let with_entropy = !self.entropy.is_empty();
        if with_entropy {
            header.push("entropy");
        }
        let with_dneq = !self.dneq.is_empty();
        if with_dneq {
            header.push("nonzero_mode_energy");
        }
        let mut rows = Vec::with_capacity(self.times.len());
        for (k, &t) in self.times.iter().enumerate() {
            let mut row = vec![
                t,
                self.sup.phi[k],
                self.sup.psi1[k],
                self.sup.psi2[k],
                self.sup.psi3[k],
                self.sup.zeta[k],
                self.sup.omega[k],
            ];
            if composite {
                row.push(self.anti.phi_end[k]);
                row.push(self.anti.psi1_end[k]);
                row.push(self.anti.w_end[k]);
            } else {
                row.push(self.zero_mode_density_sup[k]);
            }
            if with_energy {
                row.push(self.energy[k].energy);
                row.push(self.energy[k].dissipation);
            }
            if with_entropy {
                row.push(self.entropy[k]);
            }
            if with_dneq {
                row.push(self.dneq[k]);
            }
            rows.push(row);
        }
        out.write_csv("time_series.csv", &header, rows.into_iter())?;

        let scenario = self.scenario;
        let excess_norm = scenario
            .excess
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let (dec, shifts, rho_sharp) = match &scenario.background {
            Background::Composite { dec, ansatz, .. } => (
                Some(dec.clone()),
                Some([ansatz.shift1, ansatz.shift3]),
                Some(ansatz.intermediate.rho),
            ),
            Background::Constant(_) => (None, None, None),
        };
        Ok(DiagnosticsReport {
            label,
            background: if composite { "composite" } else { "constant" },
            fidelity: scenario.fidelity,
            seed: scenario.seed,
            ablate_diffusion_wave: scenario.ablated,
            delta: scenario.delta(),
            rho_sharp,
            excess: scenario.excess,
            excess_norm,
            mass_decomposition: dec,
            shifts,
            initial_mass_defect: self.initial_mass_defect,
            times: self.times,
            sup: self.sup,
            anti: if composite { Some(self.anti) } else { None },
            energy: self.energy,
            entropy: self.entropy,
            frame: self.frame,
            zero_mode_density_sup: self.zero_mode_density_sup,
            nonzero_mode_energy: self.dneq,
            solver,
        })
    }
}
