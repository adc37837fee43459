//! Time evolution of perturbed states: a conservative Navier-Stokes
//! integrator on [-L, L] x T^2 (finite-volume along x1, pseudo-spectral
//! transverse) and a planar discrete-velocity BGK integrator.
//!
//! Both solvers clamp the x1 boundaries to the far-field end states and
//! account for every unit of conserved quantity crossing those faces, so
//! interior totals are auditable to roundoff.

pub mod bgk;
pub mod ns;
pub mod perturb;
pub(crate) mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::gas::{Conserved, GasState};

pub use bgk::{BgkSystem, KineticField};
pub use ns::NsSystem;

/// Cells on [-L, L] along x1 (uniform, cell-centered), n2 x n3 transverse
/// collocation nodes on the unit torus (1 x 1 = planar).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Grid {
    pub fn new(half_width: f64, n1: usize, n2: usize, n3: usize) -> Result<Self, SolverError> {
        if !(half_width > 0.0) || n1 < 4 || n2 == 0 || n3 == 0 {
            return Err(SolverError::BadConfig(format!(
                "grid {n1} x {n2} x {n3} on [-{half_width}, {half_width}]"
            )));
        }
        Ok(Self { half_width, n1, n2, n3 })
    }

    pub fn planar(half_width: f64, n1: usize) -> Result<Self, SolverError> {
        Self::new(half_width, n1, 1, 1)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n1 as f64
    }

    /// Cell-center coordinate.
    pub fn x1(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx()
    }

    /// Transverse collocation coordinates on the unit torus.
    pub fn x2(&self, j: usize) -> f64 {
        j as f64 / self.n2 as f64
    }

    pub fn x3(&self, k: usize) -> f64 {
        k as f64 / self.n3 as f64
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with x1 fastest.
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n2 + j) * self.n1 + i
    }

    pub fn is_planar(&self) -> bool {
        self.n2 * self.n3 == 1
    }
}

/// Conserved fields on a grid, one contiguous array per component.
#[derive(Debug, Clone)]
pub struct FluidField {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    pub e: Vec<f64>,
}

impl FluidField {
    pub fn constant(grid: Grid, state: &GasState) -> Self {
        let c = state.to_conserved();
        let n = grid.len();
        Self {
            grid,
            rho: vec![c.rho; n],
            m1: vec![c.m[0]; n],
            m2: vec![c.m[1]; n],
            m3: vec![c.m[2]; n],
            e: vec![c.e; n],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64, f64) -> Conserved) -> Self {
        let n = grid.len();
        let mut out = Self {
            grid,
            rho: vec![0.0; n],
            m1: vec![0.0; n],
            m2: vec![0.0; n],
            m3: vec![0.0; n],
            e: vec![0.0; n],
        };
        for k in 0..grid.n3 {
            for j in 0..grid.n2 {
                for i in 0..grid.n1 {
                    let c = f(grid.x1(i), grid.x2(j), grid.x3(k));
                    let p = grid.idx(i, j, k);
                    out.rho[p] = c.rho;
                    out.m1[p] = c.m[0];
                    out.m2[p] = c.m[1];
                    out.m3[p] = c.m[2];
                    out.e[p] = c.e;
                }
            }
        }
        out
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.rho,
            1 => &self.m1,
            2 => &self.m2,
            3 => &self.m3,
            _ => &self.e,
        }
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        match c {
            0 => &mut self.rho,
            1 => &mut self.m1,
            2 => &mut self.m2,
            3 => &mut self.m3,
            _ => &mut self.e,
        }
    }

    pub fn conserved_at(&self, p: usize) -> Conserved {
        Conserved {
            rho: self.rho[p],
            m: [self.m1[p], self.m2[p], self.m3[p]],
            e: self.e[p],
        }
    }

    pub fn state_at(&self, p: usize) -> Result<GasState, SolverError> {
        self.conserved_at(p)
            .to_primitive()
            .map_err(|_| SolverError::NonPhysicalState(format!("cell {p}")))
    }

    /// Pointwise positivity of density and temperature.
    pub fn validate(&self) -> Result<(), SolverError> {
        for p in 0..self.grid.len() {
            let rho = self.rho[p];
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(SolverError::NonPhysicalState(format!(
                    "rho = {rho} at cell {p}"
                )));
            }
            let ke = 0.5 * (self.m1[p] * self.m1[p] + self.m2[p] * self.m2[p]
                + self.m3[p] * self.m3[p]) / rho;
            let internal = self.e[p] - ke;
            if !(internal > 0.0) || !internal.is_finite() {
                return Err(SolverError::NonPhysicalState(format!(
                    "internal energy {internal} at cell {p}"
                )));
            }
        }
        Ok(())
    }

    /// (integral over x1) x (mean over the torus) of each component.
    pub fn totals(&self) -> [f64; 5] {
        let dx = self.grid.dx();
        let inv_area = 1.0 / (self.grid.n2 * self.grid.n3) as f64;
        let mut out = [0.0; 5];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut acc = KahanSum::default();
            for &v in self.comp(c) {
                acc.add(v);
            }
            *slot = acc.value() * dx * inv_area;
        }
        out
    }

    /// Largest |cell - reference| over the grid, per component.
    pub fn sup_distance(&self, other: &Self) -> [f64; 5] {
        let mut out = [0.0_f64; 5];
        for c in 0..5 {
            let (a, b) = (self.comp(c), other.comp(c));
            for p in 0..a.len() {
                out[c] = out[c].max((a[p] - b[p]).abs());
            }
        }
        out
    }
}

/// Compensated (Neumaier) summation; keeps conservation audits at roundoff
/// even over millions of terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    s: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeScheme {
    Rk2,
    Rk3,
}

impl TimeScheme {
    /// Quadrature weights applied to the stage right-hand sides.
    pub(crate) fn stage_weights(self) -> &'static [f64] {
        match self {
            TimeScheme::Rk2 => &[0.5, 0.5],
            TimeScheme::Rk3 => &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        }
    }
}

/// Conserved flux through the two x1 boundary faces (transverse mean),
/// positive in the +x1 direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryFlux {
    pub left: [f64; 5],
    pub right: [f64; 5],
}

/// Running conservation ledger: interior totals must equal the initial
/// totals plus everything that entered through the boundary faces.
#[derive(Debug, Clone)]
pub struct ConservationAudit {
    initial: [f64; 5],
    influx: [KahanSum; 5],
    pub max_defect: f64,
    pub max_defect_per_time: f64,
}

impl ConservationAudit {
    pub fn new(initial: [f64; 5]) -> Self {
        Self {
            initial,
            influx: [KahanSum::default(); 5],
            max_defect: 0.0,
            max_defect_per_time: 0.0,
        }
    }

    pub fn record_stage(&mut self, flux: &BoundaryFlux, weight_dt: f64) {
        for c in 0..5 {
            self.influx[c].add(weight_dt * (flux.left[c] - flux.right[c]));
        }
    }

    /// Compare current totals against the ledger at time t.
    pub fn check(&mut self, totals: &[f64; 5], t: f64) -> f64 {
        let mut defect = 0.0_f64;
        for c in 0..5 {
            defect = defect.max((totals[c] - self.initial[c] - self.influx[c].value()).abs());
        }
        self.max_defect = self.max_defect.max(defect);
        if t > 0.0 {
            self.max_defect_per_time = self.max_defect_per_time.max(defect / t);
        }
        defect
    }
}

/// Time-stepping controls shared by both solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: TimeScheme,
    pub cfl: f64,
    pub t_end: f64,
    /// Times at which the snapshot callback fires (t = 0 and t_end are
    /// always included).
    pub output_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { scheme: TimeScheme::Rk2, cfl: 0.4, t_end: 1.0, output_times: Vec::new() }
    }
}

/// Summary returned by a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: usize,
    pub t_end: f64,
    pub max_conservation_defect: f64,
    pub max_defect_per_time: f64,
}

pub(crate) fn output_schedule(cfg: &RunConfig) -> Vec<f64> {
    let mut times: Vec<f64> = cfg
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < cfg.t_end)
        .collect();
    times.push(cfg.t_end);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    times
}
