//! Macro-micro projections attached to a local Maxwellian, and the BGK
//! linearized collision operator built from them.

use crate::gas::{GasState, GAS_R};
use crate::kinetic::grid::VelocityGrid;
use crate::kinetic::maxwellian::write_maxwellian;

/// Below this the Maxwellian tail is treated as zero in 1/M weights.
const M_FLOOR: f64 = 1e-290;

/// The five orthonormal collision-invariant directions chi_0..chi_4 of a
/// local Maxwellian, sampled on a velocity grid.
#[derive(Debug, Clone)]
pub struct MicroBasis {
    pub state: GasState,
    pub maxwellian: Vec<f64>,
    pub chi: [Vec<f64>; 5],
}

impl MicroBasis {
    pub fn new(state: &GasState, grid: &VelocityGrid) -> Self {
        let mut m = vec![0.0; grid.len()];
        write_maxwellian(state, grid, &mut m);
        let rt = GAS_R * state.theta;
        let s_rho = state.rho.sqrt();
        let s_mom = (rt * state.rho).sqrt();
        let s_e = (6.0 * state.rho).sqrt();
        let mut chi = [
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        ];
        grid.for_each_node(|flat, v, _| {
            let mv = m[flat];
            let dv = [v[0] - state.u[0], v[1] - state.u[1], v[2] - state.u[2]];
            let pec2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
            chi[0][flat] = mv / s_rho;
            chi[1][flat] = dv[0] * mv / s_mom;
            chi[2][flat] = dv[1] * mv / s_mom;
            chi[3][flat] = dv[2] * mv / s_mom;
            chi[4][flat] = (pec2 / rt - 3.0) * mv / s_e;
        });
        Self { state: *state, maxwellian: m, chi }
    }

    /// <h, g>_M = integral of h g / M.
    pub fn inner_product(&self, h: &[f64], g: &[f64], grid: &VelocityGrid) -> f64 {
        let mut acc = 0.0;
        grid.for_each_node(|flat, _, w| {
            let m = self.maxwellian[flat];
            if m > M_FLOOR {
                acc += w * h[flat] * g[flat] / m;
            }
        });
        acc
    }

    /// Coordinates of h on the chi basis.
    pub fn coefficients(&self, h: &[f64], grid: &VelocityGrid) -> [f64; 5] {
        let mut c = [0.0; 5];
        grid.for_each_node(|flat, _, w| {
            let m = self.maxwellian[flat];
            if m > M_FLOOR {
                let hw = w * h[flat] / m;
                for (ci, chi) in c.iter_mut().zip(&self.chi) {
                    *ci += hw * chi[flat];
                }
            }
        });
        c
    }

    /// Macroscopic projection P0 h = sum_i <h, chi_i>_M chi_i.
    pub fn project_p0(&self, h: &[f64], grid: &VelocityGrid) -> Vec<f64> {
        let c = self.coefficients(h, grid);
        let mut out = vec![0.0; grid.len()];
        for (ci, chi) in c.iter().zip(&self.chi) {
            for (o, &x) in out.iter_mut().zip(chi) {
                *o += ci * x;
            }
        }
        out
    }

    /// Microscopic projection P1 h = h - P0 h.
    pub fn project_p1(&self, h: &[f64], grid: &VelocityGrid) -> Vec<f64> {
        let p0 = self.project_p0(h, grid);
        h.iter().zip(&p0).map(|(&a, &b)| a - b).collect()
    }

    /// Gram matrix <chi_i, chi_j>_M; identity up to quadrature error.
    pub fn gram(&self, grid: &VelocityGrid) -> [[f64; 5]; 5] {
        let mut g = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in i..5 {
                let v = self.inner_product(&self.chi[i], &self.chi[j], grid);
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        g
    }
}

/// Collision frequency law nu_c = nu_ref rho sqrt(theta / theta_ref).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionFrequency {
    pub nu_ref: f64,
    pub theta_ref: f64,
}

impl CollisionFrequency {
    pub fn new(nu_ref: f64, theta_ref: f64) -> Self {
        Self { nu_ref, theta_ref }
    }

    pub fn nu(&self, rho: f64, theta: f64) -> f64 {
        self.nu_ref * rho * (theta / self.theta_ref).sqrt()
    }
}

/// Linearized BGK operator L h = -nu_c P1 h around the Maxwellian of `basis`.
pub fn bgk_linearized(
    h: &[f64],
    basis: &MicroBasis,
    freq: &CollisionFrequency,
    grid: &VelocityGrid,
) -> Vec<f64> {
    let nu = freq.nu(basis.state.rho, basis.state.theta);
    let mut out = basis.project_p1(h, grid);
    for x in out.iter_mut() {
        *x *= -nu;
    }
    out
}

/// v1 d/dx1 M for a planar state with given x1-derivatives of (rho, u, theta);
/// the streaming term whose microscopic part sources the Chapman-Enskog
/// correction.
pub fn streaming_of_maxwellian(
    state: &GasState,
    d_rho: f64,
    d_u: [f64; 3],
    d_theta: f64,
    grid: &VelocityGrid,
) -> Vec<f64> {
    let mut m = vec![0.0; grid.len()];
    write_maxwellian(state, grid, &mut m);
    let rt = GAS_R * state.theta;
    let mut out = vec![0.0; grid.len()];
    grid.for_each_node(|flat, v, _| {
        let dv = [v[0] - state.u[0], v[1] - state.u[1], v[2] - state.u[2]];
        let pec2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
        let log_deriv = d_rho / state.rho
            + (dv[0] * d_u[0] + dv[1] * d_u[1] + dv[2] * d_u[2]) / rt
            + (pec2 / (2.0 * rt) - 1.5) * d_theta / state.theta;
        out[flat] = v[0] * m[flat] * log_deriv;
    });
    out
}

/// Closed-form microscopic part of the full advection term:
///   P1(v . grad_x M) = M [ (c_i c_k - delta_ik |c|^2/3) d_i u_k / (R theta)
///                        + c_i (|c|^2/(2 R theta) - 5/2) d_i theta / theta ],
/// c = v - u. The density gradient drops out entirely (it is macroscopic),
/// and dividing by -nu_c gives the Chapman-Enskog correction, whose stress
/// and heat flux reproduce the BGK transport coefficients mu = p/nu, Pr = 1.
pub fn microscopic_advection(
    state: &GasState,
    d_u: &[[f64; 3]; 3],
    d_theta: [f64; 3],
    grid: &VelocityGrid,
) -> Vec<f64> {
    let mut m = vec![0.0; grid.len()];
    write_maxwellian(state, grid, &mut m);
    let mut out = vec![0.0; grid.len()];
    write_microscopic_advection(&m, state, d_u, d_theta, grid, &mut out);
    out
}

/// Same as [`microscopic_advection`] but reusing a precomputed Maxwellian
/// row for `state`, which dominates the cost when called per grid cell.
pub fn write_microscopic_advection(
    m: &[f64],
    state: &GasState,
    d_u: &[[f64; 3]; 3],
    d_theta: [f64; 3],
    grid: &VelocityGrid,
    out: &mut [f64],
) {
    let rt = GAS_R * state.theta;
    grid.for_each_node(|flat, v, _| {
        let c = [v[0] - state.u[0], v[1] - state.u[1], v[2] - state.u[2]];
        let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        let mut s = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                let tf = c[i] * c[k] - if i == k { c2 / 3.0 } else { 0.0 };
                s += tf * d_u[i][k] / rt;
            }
            s += c[i] * (c2 / (2.0 * rt) - 2.5) * d_theta[i] / state.theta;
        }
        out[flat] = m[flat] * s;
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::GasState;
    use crate::kinetic::maxwellian::{maxwellian, moments};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn grid() -> VelocityGrid {
        VelocityGrid::trapezoid(8.0, 24).unwrap()
    }

    fn random_micro_field(basis: &MicroBasis, grid: &VelocityGrid, seed: u64) -> Vec<f64> {
        // Polynomial-weighted Maxwellian keeps 1/M integrals finite.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; grid.len()];
        grid.for_each_node(|flat, v, _| {
            let poly = c[0]
                + c[1] * v[0]
                + c[2] * v[1]
                + c[3] * v[2]
                + c[4] * v[0] * v[1]
                + c[5] * v[1] * v[2]
                + c[6] * v[0] * v[0]
                + c[7] * v[1] * v[1]
                + c[8] * v[2] * v[2]
                + c[9] * v[0] * v[1] * v[2];
            out[flat] = poly * basis.maxwellian[flat];
        });
        out
    }

    #[test]
    fn gram_is_identity_to_quadrature_tolerance() {
        let g = grid();
        let basis = MicroBasis::new(&GasState::new(1.2, [0.3, -0.1, 0.2], 0.9), &g);
        let gram = basis.gram(&g);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i][j] - want).abs() < 1e-6,
                    "gram[{i}][{j}] = {}",
                    gram[i][j]
                );
            }
        }
    }

    #[test]
    fn maxwellian_projects_onto_chi0() {
        let g = grid();
        let s = GasState::planar(1.5, 0.2, 1.0);
        let basis = MicroBasis::new(&s, &g);
        let m = maxwellian(&s, &g);
        // <M, chi0>_M = sqrt(rho)
        let c = basis.coefficients(&m, &g);
        assert_relative_eq!(c[0], 1.5_f64.sqrt(), max_relative = 1e-8);
        for &x in &c[1..] {
            assert!(x.abs() < 1e-8);
        }
        let p1 = basis.project_p1(&m, &g);
        let linf = p1.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        assert!(linf < 1e-8);
    }

    #[test]
    fn projections_are_idempotent_and_annihilating() {
        let g = grid();
        let basis = MicroBasis::new(&GasState::planar(1.0, 0.4, 1.1), &g);
        let h = random_micro_field(&basis, &g, 7);
        let p0 = basis.project_p0(&h, &g);
        let p0p0 = basis.project_p0(&p0, &g);
        let p1 = basis.project_p1(&h, &g);
        let p1p1 = basis.project_p1(&p1, &g);
        let p0p1 = basis.project_p0(&p1, &g);
        for i in 0..h.len() {
            assert!((p0p0[i] - p0[i]).abs() < 1e-6);
            assert!((p1p1[i] - p1[i]).abs() < 1e-6);
            assert!(p0p1[i].abs() < 1e-6);
        }
        // P0 + P1 = identity to one rounding of the larger summand
        for i in 0..h.len() {
            let back = p0[i] + p1[i];
            let scale = h[i].abs().max(p0[i].abs());
            assert!((back - h[i]).abs() <= 2.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn microscopic_part_carries_no_moments() {
        let g = grid();
        let basis = MicroBasis::new(&GasState::planar(0.9, -0.3, 0.8), &g);
        let h = random_micro_field(&basis, &g, 21);
        let p1 = basis.project_p1(&h, &g);
        let c = moments(&p1, &g);
        assert!(c.rho.abs() < 1e-7, "rho moment {}", c.rho);
        assert!(c.m[0].abs() < 1e-7);
        assert!(c.e.abs() < 1e-7);
    }

    #[test]
    fn chi_directions_are_null_modes_of_bgk() {
        let g = grid();
        let basis = MicroBasis::new(&GasState::planar(1.0, 0.0, 1.0), &g);
        let freq = CollisionFrequency::new(100.0, 1.0);
        for chi in &basis.chi {
            let l = bgk_linearized(chi, &basis, &freq, &g);
            let linf = l.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            assert!(linf < 1e-6 * 100.0, "null mode violated: {linf}");
        }
    }

    #[test]
    fn bgk_dissipation_identity() {
        let g = grid();
        let basis = MicroBasis::new(&GasState::planar(1.0, 0.1, 1.0), &g);
        let freq = CollisionFrequency::new(50.0, 1.0);
        let h = random_micro_field(&basis, &g, 3);
        let lh = bgk_linearized(&h, &basis, &freq, &g);
        let p1 = basis.project_p1(&h, &g);
        let lhs = basis.inner_product(&h, &lh, &g);
        let nu = freq.nu(1.0, 1.0);
        let rhs = -nu * basis.inner_product(&p1, &p1, &g);
        // identity up to the quadrature-level orthogonality defect <P0h, P1h>
        assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
        let slack = nu * 1e-6 * basis.inner_product(&h, &h, &g);
        assert!(lhs <= rhs + slack, "dissipation violated: {lhs} vs {rhs}");
        assert!(lhs < 0.0);
    }

    #[test]
    fn collision_frequency_scales_like_sqrt_theta() {
        let f = CollisionFrequency::new(80.0, 1.0);
        assert_relative_eq!(f.nu(1.0, 4.0) / f.nu(1.0, 1.0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(f.nu(2.0, 1.0), 160.0, max_relative = 1e-14);
    }

    #[test]
    fn closed_form_microscopic_advection_matches_numeric_projection() {
        let g = VelocityGrid::trapezoid(8.0, 24).unwrap();
        let s = GasState::new(1.2, [0.2, -0.1, 0.05], 0.95);
        let d_u = [[0.3, -0.1, 0.2], [0.05, 0.1, -0.2], [0.0, 0.15, -0.05]];
        let d_theta = [0.2, -0.3, 0.1];
        let closed = microscopic_advection(&s, &d_u, d_theta, &g);

        // numeric route: assemble the full v . grad M (density gradient
        // included; the projection must kill it), then apply the basis P1
        let d_rho = [0.4, -0.2, 0.3];
        let basis = MicroBasis::new(&s, &g);
        let mut advect = vec![0.0; g.len()];
        let mut m = vec![0.0; g.len()];
        write_maxwellian(&s, &g, &mut m);
        let rt = GAS_R * s.theta;
        g.for_each_node(|flat, v, _| {
            let c = [v[0] - s.u[0], v[1] - s.u[1], v[2] - s.u[2]];
            let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            let mut acc = 0.0;
            for i in 0..3 {
                let log_deriv = d_rho[i] / s.rho
                    + (c[0] * d_u[i][0] + c[1] * d_u[i][1] + c[2] * d_u[i][2]) / rt
                    + (c2 / (2.0 * rt) - 1.5) * d_theta[i] / s.theta;
                acc += v[i] * m[flat] * log_deriv;
            }
            advect[flat] = acc;
        });
        let numeric = basis.project_p1(&advect, &g);
        let scale = closed.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        for i in 0..closed.len() {
            assert!(
                (closed[i] - numeric[i]).abs() < 2e-6 * scale,
                "node {i}: closed {} vs numeric {}",
                closed[i],
                numeric[i]
            );
        }
    }

    #[test]
    fn streaming_term_matches_finite_difference() {
        let g = VelocityGrid::trapezoid(8.0, 16).unwrap();
        let s = GasState::planar(1.1, 0.2, 0.9);
        let (d_rho, d_u, d_theta) = (0.3, [-0.2, 0.0, 0.1], 0.15);
        let analytic = streaming_of_maxwellian(&s, d_rho, d_u, d_theta, &g);
        let h = 1e-6;
        let plus = GasState::new(
            s.rho + h * d_rho,
            [s.u[0] + h * d_u[0], s.u[1] + h * d_u[1], s.u[2] + h * d_u[2]],
            s.theta + h * d_theta,
        );
        let minus = GasState::new(
            s.rho - h * d_rho,
            [s.u[0] - h * d_u[0], s.u[1] - h * d_u[1], s.u[2] - h * d_u[2]],
            s.theta - h * d_theta,
        );
        let mp = maxwellian(&plus, &g);
        let mm = maxwellian(&minus, &g);
        let mut worst = 0.0_f64;
        g.for_each_node(|flat, v, _| {
            let fd = v[0] * (mp[flat] - mm[flat]) / (2.0 * h);
            worst = worst.max((fd - analytic[flat]).abs());
        });
        assert!(worst < 1e-7, "streaming term mismatch {worst}");
    }
}
