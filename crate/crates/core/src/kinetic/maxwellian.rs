//! Maxwellians, velocity moments, and the moment-matched discrete target
//! used by the BGK relaxation.

use crate::error::KineticError;
use crate::gas::{Conserved, GasState, GAS_R};
use crate::kinetic::grid::VelocityGrid;

/// M(v) = rho (2 pi R theta)^{-3/2} exp(-|v - u|^2 / (2 R theta)) sampled on
/// the grid, in flat node order.
pub fn maxwellian(state: &GasState, grid: &VelocityGrid) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    write_maxwellian(state, grid, &mut out);
    out
}

/// In-place variant of [`maxwellian`], tensorized over the axes.
pub fn write_maxwellian(state: &GasState, grid: &VelocityGrid, out: &mut [f64]) {
    debug_assert_eq!(out.len(), grid.len());
    let inv2rt = 1.0 / (2.0 * GAS_R * state.theta);
    let amp = state.rho * (2.0 * std::f64::consts::PI * GAS_R * state.theta).powf(-1.5);
    let n = grid.n_per_axis;
    let axis = grid.axis();
    let factor = |u: f64| -> Vec<f64> {
        axis.iter().map(|&v| (-(v - u) * (v - u) * inv2rt).exp()).collect()
    };
    let (fx, fy, fz) = (factor(state.u[0]), factor(state.u[1]), factor(state.u[2]));
    let mut flat = 0;
    for i in 0..n {
        for j in 0..n {
            let aij = amp * fx[i] * fy[j];
            for k in 0..n {
                out[flat] = aij * fz[k];
                flat += 1;
            }
        }
    }
}

/// Discrete moments of f against the collision invariants 1, v, |v|^2 / 2.
pub fn moments(f: &[f64], grid: &VelocityGrid) -> Conserved {
    debug_assert_eq!(f.len(), grid.len());
    let n = grid.n_per_axis;
    let axis = grid.axis();
    let w = grid.axis_weights();
    let (mut rho, mut m1, mut m2, mut m3, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut flat = 0;
    for i in 0..n {
        let (vi, wi) = (axis[i], w[i]);
        for j in 0..n {
            let (vj, wj) = (axis[j], w[j]);
            let wij = wi * wj;
            let vij2 = vi * vi + vj * vj;
            let (mut s0, mut s1k, mut s2) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let fw = w[k] * f[flat];
                s0 += fw;
                s1k += fw * axis[k];
                s2 += fw * axis[k] * axis[k];
                flat += 1;
            }
            rho += wij * s0;
            m1 += wij * s0 * vi;
            m2 += wij * s0 * vj;
            m3 += wij * s1k;
            e += wij * 0.5 * (s0 * vij2 + s2);
        }
    }
    Conserved::new(rho, [m1, m2, m3], e)
}

/// Exponential-family discrete Maxwellian exp(a0 + a . v - b |v|^2).
///
/// Fitted so its *discrete* moments on a given grid match a target exactly;
/// this is what makes the BGK relaxation conserve mass, momentum, and energy
/// to round-off regardless of quadrature error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMaxwellian {
    pub a0: f64,
    pub a: [f64; 3],
    pub b: f64,
}

impl DiscreteMaxwellian {
    /// Parameters of the continuous Maxwellian of `state` (exact in the
    /// infinite-resolution limit; used as the Newton initial guess).
    pub fn seed(state: &GasState) -> Self {
        let b = 1.0 / (2.0 * GAS_R * state.theta);
        let a = [
            state.u[0] * 2.0 * b,
            state.u[1] * 2.0 * b,
            state.u[2] * 2.0 * b,
        ];
        let amp = state.rho * (2.0 * std::f64::consts::PI * GAS_R * state.theta).powf(-1.5);
        let a0 = amp.ln() - state.speed_squared() * b;
        Self { a0, a, b }
    }

    /// Per-axis factors g_d[i] = exp(a_d v_i - b v_i^2); the node value is
    /// exp(a0) g_0[i] g_1[j] g_2[k].
    pub fn axis_factors(&self, grid: &VelocityGrid) -> [Vec<f64>; 3] {
        let axis = grid.axis();
        let factor = |ad: f64| -> Vec<f64> {
            axis.iter().map(|&v| (ad * v - self.b * v * v).exp()).collect()
        };
        [factor(self.a[0]), factor(self.a[1]), factor(self.a[2])]
    }

    pub fn write_values(&self, grid: &VelocityGrid, out: &mut [f64]) {
        let n = grid.n_per_axis;
        let f = self.axis_factors(grid);
        let amp = self.a0.exp();
        let mut flat = 0;
        for i in 0..n {
            for j in 0..n {
                let aij = amp * f[0][i] * f[1][j];
                for k in 0..n {
                    out[flat] = aij * f[2][k];
                    flat += 1;
                }
            }
        }
    }

    /// Discrete moments, assembled from per-axis power sums.
    pub fn moments(&self, grid: &VelocityGrid) -> Conserved {
        let p = self.axis_power_sums(grid);
        let amp = self.a0.exp();
        let rho = amp * p[0][0] * p[1][0] * p[2][0];
        let m = [
            amp * p[0][1] * p[1][0] * p[2][0],
            amp * p[0][0] * p[1][1] * p[2][0],
            amp * p[0][0] * p[1][0] * p[2][1],
        ];
        let e = 0.5
            * amp
            * (p[0][2] * p[1][0] * p[2][0]
                + p[0][0] * p[1][2] * p[2][0]
                + p[0][0] * p[1][0] * p[2][2]);
        Conserved::new(rho, m, e)
    }

    /// s_d[k] = sum_i w_i v_i^k exp(a_d v_i - b v_i^2) for k = 0..4.
    fn axis_power_sums(&self, grid: &VelocityGrid) -> [[f64; 5]; 3] {
        let axis = grid.axis();
        let w = grid.axis_weights();
        let mut out = [[0.0; 5]; 3];
        for d in 0..3 {
            for (&v, &wi) in axis.iter().zip(w) {
                let g = wi * (self.a[d] * v - self.b * v * v).exp();
                let mut pw = 1.0;
                for acc in out[d].iter_mut() {
                    *acc += g * pw;
                    pw *= v;
                }
            }
        }
        out
    }

    /// Newton fit: adjust (a0, a, b) until the discrete moments match
    /// `target`. The Jacobian is the covariance of (1, v, |v|^2/2), assembled
    /// from the same per-axis power sums.
    pub fn fit(
        target: &Conserved,
        guess: &GasState,
        grid: &VelocityGrid,
    ) -> Result<Self, KineticError> {
        let mut dm = Self::seed(guess);
        let scale = target.rho.abs().max(target.e.abs()).max(1e-300);
        // Push Newton to the roundoff plateau and keep the best iterate:
        // the collision operator inherits its moment conservation from the
        // match quality reached here, so "good enough" is machine epsilon.
        let mut best = dm;
        let mut best_worst = f64::INFINITY;
        for _ in 0..50 {
            let p = dm.axis_power_sums(grid);
            let amp = dm.a0.exp();
            // psi = (1, v1, v2, v3, |v|^2/2); mom[i] = <psi_i>, cov[i][j] = <psi_i psi_j>.
            let tri = |d: usize, k: usize| p[d][k];
            let m3 = |k0: usize, k1: usize, k2: usize| tri(0, k0) * tri(1, k1) * tri(2, k2);
            let mom = [
                amp * m3(0, 0, 0),
                amp * m3(1, 0, 0),
                amp * m3(0, 1, 0),
                amp * m3(0, 0, 1),
                0.5 * amp * (m3(2, 0, 0) + m3(0, 2, 0) + m3(0, 0, 2)),
            ];
            let r = [
                mom[0] - target.rho,
                mom[1] - target.m[0],
                mom[2] - target.m[1],
                mom[3] - target.m[2],
                mom[4] - target.e,
            ];
            let worst = r.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            if worst < best_worst {
                best_worst = worst;
                best = dm;
            }
            if worst < 2e-15 * scale {
                return Ok(dm);
            }
            // d mom / d(a0, a1, a2, a3, -b~): derivative w.r.t. a0 is mom itself,
            // w.r.t. a_d brings down v_d, w.r.t. b brings down -|v|^2.
            let e2 = m3(2, 0, 0) + m3(0, 2, 0) + m3(0, 0, 2);
            let e2_1 = [
                m3(3, 0, 0) + m3(1, 2, 0) + m3(1, 0, 2),
                m3(2, 1, 0) + m3(0, 3, 0) + m3(0, 1, 2),
                m3(2, 0, 1) + m3(0, 2, 1) + m3(0, 0, 3),
            ];
            let e4 = m3(4, 0, 0) + m3(0, 4, 0) + m3(0, 0, 4)
                + 2.0 * (m3(2, 2, 0) + m3(2, 0, 2) + m3(0, 2, 2));
            let jac = [
                [m3(0, 0, 0), m3(1, 0, 0), m3(0, 1, 0), m3(0, 0, 1), -e2],
                [m3(1, 0, 0), m3(2, 0, 0), m3(1, 1, 0), m3(1, 0, 1), -e2_1[0]],
                [m3(0, 1, 0), m3(1, 1, 0), m3(0, 2, 0), m3(0, 1, 1), -e2_1[1]],
                [m3(0, 0, 1), m3(1, 0, 1), m3(0, 1, 1), m3(0, 0, 2), -e2_1[2]],
                [0.5 * e2, 0.5 * e2_1[0], 0.5 * e2_1[1], 0.5 * e2_1[2], -0.5 * e4],
            ];
            let mut a = [[0.0; 6]; 5];
            for i in 0..5 {
                for j in 0..5 {
                    a[i][j] = amp * jac[i][j];
                }
                a[i][5] = -r[i];
            }
            let dx = solve5(&mut a).ok_or_else(|| {
                KineticError::MomentMatchFailed("singular moment Jacobian".into())
            })?;
            dm.a0 += dx[0];
            dm.a[0] += dx[1];
            dm.a[1] += dx[2];
            dm.a[2] += dx[3];
            dm.b += dx[4];
            if !(dm.b > 0.0) || !dm.a0.is_finite() {
                // fall back to the best in-domain iterate below
                break;
            }
        }
        if best_worst < 1e-13 * scale {
            return Ok(best);
        }
        Err(KineticError::MomentMatchFailed(format!(
            "Newton stalled (best residual {best_worst:.3e} vs scale {scale:.3e})"
        )))
    }
}

/// Gaussian elimination with partial pivoting on a 5x6 augmented system.
fn solve5(a: &mut [[f64; 6]; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let mut piv = col;
        for row in col + 1..5 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..5 {
            let f = a[row][col] / a[col][col];
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let mut s = a[row][5];
        for k in row + 1..5 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> VelocityGrid {
        VelocityGrid::trapezoid(8.0, 24).unwrap()
    }

    #[test]
    fn reference_maxwellian_moments() {
        let g = grid();
        let m = maxwellian(&GasState::planar(1.0, 0.0, 1.0), &g);
        let c = moments(&m, &g);
        assert_relative_eq!(c.rho, 1.0, epsilon = 1e-9);
        assert!(c.m[0].abs() < 1e-12);
        assert_relative_eq!(c.e, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn peak_sits_at_bulk_velocity() {
        let g = VelocityGrid::trapezoid(8.0, 33).unwrap();
        let s = GasState::new(2.0, [1.0, -0.5, 0.0], 0.8);
        let m = maxwellian(&s, &g);
        let amp = 2.0 * (2.0 * std::f64::consts::PI * GAS_R * 0.8).powf(-1.5);
        // 33 nodes over [-8, 8] puts lattice points at integer/half-integer
        // velocities, so v = u is on the grid.
        let (argmax, max) = m
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        assert_relative_eq!(max, amp, max_relative = 1e-13);
        assert_eq!(g.node(argmax), [1.0, -0.5, 0.0]);
    }

    #[test]
    fn moments_are_linear() {
        let g = VelocityGrid::trapezoid(6.0, 12).unwrap();
        let f1 = maxwellian(&GasState::planar(1.0, 0.3, 1.0), &g);
        let f2 = maxwellian(&GasState::planar(0.5, -0.8, 0.6), &g);
        let combo: Vec<f64> = f1.iter().zip(&f2).map(|(&a, &b)| 1.7 * a - 0.4 * b).collect();
        let (c1, c2, cc) = (moments(&f1, &g), moments(&f2, &g), moments(&combo, &g));
        assert_relative_eq!(cc.rho, 1.7 * c1.rho - 0.4 * c2.rho, max_relative = 1e-14);
        assert_relative_eq!(cc.m[0], 1.7 * c1.m[0] - 0.4 * c2.m[0], max_relative = 1e-13);
        assert_relative_eq!(cc.e, 1.7 * c1.e - 0.4 * c2.e, max_relative = 1e-14);
    }

    #[test]
    fn zero_distribution_has_zero_moments() {
        let g = VelocityGrid::trapezoid(6.0, 8).unwrap();
        let c = moments(&vec![0.0; g.len()], &g);
        assert_eq!((c.rho, c.m, c.e), (0.0, [0.0; 3], 0.0));
    }

    #[test]
    fn discrete_maxwellian_matches_target_moments_exactly() {
        let g = grid();
        let state = GasState::new(1.3, [0.4, 0.1, -0.2], 0.9);
        let f = maxwellian(&state, &g);
        let target = moments(&f, &g);
        let dm = DiscreteMaxwellian::fit(&target, &state, &g).unwrap();
        let got = dm.moments(&g);
        assert_relative_eq!(got.rho, target.rho, max_relative = 1e-13);
        assert_relative_eq!(got.m[0], target.m[0], epsilon = 1e-13);
        assert_relative_eq!(got.m[1], target.m[1], epsilon = 1e-13);
        assert_relative_eq!(got.e, target.e, max_relative = 1e-13);
        // materialized values agree with the axis-factor route
        let mut vals = vec![0.0; g.len()];
        dm.write_values(&g, &mut vals);
        let direct = moments(&vals, &g);
        assert_relative_eq!(direct.rho, target.rho, max_relative = 1e-12);
        assert_relative_eq!(direct.e, target.e, max_relative = 1e-12);
    }

    #[test]
    fn discrete_maxwellian_stays_near_continuous_for_fine_grids() {
        let g = grid();
        let state = GasState::planar(1.0, 0.5, 1.1);
        let target = moments(&maxwellian(&state, &g), &g);
        let dm = DiscreteMaxwellian::fit(&target, &state, &g).unwrap();
        let seed = DiscreteMaxwellian::seed(&state);
        assert_relative_eq!(dm.b, seed.b, max_relative = 1e-6);
        assert_relative_eq!(dm.a[0], seed.a[0], max_relative = 1e-6);
    }
}
