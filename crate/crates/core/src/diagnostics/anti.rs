//! Perturbation fields against the composite ansatz and their x1
//! antiderivatives, in both conserved and tilde (background-rescaled)
//! variables.

use crate::ansatz::CompositeAnsatz;
use crate::error::SolverError;
use crate::solver::{FluidField, Grid};

use super::{cumulative_trapezoid, transverse_mean};

/// Pointwise deviation of a snapshot from the time-t ansatz: conserved
/// components (phi, psi, omega) = (rho, m, E) - tilde, primitive components
/// (varphi, zeta) = (u, theta) - tilde.
pub struct Perturbation {
    pub phi: Vec<f64>,
    pub psi: [Vec<f64>; 3],
    pub omega: Vec<f64>,
    pub varphi: [Vec<f64>; 3],
    pub zeta: Vec<f64>,
}

pub fn perturbation(
    field: &FluidField,
    ansatz: &CompositeAnsatz,
    t: f64,
) -> Result<Perturbation, SolverError> {
    let grid = &field.grid;
    let n1 = grid.n1;
    // background is planar: one lookup per x1 node
    let mut tilde = Vec::with_capacity(n1);
    for i in 0..n1 {
        let c = ansatz.conserved_at(grid.x1(i), t);
        let s = ansatz.primitive_at(grid.x1(i), t);
        tilde.push((c, s));
    }
    let n = grid.len();
    let mut out = Perturbation {
        phi: vec![0.0; n],
        psi: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        omega: vec![0.0; n],
        varphi: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        zeta: vec![0.0; n],
    };
    for p in 0..n {
        let (c, s) = &tilde[p % n1];
        let state = field.state_at(p)?;
        out.phi[p] = field.rho[p] - c.rho;
        out.psi[0][p] = field.m1[p] - c.m[0];
        out.psi[1][p] = field.m2[p] - c.m[1];
        out.psi[2][p] = field.m3[p] - c.m[2];
        out.omega[p] = field.e[p] - c.e;
        for d in 0..3 {
            out.varphi[d][p] = state.u[d] - s.u[d];
        }
        out.zeta[p] = state.theta - s.theta;
    }
    Ok(out)
}

/// Antiderivatives (Phi, Psi1, W) of the transverse-averaged conserved
/// perturbation: torus average, then cumulative trapezoid along x1 from the
/// left edge.
pub struct AntiDerivatives {
    pub phi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn antiderivatives(pert: &Perturbation, grid: &Grid) -> AntiDerivatives {
    let dx = grid.dx();
    let row = |f: &[f64]| cumulative_trapezoid(&transverse_mean(f, grid), dx);
    AntiDerivatives {
        phi: row(&pert.phi),
        psi1: row(&pert.psi[0]),
        w: row(&pert.omega),
    }
}

/// Planar background sampled on the x1 nodes: primitive values with their
/// x1- and t-derivatives, everything the frame and energy weights need.
pub struct AnsatzSlice {
    pub rho: Vec<f64>,
    pub u1: Vec<f64>,
    pub theta: Vec<f64>,
    pub d1: [Vec<f64>; 3],
    pub dt: [Vec<f64>; 3],
}

impl AnsatzSlice {
    pub fn sample(ansatz: &CompositeAnsatz, grid: &Grid, t: f64) -> Self {
        let n1 = grid.n1;
        let mut out = Self {
            rho: vec![0.0; n1],
            u1: vec![0.0; n1],
            theta: vec![0.0; n1],
            d1: [vec![0.0; n1], vec![0.0; n1], vec![0.0; n1]],
            dt: [vec![0.0; n1], vec![0.0; n1], vec![0.0; n1]],
        };
        for i in 0..n1 {
            let (v, dx1, dt) = ansatz.primitive_derivs(grid.x1(i), t);
            out.rho[i] = v[0];
            out.u1[i] = v[1];
            out.theta[i] = v[2];
            for c in 0..3 {
                out.d1[c][i] = dx1[c];
                out.dt[c][i] = dt[c];
            }
        }
        out
    }
}

/// Antiderivatives rescaled by the background:
///   Psi1 = rho Psi1~ + u1 Phi,
///   W = rho W~ + u1 Psi1 + (theta - u1^2/2) Phi,
/// solved for (Psi1~, W~).
pub struct TildeVariables {
    pub psi1: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn tilde_variables(anti: &AntiDerivatives, slice: &AnsatzSlice) -> TildeVariables {
    let n1 = anti.phi.len();
    assert_eq!(slice.rho.len(), n1);
    let mut psi1 = vec![0.0; n1];
    let mut w = vec![0.0; n1];
    for i in 0..n1 {
        let (rho, u1, theta) = (slice.rho[i], slice.u1[i], slice.theta[i]);
        psi1[i] = (anti.psi1[i] - u1 * anti.phi[i]) / rho;
        w[i] = (anti.w[i] - u1 * anti.psi1[i] - (theta - 0.5 * u1 * u1) * anti.phi[i]) / rho;
    }
    TildeVariables { psi1, w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_ansatz, decompose_initial_mass, CompositeAnsatz};
    use crate::euler::{two_shock_data, Family};
    use crate::gas::GasState;
    use crate::profile::{solve_profile, GridParams};
    use crate::transport::Transport;
    use approx::assert_relative_eq;

    fn composite(strength: f64) -> CompositeAnsatz {
        let left = GasState::planar(1.0, 0.0, 1.0);
        let (_, sol) = two_shock_data(&left, strength, strength).unwrap();
        let tr = Transport::with_default_prandtl(0.3, 1.0);
        let params = GridParams::default();
        let p1 =
            solve_profile(&sol.left, &sol.intermediate, sol.s1, Family::One, tr, &params).unwrap();
        let p3 = solve_profile(&sol.right, &sol.intermediate, sol.s3, Family::Three, tr, &params)
            .unwrap();
        let dec = decompose_initial_mass([0.0; 3], &sol).unwrap();
        build_ansatz(&sol, &p1, &p3, &dec)
    }

    #[test]
    fn derivative_recovers_integrand_between_nodes() {
        // inverse identity of the trapezoid rule: the slope between
        // consecutive antiderivative nodes is the midpoint average
        let g = Grid::planar(10.0, 400).unwrap();
        let dx = g.dx();
        let f: Vec<f64> = (0..g.n1).map(|i| (-0.5 * g.x1(i).powi(2)).exp()).collect();
        let anti = cumulative_trapezoid(&f, dx);
        for i in 1..g.n1 {
            let slope = (anti[i] - anti[i - 1]) / dx;
            let mid = 0.5 * (f[i] + f[i - 1]);
            assert_relative_eq!(slope, mid, epsilon = 1e-13);
        }
    }

    #[test]
    fn gaussian_derivative_integrates_back_to_gaussian() {
        let g = Grid::planar(12.0, 3000).unwrap();
        let gauss = |x: f64| (-x * x / 2.0).exp();
        let dgauss: Vec<f64> = (0..g.n1).map(|i| -g.x1(i) * gauss(g.x1(i))).collect();
        let anti = cumulative_trapezoid(&dgauss, g.dx());
        // trapezoid error accumulates to ~ h^2/12 |f'(x)| <= h^2/12 here
        let tol = g.dx() * g.dx() / 12.0 * 1.01;
        let offset = gauss(g.x1(0));
        for i in 0..g.n1 {
            let expect = gauss(g.x1(i)) - offset;
            assert!((anti[i] - expect).abs() < tol, "node {i}: {}", anti[i] - expect);
        }
    }

    #[test]
    fn perturbation_vanishes_on_the_ansatz_itself() {
        let ansatz = composite(0.1);
        let g = Grid::planar(25.0, 64).unwrap();
        let t = 0.7;
        let field = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, t));
        let pert = perturbation(&field, &ansatz, t).unwrap();
        for p in 0..g.len() {
            assert!(pert.phi[p].abs() < 1e-14);
            assert!(pert.psi[0][p].abs() < 1e-14);
            assert!(pert.omega[p].abs() < 1e-14);
            assert!(pert.varphi[0][p].abs() < 1e-14);
            assert!(pert.zeta[p].abs() < 1e-14);
        }
    }

    #[test]
    fn tilde_variables_round_trip() {
        let ansatz = composite(0.08);
        let g = Grid::planar(25.0, 200).unwrap();
        let t = 1.3;
        // synthetic antiderivatives, then verify the defining relations
        let anti = AntiDerivatives {
            phi: (0..g.n1).map(|i| (0.2 * g.x1(i)).sin()).collect(),
            psi1: (0..g.n1).map(|i| (0.3 * g.x1(i)).cos()).collect(),
            w: (0..g.n1).map(|i| 0.5 * (0.1 * g.x1(i)).sin()).collect(),
        };
        let slice = AnsatzSlice::sample(&ansatz, &g, t);
        let tilde = tilde_variables(&anti, &slice);
        for i in 0..g.n1 {
            let (rho, u1, theta) = (slice.rho[i], slice.u1[i], slice.theta[i]);
            let psi1 = rho * tilde.psi1[i] + u1 * anti.phi[i];
            let w = rho * tilde.w[i]
                + u1 * anti.psi1[i]
                + (theta - 0.5 * u1 * u1) * anti.phi[i];
            assert_relative_eq!(psi1, anti.psi1[i], epsilon = 1e-13);
            assert_relative_eq!(w, anti.w[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_background_reduces_tilde_to_scaling() {
        // over the flat intermediate state the relations collapse to
        // Psi1~ = (Psi1 - u# Phi)/rho#, W~ = (W - u# Psi1 - ...)/rho#
        let ansatz = composite(0.05);
        let mid = ansatz.intermediate;
        let anti = AntiDerivatives {
            phi: vec![0.3; 8],
            psi1: vec![-0.2; 8],
            w: vec![0.7; 8],
        };
        // near the origin at t=0 the composite is exponentially close to the
        // intermediate state, but use the exact constant directly
        let slice = AnsatzSlice {
            rho: vec![mid.rho; 8],
            u1: vec![mid.u[0]; 8],
            theta: vec![mid.theta; 8],
            d1: [vec![0.0; 8], vec![0.0; 8], vec![0.0; 8]],
            dt: [vec![0.0; 8], vec![0.0; 8], vec![0.0; 8]],
        };
        let tilde = tilde_variables(&anti, &slice);
        let u = mid.u[0];
        for i in 0..8 {
            assert_relative_eq!(
                tilde.psi1[i],
                (-0.2 - u * 0.3) / mid.rho,
                epsilon = 1e-15
            );
            assert_relative_eq!(
                tilde.w[i],
                (0.7 - u * -0.2 - (mid.theta - 0.5 * u * u) * 0.3) / mid.rho,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn slice_derivatives_match_finite_differences() {
        let ansatz = composite(0.1);
        let g = Grid::planar(20.0, 96).unwrap();
        let t = 2.0;
        let slice = AnsatzSlice::sample(&ansatz, &g, t);
        let h = 1e-5;
        for &i in &[5usize, 30, 48, 70, 90] {
            let x = g.x1(i);
            let num_dx = |f: &dyn Fn(f64, f64) -> f64| (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let num_dt = |f: &dyn Fn(f64, f64) -> f64| (f(x, t + h) - f(x, t - h)) / (2.0 * h);
            let rho = |x1: f64, tt: f64| ansatz.primitive_at(x1, tt).rho;
            let u1 = |x1: f64, tt: f64| ansatz.primitive_at(x1, tt).u[0];
            let th = |x1: f64, tt: f64| ansatz.primitive_at(x1, tt).theta;
            assert_relative_eq!(slice.d1[0][i], num_dx(&rho), epsilon = 1e-7);
            assert_relative_eq!(slice.d1[1][i], num_dx(&u1), epsilon = 1e-7);
            assert_relative_eq!(slice.d1[2][i], num_dx(&th), epsilon = 1e-7);
            assert_relative_eq!(slice.dt[0][i], num_dt(&rho), epsilon = 1e-7);
            assert_relative_eq!(slice.dt[1][i], num_dt(&u1), epsilon = 1e-7);
            assert_relative_eq!(slice.dt[2][i], num_dt(&th), epsilon = 1e-7);
        }
    }

    #[test]
    fn zero_mass_pencil_gives_vanishing_endpoints() {
        let g = Grid::planar(10.0, 512).unwrap();
        // compactly supported derivative-of-bump has exactly zero mass
        let f: Vec<f64> = (0..g.n1)
            .map(|i| {
                let x = g.x1(i);
                let y: f64 = x / 3.0;
                if y.abs() < 1.0 {
                    -2.0 * y * (-1.0 / (1.0 - y * y)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let anti = cumulative_trapezoid(&f, g.dx());
        assert_eq!(anti[0], 0.0);
        let scale = anti.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        assert!(scale > 0.0);
        // the quadrature is not exact, but the endpoint defect is the full
        // integral of an odd function: zero to roundoff
        assert!(anti[g.n1 - 1].abs() < 1e-14 * scale.max(1.0));
    }

    #[test]
    fn conserved_from_primitive_perturbation() {
        // psi and omega mix varphi/zeta/phi consistently
        let ansatz = composite(0.1);
        let g = Grid::planar(25.0, 32).unwrap();
        let t = 0.4;
        let mut field = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, t));
        for p in 0..g.len() {
            field.rho[p] += 1e-3;
            field.m1[p] += 2e-3;
            field.e[p] -= 1e-3;
        }
        let pert = perturbation(&field, &ansatz, t).unwrap();
        for p in 0..g.len() {
            let s = field.state_at(p).unwrap();
            let tilde = ansatz.primitive_at(g.x1(p % g.n1), t);
            assert_relative_eq!(pert.phi[p], 1e-3, epsilon = 1e-12);
            assert_relative_eq!(pert.psi[0][p], 2e-3, epsilon = 1e-12);
            assert_relative_eq!(pert.omega[p], -1e-3, epsilon = 1e-12);
            assert_relative_eq!(pert.varphi[0][p], s.u[0] - tilde.u[0], epsilon = 1e-15);
            assert_relative_eq!(pert.zeta[p], s.theta - tilde.theta, epsilon = 1e-15);
        }
    }
}
