//! Scalar weight functions attached to the diffusion wave, and the relative
//! entropy of a snapshot against the composite background.

use crate::ansatz::{CompositeAnsatz, DiffusionWave};
use crate::error::SolverError;
use crate::solver::{FluidField, Grid, KahanSum};

use super::cumulative_trapezoid;

/// Unit-mass Gaussian majorant riding with the intermediate state. Its
/// variance 8a(1+t) is four times the diffusion wave's, wide enough that the
/// squared kernel still dominates the wave-interaction terms, so the
/// advection-diffusion balance it satisfies carries diffusivity 4a.
pub fn heat_kernel(wave: &DiffusionWave, x1: f64, t: f64) -> f64 {
    let tau = 1.0 + t;
    let z = x1 - wave.u_sharp * t;
    (16.0 * std::f64::consts::PI * wave.a * tau).powf(-0.5)
        * (-z * z / (16.0 * wave.a * tau)).exp()
}

/// h_t + u# h_x1 - 4a h_x1x1 at a point; zero to roundoff.
pub fn heat_kernel_pde_residual(wave: &DiffusionWave, x1: f64, t: f64) -> f64 {
    let tau = 1.0 + t;
    let z = x1 - wave.u_sharp * t;
    let h = heat_kernel(wave, x1, t);
    let s = 8.0 * wave.a * tau;
    let hx = -h * z / s;
    let hxx = h * (z * z / (s * s) - 1.0 / s);
    let ht = h * (-0.5 / tau + z * z / (2.0 * s * tau)) + wave.u_sharp * h * z / s;
    ht + wave.u_sharp * hx - 4.0 * wave.a * hxx
}

/// The kernel h, its running integral n (mass from the left), and the
/// exponential weight eta1 = exp(n) in [1, e], sampled on the x1 nodes.
pub struct HeatKernelWeights {
    pub h: Vec<f64>,
    pub n: Vec<f64>,
    pub eta1: Vec<f64>,
}

pub fn heat_kernel_weights(wave: &DiffusionWave, t: f64, grid: &Grid) -> HeatKernelWeights {
    assert!(wave.a > 0.0 && t >= 0.0);
    let h: Vec<f64> = (0..grid.n1).map(|i| heat_kernel(wave, grid.x1(i), t)).collect();
    let n = cumulative_trapezoid(&h, grid.dx());
    let eta1 = n.iter().map(|&v| v.exp()).collect();
    HeatKernelWeights { h, n, eta1 }
}

/// Gamma(s) = s - ln s - 1: nonnegative, vanishing only at s = 1.
pub fn entropy_gamma(s: f64) -> f64 {
    s - s.ln() - 1.0
}

/// Pointwise relative entropy against the time-t ansatz,
///   E = (2/3) theta~ Gamma(rho~/rho) + |u - u~|^2 / 2 + theta~ Gamma(theta/theta~),
/// and the integral of rho E, which is equivalent to the squared L2 norm of
/// the perturbation while the perturbation stays small.
pub fn relative_entropy(
    field: &FluidField,
    ansatz: &CompositeAnsatz,
    t: f64,
) -> Result<(Vec<f64>, f64), SolverError> {
    let grid = &field.grid;
    let n1 = grid.n1;
    let tilde: Vec<_> = (0..n1).map(|i| ansatz.primitive_at(grid.x1(i), t)).collect();
    let mut density = vec![0.0; grid.len()];
    let mut acc = KahanSum::default();
    for p in 0..grid.len() {
        let s = field.state_at(p)?;
        let b = &tilde[p % n1];
        let du2 = (0..3).map(|d| (s.u[d] - b.u[d]).powi(2)).sum::<f64>();
        let e = (2.0 / 3.0) * b.theta * entropy_gamma(b.rho / s.rho)
            + 0.5 * du2
            + b.theta * entropy_gamma(s.theta / b.theta);
        density[p] = e;
        acc.add(s.rho * e);
    }
    let integral = acc.value() * grid.dx() / (grid.n2 * grid.n3) as f64;
    Ok((density, integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_ansatz, decompose_initial_mass};
    use crate::euler::{two_shock_data, Family};
    use crate::gas::GasState;
    use crate::profile::{solve_profile, GridParams};
    use crate::transport::Transport;
    use approx::assert_relative_eq;

    fn wave() -> DiffusionWave {
        DiffusionWave { alpha2: 0.3, a: 0.11, u_sharp: 0.04 }
    }

    #[test]
    fn kernel_mass_is_one_and_n_monotone() {
        let w = wave();
        // sigma(t=9) = sqrt(8 * 0.11 * 10) ~ 2.97; +-14 sigma inside the box
        let g = Grid::planar(42.0, 4096).unwrap();
        let weights = heat_kernel_weights(&w, 9.0, &g);
        let n_last = weights.n[g.n1 - 1];
        assert!(n_last <= 1.0 + 1e-12, "n overshoots: {n_last}");
        assert!(n_last > 1.0 - 1e-9, "mass lost: {n_last}");
        for i in 1..g.n1 {
            assert!(weights.n[i] >= weights.n[i - 1]);
        }
        for &e in &weights.eta1 {
            assert!((1.0..=std::f64::consts::E + 1e-12).contains(&e));
        }
        // d/dx1 eta1 = eta1 h at nodes, through the trapezoid identity
        let dx = g.dx();
        for i in 1..g.n1 {
            let slope = (weights.n[i] - weights.n[i - 1]) / dx;
            let mid = 0.5 * (weights.h[i] + weights.h[i - 1]);
            assert_relative_eq!(slope, mid, epsilon = 1e-13);
        }
    }

    #[test]
    fn kernel_solves_its_advection_diffusion_equation() {
        let w = wave();
        for &(x, t) in &[(0.0, 0.0), (1.3, 2.0), (-4.0, 7.5), (10.0, 40.0), (2.0, 99.0)] {
            let r = heat_kernel_pde_residual(&w, x, t);
            assert!(r.abs() < 1e-12, "residual {r} at ({x}, {t})");
        }
        // and the numeric time derivative agrees
        let (x, t, h) = (0.8, 3.0, 1e-5);
        let dt = (heat_kernel(&w, x, t + h) - heat_kernel(&w, x, t - h)) / (2.0 * h);
        let dxx = (heat_kernel(&w, x + h, t) - 2.0 * heat_kernel(&w, x, t)
            + heat_kernel(&w, x - h, t))
            / (h * h);
        let dx1 = (heat_kernel(&w, x + h, t) - heat_kernel(&w, x - h, t)) / (2.0 * h);
        assert_relative_eq!(dt, 4.0 * w.a * dxx - w.u_sharp * dx1, epsilon = 1e-6);
    }

    #[test]
    fn kernel_variance_is_four_times_the_wave() {
        let w = wave();
        let t = 5.0;
        // second moment about the drift center by quadrature
        let g = Grid::planar(60.0, 8192).unwrap();
        let mut m0 = 0.0;
        let mut m2 = 0.0;
        for i in 0..g.n1 {
            let x = g.x1(i);
            let z = x - w.u_sharp * t;
            let h = heat_kernel(&w, x, t);
            m0 += h * g.dx();
            m2 += z * z * h * g.dx();
        }
        assert_relative_eq!(m0, 1.0, epsilon = 1e-9);
        assert_relative_eq!(m2, 8.0 * w.a * (1.0 + t), max_relative = 1e-8);
        // the wave itself: Theta variance 2a(1+t), mass alpha2
        let mass = w.mass_quadrature(t, 60.0, 8192);
        assert_relative_eq!(mass, w.alpha2, max_relative = 1e-9);
    }

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
    fn entropy_vanishes_on_the_ansatz_and_grows_quadratically() {
        let ansatz = composite(0.2);
        let g = Grid::planar(25.0, 128).unwrap();
        let t = 0.3;
        let exact = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, t));
        let (density, integral) = relative_entropy(&exact, &ansatz, t).unwrap();
        assert!(density.iter().all(|&e| e.abs() < 1e-13));
        assert!(integral.abs() < 1e-13);

        // perturb rho by eps and 2 eps: the integral scales by ~4
        let mut bumped = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, t));
        for p in 0..g.len() {
            bumped.rho[p] += 1e-4;
        }
        let (_, e1) = relative_entropy(&bumped, &ansatz, t).unwrap();
        for p in 0..g.len() {
            bumped.rho[p] += 1e-4;
        }
        let (_, e2) = relative_entropy(&bumped, &ansatz, t).unwrap();
        assert!(e1 > 0.0);
        assert_relative_eq!(e2 / e1, 4.0, max_relative = 2e-3);
    }

    #[test]
    fn entropy_is_norm_equivalent_for_small_perturbations() {
        let ansatz = composite(0.15);
        let g = Grid::planar(25.0, 64).unwrap();
        let t = 1.0;
        let mut field = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, t));
        for p in 0..g.len() {
            let x = g.x1(p % g.n1);
            field.rho[p] += 2e-3 * (0.4 * x).sin();
            field.m1[p] -= 1e-3 * (0.3 * x).cos();
            field.e[p] += 1.5e-3 * (0.2 * x).sin();
        }
        let (density, _) = relative_entropy(&field, &ansatz, t).unwrap();
        let pert = crate::diagnostics::perturbation(&field, &ansatz, t).unwrap();
        for p in 0..g.len() {
            let q = pert.phi[p].powi(2)
                + pert.varphi[0][p].powi(2)
                + pert.zeta[p].powi(2);
            let rho_e = field.rho[p] * density[p];
            if q > 1e-12 {
                let ratio = rho_e / q;
                assert!((0.05..=20.0).contains(&ratio), "ratio {ratio} at {p}");
            }
        }
    }

    #[test]
    fn entropy_rejects_nonphysical_snapshots() {
        let ansatz = composite(0.2);
        let g = Grid::planar(10.0, 16).unwrap();
        let mut field = FluidField::from_fn(g, |x1, _, _| ansatz.conserved_at(x1, 0.0));
        field.e[5] = -1.0;
        assert!(relative_entropy(&field, &ansatz, 0.0).is_err());
    }
}
