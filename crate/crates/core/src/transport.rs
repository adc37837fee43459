//! Transport coefficient laws and Chapman-Enskog viscous flux formulas.

use serde::{Deserialize, Serialize};

use crate::gas::{GasState, GAS_R};

/// Temperature-dependent viscosity/conductivity pair.
///
/// mu(theta) = mu_ref sqrt(theta/theta_ref) (hard-sphere-like scaling) and
/// kappa(theta) = (5/2) R mu(theta) / Pr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub mu_ref: f64,
    pub theta_ref: f64,
    pub prandtl: f64,
}

impl Transport {
    pub fn new(mu_ref: f64, theta_ref: f64, prandtl: f64) -> Self {
        Self { mu_ref, theta_ref, prandtl }
    }

    /// Monatomic default Pr = 2/3.
    pub fn with_default_prandtl(mu_ref: f64, theta_ref: f64) -> Self {
        Self::new(mu_ref, theta_ref, 2.0 / 3.0)
    }

    /// Coefficients matching the Chapman-Enskog limit of the BGK surrogate
    /// with collision frequency nu_ref rho sqrt(theta/theta_ref): the
    /// effective viscosity is p/nu_c = R theta_ref sqrt(theta/theta_ref) /
    /// nu_ref and the BGK Prandtl number is 1.
    pub fn bgk_limit(nu_ref: f64, theta_ref: f64) -> Self {
        Self::new(GAS_R * theta_ref / nu_ref, theta_ref, 1.0)
    }

    pub fn mu(&self, theta: f64) -> f64 {
        self.mu_ref * (theta / self.theta_ref).sqrt()
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        2.5 * GAS_R * self.mu(theta) / self.prandtl
    }

    /// d mu / d theta.
    pub fn mu_prime(&self, theta: f64) -> f64 {
        0.5 * self.mu_ref / (theta * self.theta_ref).sqrt()
    }

    /// d kappa / d theta.
    pub fn kappa_prime(&self, theta: f64) -> f64 {
        2.5 * GAS_R * self.mu_prime(theta) / self.prandtl
    }
}

/// Viscous stress S_ij = mu (d_j u_i + d_i u_j - (2/3) delta_ij div u) and
/// heat flux kappa grad theta for given velocity/temperature gradients.
///
/// `grad_u[i][j]` holds d_j u_i.
pub fn chapman_enskog_fluxes(
    grad_u: &[[f64; 3]; 3],
    grad_theta: &[f64; 3],
    state: &GasState,
    transport: &Transport,
) -> ([[f64; 3]; 3], [f64; 3]) {
    let mu = transport.mu(state.theta);
    let kappa = transport.kappa(state.theta);
    let div_u = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
    let mut stress = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = mu * (grad_u[i][j] + grad_u[j][i]);
            if i == j {
                s -= 2.0 / 3.0 * mu * div_u;
            }
            stress[i][j] = s;
        }
    }
    let q = [kappa * grad_theta[0], kappa * grad_theta[1], kappa * grad_theta[2]];
    (stress, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ref_state() -> GasState {
        GasState::planar(1.0, 0.0, 1.0)
    }

    #[test]
    fn planar_shear_specialization() {
        // u = (u1(x1), 0, 0) with u1' = 2: S11 = (4/3) mu u1'.
        let tr = Transport::with_default_prandtl(0.5, 1.0);
        let mut grad_u = [[0.0; 3]; 3];
        grad_u[0][0] = 2.0;
        let (s, q) = chapman_enskog_fluxes(&grad_u, &[0.0; 3], &ref_state(), &tr);
        assert_relative_eq!(s[0][0], 4.0 / 3.0 * 0.5 * 2.0, max_relative = 1e-15);
        assert_relative_eq!(s[1][1], -2.0 / 3.0 * 0.5 * 2.0, max_relative = 1e-15);
        assert_relative_eq!(s[2][2], -2.0 / 3.0 * 0.5 * 2.0, max_relative = 1e-15);
        assert_eq!(s[0][1], 0.0);
        assert_eq!(q, [0.0; 3]);
    }

    #[test]
    fn stress_is_trace_free() {
        let tr = Transport::with_default_prandtl(0.3, 1.0);
        let grad_u = [[0.4, -1.2, 0.7], [0.1, 0.9, -0.3], [-0.5, 0.2, -1.1]];
        let (s, _) = chapman_enskog_fluxes(&grad_u, &[1.0, -2.0, 0.5], &ref_state(), &tr);
        assert_relative_eq!(s[0][0] + s[1][1] + s[2][2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rigid_rotation_is_stress_free() {
        // u = omega x r has antisymmetric gradient.
        let tr = Transport::with_default_prandtl(0.3, 1.0);
        let (wx, wy, wz) = (0.3, -0.7, 1.1);
        let grad_u = [[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]];
        let (s, _) = chapman_enskog_fluxes(&grad_u, &[0.0; 3], &ref_state(), &tr);
        for row in &s {
            for &v in row {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn heat_flux_follows_temperature_gradient() {
        let tr = Transport::with_default_prandtl(0.6, 1.0);
        let (_, q) = chapman_enskog_fluxes(&[[0.0; 3]; 3], &[2.0, 0.0, -1.0], &ref_state(), &tr);
        let kappa = tr.kappa(1.0);
        assert_relative_eq!(kappa, 2.5 * GAS_R * 0.6 / (2.0 / 3.0), max_relative = 1e-15);
        assert_relative_eq!(q[0], 2.0 * kappa, max_relative = 1e-15);
        assert_relative_eq!(q[2], -kappa, max_relative = 1e-15);
    }

    #[test]
    fn viscosity_scales_like_sqrt_theta() {
        let tr = Transport::with_default_prandtl(0.5, 1.0);
        assert_relative_eq!(tr.mu(4.0) / tr.mu(1.0), 2.0, max_relative = 1e-14);
        let h = 1e-6;
        let fd = (tr.mu(1.0 + h) - tr.mu(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(tr.mu_prime(1.0), fd, max_relative = 1e-8);
        let fd_k = (tr.kappa(1.0 + h) - tr.kappa(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(tr.kappa_prime(1.0), fd_k, max_relative = 1e-8);
    }

    #[test]
    fn bgk_limit_matches_p_over_nu() {
        let tr = Transport::bgk_limit(100.0, 1.0);
        // mu(theta) must equal p / nu_c for every (rho, theta).
        for &(rho, theta) in &[(1.0, 1.0), (2.0, 0.7), (0.5, 1.9)] {
            let p = GAS_R * rho * theta;
            let nu_c = 100.0 * rho * (theta / 1.0_f64).sqrt();
            assert_relative_eq!(tr.mu(theta), p / nu_c, max_relative = 1e-14);
        }
        assert_eq!(tr.prandtl, 1.0);
    }
}
