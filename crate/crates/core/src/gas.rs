//! Gas state algebra for a monatomic ideal gas with R = 2/3, gamma = 5/3.
//!
//! With these constants the specific internal energy is e = theta, the
//! pressure is p = (2/3) rho theta, and the sound speed is sqrt(10 theta)/3.

use serde::{Deserialize, Serialize};

use crate::error::EulerError;

/// Gas constant R.
pub const GAS_R: f64 = 2.0 / 3.0;
/// Adiabatic exponent.
pub const GAS_GAMMA: f64 = 5.0 / 3.0;

/// Primitive state (density, velocity, temperature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

/// Conserved state (density, momentum, total energy density).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub rho: f64,
    pub m: [f64; 3],
    pub e: f64,
}

impl GasState {
    pub fn new(rho: f64, u: [f64; 3], theta: f64) -> Self {
        Self { rho, u, theta }
    }

    /// Planar state: transverse velocity components zero.
    pub fn planar(rho: f64, u1: f64, theta: f64) -> Self {
        Self { rho, u: [u1, 0.0, 0.0], theta }
    }

    pub fn is_valid(&self) -> bool {
        self.rho > 0.0 && self.theta > 0.0 && self.rho.is_finite() && self.theta.is_finite()
    }

    /// p = (2/3) rho theta.
    pub fn pressure(&self) -> f64 {
        GAS_R * self.rho * self.theta
    }

    /// Sound speed sqrt(10 theta)/3.
    pub fn sound_speed(&self) -> f64 {
        (10.0 * self.theta).sqrt() / 3.0
    }

    pub fn speed_squared(&self) -> f64 {
        self.u[0] * self.u[0] + self.u[1] * self.u[1] + self.u[2] * self.u[2]
    }

    /// m = rho u, E = rho (theta + |u|^2 / 2).
    pub fn to_conserved(&self) -> Conserved {
        Conserved {
            rho: self.rho,
            m: [self.rho * self.u[0], self.rho * self.u[1], self.rho * self.u[2]],
            e: self.rho * (self.theta + 0.5 * self.speed_squared()),
        }
    }

    /// Characteristic speeds (u1 - c, u1, u1 + c) with c = sqrt(10 theta)/3.
    pub fn eigenvalues(&self) -> (f64, f64, f64) {
        let c = self.sound_speed();
        (self.u[0] - c, self.u[0], self.u[0] + c)
    }
}

impl Conserved {
    pub fn new(rho: f64, m: [f64; 3], e: f64) -> Self {
        Self { rho, m, e }
    }

    /// Inverse of [`GasState::to_conserved`].
    pub fn to_primitive(&self) -> Result<GasState, EulerError> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(EulerError::NonPhysicalState(format!("rho = {}", self.rho)));
        }
        let u = [self.m[0] / self.rho, self.m[1] / self.rho, self.m[2] / self.rho];
        let kinetic = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        let theta = self.e / self.rho - kinetic;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(EulerError::NonPhysicalState(format!("theta = {theta}")));
        }
        Ok(GasState { rho: self.rho, u, theta })
    }

    /// Euclidean norm over the five conserved slots.
    pub fn norm(&self) -> f64 {
        (self.rho * self.rho
            + self.m[0] * self.m[0]
            + self.m[1] * self.m[1]
            + self.m[2] * self.m[2]
            + self.e * self.e)
            .sqrt()
    }

    pub fn sub(&self, other: &Conserved) -> Conserved {
        Conserved {
            rho: self.rho - other.rho,
            m: [self.m[0] - other.m[0], self.m[1] - other.m[1], self.m[2] - other.m[2]],
            e: self.e - other.e,
        }
    }
}

/// Planar conserved triple (rho, m1, E); the transverse slots of the full
/// five-field state are identically zero in the composite wave problem.
pub type Triple = [f64; 3];

pub fn triple_of(c: &Conserved) -> Triple {
    [c.rho, c.m[0], c.e]
}

pub fn triple_norm(t: &Triple) -> f64 {
    (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn conserved_of_moving_state() {
        let s = GasState::planar(2.0, 1.0, 1.5);
        let c = s.to_conserved();
        assert_eq!(c.rho, 2.0);
        assert_eq!(c.m, [2.0, 0.0, 0.0]);
        assert_eq!(c.e, 4.0);
    }

    #[test]
    fn conserved_of_rest_state() {
        let c = GasState::planar(1.0, 0.0, 1.0).to_conserved();
        assert_eq!((c.rho, c.m, c.e), (1.0, [0.0; 3], 1.0));
    }

    #[test]
    fn primitive_of_conserved() {
        let s = Conserved::new(2.0, [2.0, 0.0, 0.0], 4.0).to_primitive().unwrap();
        assert_relative_eq!(s.rho, 2.0);
        assert_relative_eq!(s.u[0], 1.0);
        assert_relative_eq!(s.theta, 1.5);
    }

    #[test]
    fn cold_state_rejected() {
        // theta would be -1
        let err = Conserved::new(1.0, [2.0, 0.0, 0.0], 1.0).to_primitive();
        assert!(matches!(err, Err(EulerError::NonPhysicalState(_))));
    }

    #[test]
    fn eigenvalues_at_reference_state() {
        let (l1, l2, l3) = GasState::planar(1.0, 0.0, 0.9).eigenvalues();
        assert_relative_eq!(l1, -1.0, max_relative = 1e-15);
        assert_relative_eq!(l2, 0.0);
        assert_relative_eq!(l3, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn eigenvalues_shift_with_bulk_velocity() {
        let (l1, l2, l3) = GasState::planar(1.0, 2.0, 0.9).eigenvalues();
        assert_relative_eq!(l1, 1.0, max_relative = 1e-14);
        assert_relative_eq!(l2, 2.0);
        assert_relative_eq!(l3, 3.0, max_relative = 1e-14);
    }
}
