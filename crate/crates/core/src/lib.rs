//! Numerical laboratory for perturbed planar two-shock waves in a monatomic gas.
//!
//! The crate builds the composite wave picture bottom-up: exact two-shock
//! Riemann algebra ([`euler`]), a discrete velocity-space layer with a BGK
//! collision surrogate ([`kinetic`]), viscous shock profiles ([`profile`]),
//! the shifted two-profile-plus-diffusion-wave ansatz ([`ansatz`]),
//! Navier-Stokes and kinetic initial value solvers ([`solver`]), and the
//! anti-derivative / energy / characteristic-frame diagnostics used to watch
//! a perturbed composite wave relax ([`diagnostics`]).
//!
//! Gas constant R = 2/3 and adiabatic exponent 5/3 throughout, so the
//! specific internal energy equals the temperature and p = (2/3) rho theta.

pub mod error;
pub mod ansatz;
pub mod diagnostics;
pub mod kinetic;
pub mod euler;
pub mod gas;
pub mod par;
pub mod profile;
pub mod solver;
pub mod transport;

pub use error::{AnsatzError, EulerError, KineticError, ProfileError, SolverError};
pub use gas::{Conserved, GasState, GAS_GAMMA, GAS_R};
