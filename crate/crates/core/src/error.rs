//! Error types for the solver and analysis layers.

use thiserror::Error;

/// Failures in Riemann/Hugoniot algebra.
#[derive(Debug, Clone, Error)]
pub enum EulerError {
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),
    #[error("requested point lies on the non-entropic Hugoniot branch: {0}")]
    BranchViolation(String),
    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("data is not connectable by a 1-shock plus 3-shock pattern: {0}")]
    NotTwoShock(String),
}

/// Failures in velocity-grid construction and moment matching.
#[derive(Debug, Clone, Error)]
pub enum KineticError {
    #[error("velocity grid too coarse or too narrow: {0}")]
    GridUnderResolved(String),
    #[error("discrete Maxwellian moment match did not converge: {0}")]
    MomentMatchFailed(String),
}

/// Failures while constructing a viscous shock profile.
#[derive(Debug, Clone, Error)]
pub enum ProfileError {
    #[error("no heteroclinic connection found: {0}")]
    NoConnection(String),
    #[error("profile grid too short to reach endpoint tolerance: {0}")]
    GridTooShort(String),
    #[error("tail window too short for a decay-rate fit: {0}")]
    TailTooShort(String),
}

/// Failures while assembling the composite ansatz.
#[derive(Debug, Clone, Error)]
pub enum AnsatzError {
    #[error("mass-decomposition directions are numerically dependent: {0}")]
    DegenerateDirections(String),
    #[error("requested shift leaves the tabulated profile window: {0}")]
    ShiftOutOfRange(String),
}

/// Failures in the initial value solvers.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("non-physical state during time stepping: {0}")]
    NonPhysicalState(String),
    #[error("conservation audit failed: {0}")]
    ConservationLoss(String),
    #[error("time step exceeds the stable bound: {0}")]
    CflViolation(String),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
}
