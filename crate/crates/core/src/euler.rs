//! Rankine-Hugoniot algebra for the two-shock composite Riemann pattern.
//!
//! Shock branches are parameterized by the pressure ratio across the shock,
//! which is monotone in wave strength and singularity-free at zero strength:
//! with gamma = 5/3 the jump relations reduce to
//!     p_b = P p_a,   rho_b = rho_a (4P + 1)/(P + 4),
//!     j^2 = rho_a p_a (4P + 1)/3,
//! where subscript `a` is the state ahead of the shock (low pressure), `b`
//! behind (high pressure), P >= 1, and j = rho_a |u_a - s| > 0 is the mass
//! flux through the front. Family 1 fronts propagate into the left state,
//! family 3 fronts into the right state.

use serde::{Deserialize, Serialize};

use crate::error::EulerError;
use crate::gas::{triple_norm, triple_of, GasState, Triple};

/// Shock family (first or third characteristic field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    One,
    Three,
}

impl Family {
    fn flux_sign(self) -> f64 {
        match self {
            // Gas crosses a 1-front left to right in the front frame,
            // a 3-front right to left.
            Family::One => 1.0,
            Family::Three => -1.0,
        }
    }
}

/// Riemann data for the composite two-shock problem; transverse velocities
/// are zero on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannData {
    pub left: GasState,
    pub right: GasState,
}

impl RiemannData {
    pub fn new(left: GasState, right: GasState) -> Self {
        Self { left, right }
    }

    pub fn is_planar(&self) -> bool {
        self.left.u[1] == 0.0
            && self.left.u[2] == 0.0
            && self.right.u[1] == 0.0
            && self.right.u[2] == 0.0
    }
}

/// Exact two-shock solution: outer states, intermediate state, front
/// speeds, strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWaveSolution {
    pub left: GasState,
    pub right: GasState,
    pub intermediate: GasState,
    pub s1: f64,
    pub s3: f64,
    pub delta_s1: f64,
    pub delta_s3: f64,
    pub delta: f64,
}

impl CompositeWaveSolution {
    pub fn data(&self) -> RiemannData {
        RiemannData::new(self.left, self.right)
    }
}

fn density_ratio(pressure_ratio: f64) -> f64 {
    (4.0 * pressure_ratio + 1.0) / (pressure_ratio + 4.0)
}

fn mass_flux(rho_ahead: f64, p_ahead: f64, pressure_ratio: f64) -> f64 {
    (rho_ahead * p_ahead * (4.0 * pressure_ratio + 1.0) / 3.0).sqrt()
}

/// State behind a shock of the given family with pressure ratio 1 + strength
/// across it, plus the front speed. The upstream argument is the state the
/// front propagates into (left state for family 1, right state for family 3).
pub fn hugoniot_state(
    upstream: &GasState,
    family: Family,
    strength: f64,
) -> Result<(GasState, f64), EulerError> {
    if !(strength >= 0.0) {
        return Err(EulerError::BranchViolation(format!(
            "strength {strength} < 0 requests an expansion shock"
        )));
    }
    if !upstream.is_valid() {
        return Err(EulerError::NonPhysicalState(format!("upstream {upstream:?}")));
    }
    if strength == 0.0 {
        let (l1, _, l3) = upstream.eigenvalues();
        let s = match family {
            Family::One => l1,
            Family::Three => l3,
        };
        return Ok((*upstream, s));
    }
    let ratio = 1.0 + strength;
    let p_a = upstream.pressure();
    let rho_b = upstream.rho * density_ratio(ratio);
    let p_b = ratio * p_a;
    let theta_b = 1.5 * p_b / rho_b;
    let j = mass_flux(upstream.rho, p_a, ratio);
    let sign = family.flux_sign();
    let s = upstream.u[0] - sign * j / upstream.rho;
    let u_b = s + sign * j / rho_b;
    Ok((GasState::planar(rho_b, u_b, theta_b), s))
}

/// Inverse branch walk: the state ahead of a shock of the given family whose
/// behind state and pressure ratio are known. Used to manufacture composite
/// data outward from the intermediate state.
pub fn hugoniot_ahead(
    behind: &GasState,
    family: Family,
    strength: f64,
) -> Result<(GasState, f64), EulerError> {
    if !(strength >= 0.0) {
        return Err(EulerError::BranchViolation(format!(
            "strength {strength} < 0 requests an expansion shock"
        )));
    }
    if !behind.is_valid() {
        return Err(EulerError::NonPhysicalState(format!("behind {behind:?}")));
    }
    let ratio = 1.0 + strength;
    let p_a = behind.pressure() / ratio;
    let rho_a = behind.rho / density_ratio(ratio);
    let theta_a = 1.5 * p_a / rho_a;
    let j = mass_flux(rho_a, p_a, ratio);
    let sign = family.flux_sign();
    let s = behind.u[0] - sign * j / behind.rho;
    let u_a = s + sign * j / rho_a;
    Ok((GasState::planar(rho_a, u_a, theta_a), s))
}

/// Planar conserved flux (m1, rho u1^2 + p, u1 (E + p)).
pub fn planar_flux(s: &GasState) -> Triple {
    let c = s.to_conserved();
    let p = s.pressure();
    [c.m[0], c.m[0] * s.u[0] + p, s.u[0] * (c.e + p)]
}

/// The three jump-condition residuals -s [U] + [F(U)] across a front.
pub fn rh_residuals(ahead: &GasState, behind: &GasState, speed: f64) -> Triple {
    let (ua, ub) = (triple_of(&ahead.to_conserved()), triple_of(&behind.to_conserved()));
    let (fa, fb) = (planar_flux(ahead), planar_flux(behind));
    [
        -speed * (ub[0] - ua[0]) + (fb[0] - fa[0]),
        -speed * (ub[1] - ua[1]) + (fb[1] - fa[1]),
        -speed * (ub[2] - ua[2]) + (fb[2] - fa[2]),
    ]
}

/// Strict Lax inequalities for the family (vacuous at zero strength).
pub fn lax_holds(ahead: &GasState, behind: &GasState, family: Family, speed: f64) -> bool {
    match family {
        Family::One => {
            let l1_ahead = ahead.eigenvalues().0;
            let l1_behind = behind.eigenvalues().0;
            l1_behind < speed && speed < l1_ahead
        }
        Family::Three => {
            let l3_ahead = ahead.eigenvalues().2;
            let l3_behind = behind.eigenvalues().2;
            l3_ahead < speed && speed < l3_behind
        }
    }
}

/// delta^{s1} = |rho# - rho-| + |m# - m-| + |E# - E-| and the family-3
/// analogue; delta = min of the two.
pub fn wave_strengths(sol: &CompositeWaveSolution, data: &RiemannData) -> (f64, f64, f64) {
    let mid = triple_of(&sol.intermediate.to_conserved());
    let l = triple_of(&data.left.to_conserved());
    let r = triple_of(&data.right.to_conserved());
    let d1 = (mid[0] - l[0]).abs() + (mid[1] - l[1]).abs() + (mid[2] - l[2]).abs();
    let d3 = (r[0] - mid[0]).abs() + (r[1] - mid[1]).abs() + (r[2] - mid[2]).abs();
    (d1, d3, d1.min(d3))
}

/// Velocity reached from `anchor` along the compressive branch of the given
/// family when the behind pressure is `p`.
fn branch_velocity(anchor: &GasState, family: Family, p: f64) -> f64 {
    let p_a = anchor.pressure();
    let a = 0.75 / anchor.rho;
    let b = 0.25 * p_a;
    let f = (p - p_a) * (a / (p + b)).sqrt();
    match family {
        Family::One => anchor.u[0] - f,
        Family::Three => anchor.u[0] + f,
    }
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const RH_TOL: f64 = 1e-10;

/// Solve for the intermediate state of a two-shock Riemann datum by a 2x2
/// Newton iteration on (p#, u1#), matching the family-1 branch from the left
/// state against the family-3 branch from the right state.
pub fn solve_intermediate_state(
    data: &RiemannData,
) -> Result<CompositeWaveSolution, EulerError> {
    if !data.left.is_valid() || !data.right.is_valid() {
        return Err(EulerError::NonPhysicalState("Riemann end state".into()));
    }
    let jump = triple_norm(&[
        data.right.to_conserved().rho - data.left.to_conserved().rho,
        data.right.to_conserved().m[0] - data.left.to_conserved().m[0],
        data.right.to_conserved().e - data.left.to_conserved().e,
    ]);
    let scale = triple_norm(&triple_of(&data.left.to_conserved()));
    if jump <= 1e-13 * scale.max(1.0) {
        // Degenerate datum: both strengths vanish and the Lax inequalities
        // are vacuous.
        return Ok(CompositeWaveSolution {
            left: data.left,
            right: data.right,
            intermediate: data.left,
            s1: data.left.eigenvalues().0,
            s3: data.left.eigenvalues().2,
            delta_s1: 0.0,
            delta_s3: 0.0,
            delta: 0.0,
        });
    }

    let residual = |p: f64, u: f64| -> [f64; 2] {
        [
            u - branch_velocity(&data.left, Family::One, p),
            u - branch_velocity(&data.right, Family::Three, p),
        ]
    };

    let mut p = 0.5 * (data.left.pressure() + data.right.pressure());
    let mut u = 0.5 * (data.left.u[0] + data.right.u[0]);
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let r = residual(p, u);
        if r[0].abs().max(r[1].abs()) < NEWTON_TOL {
            converged = true;
            break;
        }
        let hp = 1e-7 * p.abs().max(1.0);
        let hu = 1e-7 * u.abs().max(1.0);
        let rp = residual(p + hp, u);
        let ru = residual(p, u + hu);
        let j00 = (rp[0] - r[0]) / hp;
        let j01 = (ru[0] - r[0]) / hu;
        let j10 = (rp[1] - r[1]) / hp;
        let j11 = (ru[1] - r[1]) / hu;
        let det = j00 * j11 - j01 * j10;
        if det.abs() < 1e-300 {
            return Err(EulerError::NoConvergence("singular Newton Jacobian".into()));
        }
        let dp = (-r[0] * j11 + r[1] * j01) / det;
        let du = (-j00 * r[1] + j10 * r[0]) / det;
        p += dp;
        u += du;
        if !(p > 0.0) || !p.is_finite() || !u.is_finite() {
            return Err(EulerError::NoConvergence(format!("iterate left domain: p = {p}")));
        }
    }
    if !converged {
        let r = residual(p, u);
        if r[0].abs().max(r[1].abs()) >= NEWTON_TOL {
            return Err(EulerError::NoConvergence(format!(
                "residual {:.3e} after {NEWTON_MAX_ITER} iterations",
                r[0].abs().max(r[1].abs())
            )));
        }
    }

    // Both waves must be compressive; otherwise the pattern involves a
    // rarefaction and the datum is outside this solver's scope.
    if p < data.left.pressure() || p < data.right.pressure() {
        return Err(EulerError::NotTwoShock(format!(
            "intermediate pressure {p:.6} below an end-state pressure"
        )));
    }

    let rho_from_left = data.left.rho * density_ratio(p / data.left.pressure());
    let rho_from_right = data.right.rho * density_ratio(p / data.right.pressure());
    if (rho_from_left - rho_from_right).abs() > 1e-8 * rho_from_left {
        return Err(EulerError::NotTwoShock(format!(
            "contact discontinuity present: rho# mismatch {:.3e}",
            (rho_from_left - rho_from_right).abs()
        )));
    }
    let intermediate = GasState::planar(rho_from_left, u, 1.5 * p / rho_from_left);

    let j1 = mass_flux(data.left.rho, data.left.pressure(), p / data.left.pressure());
    let j3 = mass_flux(data.right.rho, data.right.pressure(), p / data.right.pressure());
    let s1 = data.left.u[0] - j1 / data.left.rho;
    let s3 = data.right.u[0] + j3 / data.right.rho;

    let r1 = rh_residuals(&data.left, &intermediate, s1);
    let r3 = rh_residuals(&data.right, &intermediate, s3);
    let worst = r1
        .iter()
        .chain(r3.iter())
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    if worst > RH_TOL * scale.max(1.0) {
        return Err(EulerError::NotTwoShock(format!("RH residual {worst:.3e}")));
    }

    let mut sol = CompositeWaveSolution {
        left: data.left,
        right: data.right,
        intermediate,
        s1,
        s3,
        delta_s1: 0.0,
        delta_s3: 0.0,
        delta: 0.0,
    };
    let (d1, d3, d) = wave_strengths(&sol, data);
    sol.delta_s1 = d1;
    sol.delta_s3 = d3;
    sol.delta = d;

    if sol.delta > 0.0 {
        let lax1 = lax_holds(&data.left, &intermediate, Family::One, s1);
        let lax3 = lax_holds(&data.right, &intermediate, Family::Three, s3);
        if !lax1 || !lax3 {
            return Err(EulerError::NotTwoShock("Lax inequality violated".into()));
        }
    }
    Ok(sol)
}

/// Manufacture two-shock Riemann data outward from the left state: a family-1
/// front of the given strength fixes the intermediate state, then a family-3
/// front of the second strength fixes the right state.
pub fn two_shock_data(
    left: &GasState,
    strength1: f64,
    strength3: f64,
) -> Result<(RiemannData, CompositeWaveSolution), EulerError> {
    let (mid, s1) = hugoniot_state(left, Family::One, strength1)?;
    let (right, s3) = hugoniot_ahead(&mid, Family::Three, strength3)?;
    let data = RiemannData::new(*left, right);
    let mut sol = CompositeWaveSolution {
        left: *left,
        right,
        intermediate: mid,
        s1,
        s3,
        delta_s1: 0.0,
        delta_s3: 0.0,
        delta: 0.0,
    };
    let (d1, d3, d) = wave_strengths(&sol, &data);
    sol.delta_s1 = d1;
    sol.delta_s3 = d3;
    sol.delta = d;
    Ok((data, sol))
}

/// Symmetric colliding-flow datum with intermediate state `mid` at rest
/// velocity `mid.u[0]` and equal strengths on both fronts.
pub fn symmetric_two_shock(mid: &GasState, strength: f64) -> Result<RiemannData, EulerError> {
    let (left, _) = hugoniot_ahead(mid, Family::One, strength)?;
    let (right, _) = hugoniot_ahead(mid, Family::Three, strength)?;
    Ok(RiemannData::new(left, right))
}

/// Find the branch strength whose symmetric composite datum around `mid` has
/// wave strength delta = `target` (bisection; strengths are monotone).
pub fn strength_for_delta(mid: &GasState, target: f64) -> Result<f64, EulerError> {
    if !(target > 0.0) {
        return Err(EulerError::BranchViolation(format!("target delta {target} <= 0")));
    }
    let delta_of = |r: f64| -> Result<f64, EulerError> {
        let data = symmetric_two_shock(mid, r)?;
        let sol = solve_intermediate_state(&data)?;
        Ok(sol.delta)
    };
    let mut lo = 0.0;
    let mut hi = 1e-4;
    while delta_of(hi)? < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(EulerError::NoConvergence("delta target unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid_r = 0.5 * (lo + hi);
        if delta_of(mid_r)? < target {
            lo = mid_r;
        } else {
            hi = mid_r;
        }
    }
    Ok(0.5 * (lo + hi))
}
