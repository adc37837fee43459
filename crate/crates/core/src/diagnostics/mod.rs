//! Observables for watching a perturbed composite wave relax: transverse
//! mode splitting, antiderivative variables, the diagonalizing frame with
//! its weight functions, relative entropy, and the energy/dissipation
//! functionals.
//!
//! Everything here is a pure function of a solution snapshot; nothing
//! mutates solver state, so snapshots can be analyzed in any order.
//!
//! Derivative conventions: x1 uses fourth-order finite differences
//! (one-sided at the wall rows), the transverse directions reuse the
//! dealiased spectral operators from the solver, and time derivatives come
//! from the governing equations — first order exactly by substituting the
//! semi-discrete right-hand side, second order from a short state-space
//! trajectory rather than stored history.

pub mod anti;
pub mod energy;
pub mod frame;
pub mod modes;
pub mod weights;

pub use anti::{
    antiderivatives, perturbation, tilde_variables, AnsatzSlice, AntiDerivatives, Perturbation,
    TildeVariables,
};
pub use energy::{
    energy_functionals, microscopic_norms, EnergyReport, MicroContext, MicroMode, MicroNorms,
};
pub use frame::{characteristic_frame, CharacteristicFrame};
pub use modes::{l2_norm_sq, mode_decompose, nonzero_mode_energy, poincare_check};
pub use weights::{heat_kernel_weights, relative_entropy, HeatKernelWeights};

use crate::solver::{Grid, KahanSum};

/// Fourth-order first derivative of a 1-D row with uniform spacing `h`:
/// central five-point stencil inside, one-sided five-point rows at the ends.
/// Needs at least five nodes.
pub(crate) fn derivative_row_into(src: &[f64], h: f64, out: &mut [f64]) {
    let n = src.len();
    assert!(n >= 5, "derivative stencil needs at least 5 nodes");
    let d = 1.0 / (12.0 * h);
    out[0] = d * (-25.0 * src[0] + 48.0 * src[1] - 36.0 * src[2] + 16.0 * src[3] - 3.0 * src[4]);
    out[1] = d * (-3.0 * src[0] - 10.0 * src[1] + 18.0 * src[2] - 6.0 * src[3] + src[4]);
    for i in 2..n - 2 {
        out[i] = d * (src[i - 2] - 8.0 * src[i - 1] + 8.0 * src[i + 1] - src[i + 2]);
    }
    out[n - 2] = -d
        * (-3.0 * src[n - 1] - 10.0 * src[n - 2] + 18.0 * src[n - 3] - 6.0 * src[n - 4]
            + src[n - 5]);
    out[n - 1] = -d
        * (-25.0 * src[n - 1] + 48.0 * src[n - 2] - 36.0 * src[n - 3] + 16.0 * src[n - 4]
            - 3.0 * src[n - 5]);
}

pub(crate) fn derivative_row(src: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    derivative_row_into(src, h, &mut out);
    out
}

/// d/dx1 of a scalar field on `grid`, pencil by pencil.
pub fn derivative_x1(field: &[f64], grid: &Grid) -> Vec<f64> {
    assert_eq!(field.len(), grid.len());
    let n1 = grid.n1;
    let h = grid.dx();
    let mut out = vec![0.0; field.len()];
    for (src, dst) in field.chunks_exact(n1).zip(out.chunks_exact_mut(n1)) {
        derivative_row_into(src, h, dst);
    }
    out
}

/// d/dx2 of a scalar field: fourth-order central differences on the
/// periodic unit torus. Identically zero on planar grids.
pub fn derivative_x2(field: &[f64], grid: &Grid) -> Vec<f64> {
    derivative_periodic(field, grid, true)
}

/// d/dx3, as [`derivative_x2`].
pub fn derivative_x3(field: &[f64], grid: &Grid) -> Vec<f64> {
    derivative_periodic(field, grid, false)
}

fn derivative_periodic(field: &[f64], grid: &Grid, along2: bool) -> Vec<f64> {
    assert_eq!(field.len(), grid.len());
    let (n1, n2, n3) = (grid.n1, grid.n2, grid.n3);
    let n = if along2 { n2 } else { n3 };
    let mut out = vec![0.0; field.len()];
    if n == 1 {
        return out;
    }
    // unit torus: spacing 1/n
    let d = n as f64 / 12.0;
    let stride = if along2 { n1 } else { n1 * n2 };
    let lines = |q: usize| -> usize {
        if along2 {
            (q / (n1 * n2)) * (n1 * n2) + q % n1
        } else {
            q % (n1 * n2)
        }
    };
    let count = if along2 { n3 * n1 } else { n2 * n1 };
    for q in 0..count {
        let base = lines(q);
        for j in 0..n {
            let at = |r: isize| {
                let jj = (j as isize + r).rem_euclid(n as isize) as usize;
                field[base + jj * stride]
            };
            out[base + j * stride] = d * (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2));
        }
    }
    out
}

/// Cumulative trapezoid of a row: out[0] = 0, then node-to-node panels.
pub(crate) fn cumulative_trapezoid(src: &[f64], dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let mut acc = KahanSum::default();
    for i in 1..src.len() {
        acc.add(0.5 * dx * (src[i - 1] + src[i]));
        out[i] = acc.value();
    }
    out
}

/// Squared L2 norm of a row against dx1, the transverse directions having
/// already been averaged out (the torus has unit measure).
pub(crate) fn l2_sq_row(row: &[f64], dx: f64) -> f64 {
    let mut acc = KahanSum::default();
    for &v in row {
        acc.add(v * v);
    }
    dx * acc.value()
}

/// Mean over the torus per x1 node: collapses (n1, n2, n3) to length n1.
pub fn transverse_mean(field: &[f64], grid: &Grid) -> Vec<f64> {
    assert_eq!(field.len(), grid.len());
    let n1 = grid.n1;
    let mut out = vec![KahanSum::default(); n1];
    for chunk in field.chunks_exact(n1) {
        for (acc, &v) in out.iter_mut().zip(chunk) {
            acc.add(v);
        }
    }
    let scale = 1.0 / (grid.n2 * grid.n3) as f64;
    out.into_iter().map(|acc| scale * acc.value()).collect()
}
