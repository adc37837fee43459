//! Zero/non-zero transverse mode splitting and the Poincare ratio on the
//! unit torus.

use crate::solver::spectral::TransverseOps;
use crate::solver::{FluidField, Grid, KahanSum};

use super::transverse_mean;

/// Split a scalar field into its transverse average (length n1) and the
/// remainder (full size). The split is orthogonal in the discrete L2 inner
/// product, so the two squared norms add up to the total exactly.
pub fn mode_decompose(field: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let zero = transverse_mean(field, grid);
    let n1 = grid.n1;
    let mut rest = vec![0.0; field.len()];
    for (chunk, dst) in field.chunks_exact(n1).zip(rest.chunks_exact_mut(n1)) {
        for i in 0..n1 {
            dst[i] = chunk[i] - zero[i];
        }
    }
    (zero, rest)
}

/// Squared L2 norm over the slab: dx1 times the torus average.
pub fn l2_norm_sq(field: &[f64], grid: &Grid) -> f64 {
    assert_eq!(field.len(), grid.len());
    let mut acc = KahanSum::default();
    for &v in field {
        acc.add(v * v);
    }
    grid.dx() * acc.value() / (grid.n2 * grid.n3) as f64
}

/// Squared L2 norm of a transverse-averaged row.
pub fn zero_mode_l2_sq(zero: &[f64], grid: &Grid) -> f64 {
    super::l2_sq_row(zero, grid.dx())
}

/// ||D_neq field|| / ||grad_perp D_neq field|| with spectral transverse
/// gradients, or 0 when the non-zero part vanishes. For fields inside the
/// dealiased band the gradient is exact, and the ratio is bounded by
/// 1/(2 pi), attained by the lowest harmonic.
pub fn poincare_check(field: &[f64], grid: &Grid) -> f64 {
    let (_, rest) = mode_decompose(field, grid);
    let num = l2_norm_sq(&rest, grid);
    // a non-zero part at the roundoff of the mean subtraction is absent
    if num <= 1e-28 * l2_norm_sq(field, grid) {
        return 0.0;
    }
    let ops = TransverseOps::new(grid.n2, grid.n3);
    let mut g2 = vec![0.0; rest.len()];
    let mut g3 = vec![0.0; rest.len()];
    ops.d2(&rest, grid.n1, &mut g2);
    ops.d3(&rest, grid.n1, &mut g3);
    let den = l2_norm_sq(&g2, grid) + l2_norm_sq(&g3, grid);
    (num / den).sqrt()
}

/// Total squared L2 norm of the non-zero transverse modes over all five
/// conserved components.
pub fn nonzero_mode_energy(field: &FluidField) -> f64 {
    let grid = &field.grid;
    let mut total = 0.0;
    for c in 0..5 {
        let (_, rest) = mode_decompose(field.comp(c), grid);
        total += l2_norm_sq(&rest, grid);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::perturb::{band_limited_transverse, BumpShape};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    const TAU: f64 = std::f64::consts::TAU;

    fn grid() -> Grid {
        Grid::new(4.0, 24, 16, 12).unwrap()
    }

    fn envelope() -> BumpShape {
        BumpShape { center: 0.0, width: 2.5 }
    }

    #[test]
    fn parseval_split_is_exact() {
        let g = grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut field = band_limited_transverse(&g, &mut rng, &envelope(), 1.0);
        // give the zero mode some content as well
        for p in 0..g.len() {
            field[p] += 0.4 * (0.7 * g.x1(p % g.n1)).cos();
        }
        let (zero, rest) = mode_decompose(&field, &g);
        let total = l2_norm_sq(&field, &g);
        let split = zero_mode_l2_sq(&zero, &g) + l2_norm_sq(&rest, &g);
        assert!(zero_mode_l2_sq(&zero, &g) > 0.1);
        assert!(l2_norm_sq(&rest, &g) > 1e-3);
        assert_relative_eq!(total, split, epsilon = 1e-12 * total.max(1.0));
    }

    #[test]
    fn transverse_constant_has_no_nonzero_part() {
        let g = grid();
        let field: Vec<f64> = (0..g.len())
            .map(|p| {
                let i = p % g.n1;
                (0.3 * g.x1(i)).sin()
            })
            .collect();
        let (zero, rest) = mode_decompose(&field, &g);
        assert!(rest.iter().all(|&v| v.abs() < 1e-14));
        for i in 0..g.n1 {
            assert_relative_eq!(zero[i], (0.3 * g.x1(i)).sin(), epsilon = 1e-14);
        }
        assert_eq!(poincare_check(&field, &g), 0.0);
    }

    #[test]
    fn lowest_harmonic_saturates_poincare() {
        let g = grid();
        let field: Vec<f64> = (0..g.len())
            .map(|p| {
                let j = (p / g.n1) % g.n2;
                (TAU * g.x2(j)).sin()
            })
            .collect();
        let ratio = poincare_check(&field, &g);
        assert_relative_eq!(ratio, 1.0 / TAU, epsilon = 1e-12);

        let second: Vec<f64> = (0..g.len())
            .map(|p| {
                let k = p / (g.n1 * g.n2);
                (2.0 * TAU * g.x3(k)).cos()
            })
            .collect();
        let r2 = poincare_check(&second, &g);
        assert_relative_eq!(r2, 1.0 / (2.0 * TAU), epsilon = 1e-12);
        assert!(r2 < ratio);
    }

    #[test]
    fn random_band_limited_fields_sit_under_the_bound() {
        let g = grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let field = band_limited_transverse(&g, &mut rng, &envelope(), 1.0);
            let ratio = poincare_check(&field, &g);
            assert!(ratio <= 1.0 / TAU + 1e-10, "ratio {ratio}");
        }
    }

    #[test]
    fn nonzero_energy_collects_all_components() {
        let g = grid();
        let state = crate::gas::GasState::planar(1.0, 0.0, 1.0);
        let mut field = FluidField::constant(g, &state);
        for p in 0..g.len() {
            let j = (p / g.n1) % g.n2;
            field.comp_mut(0)[p] += 0.01 * (TAU * g.x2(j)).cos();
        }
        let e = nonzero_mode_energy(&field);
        // single cosine mode of amplitude eps: ||.||^2 = eps^2/2 * 2 L
        let expect = 0.01_f64.powi(2) * 0.5 * 2.0 * g.half_width;
        assert_relative_eq!(e, expect, max_relative = 1e-12);
    }
}
