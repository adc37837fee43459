//! Characteristic frame of the planar background: eigenvalues and left/right
//! eigenvectors of the quasilinear system in the variables (Phi, Psi1~, W~),
//! the shock-frame weight functions, and the weighted characteristic
//! combinations built from them.

use crate::ansatz::CompositeAnsatz;
use crate::solver::Grid;

use super::anti::TildeVariables;

/// Convection matrix for (Phi, Psi1~, W~) about the planar background
/// (rho, u1, theta).
pub fn convection_matrix(rho: f64, u1: f64, theta: f64) -> [[f64; 3]; 3] {
    [
        [u1, rho, 0.0],
        [2.0 * theta / (3.0 * rho), u1, 2.0 / 3.0],
        [0.0, 2.0 * theta / 3.0, u1],
    ]
}

/// Eigenvalues u1 -+ sqrt(10 theta / 9) and u1, with the bi-orthonormal
/// eigenvector pairs; rows of `l` against columns of `r` give the identity.
pub fn eigensystem(rho: f64, u1: f64, theta: f64) -> ([f64; 3], [[f64; 3]; 3], [[f64; 3]; 3]) {
    let c = (10.0 * theta / 9.0).sqrt();
    let q = (5.0 * theta / 2.0).sqrt();
    let lambda = [u1 - c, u1, u1 + c];
    let l = [
        [theta, -rho * q, rho],
        [theta, 0.0, -1.5 * rho],
        [theta, rho * q, rho],
    ];
    let s1 = 3.0 / (10.0 * rho * theta);
    let s2 = 2.0 / (5.0 * rho * theta);
    // columns r1, r2, r3
    let r = [
        [s1 * rho, s2 * rho, s1 * rho],
        [-s1 * c, 0.0, s1 * c],
        [s1 * 2.0 * theta / 3.0, -s2 * theta, s1 * 2.0 * theta / 3.0],
    ];
    (lambda, l, r)
}

/// Frame sampled on the x1 nodes of `grid` at time `t`, with the shock
/// weight functions and the defect norms certifying the diagonalization.
pub struct CharacteristicFrame {
    /// eigenvalues per node, slow to fast
    pub lambda: Vec<[f64; 3]>,
    /// left eigenvector rows per node
    pub l: Vec<[[f64; 3]; 3]>,
    /// right eigenvector columns per node
    pub r: Vec<[[f64; 3]; 3]>,
    /// 1-shock density ratio rho^s1 / rho#, in (1 - delta/rho#, 1]
    pub alpha: Vec<f64>,
    /// 3-shock density ratio rho^s3 / rho#
    pub beta: Vec<f64>,
    /// weight exponent delta^(-1/2)
    pub n_exp: f64,
    /// sup over nodes of max |(L R - I)_jk|
    pub lr_defect: f64,
    /// sup over nodes of max |(L A1 R - Lambda)_jk|
    pub diag_defect: f64,
}

pub fn characteristic_frame(
    ansatz: &CompositeAnsatz,
    grid: &Grid,
    t: f64,
    delta: f64,
) -> CharacteristicFrame {
    assert!(delta > 0.0);
    let n1 = grid.n1;
    let rho_sharp = ansatz.intermediate.rho;
    let mut out = CharacteristicFrame {
        lambda: Vec::with_capacity(n1),
        l: Vec::with_capacity(n1),
        r: Vec::with_capacity(n1),
        alpha: Vec::with_capacity(n1),
        beta: Vec::with_capacity(n1),
        n_exp: delta.powf(-0.5),
        lr_defect: 0.0,
        diag_defect: 0.0,
    };
    for i in 0..n1 {
        let x1 = grid.x1(i);
        let s = ansatz.primitive_at(x1, t);
        let (rho, u1, theta) = (s.rho, s.u[0], s.theta);
        let (lambda, l, r) = eigensystem(rho, u1, theta);
        let a = convection_matrix(rho, u1, theta);
        for j in 0..3 {
            for k in 0..3 {
                let mut lr = 0.0;
                let mut lar = 0.0;
                for p in 0..3 {
                    lr += l[j][p] * r[p][k];
                    for q in 0..3 {
                        lar += l[j][p] * a[p][q] * r[q][k];
                    }
                }
                let id = if j == k { 1.0 } else { 0.0 };
                out.lr_defect = out.lr_defect.max((lr - id).abs());
                let diag = if j == k { lambda[j] } else { 0.0 };
                out.diag_defect = out.diag_defect.max((lar - diag).abs());
            }
        }
        out.lambda.push(lambda);
        out.l.push(l);
        out.r.push(r);
        out.alpha
            .push(ansatz.profile1.evaluate_shifted(x1, t, ansatz.shift1).rho / rho_sharp);
        out.beta
            .push(ansatz.profile3.evaluate_shifted(x1, t, ansatz.shift3).rho / rho_sharp);
    }
    out
}

impl CharacteristicFrame {
    /// Z = L (Phi, Psi1~, W~) per node.
    pub fn characteristic_variables(&self, anti_phi: &[f64], tilde: &TildeVariables) -> [Vec<f64>; 3] {
        let n1 = self.l.len();
        assert_eq!(anti_phi.len(), n1);
        let mut z = [vec![0.0; n1], vec![0.0; n1], vec![0.0; n1]];
        for i in 0..n1 {
            let v = [anti_phi[i], tilde.psi1[i], tilde.w[i]];
            for j in 0..3 {
                z[j][i] = self.l[i][j][0] * v[0] + self.l[i][j][1] * v[1] + self.l[i][j][2] * v[2];
            }
        }
        z
    }

    /// Variables adapted to the 1-shock: (Z1, alpha^N Z2, alpha^N Z3).
    pub fn weighted_by_alpha(&self, z: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
        let n1 = self.alpha.len();
        let mut out = [z[0].clone(), vec![0.0; n1], vec![0.0; n1]];
        for i in 0..n1 {
            let w = self.alpha[i].powf(self.n_exp);
            out[1][i] = w * z[1][i];
            out[2][i] = w * z[2][i];
        }
        out
    }

    /// Variables adapted to the 3-shock: (beta^-N Z1, beta^-N Z2, Z3).
    pub fn weighted_by_beta(&self, z: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
        let n1 = self.beta.len();
        let mut out = [vec![0.0; n1], vec![0.0; n1], z[2].clone()];
        for i in 0..n1 {
            let w = self.beta[i].powf(-self.n_exp);
            out[0][i] = w * z[0][i];
            out[1][i] = w * z[1][i];
        }
        out
    }
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

    #[test]
    fn biorthonormality_and_diagonalization_are_algebraic_identities() {
        for &(rho, u1, theta) in
            &[(1.0, 0.0, 1.0), (0.7, -0.4, 1.3), (2.4, 0.9, 0.31), (1.1, 0.05, 0.9)]
        {
            let (lambda, l, r) = eigensystem(rho, u1, theta);
            let a = convection_matrix(rho, u1, theta);
            for j in 0..3 {
                for k in 0..3 {
                    let mut lr = 0.0;
                    let mut lar = 0.0;
                    for p in 0..3 {
                        lr += l[j][p] * r[p][k];
                        for q in 0..3 {
                            lar += l[j][p] * a[p][q] * r[q][k];
                        }
                    }
                    let id = if j == k { 1.0 } else { 0.0 };
                    assert!((lr - id).abs() < 1e-14, "LR defect at ({j},{k})");
                    let diag = if j == k { lambda[j] } else { 0.0 };
                    assert!((lar - diag).abs() < 1e-13, "diag defect at ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn reference_state_has_unit_spread_eigenvalues() {
        // rho = 1, u1 = 0, theta = 0.9: sqrt(10 * 0.9 / 9) = 1 exactly
        let (lambda, _, _) = eigensystem(1.0, 0.0, 0.9);
        assert_relative_eq!(lambda[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(lambda[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(lambda[2], 1.0, epsilon = 1e-15);
    }

    fn setup(strength: f64) -> (crate::euler::CompositeWaveSolution, CompositeAnsatz) {
        let left = GasState::planar(1.0, 0.0, 1.0);
        let (_, sol) = two_shock_data(&left, strength, strength).unwrap();
        let tr = Transport::with_default_prandtl(0.3, 1.0);
        let params = GridParams::default();
        let p1 =
            solve_profile(&sol.left, &sol.intermediate, sol.s1, Family::One, tr, &params).unwrap();
        let p3 = solve_profile(&sol.right, &sol.intermediate, sol.s3, Family::Three, tr, &params)
            .unwrap();
        let dec = decompose_initial_mass([0.0; 3], &sol).unwrap();
        (sol.clone(), build_ansatz(&sol, &p1, &p3, &dec))
    }

    #[test]
    fn frame_on_composite_background_certifies() {
        let (sol, ansatz) = setup(0.2);
        let g = Grid::planar(30.0, 128).unwrap();
        let frame = characteristic_frame(&ansatz, &g, 0.5, sol.delta);
        assert!(frame.lr_defect < 1e-12, "lr defect {}", frame.lr_defect);
        assert!(frame.diag_defect < 1e-10, "diag defect {}", frame.diag_defect);
        let rho_sharp = sol.intermediate.rho;
        let floor = 1.0 - sol.delta / rho_sharp;
        let ulp = 1e-15;
        for i in 0..g.n1 {
            assert!(frame.alpha[i] > floor && frame.alpha[i] <= 1.0 + ulp, "alpha {}", frame.alpha[i]);
            assert!(frame.beta[i] > floor && frame.beta[i] <= 1.0 + ulp, "beta {}", frame.beta[i]);
        }
        // the ratios cross their shocks: strictly below 1 on the downstream side
        assert!(frame.alpha.iter().any(|&a| a < 1.0 - 1e-3));
        assert!(frame.beta.iter().any(|&b| b < 1.0 - 1e-3));
        assert_relative_eq!(frame.n_exp, sol.delta.powf(-0.5), epsilon = 1e-15);
    }

    #[test]
    fn weights_are_bounded_and_ordered() {
        let (sol, ansatz) = setup(0.15);
        let g = Grid::planar(30.0, 96).unwrap();
        let frame = characteristic_frame(&ansatz, &g, 0.0, sol.delta);
        let n1 = g.n1;
        let z = [vec![1.0; n1], vec![1.0; n1], vec![1.0; n1]];
        let tilted = frame.weighted_by_alpha(&z);
        let lifted = frame.weighted_by_beta(&z);
        // alpha^N in (0, 1]; beta^-N in [1, bound)
        let bound = (1.0 - sol.delta / sol.intermediate.rho).powf(-frame.n_exp);
        for i in 0..n1 {
            assert!(tilted[1][i] > 0.0 && tilted[1][i] <= 1.0 + 1e-15);
            assert!(lifted[0][i] >= 1.0 - 1e-15 && lifted[0][i] <= bound);
            assert_eq!(tilted[0][i], 1.0);
            assert_eq!(lifted[2][i], 1.0);
        }
    }

    #[test]
    fn characteristic_variables_invert_through_r() {
        let (sol, ansatz) = setup(0.25);
        let g = Grid::planar(20.0, 48).unwrap();
        let frame = characteristic_frame(&ansatz, &g, 1.0, sol.delta);
        let phi: Vec<f64> = (0..g.n1).map(|i| (0.2 * g.x1(i)).sin()).collect();
        let tilde = TildeVariables {
            psi1: (0..g.n1).map(|i| (0.15 * g.x1(i)).cos()).collect(),
            w: (0..g.n1).map(|i| 0.3 * (0.1 * g.x1(i)).sin()).collect(),
        };
        let z = frame.characteristic_variables(&phi, &tilde);
        for i in 0..g.n1 {
            let v = [phi[i], tilde.psi1[i], tilde.w[i]];
            for p in 0..3 {
                let mut back = 0.0;
                for j in 0..3 {
                    back += frame.r[i][p][j] * z[j][i];
                }
                assert_relative_eq!(back, v[p], epsilon = 1e-12);
            }
        }
    }
}
