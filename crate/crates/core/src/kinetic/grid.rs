//! Tensor-product velocity grids on [-v_max, v_max]^3.

use serde::{Deserialize, Serialize};

use crate::error::KineticError;

/// 1-D quadrature family used on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Trapezoid,
    GaussLegendre,
}

/// Cubic velocity lattice with positive tensor-product weights.
///
/// Axis nodes and weights are stored once; full-grid quantities factorize
/// through them. Node (i, j, k) has velocity (axis[i], axis[j], axis[k]) and
/// weight w[i] w[j] w[k]; the flat index is (i * n + j) * n + k.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub v_max: f64,
    pub n_per_axis: usize,
    pub quadrature: Quadrature,
    axis: Vec<f64>,
    axis_w: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(
        v_max: f64,
        n_per_axis: usize,
        quadrature: Quadrature,
    ) -> Result<Self, KineticError> {
        if !(v_max > 0.0) || n_per_axis < 4 {
            return Err(KineticError::GridUnderResolved(format!(
                "v_max = {v_max}, n_per_axis = {n_per_axis}"
            )));
        }
        let (axis, axis_w) = match quadrature {
            Quadrature::Trapezoid => {
                let n = n_per_axis;
                let h = 2.0 * v_max / (n as f64 - 1.0);
                let axis: Vec<f64> = (0..n).map(|i| -v_max + h * i as f64).collect();
                let mut w = vec![h; n];
                w[0] = 0.5 * h;
                w[n - 1] = 0.5 * h;
                (axis, w)
            }
            Quadrature::GaussLegendre => {
                let (x, w) = gauss_legendre(n_per_axis);
                let axis = x.iter().map(|&t| t * v_max).collect();
                let axis_w = w.iter().map(|&t| t * v_max).collect();
                (axis, axis_w)
            }
        };
        Ok(Self { v_max, n_per_axis, quadrature, axis, axis_w })
    }

    pub fn trapezoid(v_max: f64, n_per_axis: usize) -> Result<Self, KineticError> {
        Self::new(v_max, n_per_axis, Quadrature::Trapezoid)
    }

    pub fn len(&self) -> usize {
        self.n_per_axis * self.n_per_axis * self.n_per_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_w
    }

    pub fn node(&self, flat: usize) -> [f64; 3] {
        let n = self.n_per_axis;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        [self.axis[i], self.axis[j], self.axis[k]]
    }

    pub fn weight(&self, flat: usize) -> f64 {
        let n = self.n_per_axis;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        self.axis_w[i] * self.axis_w[j] * self.axis_w[k]
    }

    pub fn total_weight(&self) -> f64 {
        let s: f64 = self.axis_w.iter().sum();
        s * s * s
    }

    /// Streaming visit of (flat index, velocity, weight) in flat order.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, [f64; 3], f64)) {
        let n = self.n_per_axis;
        let mut flat = 0;
        for i in 0..n {
            for j in 0..n {
                let wij = self.axis_w[i] * self.axis_w[j];
                for k in 0..n {
                    f(flat, [self.axis[i], self.axis[j], self.axis[k]], wij * self.axis_w[k]);
                    flat += 1;
                }
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the recurrence).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
