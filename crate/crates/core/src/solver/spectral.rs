//! Pseudo-spectral transverse derivatives on the unit torus with 2/3-rule
//! dealiasing. Lines are gathered into scratch buffers, transformed with
//! cached FFT plans, scaled by the wavenumber, and scattered back.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct TransverseOps {
    n2: usize,
    n3: usize,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    fwd3: Arc<dyn Fft<f64>>,
    inv3: Arc<dyn Fft<f64>>,
}

/// Signed integer wavenumber of FFT bin `q` for transform length n.
fn bin_wavenumber(q: usize, n: usize) -> i64 {
    if q <= n / 2 { q as i64 } else { q as i64 - n as i64 }
}

/// 2/3-rule keep band: |k| <= floor(n/3).
fn keep(q: usize, n: usize) -> bool {
    bin_wavenumber(q, n).unsigned_abs() as usize <= n / 3
}

impl TransverseOps {
    pub fn new(n2: usize, n3: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n2,
            n3,
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
            fwd3: planner.plan_fft_forward(n3),
            inv3: planner.plan_fft_inverse(n3),
        }
    }

    /// Largest dealiased physical wavenumber magnitude per direction.
    pub fn max_wavenumbers(&self) -> (f64, f64) {
        let two_pi = 2.0 * std::f64::consts::PI;
        (
            two_pi * (self.n2 / 3) as f64,
            two_pi * (self.n3 / 3) as f64,
        )
    }

    /// In-place line transform: derivative of order `order` (0 = dealias
    /// only) along a gathered periodic line of length n.
    fn line_derivative(
        line: &mut [Complex<f64>],
        fwd: &Arc<dyn Fft<f64>>,
        inv: &Arc<dyn Fft<f64>>,
        order: usize,
    ) {
        let n = line.len();
        fwd.process(line);
        let two_pi = 2.0 * std::f64::consts::PI;
        for (q, v) in line.iter_mut().enumerate() {
            if !keep(q, n) {
                *v = Complex::new(0.0, 0.0);
                continue;
            }
            let k = two_pi * bin_wavenumber(q, n) as f64;
            for _ in 0..order {
                *v *= Complex::new(0.0, k);
            }
        }
        inv.process(line);
        let scale = 1.0 / n as f64;
        for v in line.iter_mut() {
            *v *= scale;
        }
    }

    /// d/dx2 (dealiased) of a field laid out with x1 fastest, x2 stride n1,
    /// x3 stride n1*n2.
    pub fn d2(&self, field: &[f64], n1: usize, out: &mut [f64]) {
        self.apply(field, n1, out, true, 1);
    }

    pub fn d3(&self, field: &[f64], n1: usize, out: &mut [f64]) {
        self.apply(field, n1, out, false, 1);
    }

    /// 2/3-rule filter along both transverse directions.
    pub fn dealias(&self, field: &mut [f64], n1: usize) {
        if self.n2 > 1 {
            let mut tmp = vec![0.0; field.len()];
            self.apply(field, n1, &mut tmp, true, 0);
            field.copy_from_slice(&tmp);
        }
        if self.n3 > 1 {
            let mut tmp = vec![0.0; field.len()];
            self.apply(field, n1, &mut tmp, false, 0);
            field.copy_from_slice(&tmp);
        }
    }

    fn apply(&self, field: &[f64], n1: usize, out: &mut [f64], along2: bool, order: usize) {
        let (n2, n3) = (self.n2, self.n3);
        let n = if along2 { n2 } else { n3 };
        if n == 1 {
            if order == 0 {
                out.copy_from_slice(field);
            } else {
                out.fill(0.0);
            }
            return;
        }
        let (fwd, inv) = if along2 {
            (&self.fwd2, &self.inv2)
        } else {
            (&self.fwd3, &self.inv3)
        };
        let mut line = vec![Complex::new(0.0, 0.0); n];
        if along2 {
            for k in 0..n3 {
                for i in 0..n1 {
                    for j in 0..n2 {
                        line[j] = Complex::new(field[(k * n2 + j) * n1 + i], 0.0);
                    }
                    Self::line_derivative(&mut line, fwd, inv, order);
                    for j in 0..n2 {
                        out[(k * n2 + j) * n1 + i] = line[j].re;
                    }
                }
            }
        } else {
            for j in 0..n2 {
                for i in 0..n1 {
                    for k in 0..n3 {
                        line[k] = Complex::new(field[(k * n2 + j) * n1 + i], 0.0);
                    }
                    Self::line_derivative(&mut line, fwd, inv, order);
                    for k in 0..n3 {
                        out[(k * n2 + j) * n1 + i] = line[k].re;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivative_of_low_mode_is_exact() {
        let (n1, n2, n3) = (3, 16, 1);
        let ops = TransverseOps::new(n2, n3);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut field = vec![0.0; n1 * n2 * n3];
        for j in 0..n2 {
            let x2 = j as f64 / n2 as f64;
            for i in 0..n1 {
                field[j * n1 + i] = (two_pi * 2.0 * x2).sin() + 0.5 * (two_pi * x2).cos();
            }
        }
        let mut out = vec![0.0; field.len()];
        ops.d2(&field, n1, &mut out);
        for j in 0..n2 {
            let x2 = j as f64 / n2 as f64;
            let want = two_pi * 2.0 * (two_pi * 2.0 * x2).cos() - 0.5 * two_pi * (two_pi * x2).sin();
            for i in 0..n1 {
                assert_relative_eq!(out[j * n1 + i], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dealias_kills_high_modes_only() {
        let (n1, n2, n3) = (2, 12, 1);
        let ops = TransverseOps::new(n2, n3);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut field = vec![0.0; n1 * n2];
        for j in 0..n2 {
            let x2 = j as f64 / n2 as f64;
            for i in 0..n1 {
                // keep band is |k| <= 4 for n = 12
                field[j * n1 + i] = 1.0 + (two_pi * 3.0 * x2).sin() + (two_pi * 5.0 * x2).cos();
            }
        }
        ops.dealias(&mut field, n1);
        for j in 0..n2 {
            let x2 = j as f64 / n2 as f64;
            let want = 1.0 + (two_pi * 3.0 * x2).sin();
            for i in 0..n1 {
                assert_relative_eq!(field[j * n1 + i], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn planar_direction_is_inert() {
        let ops = TransverseOps::new(1, 1);
        let field = vec![1.7, -0.3, 2.2];
        let mut out = vec![0.0; 3];
        ops.d2(&field, 3, &mut out);
        assert_eq!(out, vec![0.0; 3]);
        let mut f2 = field.clone();
        ops.dealias(&mut f2, 3);
        assert_eq!(f2, field);
    }
}
