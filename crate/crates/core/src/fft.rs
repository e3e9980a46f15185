//! Thin wrapper over `rustfft` for real fields on 1D and 2D periodic grids.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse transforms for an `N` or `N×N` grid (row-major, first
/// axis slowest).
#[derive(Clone)]
pub struct Transform {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl Transform {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only 1D and 2D grids are supported");
        let mut planner = FftPlanner::new();
        Transform {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Unnormalised DFT of a real field.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data, &self.forward);
        data
    }

    /// Inverse DFT scaled by `1/N^n`, keeping the real part.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(data.len(), self.len());
        self.run(&mut data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Multiply the spectrum of `values` by a real symbol and transform back.
    pub fn apply_symbol(&self, values: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &w) in spec.iter_mut().zip(symbol) {
            *c *= w;
        }
        self.inverse_real(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_2d() {
        let t = Transform::new(2, 8);
        let v: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let back = t.inverse_real(t.forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_direct_dft_1d() {
        let n = 16;
        let t = Transform::new(1, n);
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let spec = t.forward(&v);
        for k in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &x) in v.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            assert!((spec[k].re - re).abs() < 1e-12 && (spec[k].im - im).abs() < 1e-12);
        }
    }
}
