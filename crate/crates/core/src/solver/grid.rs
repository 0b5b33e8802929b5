//! Periodic grid, wavenumbers, 2/3 dealiasing and N-D FFTs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lines per parallel FFT task.
const LINES_PER_TASK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    /// Box length, equal on every axis.
    pub length: f64,
}

#[derive(Clone)]
pub struct Grid {
    pub spec: GridSpec,
    /// Integer mode index per position along an axis: `0, 1, .., n/2, -n/2+1, .., -1`.
    pub modes: Vec<i64>,
    /// `2 pi m / L`.
    pub wavenumbers: Vec<f64>,
    /// Per-axis 2/3-rule mask.
    pub axis_mask: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec { dim, n, length } = spec;
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("points per axis must be a power of two >= 4, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("box length must be positive, got {length}")));
        }
        let modes: Vec<i64> = (0..n).map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 }).collect();
        let wavenumbers = modes.iter().map(|&m| 2.0 * PI * m as f64 / length).collect();
        // Keep |m| < n/3; the Nyquist mode is always dropped.
        let axis_mask = modes.iter().map(|&m| 3 * m.unsigned_abs() < n as u64).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            spec,
            modes,
            wavenumbers,
            axis_mask,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn len(&self) -> usize {
        self.spec.n.pow(self.spec.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.spec.length.powi(self.spec.dim as i32)
    }

    pub fn dx(&self) -> f64 {
        self.spec.length / self.spec.n as f64
    }

    /// Per-axis positions of flat index `idx`; the last axis is contiguous.
    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.spec.n;
        let mut out = [0; 3];
        let mut r = idx;
        for a in (0..self.spec.dim).rev() {
            out[a] = r % n;
            r /= n;
        }
        out
    }

    pub fn flatten(&self, pos: [usize; 3]) -> usize {
        (0..self.spec.dim).fold(0, |acc, a| acc * self.spec.n + pos[a])
    }

    /// Wavevector at flat index.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let p = self.unflatten(idx);
        let mut k = [0.0; 3];
        for a in 0..self.spec.dim {
            k[a] = self.wavenumbers[p[a]];
        }
        k
    }

    /// Integer mode vector at flat index.
    pub fn mode_vector(&self, idx: usize) -> [i64; 3] {
        let p = self.unflatten(idx);
        let mut m = [0; 3];
        for a in 0..self.spec.dim {
            m[a] = self.modes[p[a]];
        }
        m
    }

    /// `sum m_a^2`, which fixes `|k|` exactly.
    pub fn mode_norm_sq(&self, idx: usize) -> u64 {
        self.mode_vector(idx).iter().map(|m| (m * m) as u64).sum()
    }

    pub fn k_of_mode_norm_sq(&self, m2: u64) -> f64 {
        2.0 * PI * (m2 as f64).sqrt() / self.spec.length
    }

    pub fn dealiased(&self, idx: usize) -> bool {
        let p = self.unflatten(idx);
        (0..self.spec.dim).all(|a| self.axis_mask[p[a]])
    }

    /// Physical coordinates of flat index.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let p = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.spec.dim {
            x[a] = p[a] as f64 * self.dx();
        }
        x
    }

    /// Zeroes every mode outside the 2/3 band.
    pub fn dealias(&self, f: &mut [Complex64]) {
        f.par_iter_mut().enumerate().for_each(|(i, z)| {
            if !self.dealiased(i) {
                *z = Complex64::new(0.0, 0.0);
            }
        });
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n;
        let total = data.len();
        assert_eq!(total, self.len());
        for axis in 0..self.spec.dim {
            let inner = n.pow((self.spec.dim - 1 - axis) as u32);
            if inner == 1 {
                data.par_chunks_mut(n * LINES_PER_TASK).for_each(|c| plan.process(c));
                continue;
            }
            // Gather lines along `axis` into a contiguous buffer.
            let block = n * inner;
            let mut lines = vec![Complex64::new(0.0, 0.0); total];
            lines.par_chunks_mut(block).zip(data.par_chunks(block)).for_each(|(dst, src)| {
                for j in 0..inner {
                    for i in 0..n {
                        dst[j * n + i] = src[i * inner + j];
                    }
                }
            });
            lines.par_chunks_mut(n * LINES_PER_TASK).for_each(|c| plan.process(c));
            data.par_chunks_mut(block).zip(lines.par_chunks(block)).for_each(|(dst, src)| {
                for j in 0..inner {
                    for i in 0..n {
                        dst[i * inner + j] = src[j * n + i];
                    }
                }
            });
        }
    }

    /// Unnormalized forward transform, `f^(k) = sum_x f(x) e^{-i k x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }

    pub fn to_spectral(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    pub fn to_physical(&self, f: &[Complex64]) -> Vec<f64> {
        let mut c = f.to_vec();
        self.inverse(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Spectral `d/dx_axis`.
    pub fn derivative(&self, f: &[Complex64], axis: usize) -> Vec<Complex64> {
        f.par_iter()
            .enumerate()
            .map(|(i, z)| {
                let p = self.unflatten(i);
                // The Nyquist mode has no well-defined real derivative.
                if 2 * p[axis] == self.spec.n {
                    Complex64::new(0.0, 0.0)
                } else {
                    z * Complex64::new(0.0, self.wavenumbers[p[axis]])
                }
            })
            .collect()
    }

    /// `(V / N^2) sum |f^|^2 w(k)`, i.e. `int |f|^2` weighted by a spectral symbol.
    pub fn parseval<W: Fn(usize) -> f64>(&self, f: &[Complex64], w: W) -> f64 {
        let s: f64 = f.iter().enumerate().map(|(i, z)| w(i) * z.norm_sqr()).sum();
        s * self.volume() / (self.len() as f64).powi(2)
    }
}
