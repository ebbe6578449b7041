//! Exact inverse of the discrete Neumann operator `I - Δ_h`.
//!
//! The mirrored-ghost Laplacian of [`crate::fields`] is diagonalised by the
//! type-I discrete cosine basis `cos(π k i / (N-1))`, with eigenvalue
//! `-(2 - 2cos(π k/(N-1)))/h²` per axis. Solving therefore reduces to a
//! forward DCT-I, a division per mode and an inverse DCT-I (DCT-I is its own
//! inverse up to the factor `2(N-1)`). Each DCT-I is computed from a complex
//! FFT of the even extension of length `2(N-1)`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::fields::{stencil_eigenvalue, Grid, ScalarField};

struct AxisTransform {
    n: usize,
    stride: usize,
    fft: Arc<dyn Fft<f64>>,
    eigenvalues: Vec<f64>,
}

impl AxisTransform {
    fn new(planner: &mut FftPlanner<f64>, n: usize, stride: usize, h: f64) -> Self {
        Self {
            n,
            stride,
            fft: planner.plan_fft_forward(2 * (n - 1)),
            eigenvalues: (0..n).map(|k| stencil_eigenvalue(k, n, h)).collect(),
        }
    }

    /// Unnormalised DCT-I of every line along this axis, in place.
    fn dct1_lines(&self, data: &mut [f64], buf: &mut Vec<Complex<f64>>, scratch: &mut Vec<Complex<f64>>) {
        let n = self.n;
        let m = 2 * (n - 1);
        buf.resize(m, Complex::default());
        scratch.resize(self.fft.get_inplace_scratch_len(), Complex::default());
        let lines = data.len() / n;
        for line in 0..lines {
            let base = if self.stride == 1 { line * n } else { line };
            let at = |k: usize| base + k * self.stride;
            for k in 0..n {
                buf[k] = Complex::new(data[at(k)], 0.0);
            }
            for k in 1..n - 1 {
                buf[m - k] = buf[k];
            }
            self.fft.process_with_scratch(buf, scratch);
            for k in 0..n {
                data[at(k)] = buf[k].re;
            }
        }
    }
}

/// Spectral solver for operators diagonal in the Neumann cosine basis.
pub struct HelmholtzSolver {
    grid: Grid,
    axes: Vec<AxisTransform>,
}

impl std::fmt::Debug for HelmholtzSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzSolver").field("grid", &self.grid).finish()
    }
}

impl HelmholtzSolver {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let strides = [1, grid.cells()[0]];
        let axes = (0..grid.dim())
            .map(|a| AxisTransform::new(&mut planner, grid.cells()[a], strides[a], grid.spacing()[a]))
            .collect();
        Self { grid, axes }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Applies `m(λ)` to every cosine mode, `λ ≥ 0` being the eigenvalue of
    /// `-Δ_h` for that mode.
    pub fn apply_spectral(&self, u: &ScalarField, multiplier: impl Fn(f64) -> f64) -> ScalarField {
        assert_eq!(u.grid(), &self.grid, "field and solver grids differ");
        let mut data = u.values().to_vec();
        let mut buf = Vec::new();
        let mut scratch = Vec::new();
        for axis in &self.axes {
            axis.dct1_lines(&mut data, &mut buf, &mut scratch);
        }
        let nx = self.grid.cells()[0];
        let ex = &self.axes[0].eigenvalues;
        let mut norm = 1.0;
        for axis in &self.axes {
            norm *= 2.0 * (axis.n - 1) as f64;
        }
        for (k, c) in data.iter_mut().enumerate() {
            let lambda = match self.axes.get(1) {
                Some(ay) => ex[k % nx] + ay.eigenvalues[k / nx],
                None => ex[k],
            };
            *c *= multiplier(lambda) / norm;
        }
        for axis in &self.axes {
            axis.dct1_lines(&mut data, &mut buf, &mut scratch);
        }
        ScalarField::from_vec_unchecked(self.grid, data)
    }

    /// `v` with `(I - Δ_h) v = u`.
    pub fn solve(&self, u: &ScalarField) -> ScalarField {
        self.apply_spectral(u, |lambda| 1.0 / (1.0 + lambda))
    }

    /// Mean-zero `w` with `-Δ_h w = f - mean(f)`.
    pub fn solve_poisson_mean_zero(&self, f: &ScalarField) -> ScalarField {
        self.apply_spectral(f, |lambda| if lambda == 0.0 { 0.0 } else { 1.0 / lambda })
    }
}

/// `(I - Δ_h)^{-1} u`. Builds a fresh solver; reuse [`HelmholtzSolver`] in loops.
pub fn solve_helmholtz(u: &ScalarField) -> ScalarField {
    HelmholtzSolver::new(*u.grid()).solve(u)
}

/// `(I - Δ_h) v`.
pub fn apply_helmholtz(v: &ScalarField) -> ScalarField {
    v.zip_map(&v.laplacian(), |a, l| a - l)
}
