//! Rectangular node-centred grids and the scalar fields that live on them.
//!
//! Nodes include the boundary (`spacing = length / (cells - 1)`), quadrature
//! is the tensor-product trapezoidal rule, and the Laplacian uses mirrored
//! ghost nodes for the homogeneous Neumann condition. With these choices the
//! weighted Laplacian `W·L` is symmetric, so `∫ Δf = 0` holds to rounding and
//! `∫|∇f|² = -∫ f Δf` holds exactly for the face-difference gradient.

use crate::error::{Error, Result};

/// Smallest admissible number of nodes per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    /// `lengths` and `cells` must both have `dim` entries.
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = lengths.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{dim} lengths but {} cell counts",
                cells.len()
            )));
        }
        let mut grid = Grid {
            dim,
            lengths: [1.0; 2],
            cells: [1; 2],
            spacing: [1.0; 2],
        };
        for axis in 0..dim {
            let (len, n) = (lengths[axis], cells[axis]);
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidGrid(format!("length along axis {axis} must be positive, got {len}")));
            }
            if n < MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "need at least {MIN_CELLS} nodes along axis {axis}, got {n}"
                )));
            }
            grid.lengths[axis] = len;
            grid.cells[axis] = n;
            grid.spacing[axis] = len / (n - 1) as f64;
        }
        Ok(grid)
    }

    pub fn line(length: f64, cells: usize) -> Result<Self> {
        Self::new(&[length], &[cells])
    }

    pub fn rect(lengths: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(&lengths, &cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// |Ω|.
    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Linear index of node `(i, j)`; x varies fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    /// Coordinates of node `k`; the second entry is 0 in 1D.
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let i = k % self.cells[0];
        let j = k / self.cells[0];
        let y = if self.dim == 2 { j as f64 * self.spacing[1] } else { 0.0 };
        [i as f64 * self.spacing[0], y]
    }

    fn axis_weights(&self, axis: usize) -> Vec<f64> {
        let n = self.cells[axis];
        if axis >= self.dim {
            return vec![1.0];
        }
        let h = self.spacing[axis];
        let mut w = vec![h; n];
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        w
    }

    /// Trapezoidal quadrature weights, one per node. They sum to |Ω|.
    pub fn weights(&self) -> Vec<f64> {
        let wx = self.axis_weights(0);
        let wy = self.axis_weights(1);
        let mut w = Vec::with_capacity(self.len());
        for &b in &wy {
            for &a in &wx {
                w.push(a * b);
            }
        }
        w
    }

    /// Smallest nonzero eigenvalue of the discrete Neumann operator `-Δ_h`.
    pub fn first_eigenvalue(&self) -> f64 {
        (0..self.dim)
            .map(|axis| stencil_eigenvalue(1, self.cells[axis], self.spacing[axis]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalue of `-Δ_h` (one axis, mirrored Neumann stencil) for cosine mode `k`.
pub fn stencil_eigenvalue(k: usize, cells: usize, h: f64) -> f64 {
    let theta = std::f64::consts::PI * k as f64 / (cells - 1) as f64;
    (2.0 - 2.0 * theta.cos()) / (h * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Node-wise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoidal ∫_Ω f.
    pub fn integrate(&self) -> f64 {
        weighted_sum(&self.grid, &self.values)
    }

    /// `(∫|f|^p)^{1/p}`; `p < 1` is rejected.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.linf_norm());
        }
        let s = if p == 1.0 {
            self.map(f64::abs).integrate()
        } else if p == 2.0 {
            self.map(|v| v * v).integrate()
        } else {
            self.map(|v| v.abs().powf(p)).integrate()
        };
        Ok(s.powf(1.0 / p))
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∫f / |Ω|.
    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.measure()
    }

    /// Second-order Neumann Laplacian with mirrored ghost nodes.
    pub fn laplacian(&self) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        for axis in 0..self.grid.dim {
            laplacian_axis(&self.grid, axis, &self.values, &mut out);
        }
        Self::from_vec_unchecked(self.grid, out)
    }

    /// ∑ over cell faces of `((f_{k+1} - f_k)/h)²` times the face measure.
    pub fn gradient_sq_integral(&self) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for axis in 0..g.dim {
            let other = 1 - axis;
            let w_other = g.axis_weights(other);
            let h = g.spacing[axis];
            let (n, stride) = axis_layout(g, axis);
            for (line, &wo) in w_other.iter().enumerate() {
                let base = line_base(g, axis, line);
                let mut s = 0.0;
                for k in 0..n - 1 {
                    let d = self.values[base + (k + 1) * stride] - self.values[base + k * stride];
                    s += d * d;
                }
                total += s / h * wo;
            }
        }
        total
    }
}

pub(crate) fn weighted_sum(grid: &Grid, values: &[f64]) -> f64 {
    let nx = grid.cells[0];
    let hx = if grid.dim >= 1 { grid.spacing[0] } else { 1.0 };
    let line = |row: &[f64]| -> f64 {
        let inner: f64 = row[1..nx - 1].iter().sum();
        hx * (inner + 0.5 * (row[0] + row[nx - 1]))
    };
    if grid.dim == 1 {
        return line(values);
    }
    let ny = grid.cells[1];
    let hy = grid.spacing[1];
    let mut total = 0.0;
    for (j, row) in values.chunks_exact(nx).enumerate() {
        let wy = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
        total += wy * line(row);
    }
    total
}

/// (node count along axis, stride between consecutive nodes)
fn axis_layout(g: &Grid, axis: usize) -> (usize, usize) {
    if axis == 0 {
        (g.cells[0], 1)
    } else {
        (g.cells[1], g.cells[0])
    }
}

fn line_base(g: &Grid, axis: usize, line: usize) -> usize {
    if axis == 0 {
        line * g.cells[0]
    } else {
        line
    }
}

fn laplacian_axis(g: &Grid, axis: usize, f: &[f64], out: &mut [f64]) {
    let (n, stride) = axis_layout(g, axis);
    let lines = g.len() / n;
    let inv_h2 = 1.0 / (g.spacing[axis] * g.spacing[axis]);
    for line in 0..lines {
        let base = line_base(g, axis, line);
        let at = |k: usize| f[base + k * stride];
        out[base] += 2.0 * (at(1) - at(0)) * inv_h2;
        for k in 1..n - 1 {
            out[base + k * stride] += (at(k + 1) - 2.0 * at(k) + at(k - 1)) * inv_h2;
        }
        out[base + (n - 1) * stride] += 2.0 * (at(n - 2) - at(n - 1)) * inv_h2;
    }
}
