//! Discrete Sobolev norms and numerical lower estimates of the
//! Gagliardo–Nirenberg constant `G(p)` and the elliptic regularity constant
//! `R(p)`.
//!
//! Derivatives use the mirrored-ghost stencils of the solver: central
//! differences in the interior, zero normal derivative at the boundary.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::helmholtz::HelmholtzSolver;

const SEED: u64 = 0x5EED_0002;
const RANDOM_TRIALS: usize = 24;

/// Maximum of a quotient over a family of trial fields.
#[derive(Debug, Clone)]
pub struct FieldEstimate {
    pub value: f64,
    pub trials: usize,
    pub best: ScalarField,
}

fn d1(f: &[f64], at: &dyn Fn(usize) -> usize, n: usize, h: f64, out: &mut [f64]) {
    for i in 1..n - 1 {
        out[at(i)] = (f[at(i + 1)] - f[at(i - 1)]) / (2.0 * h);
    }
    out[at(0)] = 0.0;
    out[at(n - 1)] = 0.0;
}

fn d2(f: &[f64], at: &dyn Fn(usize) -> usize, n: usize, h: f64, out: &mut [f64]) {
    let h2 = h * h;
    for i in 1..n - 1 {
        out[at(i)] = (f[at(i + 1)] - 2.0 * f[at(i)] + f[at(i - 1)]) / h2;
    }
    out[at(0)] = 2.0 * (f[at(1)] - f[at(0)]) / h2;
    out[at(n - 1)] = 2.0 * (f[at(n - 2)] - f[at(n - 1)]) / h2;
}

type Stencil = fn(&[f64], &dyn Fn(usize) -> usize, usize, f64, &mut [f64]);

/// Applies a one-dimensional stencil along `axis` to every grid line.
fn along(grid: &Grid, axis: usize, f: &[f64], op: Stencil) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    let [nx, ny] = [grid.cells()[0], grid.cells().get(1).copied().unwrap_or(1)];
    let h = grid.spacing()[axis];
    if axis == 0 {
        for j in 0..ny {
            op(f, &|i| i + nx * j, nx, h, &mut out);
        }
    } else {
        for i in 0..nx {
            op(f, &|j| i + nx * j, ny, h, &mut out);
        }
    }
    out
}

/// Nodal `|∇f|`.
pub fn gradient_magnitude(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let mut sq = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        for (s, g) in sq.iter_mut().zip(along(&grid, axis, f.values(), d1)) {
            *s += g * g;
        }
    }
    ScalarField::from_vec_unchecked(grid, sq.into_iter().map(f64::sqrt).collect())
}

/// Nodal Frobenius norm of the Hessian.
pub fn hessian_magnitude(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let mut sq = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        for (s, g) in sq.iter_mut().zip(along(&grid, axis, f.values(), d2)) {
            *s += g * g;
        }
    }
    if grid.dim() == 2 {
        let fx = along(&grid, 0, f.values(), d1);
        for (s, g) in sq.iter_mut().zip(along(&grid, 1, &fx, d1)) {
            *s += 2.0 * g * g;
        }
    }
    ScalarField::from_vec_unchecked(grid, sq.into_iter().map(f64::sqrt).collect())
}

/// `(‖f‖_p^p + ‖∇f‖_p^p + ‖D²f‖_p^p)^{1/p}`.
pub fn w2p_norm(f: &ScalarField, p: f64) -> Result<f64> {
    let parts = [
        f.lp_norm(p)?,
        gradient_magnitude(f).lp_norm(p)?,
        hessian_magnitude(f).lp_norm(p)?,
    ];
    Ok(parts.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Cosine modes, random smooth combinations, Gaussian bumps and nodal noise.
fn trial_fields(grid: &Grid, include_constant: bool) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut fields = Vec::new();
    let lens = [grid.lengths()[0], grid.lengths().get(1).copied().unwrap_or(1.0)];
    let kmax = |axis: usize| grid.cells().get(axis).map_or(0, |&n| (n - 1).min(8));
    for kx in 0..=kmax(0) {
        for ky in 0..=kmax(1) {
            if kx + ky == 0 && !include_constant {
                continue;
            }
            fields.push(ScalarField::from_fn(*grid, |x| {
                (PI * kx as f64 * x[0] / lens[0]).cos() * (PI * ky as f64 * x[1] / lens[1]).cos()
            }));
        }
    }
    let top = |axis: usize| grid.cells().get(axis).map_or(0, |&n| (n - 1) / 4);
    for _ in 0..RANDOM_TRIALS {
        let modes: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0..=top(0)) as f64,
                    rng.gen_range(0..=top(1)) as f64,
                )
            })
            .collect();
        fields.push(ScalarField::from_fn(*grid, |x| {
            modes
                .iter()
                .map(|(c, kx, ky)| c * (PI * kx * x[0] / lens[0]).cos() * (PI * ky * x[1] / lens[1]).cos())
                .sum()
        }));
    }
    let hmin = grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = grid.lengths().iter().copied().fold(0.0, f64::max);
    for _ in 0..RANDOM_TRIALS {
        let centre = [rng.gen_range(0.0..lens[0]), rng.gen_range(0.0..lens[1])];
        let width = rng.gen_range(2.0 * hmin..0.5 * lmax);
        let dim = grid.dim();
        fields.push(ScalarField::from_fn(*grid, |x| {
            let r2: f64 = (0..dim).map(|a| (x[a] - centre[a]).powi(2)).sum();
            (-r2 / (width * width)).exp()
        }));
    }
    for _ in 0..4 {
        fields.push(ScalarField::from_vec_unchecked(
            *grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ));
    }
    fields
}

fn maximise(fields: Vec<ScalarField>, quotient: impl Fn(&ScalarField) -> Result<f64>) -> Result<FieldEstimate> {
    let trials = fields.len();
    let mut best: Option<(f64, ScalarField)> = None;
    for f in fields {
        let value = quotient(&f)?;
        if value.is_finite() && best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, f));
        }
    }
    let (value, best) = best.ok_or_else(|| Error::Domain("no trial field gave a finite quotient".into()))?;
    Ok(FieldEstimate { value, trials, best })
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::param("p", "must be at least 1"));
    }
    Ok(())
}

/// Lower estimate of `G(p)` in
/// `‖∇f‖_{L^{2(p+1)}} ≤ G ‖f‖_{W^{2,p+1}}^{1/2} ‖f‖_{L^∞}^{1/2}`.
pub fn estimate_gagliardo_nirenberg(grid: &Grid, p: usize) -> Result<FieldEstimate> {
    check_p(p)?;
    let p = p as f64;
    maximise(trial_fields(grid, false), |f| {
        let num = gradient_magnitude(f).lp_norm(2.0 * (p + 1.0))?;
        Ok(num / (w2p_norm(f, p + 1.0)?.sqrt() * f.linf_norm().sqrt()))
    })
}

/// Lower estimate of `R(p)` in `‖v‖_{W^{2,p}} ≤ R ‖u‖_{L^p}` for `v = (I-Δ)^{-1}u`.
pub fn estimate_regularity(grid: &Grid, p: usize) -> Result<FieldEstimate> {
    check_p(p)?;
    let p = p as f64;
    let solver = HelmholtzSolver::new(*grid);
    maximise(trial_fields(grid, true), |g| {
        Ok(w2p_norm(&solver.solve(g), p)? / g.lp_norm(p)?)
    })
}
