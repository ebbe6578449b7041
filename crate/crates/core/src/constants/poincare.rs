use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField};
use crate::helmholtz::HelmholtzSolver;

const RANDOM_STARTS: usize = 8;
const MAX_ITERATIONS: usize = 2000;
const SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone)]
pub struct PoincareEstimate {
    /// Largest quotient `‖f - f̄‖_{L^d} / ‖∇f‖_{L²}` found.
    pub xi: f64,
    /// Dual exponent `d = q/(q-1)`.
    pub d: f64,
    pub starts: usize,
    /// Field attaining `xi`, scaled to unit Dirichlet energy.
    pub best: ScalarField,
    /// `1/sqrt(λ₁)` of the discrete Neumann Laplacian when `d = 2`.
    pub eigen_value: Option<f64>,
    /// True when `xi` is a numerical lower estimate rather than exact.
    pub estimated: bool,
}

fn quotient(f: &ScalarField, d: f64) -> f64 {
    let m = f.mean();
    let centred = f.map(|x| x - m);
    centred.lp_norm(d).unwrap_or(0.0) / f.gradient_sq_integral().sqrt()
}

fn normalise(f: ScalarField) -> ScalarField {
    let m = f.mean();
    let e = f.gradient_sq_integral().sqrt();
    f.map(|x| (x - m) / e)
}

/// Maximises `‖f - f̄‖_{L^d} / ‖∇f‖_{L²}` over grid fields, `d = q/(q-1)`.
///
/// Each iterate maximises the linearisation of `‖f‖_d^d` over the unit
/// energy ball, `f ← (-Δ_h)^+ (|f|^{d-2} f)`. Convexity of `‖·‖_d^d` makes
/// the quotient nondecreasing along the iteration; for `d = 2` this is inverse
/// iteration towards the first nonconstant Neumann mode.
pub fn estimate_poincare(grid: &Grid, q: f64) -> Result<PoincareEstimate> {
    if !(q.is_finite() && q > 1.0) {
        return Err(Error::param("q", format!("needs 1 < q < ∞, got {q}")));
    }
    let d = q / (q - 1.0);
    let solver = HelmholtzSolver::new(*grid);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let starts: Vec<ScalarField> = (0..RANDOM_STARTS)
        .map(|_| ScalarField::from_vec_unchecked(*grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();

    let mut best: Option<(f64, ScalarField)> = None;
    let n_starts = starts.len();
    for start in starts {
        let mut f = normalise(start);
        let mut value = quotient(&f, d);
        for _ in 0..MAX_ITERATIONS {
            let g = f.map(|x| x.signum() * x.abs().powf(d - 1.0));
            let next = normalise(solver.solve_poisson_mean_zero(&g));
            let next_value = quotient(&next, d);
            let gain = next_value - value;
            if next_value.is_finite() && gain >= 0.0 {
                f = next;
                value = next_value;
            }
            if !(gain > 1e-15 * value) {
                break;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, f));
        }
    }
    let (xi, best) = best.expect("at least one start");
    let exact = (d - 2.0).abs() < 1e-12;
    Ok(PoincareEstimate {
        xi,
        d,
        starts: n_starts,
        best,
        eigen_value: exact.then(|| 1.0 / grid.first_eigenvalue().sqrt()),
        estimated: !exact,
    })
}
