//! Explicit constants of the boundedness and convergence criteria, and
//! classification of a configuration into the criteria it satisfies.
//!
//! Closed-form constants (`u*`, `Q`, `q`, `K1`, `K2`, `b2`) are computed
//! exactly. The Poincaré constant `ξ` is the maximum of a Rayleigh-type
//! quotient over grid fields; the Gagliardo–Nirenberg and elliptic
//! regularity constants entering `κ` and `b1` are numerical maxima over test
//! fields and therefore only lower bounds of the true constants.

mod poincare;
mod regime;
mod sobolev;

use std::fmt;

pub use poincare::{estimate_poincare, PoincareEstimate};
pub use regime::{classify_regime, Classification, Regime};
pub use sobolev::{estimate_gagliardo_nirenberg, estimate_regularity, w2p_norm, FieldEstimate};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::helmholtz::solve_helmholtz;
use crate::motility::MotilitySpec;
use crate::stepper::Parameters;

/// `u* = (a/b)^{1/(σ-1)}`.
pub fn equilibrium(a: f64, b: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 1.0) {
        return Err(Error::param("sigma", "sigma must exceed 1"));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::param("a, b", "a and b must be positive"));
    }
    Ok((a / b).powf(1.0 / (sigma - 1.0)))
}

/// `‖(I-Δ)^{-1}u0‖∞ + (σ-1)/(γ(0) b^{1/(σ-1)}) ((a + 2γ(0))/σ)^{σ/(σ-1)}`.
pub fn compute_q_bound(u0: &ScalarField, params: &Parameters) -> Result<f64> {
    if u0.min() < 0.0 {
        return Err(Error::InvalidField("initial data must be nonnegative".into()));
    }
    let first = solve_helmholtz(u0).linf_norm();
    Ok(first + q_bound_tail(params.a, params.b, params.sigma, &params.motility)?)
}

fn q_bound_tail(a: f64, b: f64, sigma: f64, motility: &MotilitySpec) -> Result<f64> {
    let g0 = motility.eval_gamma(0.0)?;
    let s1 = sigma - 1.0;
    Ok(s1 / (g0 * b.powf(1.0 / s1)) * ((a + 2.0 * g0) / sigma).powf(sigma / s1))
}

/// Lebesgue exponent `q`: `2/(3-σ)` for `σ < 2`, else 2.
pub fn compute_q(sigma: f64) -> Result<f64> {
    if !(sigma > 1.0) {
        return Err(Error::param("sigma", "sigma must exceed 1"));
    }
    Ok(if sigma < 2.0 { 2.0 / (3.0 - sigma) } else { 2.0 })
}

pub fn compute_k1(sigma: f64, omega_measure: f64) -> Result<f64> {
    if !(sigma > 1.0) {
        return Err(Error::param("sigma", "sigma must exceed 1"));
    }
    if !(omega_measure > 0.0) {
        return Err(Error::param("omega_measure", "must be positive"));
    }
    if sigma >= 2.0 {
        return Ok(1.0);
    }
    let m2 = 2.0 * omega_measure;
    let first = m2.powf((sigma + 1.0) / (3.0 - sigma)) * 2f64.powf(2.0 - sigma) / (sigma - 1.0);
    let second = 2f64.powf(4.0 / (3.0 - sigma)) * m2.powf(2.0 - sigma) / (1.0 - 2f64.powf(-(sigma - 1.0)));
    Ok(first + second)
}

pub fn compute_k2(sigma: f64, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::param("xi", "must be positive"));
    }
    Ok(if sigma < 2.0 { xi * xi } else { 1.0 })
}

/// `(K1 K2/4)^{(σ-1)/2} a^{-(σ-3)/2} (sup_{v≥0} |γ'|²/γ)^{(σ-1)/2}`.
pub fn compute_b2(a: f64, sigma: f64, motility: &MotilitySpec, k1: f64, k2: f64) -> Result<f64> {
    let sup = motility.sup_ratio(0.0, f64::INFINITY)?;
    Ok(b2_from_sup(a, sigma, sup, k1, k2))
}

fn b2_from_sup(a: f64, sigma: f64, sup: f64, k1: f64, k2: f64) -> f64 {
    let e = (sigma - 1.0) / 2.0;
    (k1 * k2 / 4.0).powf(e) * a.powf(-(sigma - 3.0) / 2.0) * sup.powf(e)
}

/// `sup_{[0, hi]} |γ'|²/γ`, with `hi` clipped to the end of a tabulated domain.
fn sup_ratio_up_to(motility: &MotilitySpec, hi: f64) -> Result<f64> {
    let hi = motility.domain_end().map_or(hi, |end| hi.min(end));
    motility.sup_ratio(0.0, hi)
}

/// `κ(p, b, σ)` and `b1` from estimated `G(p)`, `R(p)`.
#[derive(Debug, Clone)]
pub struct KappaEstimate {
    pub p: usize,
    pub g: FieldEstimate,
    pub r: FieldEstimate,
    /// `Q(1, 2)`.
    pub q_bound: f64,
    pub sup_ratio: f64,
    pub kappa: f64,
    pub b1: f64,
}

/// Lower estimates of `κ([n/2]+1, 1, 2)` and `b1 = [n/2] κ/2 + 1` with `n`
/// the grid dimension.
pub fn estimate_kappa_b1(u0: &ScalarField, params: &Parameters) -> Result<KappaEstimate> {
    let grid = *u0.grid();
    let half = grid.dim() / 2;
    let p = half + 1;
    let g = estimate_gagliardo_nirenberg(&grid, p)?;
    let r = estimate_regularity(&grid, p)?;
    let q_bound = solve_helmholtz(u0).linf_norm() + q_bound_tail(params.a, 1.0, 2.0, &params.motility)?;
    let sup_ratio = sup_ratio_up_to(&params.motility, q_bound)?;
    let e = (p + 1) as i32;
    let kappa = (g.value.powi(2 * e) * r.value.powi(e) * q_bound.powi(e) + 1.0) * sup_ratio;
    let b1 = half as f64 * kappa / 2.0 + 1.0;
    Ok(KappaEstimate {
        p,
        g,
        r,
        q_bound,
        sup_ratio,
        kappa,
        b1,
    })
}

/// Which report entries are numerical estimates rather than closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatedFlags {
    pub xi: bool,
    pub kappa_est: bool,
    pub b1_est: bool,
}

#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub dim: usize,
    pub omega_measure: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub u_star: f64,
    pub q_bound: f64,
    pub q_exponent: f64,
    pub k1: f64,
    pub k2: f64,
    pub xi: f64,
    pub b2: f64,
    pub kappa_est: f64,
    pub b1_est: f64,
    pub sup_ratio_q: f64,
    pub sup_ratio_inf: f64,
    pub convexity_inf: f64,
    pub estimated: EstimatedFlags,
}

impl ConstantsReport {
    /// Evaluates every constant for initial data `u0` (whose grid fixes `Ω`).
    pub fn compute(u0: &ScalarField, params: &Parameters) -> Result<Self> {
        params.validate()?;
        let grid = *u0.grid();
        let (a, b, sigma) = (params.a, params.b, params.sigma);
        let q_exponent = compute_q(sigma)?;
        let xi_est = estimate_poincare(&grid, q_exponent)?;
        let k1 = compute_k1(sigma, grid.measure())?;
        let k2 = compute_k2(sigma, xi_est.xi)?;
        let sup_ratio_inf = params.motility.sup_ratio(0.0, f64::INFINITY)?;
        let q_bound = compute_q_bound(u0, params)?;
        let kappa = estimate_kappa_b1(u0, params)?;
        Ok(Self {
            dim: grid.dim(),
            omega_measure: grid.measure(),
            a,
            b,
            sigma,
            u_star: equilibrium(a, b, sigma)?,
            q_bound,
            q_exponent,
            k1,
            k2,
            xi: xi_est.xi,
            b2: b2_from_sup(a, sigma, sup_ratio_inf, k1, k2),
            kappa_est: kappa.kappa,
            b1_est: kappa.b1,
            sup_ratio_q: sup_ratio_up_to(&params.motility, q_bound)?,
            sup_ratio_inf,
            convexity_inf: params.motility.inf_convexity_ratio()?,
            estimated: EstimatedFlags {
                xi: xi_est.estimated,
                kappa_est: true,
                b1_est: true,
            },
        })
    }
}

impl fmt::Display for ConstantsReport {
    /// One `key=value` line per constant; estimated ones are followed by a
    /// `<key>_estimated=true` line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, f64, bool); 13] = [
            ("u_star", self.u_star, false),
            ("Q", self.q_bound, false),
            ("q_exponent", self.q_exponent, false),
            ("K1", self.k1, false),
            ("K2", self.k2, false),
            ("xi", self.xi, self.estimated.xi),
            ("b2", self.b2, false),
            ("kappa_est", self.kappa_est, self.estimated.kappa_est),
            ("b1_est", self.b1_est, self.estimated.b1_est),
            ("sup_ratio_Q", self.sup_ratio_q, false),
            ("sup_ratio_inf", self.sup_ratio_inf, false),
            ("convexity_inf", self.convexity_inf, false),
            ("omega_measure", self.omega_measure, false),
        ];
        for (key, value, estimated) in rows {
            writeln!(f, "{key}={value}")?;
            if estimated {
                writeln!(f, "{key}_estimated=true")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn exp_params(a: f64, b: f64, sigma: f64) -> Parameters {
        Parameters::new(a, b, sigma, MotilitySpec::exponential(1.0).unwrap()).unwrap()
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(equilibrium(1.0, 1.0, 2.0).unwrap(), 1.0);
        assert!((equilibrium(4.0, 1.0, 3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((equilibrium(2.0, 8.0, 1.5).unwrap() - 0.0625).abs() < 1e-16);
        assert!(equilibrium(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn q_bound_examples() {
        let grid = Grid::line(1.0, 64).unwrap();
        let p = exp_params(1.0, 1.0, 2.0);
        let q = compute_q_bound(&ScalarField::constant(grid, 1.0), &p).unwrap();
        assert!((q - 3.25).abs() < 1e-14);
        let zero = compute_q_bound(&ScalarField::zeros(grid), &p).unwrap();
        assert!((zero - 2.25).abs() < 1e-15);
        let bump = ScalarField::from_fn(grid, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let qb = compute_q_bound(&bump, &p).unwrap();
        assert!(qb - 2.25 < 1.5 && qb < 3.75);
        assert!(compute_q_bound(&bump.map(|x| x - 2.0), &p).is_err());
    }

    #[test]
    fn exponent_and_k_examples() {
        assert_eq!(compute_q(2.0).unwrap(), 2.0);
        assert!((compute_q(1.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(compute_q(5.0).unwrap(), 2.0);
        assert!(compute_q(1.0).is_err());

        assert_eq!(compute_k1(2.0, 7.0).unwrap(), 1.0);
        assert_eq!(compute_k1(3.0, 0.5).unwrap(), 1.0);
        // reference values from 40-digit arithmetic
        for (sigma, omega, expect) in [
            (1.5, 0.5, 24.507331926966769747),
            (1.5, 1.0, 39.638297575170547352),
            (1.2, 3.0, 228.91890964966393766),
        ] {
            let k1 = compute_k1(sigma, omega).unwrap();
            assert!((k1 - expect).abs() < 1e-13 * expect, "{k1} vs {expect}");
        }

        assert_eq!(compute_k2(2.0, 0.3).unwrap(), 1.0);
        assert_eq!(compute_k2(1.5, 0.5).unwrap(), 0.25);
        assert_eq!(compute_k2(10.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn b2_examples() {
        let exp1 = MotilitySpec::exponential(1.0).unwrap();
        assert!((compute_b2(1.0, 3.0, &exp1, 1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((compute_b2(1.0, 2.0, &exp1, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let alg = MotilitySpec::algebraic_offset(2.0, 1.0).unwrap();
        let b2 = compute_b2(2.0, 1.5, &alg, 3.0, 0.2).unwrap();
        assert!((b2 - 1.4801656089845705011).abs() < 1e-14);
        // exp(-2v) has four times the supremum of exp(-v)
        let exp2 = MotilitySpec::exponential(2.0).unwrap();
        for sigma in [1.5, 2.0, 3.7] {
            let r = compute_b2(1.3, sigma, &exp2, 2.0, 0.7).unwrap() / compute_b2(1.3, sigma, &exp1, 2.0, 0.7).unwrap();
            assert!((r - 2f64.powf(sigma - 1.0)).abs() < 1e-13 * r);
        }
    }

    #[test]
    fn report_for_quadratic_damping() {
        let grid = Grid::line(1.0, 64).unwrap();
        let r = ConstantsReport::compute(&ScalarField::constant(grid, 1.0), &exp_params(1.0, 1.0, 2.0)).unwrap();
        assert_eq!((r.k1, r.k2, r.q_exponent), (1.0, 1.0, 2.0));
        assert_eq!(r.u_star, 1.0);
        assert!((r.b2 - 0.5).abs() < 1e-15);
        assert_eq!(r.estimated, EstimatedFlags { xi: false, kappa_est: true, b1_est: true });
        // [n/2] = 0 on a line
        assert!(r.b1_est == 1.0 && r.kappa_est > 0.0);
        assert_eq!(r.convexity_inf, 1.0);
        let text = r.to_string();
        assert!(text.contains("K1=1\n") && text.contains("K2=1\n"));
        assert!(text.contains("b1_est_estimated=true") && text.contains("kappa_est_estimated=true"));
        assert!(!text.contains("xi_estimated"));
    }

    #[test]
    fn b1_exceeds_one_in_the_plane() {
        let grid = Grid::rect([1.0, 1.0], [16, 16]).unwrap();
        let k = estimate_kappa_b1(&ScalarField::constant(grid, 1.0), &exp_params(1.0, 1.0, 2.0)).unwrap();
        assert_eq!(k.p, 2);
        assert!(k.g.value > 0.0 && k.r.value > 0.0);
        assert!((k.q_bound - 3.25).abs() < 1e-14);
        assert!((k.b1 - (k.kappa / 2.0 + 1.0)).abs() < 1e-12 * k.b1);
        assert!(k.b1 > 1.0);
    }

    #[test]
    fn report_for_sublinear_damping_flags_xi() {
        let grid = Grid::line(1.0, 32).unwrap();
        let r = ConstantsReport::compute(&ScalarField::constant(grid, 1.0), &exp_params(1.0, 1.0, 1.5)).unwrap();
        assert!(r.estimated.xi);
        assert!((r.k2 - r.xi * r.xi).abs() < 1e-15);
        assert!(r.to_string().contains("xi_estimated=true"));
    }

    proptest! {
        #[test]
        fn equilibrium_balances_reaction(a in 0.01..10.0f64, b in 0.01..10.0f64, sigma in 1.05..5.0f64) {
            let u = equilibrium(a, b, sigma).unwrap();
            let scale = a * u;
            prop_assert!((a * u - b * u.powf(sigma)).abs() <= 1e-14 * scale * 4.0);
        }

        #[test]
        fn q_bound_monotone_in_constant_data(c1 in 0.0..10.0f64, c2 in 0.0..10.0f64, sigma in 1.1..4.0f64) {
            let grid = Grid::line(1.0, 16).unwrap();
            let p = exp_params(1.0, 2.0, sigma);
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let q_lo = compute_q_bound(&ScalarField::constant(grid, lo), &p).unwrap();
            let q_hi = compute_q_bound(&ScalarField::constant(grid, hi), &p).unwrap();
            prop_assert!(q_lo <= q_hi);
        }

        #[test]
        fn strong_damping_constants_are_one(sigma in 2.0..20.0f64, omega in 0.01..100.0f64, xi in 0.01..10.0f64) {
            prop_assert_eq!(compute_k1(sigma, omega).unwrap(), 1.0);
            prop_assert_eq!(compute_k2(sigma, xi).unwrap(), 1.0);
            prop_assert_eq!(compute_q(sigma).unwrap(), 2.0);
        }

        #[test]
        fn b2_homogeneous_in_motility_scale(s in 1.0..50.0f64, sigma in 1.1..4.0f64, a in 0.1..5.0f64) {
            // algebraic offset scales linearly in c
            let base = MotilitySpec::algebraic_offset(1.5, 1.0).unwrap();
            let scaled = MotilitySpec::algebraic_offset(1.5, s).unwrap();
            let r = compute_b2(a, sigma, &scaled, 1.3, 0.4).unwrap() / compute_b2(a, sigma, &base, 1.3, 0.4).unwrap();
            prop_assert!((r - s.powf((sigma - 1.0) / 2.0)).abs() <= 1e-12 * r);
        }
    }
}
