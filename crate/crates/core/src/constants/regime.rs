use std::fmt;

use super::ConstantsReport;
use crate::stepper::Parameters;

/// Strongest conclusion available for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Global bounded solution; the case number of the boundedness criterion.
    GlobalBounded(u8),
    /// Convergence to `(u*, u*)`; the case number of the convergence criterion.
    Converges(u8),
    Unclassified,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub regime: Regime,
    pub boundedness: Option<u8>,
    pub convergence: Option<u8>,
    /// Set when the deciding comparison involves the estimated `b1`.
    pub provisional: bool,
    pub label: String,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Checks the boundedness cases (1)–(3) and convergence cases (1)–(4) for
/// spatial dimension `n`; convergence takes precedence in the returned regime.
pub fn classify_regime(n: usize, params: &Parameters, report: &ConstantsReport) -> Classification {
    let (b, sigma) = (params.b, params.sigma);
    let nf = n as f64;
    let (b1, b2) = (report.b1_est, report.b2);

    let boundedness = if n <= 2 {
        Some((1, false, format!("n={n} <= 2, sigma={sigma} > 1")))
    } else if sigma > 2.0 {
        Some((2, false, format!("n={n} >= 3, sigma={sigma} > 2")))
    } else if sigma == 2.0 && b > b1 {
        Some((3, true, format!("n={n} >= 3, sigma=2, b={b} > b1_est={b1}")))
    } else {
        None
    };

    let convergence = if n <= 2 && b > b2 {
        Some((1, false, format!("n={n} <= 2, b={b} > b2={b2}")))
    } else if n >= 3 && sigma > 2.0 && b > b2 {
        Some((2, false, format!("n={n} >= 3, sigma={sigma} > 2, b={b} > b2={b2}")))
    } else if n >= 3 && sigma == 2.0 && b > b1.max(b2) {
        Some((3, true, format!("n={n} >= 3, sigma=2, b={b} > max(b1_est={b1}, b2={b2})")))
    } else if n >= 3
        && sigma > 2.0 - 2.0 / nf
        && sigma < 2.0
        && b > b2
        && report.convexity_inf > nf / 2.0
    {
        Some((
            4,
            false,
            format!(
                "n={n} >= 3, 2-2/n < sigma={sigma} < 2, b={b} > b2={b2}, convexity_inf={} > n/2",
                report.convexity_inf
            ),
        ))
    } else {
        None
    };

    let tag = |provisional: bool| if provisional { " [provisional: b1 estimated]" } else { "" };
    let (regime, provisional, label) = match (&convergence, &boundedness) {
        (Some((c, p, why)), _) => (
            Regime::Converges(*c),
            *p,
            format!("convergence to equilibrium case ({c}): {why}{}", tag(*p)),
        ),
        (None, Some((c, p, why))) => (
            Regime::GlobalBounded(*c),
            *p,
            format!("global boundedness case ({c}): {why}{}", tag(*p)),
        ),
        (None, None) => {
            let near_b1 = n >= 3 && sigma == 2.0;
            (
                Regime::Unclassified,
                near_b1,
                format!("unclassified: n={n}, sigma={sigma}, b={b}, b2={b2}, b1_est={b1}{}", tag(near_b1)),
            )
        }
    };
    Classification {
        regime,
        boundedness: boundedness.map(|x| x.0),
        convergence: convergence.map(|x| x.0),
        provisional,
        label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::EstimatedFlags;
    use crate::motility::MotilitySpec;

    fn report(b2: f64, b1: f64, convexity: f64) -> ConstantsReport {
        ConstantsReport {
            dim: 1,
            omega_measure: 1.0,
            a: 1.0,
            b: 1.0,
            sigma: 2.0,
            u_star: 1.0,
            q_bound: 1.0,
            q_exponent: 2.0,
            k1: 1.0,
            k2: 1.0,
            xi: 1.0,
            b2,
            kappa_est: 1.0,
            b1_est: b1,
            sup_ratio_q: 1.0,
            sup_ratio_inf: 1.0,
            convexity_inf: convexity,
            estimated: EstimatedFlags { xi: false, kappa_est: true, b1_est: true },
        }
    }

    fn params(b: f64, sigma: f64) -> Parameters {
        Parameters::new(1.0, b, sigma, MotilitySpec::exponential(1.0).unwrap()).unwrap()
    }

    #[test]
    fn low_dimension_is_always_bounded() {
        let c = classify_regime(1, &params(0.1, 1.5), &report(0.5, 3.0, 1.0));
        assert_eq!(c.regime, Regime::GlobalBounded(1));
        assert!(c.label.starts_with("global boundedness case (1)"));
    }

    #[test]
    fn strong_damping_converges_above_b2() {
        let c = classify_regime(3, &params(1.0, 2.5), &report(0.5, 3.0, 1.0));
        assert_eq!(c.regime, Regime::Converges(2));
        assert_eq!(c.boundedness, Some(2));
        assert!(!c.provisional);
    }

    #[test]
    fn exponential_motility_misses_convexity_case() {
        let c = classify_regime(3, &params(1.0, 1.9), &report(0.5, 3.0, 1.0));
        assert_eq!(c.regime, Regime::Unclassified);
        let c = classify_regime(3, &params(1.0, 1.9), &report(0.5, 3.0, 2.0));
        assert_eq!(c.regime, Regime::Converges(4));
    }

    #[test]
    fn b1_comparisons_are_provisional() {
        let c = classify_regime(3, &params(5.0, 2.0), &report(0.5, 3.0, 1.0));
        assert_eq!(c.regime, Regime::Converges(3));
        assert!(c.provisional && c.label.contains("provisional"));
        let c = classify_regime(3, &params(2.0, 2.0), &report(0.5, 3.0, 1.0));
        assert_eq!(c.regime, Regime::Unclassified);
        assert!(c.provisional);
    }
}
