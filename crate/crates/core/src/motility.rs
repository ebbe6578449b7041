//! Density-suppressed motility functions `γ(v)`.
//!
//! Each family implements [`Motility`] and is registered by name in
//! [`registry`]; [`MotilitySpec`] wraps a family behind an `Arc` and adds the
//! checked evaluation, hypothesis verification and the functional
//! suprema/infima that feed the explicit constants.
//!
//! Admissible motilities are `C³` on `[0, ∞)` with `γ > 0` and `γ' < 0`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::{Args, Registry};

/// Points used by every dense scan over `[lo, hi]`.
pub const DENSE_SAMPLES: usize = 10_000;

/// Relative tolerance for the finite-difference consistency check on tables.
pub const TABLE_FD_TOLERANCE: f64 = 0.05;

pub trait Motility: Send + Sync + fmt::Debug {
    /// Registry name of the family.
    fn family(&self) -> &'static str;

    fn gamma(&self, v: f64) -> f64;
    fn dgamma(&self, v: f64) -> f64;
    fn ddgamma(&self, v: f64) -> f64;

    /// Right end of the evaluation domain, `None` when unbounded.
    fn domain_end(&self) -> Option<f64> {
        None
    }

    /// `sup_{lo ≤ v ≤ hi} |γ'|²/γ` when the family has a closed form.
    fn sup_ratio_closed_form(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }

    /// `inf_{v ≥ 0} γγ''/|γ'|²` when the family has a closed form.
    fn convexity_closed_form(&self) -> Option<f64> {
        None
    }

    /// Checks that do not come from sampling (e.g. table rows).
    fn structural_violations(&self) -> Vec<Violation> {
        Vec::new()
    }

    /// Table rows failing the finite-difference cross-check, if tabulated.
    fn inconsistent_rows(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Parameter summary, e.g. `chi=1`.
    fn parameters(&self) -> String;
}

/// `γ(v) = exp(-χ v)`.
#[derive(Debug, Clone, Copy)]
pub struct Exponential {
    pub chi: f64,
}

impl Motility for Exponential {
    fn family(&self) -> &'static str {
        "exponential"
    }
    fn gamma(&self, v: f64) -> f64 {
        (-self.chi * v).exp()
    }
    fn dgamma(&self, v: f64) -> f64 {
        -self.chi * (-self.chi * v).exp()
    }
    fn ddgamma(&self, v: f64) -> f64 {
        self.chi * self.chi * (-self.chi * v).exp()
    }
    fn sup_ratio_closed_form(&self, lo: f64, _hi: f64) -> Option<f64> {
        // χ² e^{-χv} is decreasing
        Some(self.chi * self.chi * (-self.chi * lo).exp())
    }
    fn convexity_closed_form(&self) -> Option<f64> {
        Some(1.0)
    }
    fn parameters(&self) -> String {
        format!("chi={}", self.chi)
    }
}

/// `γ(v) = c (1 + v)^{-k}`.
#[derive(Debug, Clone, Copy)]
pub struct AlgebraicOffset {
    pub k: f64,
    pub c: f64,
}

impl Motility for AlgebraicOffset {
    fn family(&self) -> &'static str {
        "algebraic-offset"
    }
    fn gamma(&self, v: f64) -> f64 {
        self.c * (1.0 + v).powf(-self.k)
    }
    fn dgamma(&self, v: f64) -> f64 {
        -self.c * self.k * (1.0 + v).powf(-self.k - 1.0)
    }
    fn ddgamma(&self, v: f64) -> f64 {
        self.c * self.k * (self.k + 1.0) * (1.0 + v).powf(-self.k - 2.0)
    }
    fn sup_ratio_closed_form(&self, lo: f64, _hi: f64) -> Option<f64> {
        // c k² (1+v)^{-k-2} is decreasing
        Some(self.c * self.k * self.k * (1.0 + lo).powf(-self.k - 2.0))
    }
    fn convexity_closed_form(&self) -> Option<f64> {
        Some((self.k + 1.0) / self.k)
    }
    fn parameters(&self) -> String {
        format!("k={},c={}", self.k, self.c)
    }
}

/// One row of a tabulated motility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub v: f64,
    pub gamma: f64,
    pub dgamma: f64,
    pub ddgamma: f64,
}

/// Tabulated motility. `γ` is a Fritsch–Carlson limited cubic Hermite
/// interpolant of the `(gamma, dgamma)` columns, `γ'` a cubic Hermite
/// interpolant of `(dgamma, ddgamma)` and `γ''` is piecewise linear.
#[derive(Debug, Clone)]
pub struct Tabulated {
    rows: Vec<TableRow>,
}

impl Tabulated {
    pub fn new(rows: Vec<TableRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::param("table", "needs at least two rows"));
        }
        if rows[0].v != 0.0 {
            return Err(Error::param("table", format!("first v must be 0, got {}", rows[0].v)));
        }
        for (i, r) in rows.iter().enumerate() {
            if ![r.v, r.gamma, r.dgamma, r.ddgamma].iter().all(|x| x.is_finite()) {
                return Err(Error::param("table", format!("non-finite entry in row {i}")));
            }
        }
        if let Some(i) = rows.windows(2).position(|w| w[1].v <= w[0].v) {
            return Err(Error::param(
                "table",
                format!("v must be strictly increasing (rows {i} and {})", i + 1),
            ));
        }
        Ok(Self { rows })
    }

    /// Reads a CSV with header `v,gamma,dgamma,ddgamma`.
    pub fn load(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let column = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::param("table", format!("{}: missing column `{name}`", path.display()))
            })
        };
        let cols = [column("v")?, column("gamma")?, column("dgamma")?, column("ddgamma")?];
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let mut vals = [0.0; 4];
            for (slot, &c) in vals.iter_mut().zip(&cols) {
                let raw = rec.get(c).unwrap_or("");
                *slot = raw.parse().map_err(|_| Error::Parse {
                    line: line + 2,
                    message: format!("{}: bad number `{raw}`", path.display()),
                })?;
            }
            rows.push(TableRow {
                v: vals[0],
                gamma: vals[1],
                dgamma: vals[2],
                ddgamma: vals[3],
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    fn locate(&self, v: f64) -> (usize, f64, f64) {
        let last = self.rows.len() - 2;
        let j = match self.rows.binary_search_by(|r| r.v.total_cmp(&v)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        };
        let dv = self.rows[j + 1].v - self.rows[j].v;
        (j, (v - self.rows[j].v) / dv, dv)
    }
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, t: f64, dv: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * dv * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * dv * m1
}

/// Fritsch–Carlson slope limiting on one interval.
fn limited_slopes(y0: f64, y1: f64, m0: f64, m1: f64, dv: f64) -> (f64, f64) {
    let delta = (y1 - y0) / dv;
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let alpha = m0 / delta;
    let beta = m1 / delta;
    let (mut a, mut b) = (alpha.max(0.0), beta.max(0.0));
    let r2 = a * a + b * b;
    if r2 > 9.0 {
        let tau = 3.0 / r2.sqrt();
        a *= tau;
        b *= tau;
    }
    (a * delta, b * delta)
}

impl Motility for Tabulated {
    fn family(&self) -> &'static str {
        "tabulated"
    }
    fn gamma(&self, v: f64) -> f64 {
        let (j, t, dv) = self.locate(v);
        let (r0, r1) = (self.rows[j], self.rows[j + 1]);
        let (m0, m1) = limited_slopes(r0.gamma, r1.gamma, r0.dgamma, r1.dgamma, dv);
        hermite(r0.gamma, r1.gamma, m0, m1, t, dv)
    }
    fn dgamma(&self, v: f64) -> f64 {
        let (j, t, dv) = self.locate(v);
        let (r0, r1) = (self.rows[j], self.rows[j + 1]);
        hermite(r0.dgamma, r1.dgamma, r0.ddgamma, r1.ddgamma, t, dv)
    }
    fn ddgamma(&self, v: f64) -> f64 {
        let (j, t, _) = self.locate(v);
        let (r0, r1) = (self.rows[j], self.rows[j + 1]);
        r0.ddgamma + t * (r1.ddgamma - r0.ddgamma)
    }
    fn domain_end(&self) -> Option<f64> {
        self.rows.last().map(|r| r.v)
    }
    fn structural_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            if r.gamma <= 0.0 {
                out.push(Violation::row(i, r.v, ViolationKind::NonPositiveGamma));
            }
            if r.dgamma >= 0.0 {
                out.push(Violation::row(i, r.v, ViolationKind::NonNegativeSlope));
            }
        }
        for (i, w) in self.rows.windows(2).enumerate() {
            if w[1].gamma >= w[0].gamma {
                out.push(Violation::row(i, w[0].v, ViolationKind::NonDecreasingPair));
            }
        }
        out
    }
    /// Rows whose tabulated derivatives disagree with centred differences of
    /// the neighbouring column by more than [`TABLE_FD_TOLERANCE`].
    fn inconsistent_rows(&self) -> Vec<usize> {
        let close = |fd: f64, d: f64| (fd - d).abs() <= TABLE_FD_TOLERANCE * fd.abs().max(d.abs()).max(1e-12);
        (1..self.rows.len().saturating_sub(1))
            .filter(|&i| {
                let (a, r, b) = (self.rows[i - 1], self.rows[i], self.rows[i + 1]);
                let fd1 = (b.gamma - a.gamma) / (b.v - a.v);
                let fd2 = (b.dgamma - a.dgamma) / (b.v - a.v);
                !(close(fd1, r.dgamma) && close(fd2, r.ddgamma))
            })
            .collect()
    }
    fn parameters(&self) -> String {
        format!("rows={},v_max={}", self.rows.len(), self.rows[self.rows.len() - 1].v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonPositiveGamma,
    NonNegativeSlope,
    /// Table rows `index` and `index + 1` are not strictly decreasing.
    NonDecreasingPair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub v: f64,
    /// Table row, for structural violations.
    pub index: Option<usize>,
    pub kind: ViolationKind,
}

impl Violation {
    fn row(index: usize, v: f64, kind: ViolationKind) -> Self {
        Self {
            v,
            index: Some(index),
            kind,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub samples: usize,
    /// Set when `v_max` exceeded the table and sampling stopped at its end.
    pub truncated_at: Option<f64>,
    /// Table rows failing the finite-difference cross-check (informational).
    pub inconsistent_rows: Vec<usize>,
}

/// A motility function selected from the registry.
#[derive(Clone)]
pub struct MotilitySpec {
    inner: Arc<dyn Motility>,
}

impl fmt::Debug for MotilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.inner.family(), self.inner.parameters())
    }
}

impl fmt::Display for MotilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Built-in motility families keyed by name.
pub fn registry() -> Registry<dyn Motility> {
    let mut reg: Registry<dyn Motility> = Registry::empty("motility family");
    reg.register("exponential", "exp(-chi v); keys: chi", |args| {
        let chi = args.take_f64("chi")?;
        Ok(Arc::new(exponential(chi)?))
    });
    reg.register("algebraic-offset", "c (1+v)^(-k); keys: k, c (default 1)", |args| {
        let k = args.take_f64("k")?;
        let c = args.take_f64_or("c", 1.0)?;
        Ok(Arc::new(algebraic_offset(k, c)?))
    });
    reg.register("tabulated", "CSV table v,gamma,dgamma,ddgamma; keys: table", |args| {
        let path = args.take_str("table")?;
        Ok(Arc::new(Tabulated::load(Path::new(path.trim()))?))
    });
    reg
}

fn exponential(chi: f64) -> Result<Exponential> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::param("chi", format!("must be positive, got {chi}")));
    }
    Ok(Exponential { chi })
}

fn algebraic_offset(k: f64, c: f64) -> Result<AlgebraicOffset> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::param("k", format!("must be positive, got {k}")));
    }
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::param("c", format!("must be at least 1, got {c}")));
    }
    Ok(AlgebraicOffset { k, c })
}

impl MotilitySpec {
    pub fn new(inner: Arc<dyn Motility>) -> Self {
        Self { inner }
    }

    /// Looks `family` up in [`registry`] and builds it from `args`.
    pub fn from_registry(family: &str, args: &mut Args) -> Result<Self> {
        registry().build(family, args).map(Self::new)
    }

    pub fn exponential(chi: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(exponential(chi)?)))
    }

    pub fn algebraic_offset(k: f64, c: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(algebraic_offset(k, c)?)))
    }

    pub fn tabulated(rows: Vec<TableRow>) -> Result<Self> {
        Ok(Self::new(Arc::new(Tabulated::new(rows)?)))
    }

    pub fn family(&self) -> &'static str {
        self.inner.family()
    }

    pub fn parameters(&self) -> String {
        self.inner.parameters()
    }

    pub fn domain_end(&self) -> Option<f64> {
        self.inner.domain_end()
    }

    fn check_arg(&self, v: f64) -> Result<()> {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("motility evaluated at v = {v} < 0")));
        }
        if let Some(end) = self.inner.domain_end() {
            if v > end {
                return Err(Error::Domain(format!("v = {v} beyond table end {end}")));
            }
        }
        Ok(())
    }

    pub fn eval_gamma(&self, v: f64) -> Result<f64> {
        self.check_arg(v)?;
        Ok(self.inner.gamma(v))
    }

    pub fn eval_dgamma(&self, v: f64) -> Result<f64> {
        self.check_arg(v)?;
        Ok(self.inner.dgamma(v))
    }

    pub fn eval_ddgamma(&self, v: f64) -> Result<f64> {
        self.check_arg(v)?;
        Ok(self.inner.ddgamma(v))
    }

    /// Unchecked `γ(v)` for hot loops; callers guarantee `v` is in range.
    #[inline]
    pub(crate) fn gamma_unchecked(&self, v: f64) -> f64 {
        self.inner.gamma(v)
    }

    /// `|γ'(v)|² / γ(v)`.
    pub fn ratio(&self, v: f64) -> f64 {
        let d = self.inner.dgamma(v);
        d * d / self.inner.gamma(v)
    }

    /// `γ(v) γ''(v) / |γ'(v)|²`.
    pub fn convexity(&self, v: f64) -> f64 {
        let d = self.inner.dgamma(v);
        self.inner.gamma(v) * self.inner.ddgamma(v) / (d * d)
    }

    /// Samples `[0, v_max]` at no fewer than [`DENSE_SAMPLES`] points (clipped
    /// to the table for tabulated families) and reports every place where
    /// `γ ≤ 0` or `γ' ≥ 0`, plus the family's structural checks.
    pub fn check_hypothesis(&self, v_max: f64) -> HypothesisReport {
        let mut violations = self.inner.structural_violations();
        let (hi, truncated_at) = match self.inner.domain_end() {
            Some(end) if v_max > end => (end, Some(end)),
            _ => (v_max, None),
        };
        let mut last_kind: [bool; 2] = [false; 2];
        for i in 0..=DENSE_SAMPLES {
            let v = hi * i as f64 / DENSE_SAMPLES as f64;
            let bad = [self.inner.gamma(v) <= 0.0, !(self.inner.dgamma(v) < 0.0)];
            let kinds = [ViolationKind::NonPositiveGamma, ViolationKind::NonNegativeSlope];
            for c in 0..2 {
                // record where each run of violations starts
                if bad[c] && !last_kind[c] {
                    violations.push(Violation {
                        v,
                        index: None,
                        kind: kinds[c],
                    });
                }
                last_kind[c] = bad[c];
            }
        }
        let inconsistent_rows = self.inner.inconsistent_rows();
        HypothesisReport {
            ok: violations.is_empty(),
            violations,
            samples: DENSE_SAMPLES + 1,
            truncated_at,
            inconsistent_rows,
        }
    }

    /// `sup_{lo ≤ v ≤ hi} |γ'(v)|²/γ(v)`; `hi` may be `+∞`.
    pub fn sup_ratio(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo >= 0.0) || !(hi > lo) {
            return Err(Error::Domain(format!("sup_ratio needs 0 <= lo < hi, got [{lo}, {hi}]")));
        }
        if let Some(end) = self.inner.domain_end() {
            if hi > end && hi.is_finite() {
                return Err(Error::Domain(format!("sup_ratio upper end {hi} beyond table end {end}")));
            }
        }
        if let Some(s) = self.inner.sup_ratio_closed_form(lo, hi) {
            return Ok(s);
        }
        let hi = match (hi.is_finite(), self.inner.domain_end()) {
            (true, _) => hi,
            (false, Some(end)) if end > lo => end,
            _ => {
                return Err(Error::Domain(format!(
                    "no closed-form supremum for {} on an unbounded interval",
                    self.family()
                )))
            }
        };
        Ok(dense_extremum(lo, hi, |v| self.ratio(v), true))
    }

    /// `inf_{v ≥ 0} γγ''/|γ'|²`. Rejects motilities with `γ' = 0` anywhere.
    pub fn inf_convexity_ratio(&self) -> Result<f64> {
        if let Some(c) = self.inner.convexity_closed_form() {
            return Ok(c);
        }
        let end = self.inner.domain_end().ok_or_else(|| {
            Error::Domain(format!("no closed-form convexity infimum for {}", self.family()))
        })?;
        for i in 0..=DENSE_SAMPLES {
            let v = end * i as f64 / DENSE_SAMPLES as f64;
            if !(self.inner.dgamma(v) < 0.0) {
                return Err(Error::Hypothesis(format!("gamma'({v}) = {} is not negative", self.inner.dgamma(v))));
            }
        }
        Ok(dense_extremum(0.0, end, |v| self.convexity(v), false))
    }
}

/// Dense scan plus golden-section refinement around the best sample.
fn dense_extremum(lo: f64, hi: f64, f: impl Fn(f64) -> f64, maximize: bool) -> f64 {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |v: f64| sign * f(v);
    let step = (hi - lo) / DENSE_SAMPLES as f64;
    let (mut best_i, mut best) = (0, g(lo));
    for i in 1..=DENSE_SAMPLES {
        let val = g(lo + step * i as f64);
        if val > best {
            best = val;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    sign * best.max(fc).max(fd)
}
