//! Approximating functions `psi(q) = c * q^-a * (log q)^-b` and dimension
//! functions `f(x) = x^s * log(1/x)^alpha * loglog(1/x)^beta`, together with
//! the regularity conditions the zero-infinity laws need and the lower order
//! at infinity of `1/psi`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric-only approximating function. `None` (or a non-positive value) is
/// reported as an evaluator failure.
pub type RawPsi = Arc<dyn Fn(u64) -> Option<f64> + Send + Sync>;

/// Default lower cutoff for `psi`, keeps `log q > 0`.
pub const DEFAULT_Q0: u64 = 2;

/// `exp(-2)`, below which the iterated logarithms of a dimension function are
/// evaluated unclamped.
pub const DEFAULT_X0: f64 = 0.135_335_283_236_612_7;

#[derive(Clone)]
pub struct ApproximatingFunction {
    scale: f64,
    power: f64,
    log_power: f64,
    lower_cutoff: u64,
    raw: Option<RawPsi>,
    raw_monotone: bool,
}

impl fmt::Debug for ApproximatingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.raw {
            Some(_) => f
                .debug_struct("ApproximatingFunction")
                .field("raw", &"<callable>")
                .field("declared_monotone", &self.raw_monotone)
                .finish(),
            None => f
                .debug_struct("ApproximatingFunction")
                .field("c", &self.scale)
                .field("a", &self.power)
                .field("b", &self.log_power)
                .field("q0", &self.lower_cutoff)
                .finish(),
        }
    }
}

impl PartialEq for ApproximatingFunction {
    fn eq(&self, other: &Self) -> bool {
        self.raw.is_none()
            && other.raw.is_none()
            && self.scale == other.scale
            && self.power == other.power
            && self.log_power == other.log_power
            && self.lower_cutoff == other.lower_cutoff
    }
}

impl ApproximatingFunction {
    /// `c * q^-a * (log q)^-b`. The lower cutoff defaults to the smallest
    /// `q0 >= 2` beyond which the family is monotone whenever it is
    /// eventually decreasing.
    pub fn power_log(c: f64, a: f64, b: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("psi scale must be positive, got {c}")));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain("psi exponents must be finite".into()));
        }
        let mut q0 = DEFAULT_Q0;
        if a > 0.0 && b < 0.0 {
            // d/du (-a u - b ln u) < 0 iff u > -b/a, u = ln q
            let turn = (-b / a).exp().ceil();
            q0 = q0.max(if turn >= u64::MAX as f64 { u64::MAX } else { turn as u64 });
        }
        Ok(ApproximatingFunction {
            scale: c,
            power: a,
            log_power: b,
            lower_cutoff: q0,
            raw: None,
            raw_monotone: false,
        })
    }

    /// `q^-a`.
    pub fn power(a: f64) -> Result<Self> {
        Self::power_log(1.0, a, 0.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::power_log(c, 0.0, 0.0)
    }

    /// `(q^(d-s+1) log^alpha q)^(-1/(s-d+1))`, the family for which the
    /// `s`-volume sum conditions with and without the extra log factor disagree.
    pub fn gap_family(d: u32, s: f64, alpha: f64) -> Result<Self> {
        let df = d as f64;
        let excess = s - df + 1.0;
        if !(s > df - 1.0 && s < df) {
            return Err(Error::OutOfRange(format!("gap family needs s in ({}, {d}), got {s}", d - 1)));
        }
        Self::power_log(1.0, (df - s + 1.0) / excess, alpha / excess)
    }

    /// Wraps a numeric evaluator. Everything computed from it is heuristic.
    pub fn raw(evaluator: RawPsi, declared_monotone: bool) -> Self {
        ApproximatingFunction {
            scale: f64::NAN,
            power: f64::NAN,
            log_power: f64::NAN,
            lower_cutoff: 1,
            raw: Some(evaluator),
            raw_monotone: declared_monotone,
        }
    }

    pub fn with_lower_cutoff(mut self, q0: u64) -> Result<Self> {
        if q0 < 2 {
            return Err(Error::Domain(format!("lower cutoff must be >= 2, got {q0}")));
        }
        if self.raw.is_some() {
            return Err(Error::NotSymbolic("cutoff applies to symbolic families only".into()));
        }
        self.lower_cutoff = q0;
        Ok(self)
    }

    pub fn is_symbolic(&self) -> bool {
        self.raw.is_none()
    }

    /// `(c, a, b)` for symbolic instances.
    pub fn exponents(&self) -> Option<(f64, f64, f64)> {
        self.is_symbolic().then_some((self.scale, self.power, self.log_power))
    }

    pub fn lower_cutoff(&self) -> u64 {
        self.lower_cutoff
    }

    /// `a > 0 || (a == 0 && b > 0)` for symbolic families; the declared flag
    /// for raw ones.
    pub fn monotone_decreasing_to_zero(&self) -> bool {
        match self.raw {
            Some(_) => self.raw_monotone,
            None => self.power > 0.0 || (self.power == 0.0 && self.log_power > 0.0),
        }
    }

    /// Whether the divergence halves (which need a monotone `psi`) may be used.
    pub fn is_monotone(&self) -> bool {
        match self.raw {
            Some(_) => self.raw_monotone,
            // constants are monotone too
            None => self.monotone_decreasing_to_zero() || (self.power == 0.0 && self.log_power == 0.0),
        }
    }

    pub fn evaluate(&self, q: u64) -> Result<f64> {
        if q == 0 {
            return Err(Error::Domain("psi is defined on q >= 1".into()));
        }
        if let Some(raw) = &self.raw {
            return match raw(q) {
                Some(v) if v > 0.0 && v.is_finite() => Ok(v),
                Some(v) => Err(Error::Evaluator { q, reason: format!("returned {v}") }),
                None => Err(Error::Evaluator { q, reason: "no value".into() }),
            };
        }
        let qq = q.max(self.lower_cutoff) as f64;
        let mut v = self.scale;
        if self.power != 0.0 {
            v *= qq.powf(-self.power);
        }
        if self.log_power != 0.0 {
            v *= qq.ln().powf(-self.log_power);
        }
        Ok(v)
    }

    /// Lower order at infinity of `1/psi`.
    pub fn lower_order_tau(&self, q_max: u64) -> Result<TauEstimate> {
        if q_max < 100 {
            return Err(Error::Domain(format!("lower_order_tau needs Q >= 100, got {q_max}")));
        }
        if self.is_symbolic() {
            return Ok(TauEstimate { tau: self.power, exact: true, warning: None });
        }
        const SAMPLES: u32 = 64;
        let lo = (q_max / 10).max(2) as f64;
        let hi = q_max as f64;
        let mut tau = f64::INFINITY;
        let mut warning = None;
        for i in 0..=SAMPLES {
            let q = (lo * (hi / lo).powf(i as f64 / SAMPLES as f64)).round() as u64;
            let v = self.evaluate(q.clamp(2, q_max))?;
            if v >= 1.0 && warning.is_none() {
                warning = Some(format!("psi({q}) = {v} is not below 1"));
            }
            tau = tau.min((1.0 / v).ln() / (q as f64).ln());
        }
        Ok(TauEstimate { tau, exact: false, warning })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub exact: bool,
    pub warning: Option<String>,
}

/// `f(x) = x^s * L^alpha * LL^beta` with `L = log(1/min(x, x0))`, `LL = log L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionFunction {
    s: f64,
    alpha: f64,
    beta: f64,
    x0: f64,
    condition_constant: Option<f64>,
}

impl DimensionFunction {
    pub fn new(s: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(s.is_finite() && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain("dimension function exponents must be finite".into()));
        }
        if s <= 0.0 {
            return Err(Error::Domain(format!("dimension function needs s > 0, got {s}")));
        }
        Ok(DimensionFunction { s, alpha, beta, x0: DEFAULT_X0, condition_constant: None })
    }

    pub fn power(s: f64) -> Result<Self> {
        Self::new(s, 0.0, 0.0)
    }

    /// `x0` must lie in `(0, 1/e)` so that `log log(1/x0) > 0`.
    pub fn with_cutoff(mut self, x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0 < (-1.0f64).exp()) {
            return Err(Error::Domain(format!("cutoff x0 must lie in (0, 1/e), got {x0}")));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_condition_constant(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("condition constant must be positive, got {c}")));
        }
        self.condition_constant = Some(c);
        Ok(self)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cutoff(&self) -> f64 {
        self.x0
    }

    pub fn is_pure_power(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    /// Known constant for the doubling-type bound; exactly 1 for pure powers.
    pub fn condition_constant(&self) -> Option<f64> {
        if self.is_pure_power() {
            Some(1.0)
        } else {
            self.condition_constant
        }
    }

    /// `f(x) / x^s`.
    pub fn log_factor(&self, x: f64) -> f64 {
        if self.is_pure_power() {
            return 1.0;
        }
        let l = (1.0 / x.min(self.x0)).ln();
        let mut v = 1.0;
        if self.alpha != 0.0 {
            v *= l.powf(self.alpha);
        }
        if self.beta != 0.0 {
            v *= l.ln().powf(self.beta);
        }
        v
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let v = x.powf(self.s);
        if self.is_pure_power() {
            v
        } else {
            v * self.log_factor(x)
        }
    }

    /// First grid pair `x < y` with `f(y) < f(x)`, or a final value that does
    /// not sit below the first one (no decay towards 0).
    pub fn check_increasing(&self, grid: &GeometricGrid) -> Option<(f64, f64)> {
        let pts = grid.points();
        for w in pts.windows(2) {
            if self.evaluate(w[1]) < self.evaluate(w[0]) * (1.0 - 1e-12) {
                return Some((w[0], w[1]));
            }
        }
        None
    }

    pub fn sliced(self, d: u32) -> SlicedDimensionFunction {
        SlicedDimensionFunction { parent: self, d }
    }
}

/// `g` with `f(r) = r^(d-1) g(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedDimensionFunction {
    pub parent: DimensionFunction,
    pub d: u32,
}

impl SlicedDimensionFunction {
    pub fn exponent(&self) -> f64 {
        self.parent.s - (self.d as f64 - 1.0)
    }

    pub fn evaluate_g(&self, r: f64) -> f64 {
        let v = r.powf(self.exponent());
        if self.parent.is_pure_power() {
            v
        } else {
            v * self.parent.log_factor(r)
        }
    }

    /// `g` itself as a power-log dimension function (requires `s > d - 1`).
    pub fn as_dimension_function(&self) -> Result<DimensionFunction> {
        let mut g = DimensionFunction::new(self.exponent(), self.parent.alpha, self.parent.beta)?;
        g.x0 = self.parent.x0;
        Ok(g)
    }
}

/// Geometric sample grid `2^(-k / per_octave)` from `2^min_log2` up to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricGrid {
    pub min_log2: i32,
    pub per_octave: u32,
}

impl Default for GeometricGrid {
    fn default() -> Self {
        GeometricGrid { min_log2: -60, per_octave: 8 }
    }
}

impl GeometricGrid {
    /// Ascending sample points.
    pub fn points(&self) -> Vec<f64> {
        let steps = (-self.min_log2) as u32 * self.per_octave;
        (0..=steps)
            .rev()
            .map(|k| (-(k as f64) / self.per_octave as f64).exp2())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConditionOne {
    /// `f(y) <= c_est (y/x)^s f(x)` on every grid pair.
    HoldsWith { c_est: f64, s: f64 },
    Fails { x: f64, y: f64 },
}

/// Doubling-type bound `f(y) <= C (y/x)^s f(x)` for `x < y`, certified on the
/// clamped grid.
pub fn check_condition_one(f: &DimensionFunction, d: u32, grid: &GeometricGrid) -> Result<ConditionOne> {
    check_dimension(d)?;
    let s = f.s;
    let df = d as f64;
    if !(s > df - 1.0 && s < df) {
        return Err(Error::OutOfRange(format!("s = {s} lies outside ({}, {d})", d - 1)));
    }
    let pts = grid.points();
    // sup over x < y of h(y)/h(x) with h = f / x^s
    let mut min_h = f64::INFINITY;
    let mut min_at = pts[0];
    let mut c_est: f64 = 1.0;
    for &y in &pts {
        let h = f.log_factor(y);
        if min_h.is_finite() {
            let ratio = h / min_h;
            if !ratio.is_finite() {
                return Ok(ConditionOne::Fails { x: min_at, y });
            }
            c_est = c_est.max(ratio);
        }
        if h < min_h {
            min_h = h;
            min_at = y;
        }
    }
    Ok(ConditionOne::HoldsWith { c_est, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConditionTwo {
    Holds,
    /// `witness` is the first grid pair `x < y` with `x^(1-d) f(x) > y^(1-d) f(y)`.
    Fails { witness: Option<(f64, f64)>, asymptotic: bool },
}

/// Monotonicity of `x -> x^(1-d) f(x)`: decided symbolically at 0 and
/// scanned on the grid.
pub fn check_condition_two(f: &DimensionFunction, d: u32, grid: &GeometricGrid) -> Result<ConditionTwo> {
    check_dimension(d)?;
    let g = f.sliced(d);
    let t = g.exponent();
    let asymptotic = t > 0.0 || (t == 0.0 && (f.alpha < 0.0 || (f.alpha == 0.0 && f.beta <= 0.0)));
    let pts = grid.points();
    let witness = pts
        .windows(2)
        .find(|w| g.evaluate_g(w[1]) < g.evaluate_g(w[0]) * (1.0 - 1e-12))
        .map(|w| (w[0], w[1]));
    if asymptotic && witness.is_none() {
        Ok(ConditionTwo::Holds)
    } else {
        Ok(ConditionTwo::Fails { witness, asymptotic })
    }
}

fn check_dimension(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!("ambient dimension must be >= 2, got {d}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON and shorthand forms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Psi {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    F {
        s: f64,
        #[serde(default)]
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Serialize for ApproximatingFunction {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self.exponents() {
            Some((c, a, b)) => FamilySpec::Psi { c, a, b }.serialize(ser),
            None => Err(serde::ser::Error::custom("raw approximating functions do not serialize")),
        }
    }
}

impl<'de> Deserialize<'de> for ApproximatingFunction {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match FamilySpec::deserialize(de)? {
            FamilySpec::Psi { c, a, b } => {
                ApproximatingFunction::power_log(c, a, b).map_err(serde::de::Error::custom)
            }
            FamilySpec::F { .. } => Err(serde::de::Error::custom("expected kind \"psi\"")),
        }
    }
}

impl Serialize for DimensionFunction {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        FamilySpec::F { s: self.s, alpha: self.alpha, beta: self.beta }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DimensionFunction {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match FamilySpec::deserialize(de)? {
            FamilySpec::F { s, alpha, beta } => {
                DimensionFunction::new(s, alpha, beta).map_err(serde::de::Error::custom)
            }
            FamilySpec::Psi { .. } => Err(serde::de::Error::custom("expected kind \"f\"")),
        }
    }
}

/// Parses `psi` from JSON, a product shorthand such as `"0.5*q^-2*log^-1"`, or
/// `"gap:alpha=1.5"` (needs the `(d, s)` context).
pub fn parse_psi(text: &str, gap_context: Option<(u32, f64)>) -> Result<ApproximatingFunction> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()));
    }
    if let Some(rest) = text.strip_prefix("gap:") {
        let alpha = rest
            .trim()
            .strip_prefix("alpha=")
            .ok_or_else(|| Error::Parse(format!("expected gap:alpha=<value>, got {text:?}")))?;
        let alpha = parse_number(alpha)?;
        let (d, s) = gap_context
            .ok_or_else(|| Error::Parse("the gap family needs both d and s".into()))?;
        return ApproximatingFunction::gap_family(d, s, alpha);
    }
    let factors = parse_product(text, &["q", "log"])?;
    // `+ 0.0` folds -0.0 to 0.0
    ApproximatingFunction::power_log(factors.scale, -factors.exps[0] + 0.0, -factors.exps[1] + 0.0)
}

/// Parses a dimension function from JSON or a shorthand like
/// `"x^1.5*log^1*loglog^-2"` (`log` means `log(1/x)`).
pub fn parse_dimension_function(text: &str) -> Result<DimensionFunction> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()));
    }
    let factors = parse_product(text, &["x", "log", "loglog"])?;
    if factors.scale != 1.0 {
        return Err(Error::Parse("dimension functions take no scale factor".into()));
    }
    DimensionFunction::new(factors.exps[0], factors.exps[1], factors.exps[2])
}

struct Product {
    scale: f64,
    exps: Vec<f64>,
}

fn parse_product(text: &str, symbols: &[&str]) -> Result<Product> {
    let mut out = Product { scale: 1.0, exps: vec![0.0; symbols.len()] };
    if text.is_empty() {
        return Err(Error::Parse("empty function".into()));
    }
    for factor in text.split('*') {
        let factor = factor.trim();
        let (base, exp) = match factor.split_once('^') {
            Some((b, e)) => (b.trim(), Some(parse_number(e)?)),
            None => (factor, None),
        };
        match symbols.iter().position(|s| *s == base) {
            Some(i) => out.exps[i] += exp.unwrap_or(1.0),
            None => {
                if exp.is_some() {
                    return Err(Error::Parse(format!("unknown symbol {base:?} in {text:?}")));
                }
                out.scale *= parse_number(base)?;
            }
        }
    }
    Ok(out)
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn evaluate_examples() {
        let psi = ApproximatingFunction::power_log(1.0, 2.0, 0.0).unwrap();
        assert!(rel(psi.evaluate(10).unwrap(), 0.01) < 1e-15);
        let one = ApproximatingFunction::constant(1.0).unwrap();
        assert_eq!(one.evaluate(7).unwrap(), 1.0);
        let psi = ApproximatingFunction::power_log(1.0, 1.0, 1.0).unwrap();
        // e^2 rounded to the nearest integer is 7
        let q = std::f64::consts::E.powi(2).round() as u64;
        assert_eq!(q, 7);
        let expected = 1.0 / (7.0 * 7f64.ln());
        assert!(rel(psi.evaluate(q).unwrap(), expected) < 1e-15);
        assert!((psi.evaluate(q).unwrap() - 0.07342).abs() < 1e-5);
    }

    #[test]
    fn clamp_below_cutoff() {
        let psi = ApproximatingFunction::power_log(1.0, 1.0, 1.0).unwrap();
        assert_eq!(psi.evaluate(1).unwrap(), psi.evaluate(2).unwrap());
        assert!(psi.evaluate(0).is_err());
    }

    #[test]
    fn raw_mode_surfaces_failures() {
        let psi = ApproximatingFunction::raw(Arc::new(|q| if q < 5 { Some(0.1) } else { None }), true);
        assert_eq!(psi.evaluate(3).unwrap(), 0.1);
        assert!(matches!(psi.evaluate(5), Err(Error::Evaluator { q: 5, .. })));
        let neg = ApproximatingFunction::raw(Arc::new(|_| Some(-1.0)), true);
        assert!(neg.evaluate(1).is_err());
    }

    #[test]
    fn monotone_flag_matches_predicate() {
        for (a, b, want) in [(1.0, 0.0, true), (0.0, 1.0, true), (0.0, 0.0, false), (-1.0, 5.0, false), (0.5, -3.0, true)] {
            let psi = ApproximatingFunction::power_log(1.0, a, b).unwrap();
            assert_eq!(psi.monotone_decreasing_to_zero(), want, "a={a} b={b}");
        }
    }

    #[test]
    fn cutoff_moves_past_log_bump() {
        let psi = ApproximatingFunction::power_log(1.0, 0.5, -3.0).unwrap();
        assert_eq!(psi.lower_cutoff(), 404); // ceil(e^6)
        for q in psi.lower_cutoff()..2000 {
            assert!(psi.evaluate(q + 1).unwrap() < psi.evaluate(q).unwrap());
        }
    }

    #[test]
    fn tau_examples() {
        let t = ApproximatingFunction::power(3.0).unwrap().lower_order_tau(1000).unwrap();
        assert_eq!((t.tau, t.exact), (3.0, true));
        let t = ApproximatingFunction::power_log(1.0, 2.0, 5.0).unwrap().lower_order_tau(1000).unwrap();
        assert_eq!((t.tau, t.exact), (2.0, true));
        let t = ApproximatingFunction::constant(1.0).unwrap().lower_order_tau(100).unwrap();
        assert_eq!((t.tau, t.exact), (0.0, true));
        assert!(ApproximatingFunction::power(3.0).unwrap().lower_order_tau(99).is_err());
    }

    #[test]
    fn tau_raw_is_heuristic() {
        let psi = ApproximatingFunction::raw(Arc::new(|q| Some((q as f64).powf(-2.5))), true);
        let t = psi.lower_order_tau(10_000).unwrap();
        assert!(!t.exact);
        assert!((t.tau - 2.5).abs() < 1e-12);
        assert!(t.warning.is_none());
        let flat = ApproximatingFunction::raw(Arc::new(|_| Some(2.0)), false);
        assert!(flat.lower_order_tau(1000).unwrap().warning.is_some());
    }

    #[test]
    fn condition_one_examples() {
        let grid = GeometricGrid::default();
        let f = DimensionFunction::power(1.5).unwrap();
        assert_eq!(check_condition_one(&f, 2, &grid).unwrap(), ConditionOne::HoldsWith { c_est: 1.0, s: 1.5 });
        let f = DimensionFunction::power(2.5).unwrap();
        assert!(matches!(check_condition_one(&f, 2, &grid), Err(Error::OutOfRange(_))));
        let f = DimensionFunction::new(1.5, 1.0, 0.0).unwrap();
        match check_condition_one(&f, 2, &grid).unwrap() {
            ConditionOne::HoldsWith { c_est, s } => {
                assert_eq!(s, 1.5);
                assert!(c_est.is_finite() && c_est >= 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn condition_one_negative_log_exponent_matches_brute_force() {
        // brute-force pair scan
        let grid = GeometricGrid { min_log2: -60, per_octave: 2 };
        let f = DimensionFunction::new(1.5, -1.0, 0.5).unwrap();
        let pts = grid.points();
        let mut brute: f64 = 1.0;
        for (i, &x) in pts.iter().enumerate() {
            for &y in &pts[i + 1..] {
                brute = brute.max(f.evaluate(y) * (x / y).powf(1.5) / f.evaluate(x));
            }
        }
        let ConditionOne::HoldsWith { c_est, .. } = check_condition_one(&f, 2, &grid).unwrap() else {
            panic!()
        };
        assert!(rel(c_est, brute) < 1e-9, "{c_est} vs {brute}");
    }

    #[test]
    fn condition_two_examples() {
        let grid = GeometricGrid::default();
        let f = DimensionFunction::power(1.5).unwrap();
        assert_eq!(check_condition_two(&f, 2, &grid).unwrap(), ConditionTwo::Holds);
        let f = DimensionFunction::power(2.5).unwrap();
        assert_eq!(check_condition_two(&f, 3, &grid).unwrap(), ConditionTwo::Holds);
        let f = DimensionFunction::new(1.0, 1.0, 0.0).unwrap();
        match check_condition_two(&f, 2, &grid).unwrap() {
            ConditionTwo::Fails { witness: Some((x, y)), asymptotic: false } => {
                let g = f.sliced(2);
                assert!(x < y && g.evaluate_g(y) < g.evaluate_g(x));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sliced_identity() {
        let f = DimensionFunction::new(2.4, 0.7, -1.3).unwrap();
        let g = f.sliced(3);
        for k in 1..=1000 {
            let r = (-(k as f64) * 0.05).exp2();
            let lhs = g.evaluate_g(r) * r.powi(2);
            assert!(rel(lhs, f.evaluate(r)) <= 1e-12);
        }
    }

    #[test]
    fn shorthand_and_json() {
        let psi = parse_psi("q^-2*log^-1", None).unwrap();
        assert_eq!(psi.exponents(), Some((1.0, 2.0, 1.0)));
        let psi = parse_psi("0.5 * q^-3", None).unwrap();
        assert_eq!(psi.exponents(), Some((0.5, 3.0, 0.0)));
        let psi = parse_psi(r#"{"kind":"psi","c":2,"a":1,"b":0.5}"#, None).unwrap();
        assert_eq!(psi.exponents(), Some((2.0, 1.0, 0.5)));
        let psi = parse_psi("gap:alpha=1.5", Some((3, 2.5))).unwrap();
        assert_eq!(psi.exponents(), Some((1.0, 3.0, 3.0)));
        assert!(parse_psi("gap:alpha=1.5", None).is_err());
        assert!(parse_psi("z^2", None).is_err());

        let f = parse_dimension_function("x^1.5*log^1*loglog^-2").unwrap();
        assert_eq!((f.s(), f.alpha(), f.beta()), (1.5, 1.0, -2.0));
        let f = parse_dimension_function(r#"{"kind":"f","s":1.6}"#).unwrap();
        assert_eq!((f.s(), f.alpha(), f.beta()), (1.6, 0.0, 0.0));

        let json = serde_json::to_string(&parse_psi("q^-3", None).unwrap()).unwrap();
        assert_eq!(json, r#"{"kind":"psi","c":1.0,"a":3.0,"b":0.0}"#);
    }
}
