//! Symbolic classification of the power-log series behind the zero-one and
//! zero-infinity laws, and the verdict engine mapping `(psi, f, d, mode)` to
//! the measure statement those laws give.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finecover::InhomogeneousShift;
use crate::functions::{
    check_condition_one, check_condition_two, ApproximatingFunction, ConditionOne, ConditionTwo, DimensionFunction,
    GeometricGrid,
};

/// Exponents closer than this to a critical value are snapped onto it, so
/// that families built to sit exactly on the boundary (`e = -1`) are
/// classified by their log exponents rather than by rounding noise.
pub const EXPONENT_TIE_EPS: f64 = 1e-9;

/// Truncation used for the lower order of raw functions.
const TAU_WINDOW: u64 = 1_000_000;

/// `scale * q^e * (log q)^h * (log log q)^h2` for large `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLogTerm {
    pub e: f64,
    pub h: f64,
    pub h2: f64,
    /// Leading constant; never affects classification.
    pub scale: f64,
}

impl PowerLogTerm {
    pub fn new(e: f64, h: f64, h2: f64) -> Self {
        PowerLogTerm { e, h, h2, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// `ln T` at `q = exp(t)`; needs `t > 1`.
    pub fn ln_value(&self, t: f64) -> f64 {
        let mut v = self.scale.ln() + self.e * t;
        if self.h != 0.0 {
            v += self.h * t.ln();
        }
        if self.h2 != 0.0 {
            v += self.h2 * t.ln().ln();
        }
        v
    }

    fn snapped(&self) -> (f64, f64, f64) {
        let snap = |x: f64| if (x + 1.0).abs() < EXPONENT_TIE_EPS { -1.0 } else { x };
        (snap(self.e), snap(self.h), snap(self.h2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convergence {
    Convergent,
    Divergent,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassificationMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Exponents { e: f64, h: f64, h2: f64 },
    /// `block_ratio` compares the sums over `[2Q, 4Q]` and `[Q, 2Q]`;
    /// `condensed_slope` is the mean slope of `ln(q T(q))` against `ln q` over
    /// `[sqrt(Q_max), Q_max]`.
    PartialSums { ln_q_max: f64, block_ratio: f64, condensed_slope: f64 },
    Failure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesClassification {
    pub verdict: Convergence,
    pub mode: ClassificationMode,
    pub evidence: Evidence,
}

/// Integral-test rules on the `q^e log^h loglog^h2` scale.
pub fn classify_powerlog(term: &PowerLogTerm) -> SeriesClassification {
    let (e, h, h2) = term.snapped();
    let convergent = e < -1.0 || (e == -1.0 && (h < -1.0 || (h == -1.0 && h2 < -1.0)));
    SeriesClassification {
        verdict: if convergent { Convergence::Convergent } else { Convergence::Divergent },
        mode: ClassificationMode::Exact,
        evidence: Evidence::Exponents { e, h, h2 },
    }
}

/// Log of `int_t^{t+ln 2} exp(u + ln_term(u)) du` by Simpson's rule in
/// log-sum-exp form.
fn ln_block(ln_term: &dyn Fn(f64) -> Option<f64>, t: f64) -> Option<f64> {
    const NODES: usize = 17;
    let step = std::f64::consts::LN_2 / (NODES - 1) as f64;
    let mut logs = Vec::with_capacity(NODES);
    for i in 0..NODES {
        let u = t + step * i as f64;
        let w: f64 = if i == 0 || i == NODES - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = ln_term(u)?;
        if !v.is_finite() {
            return None;
        }
        logs.push(w.ln() + u + v);
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln() + (step / 3.0).ln())
}

/// Numeric classification from `ln T(e^t)` sampled up to `t_max`.
///
/// Both signals must agree: the dyadic block ratio near `Q_max` and the
/// condensed slope over the upper half of `[0, t_max]`. Anything else is
/// `Unknown`.
pub fn classify_numeric(ln_term: &dyn Fn(f64) -> Option<f64>, t_max: f64) -> SeriesClassification {
    let ln2 = std::f64::consts::LN_2;
    let failure = |reason: &str| SeriesClassification {
        verdict: Convergence::Unknown,
        mode: ClassificationMode::Heuristic,
        evidence: Evidence::Failure { reason: reason.to_string() },
    };
    if !(t_max > 8.0) {
        return failure("window too short");
    }
    let (Some(b1), Some(b2)) = (ln_block(ln_term, t_max - 2.0 * ln2), ln_block(ln_term, t_max - ln2)) else {
        return failure("term not evaluable");
    };
    let (Some(hi), Some(lo)) = (ln_term(t_max), ln_term(t_max / 2.0)) else {
        return failure("term not evaluable");
    };
    let block_ratio = (b2 - b1).exp();
    let condensed_slope = ((t_max + hi) - (t_max / 2.0 + lo)) / (t_max / 2.0);
    let verdict = if block_ratio < 1.0 && condensed_slope < 0.0 {
        Convergence::Convergent
    } else if block_ratio >= 1.0 && condensed_slope >= 0.0 {
        Convergence::Divergent
    } else {
        Convergence::Unknown
    };
    SeriesClassification {
        verdict,
        mode: ClassificationMode::Heuristic,
        evidence: Evidence::PartialSums { ln_q_max: t_max, block_ratio, condensed_slope },
    }
}

/// Heuristic classification of a power-log term on a very long log window.
pub fn classify_powerlog_numeric(term: &PowerLogTerm) -> SeriesClassification {
    classify_numeric(&|t| Some(term.ln_value(t)), 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesKind {
    /// `sum psi(q) log^(d-1) q`
    Gallagher,
    /// `sum q^(d-s) psi^(s-d+1) log^(d-2) q`
    BvConv,
    /// `sum q^(d-s) psi^(s-d+1)`
    BvDiv,
    /// `sum q^d psi^(1-d) f(psi/q)`
    Main,
    /// `sum r g(psi(r)/r)` with `f = r^(d-1) g`
    Bugeaud,
    /// `sum psi(q) log^(d-1) q` for the doubly metric set
    DoublyLebesgue,
    /// `sum_{q in Z^m} psi(|q|)^m log^(d-1) |q|`
    MultiEqcon,
    /// `sum_{q in Z^m} |q|^(md) psi(|q|)^(1-md) f(psi(|q|)/|q|)`
    MultiPsiConv,
}

impl SeriesKind {
    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::Gallagher => "Gallagher",
            SeriesKind::BvConv => "BV_conv",
            SeriesKind::BvDiv => "BV_div",
            SeriesKind::Main => "Main",
            SeriesKind::Bugeaud => "Bugeaud",
            SeriesKind::DoublyLebesgue => "DoublyLebesgue",
            SeriesKind::MultiEqcon => "MultiEqcon",
            SeriesKind::MultiPsiConv => "MultiPsiConv",
        }
    }

    fn needs_gauge(&self) -> bool {
        !matches!(self, SeriesKind::Gallagher | SeriesKind::DoublyLebesgue | SeriesKind::MultiEqcon)
    }
}

/// Exponents of `f(c q^-(a+1) log^-b q)` for a gauge `x^s L^alpha LL^beta`.
fn gauge_exponents(c: f64, a: f64, b: f64, s: f64, alpha: f64, beta: f64, x0: f64) -> Result<PowerLogTerm> {
    let k = a + 1.0;
    let base = c.powf(s);
    if k > 0.0 {
        // L = (a+1) log q + b loglog q - log c
        return Ok(PowerLogTerm { e: -k * s, h: -b * s + alpha, h2: beta, scale: base * k.powf(alpha) });
    }
    let clamp = (1.0 / x0).ln();
    let frozen = clamp.powf(alpha) * clamp.ln().powf(beta);
    if k < 0.0 || b < 0.0 {
        // the argument grows, so the log factors are frozen at the cutoff
        return Ok(PowerLogTerm { e: -k * s, h: -b * s, h2: 0.0, scale: base * frozen });
    }
    if b == 0.0 {
        let x = c.min(x0);
        let v = (1.0 / x).ln().powf(alpha) * (1.0 / x).ln().ln().powf(beta);
        return Ok(PowerLogTerm::new(0.0, 0.0, 0.0).with_scale(base * v));
    }
    // a = -1, b > 0: L ~ b loglog q
    if beta != 0.0 {
        return Err(Error::NotSymbolic("term involves log log log q".into()));
    }
    Ok(PowerLogTerm { e: 0.0, h: -b * s, h2: alpha, scale: base * b.powf(alpha) })
}

fn require_power(f: &DimensionFunction, kind: SeriesKind) -> Result<f64> {
    if f.is_pure_power() {
        Ok(f.s())
    } else {
        Err(Error::Domain(format!("{} needs a pure power gauge x^s", kind.name())))
    }
}

/// Exact power-log exponents of the general term of `kind`.
///
/// For the multivariable sums, `Psi(q) = psi(|q|)` with the sup norm and the
/// shell `#{|q| = Q} = (2Q+1)^m - (2Q-1)^m ~ 2^m m Q^(m-1)` is absorbed into
/// the exponent.
pub fn build_series_term(
    kind: SeriesKind,
    psi: &ApproximatingFunction,
    f: Option<&DimensionFunction>,
    d: u32,
    m: u32,
) -> Result<PowerLogTerm> {
    let Some((c, a, b)) = psi.exponents() else {
        return Err(Error::NotSymbolic("psi is a raw evaluator".into()));
    };
    if d < 2 {
        return Err(Error::Domain(format!("ambient dimension must be >= 2, got {d}")));
    }
    if m < 1 {
        return Err(Error::Domain("m must be >= 1".into()));
    }
    let f = match (kind.needs_gauge(), f) {
        (true, None) => return Err(Error::Domain(format!("{} needs a dimension function", kind.name()))),
        (_, f) => f,
    };
    let df = d as f64;
    let mf = m as f64;
    let shell = 2f64.powi(m as i32) * mf;
    let term = match kind {
        SeriesKind::Gallagher | SeriesKind::DoublyLebesgue => PowerLogTerm::new(-a, -b + df - 1.0, 0.0).with_scale(c),
        SeriesKind::BvConv | SeriesKind::BvDiv => {
            let s = require_power(f.unwrap(), kind)?;
            let t = s - df + 1.0;
            let extra = if kind == SeriesKind::BvConv { df - 2.0 } else { 0.0 };
            PowerLogTerm::new(df - s - a * t, -b * t + extra, 0.0).with_scale(c.powf(t))
        }
        SeriesKind::Main => {
            let f = f.unwrap();
            let g = gauge_exponents(c, a, b, f.s(), f.alpha(), f.beta(), f.cutoff())?;
            PowerLogTerm {
                e: df + a * (df - 1.0) + g.e,
                h: b * (df - 1.0) + g.h,
                h2: g.h2,
                scale: c.powf(1.0 - df) * g.scale,
            }
        }
        SeriesKind::Bugeaud => {
            let f = f.unwrap();
            let g = gauge_exponents(c, a, b, f.s() - df + 1.0, f.alpha(), f.beta(), f.cutoff())?;
            PowerLogTerm { e: 1.0 + g.e, ..g }
        }
        SeriesKind::MultiEqcon => PowerLogTerm::new(mf - 1.0 - a * mf, -b * mf + df - 1.0, 0.0).with_scale(shell * c.powf(mf)),
        SeriesKind::MultiPsiConv => {
            let f = f.unwrap();
            let big = mf * df;
            let g = gauge_exponents(c, a, b, f.s(), f.alpha(), f.beta(), f.cutoff())?;
            PowerLogTerm {
                e: mf - 1.0 + big + a * (big - 1.0) + g.e,
                h: b * (big - 1.0) + g.h,
                h2: g.h2,
                scale: shell * c.powf(1.0 - big) * g.scale,
            }
        }
    };
    Ok(term)
}

/// Direct numeric evaluation of the general term at an integer `q`.
pub fn series_term_value(
    kind: SeriesKind,
    psi: &ApproximatingFunction,
    f: Option<&DimensionFunction>,
    d: u32,
    m: u32,
    q: u64,
) -> Result<f64> {
    let p = psi.evaluate(q)?;
    let qf = q as f64;
    let df = d as f64;
    let ln = qf.ln();
    let gauge = || f.ok_or_else(|| Error::Domain(format!("{} needs a dimension function", kind.name())));
    // (2q+1)^m - (2q-1)^m = 2 sum_{k odd} C(m,k) (2q)^(m-k), without cancellation
    let shell = |m: u32| {
        (1..=m)
            .step_by(2)
            .map(|k| 2.0 * crate::numerics::binomial(m as u64, k as u64).unwrap_or(u128::MAX) as f64 * (2.0 * qf).powi((m - k) as i32))
            .sum::<f64>()
    };
    Ok(match kind {
        SeriesKind::Gallagher | SeriesKind::DoublyLebesgue => p * ln.powf(df - 1.0),
        SeriesKind::BvConv | SeriesKind::BvDiv => {
            let s = require_power(gauge()?, kind)?;
            let extra = if kind == SeriesKind::BvConv { ln.powf(df - 2.0) } else { 1.0 };
            qf.powf(df - s) * p.powf(s - df + 1.0) * extra
        }
        SeriesKind::Main => qf.powf(df) * p.powf(1.0 - df) * gauge()?.evaluate(p / qf),
        SeriesKind::Bugeaud => qf * gauge()?.sliced(d).evaluate_g(p / qf),
        SeriesKind::MultiEqcon => shell(m) * p.powf(m as f64) * ln.powf(df - 1.0),
        SeriesKind::MultiPsiConv => {
            let big = (m * d) as f64;
            shell(m) * qf.powf(big) * p.powf(1.0 - big) * gauge()?.evaluate(p / qf)
        }
    })
}

/// Exact classification when `psi` is symbolic, heuristic otherwise.
pub fn classify_series(
    kind: SeriesKind,
    psi: &ApproximatingFunction,
    f: Option<&DimensionFunction>,
    d: u32,
    m: u32,
) -> Result<(Option<PowerLogTerm>, SeriesClassification)> {
    match build_series_term(kind, psi, f, d, m) {
        Ok(term) => Ok((Some(term), classify_powerlog(&term))),
        Err(Error::NotSymbolic(_)) => {
            let ln_term = |t: f64| {
                let q = t.exp().round();
                if q < 2.0 || q > 2f64.powi(63) {
                    return None;
                }
                series_term_value(kind, psi, f, d, m, q as u64).ok().filter(|v| *v > 0.0).map(f64::ln)
            };
            Ok((None, classify_numeric(&ln_term, 62.0 * std::f64::consts::LN_2)))
        }
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Dimension
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionMode {
    Single,
    Double,
}

/// `d` for `tau <= 1`, else `d + (1 - tau)/(1 + tau)`; `2d` in place of `d`
/// for the doubly metric set.
pub fn dimension_from_tau(tau: f64, d: u32, mode: DimensionMode) -> f64 {
    let base = match mode {
        DimensionMode::Single => d as f64,
        DimensionMode::Double => 2.0 * d as f64,
    };
    if tau <= 1.0 {
        base
    } else {
        (base * (1.0 + tau) + 1.0 - tau) / (1.0 + tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub tau: f64,
    pub exact: bool,
    pub warning: Option<String>,
}

pub fn hausdorff_dimension(psi: &ApproximatingFunction, d: u32, mode: DimensionMode) -> Result<DimensionEstimate> {
    let tau = psi.lower_order_tau(TAU_WINDOW)?;
    Ok(DimensionEstimate {
        value: dimension_from_tau(tau.tau, d, mode),
        tau: tau.tau,
        exact: tau.exact,
        warning: tau.warning,
    })
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasureKind {
    Lebesgue_d,
    Hausdorff_f,
    Hausdorff_s,
    Doubly_F,
}

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictValue {
    Zero,
    One,
    Infinite,
    Conjectural_One,
    Conjectural_Infinite,
    OutOfRange_Infinite,
    OutOfRange_Zero,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    NotRequired,
    RequiredSatisfied,
    RequiredViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub statement: String,
    pub monotonicity: Monotonicity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub name: String,
    pub e: Option<f64>,
    pub h: Option<f64>,
    pub h2: Option<f64>,
    pub classification: Convergence,
    pub mode: ClassificationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub measure_kind: MeasureKind,
    pub value: VerdictValue,
    pub provenance: Provenance,
    #[serde(rename = "dim_H")]
    pub dim_h: Option<f64>,
    pub series: Vec<SeriesReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gauge {
    Lebesgue,
    Power(f64),
    Function(DimensionFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Homogeneous,
    Inhomogeneous(InhomogeneousShift),
    Doubly,
    Multivariable(u32),
}

struct Engine<'a> {
    psi: &'a ApproximatingFunction,
    d: u32,
    m: u32,
    series: Vec<SeriesReport>,
    notes: Vec<String>,
}

impl Engine<'_> {
    fn run(&mut self, kind: SeriesKind, f: Option<&DimensionFunction>) -> Result<Convergence> {
        let (term, class) = classify_series(kind, self.psi, f, self.d, self.m)?;
        self.series.push(SeriesReport {
            name: kind.name().to_string(),
            e: term.map(|t| t.e),
            h: term.map(|t| t.h),
            h2: term.map(|t| t.h2),
            classification: class.verdict,
            mode: class.mode,
        });
        Ok(class.verdict)
    }
}

fn provenance(statement: &str, monotonicity: Monotonicity) -> Provenance {
    Provenance { statement: statement.to_string(), monotonicity }
}

fn monotone_use(psi: &ApproximatingFunction) -> Monotonicity {
    if psi.is_monotone() {
        Monotonicity::RequiredSatisfied
    } else {
        Monotonicity::RequiredViolated
    }
}

/// Measure statement for `(psi, gauge, d, mode)`.
pub fn verdict(psi: &ApproximatingFunction, gauge: &Gauge, d: u32, mode: &Mode) -> Result<Verdict> {
    if d < 2 {
        return Err(Error::Domain(format!("ambient dimension must be >= 2, got {d}")));
    }
    let m = match mode {
        Mode::Multivariable(m) if *m == 0 => return Err(Error::Domain("m must be >= 1".into())),
        Mode::Multivariable(m) => *m,
        _ => 1,
    };
    if let Mode::Inhomogeneous(shift) = mode {
        if shift.dim() != d as usize {
            return Err(Error::Domain(format!("shift has {} components, d = {d}", shift.dim())));
        }
    }
    let mut eng = Engine { psi, d, m, series: Vec::new(), notes: Vec::new() };
    let dim_mode = match mode {
        Mode::Doubly => Some(DimensionMode::Double),
        Mode::Multivariable(_) => None,
        _ => Some(DimensionMode::Single),
    };
    let dim = dim_mode.map(|dm| hausdorff_dimension(psi, d, dm)).transpose()?;
    if let Some(w) = dim.as_ref().and_then(|e| e.warning.clone()) {
        eng.notes.push(format!("lower order: {w}"));
    }
    if dim.as_ref().is_some_and(|e| !e.exact) {
        eng.notes.push("dimension uses a heuristic lower order".into());
    }
    let (kind, value, prov) = match gauge {
        Gauge::Lebesgue => lebesgue(&mut eng, mode)?,
        Gauge::Power(s) => {
            let f = DimensionFunction::power(*s)?;
            hausdorff(&mut eng, &f, true, mode)?
        }
        Gauge::Function(f) => hausdorff(&mut eng, f, false, mode)?,
    };
    if value == VerdictValue::One && kind != MeasureKind::Lebesgue_d {
        unreachable!("full measure is a Lebesgue statement");
    }
    if let (Some(est), Some(DimensionMode::Single)) = (&dim, dim_mode) {
        critical_note(&mut eng, est);
    }
    Ok(Verdict {
        measure_kind: kind,
        value,
        provenance: prov,
        dim_h: dim.map(|e| e.value),
        series: eng.series,
        notes: eng.notes,
    })
}

/// At the critical exponent the `s`-volume sum is checked and reported.
fn critical_note(eng: &mut Engine<'_>, est: &DimensionEstimate) {
    if !(est.exact && est.tau > 1.0) {
        return;
    }
    let Ok(f) = DimensionFunction::power(est.value) else { return };
    if let Ok(term) = build_series_term(SeriesKind::Main, eng.psi, Some(&f), eng.d, 1) {
        let class = classify_powerlog(&term);
        let tail = match (class.verdict, eng.psi.is_monotone()) {
            (Convergence::Divergent, true) => "so H^s0 = infinity",
            (Convergence::Divergent, false) => "but psi is not monotone",
            _ => "so H^s0 = 0",
        };
        eng.notes.push(format!("at s0 = {}: Main series {:?}, {tail}", est.value, class.verdict));
    }
}

type Outcome = (MeasureKind, VerdictValue, Provenance);

fn lebesgue(eng: &mut Engine<'_>, mode: &Mode) -> Result<Outcome> {
    let kind = MeasureKind::Lebesgue_d;
    let homogeneous = match mode {
        Mode::Homogeneous => true,
        Mode::Inhomogeneous(shift) => {
            let zero = shift.components().iter().all(|&t| t == 0.0);
            if zero {
                eng.notes.push("shift reduces to 0: homogeneous law applies".into());
            }
            zero
        }
        _ => false,
    };
    match mode {
        Mode::Doubly => {
            let c = eng.run(SeriesKind::DoublyLebesgue, None)?;
            let prov = provenance("doubly metric Borel-Cantelli zero-one law", Monotonicity::NotRequired);
            Ok((kind, two_way(c, VerdictValue::Zero, VerdictValue::One), prov))
        }
        Mode::Multivariable(_) => {
            let c = eng.run(SeriesKind::MultiEqcon, None)?;
            match c {
                Convergence::Convergent => {
                    Ok((kind, VerdictValue::Zero, provenance("multivariable first Borel-Cantelli bound", Monotonicity::NotRequired)))
                }
                Convergence::Divergent => {
                    let mono = monotone_use(eng.psi);
                    let value = if mono == Monotonicity::RequiredSatisfied {
                        VerdictValue::Conjectural_One
                    } else {
                        eng.notes.push("the multivariable full-measure conjecture assumes a monotone psi".into());
                        VerdictValue::Undetermined
                    };
                    Ok((kind, value, provenance("multivariable full-measure conjecture (radial Psi)", mono)))
                }
                Convergence::Unknown => Ok((kind, VerdictValue::Undetermined, provenance("multivariable first Borel-Cantelli bound", Monotonicity::NotRequired))),
            }
        }
        _ if homogeneous => {
            let c = eng.run(SeriesKind::Gallagher, None)?;
            let prov = provenance("Gallagher zero-one law (homogeneous)", Monotonicity::NotRequired);
            Ok((kind, two_way(c, VerdictValue::Zero, VerdictValue::One), prov))
        }
        _ => {
            let c = eng.run(SeriesKind::Gallagher, None)?;
            match c {
                Convergence::Convergent => {
                    Ok((kind, VerdictValue::Zero, provenance("first Borel-Cantelli lemma (inhomogeneous)", Monotonicity::NotRequired)))
                }
                Convergence::Divergent => {
                    eng.notes.push("full measure in the inhomogeneous divergence case is conjectural".into());
                    Ok((kind, VerdictValue::Conjectural_One, provenance("Beresnevich-Haynes-Velani conjecture", Monotonicity::NotRequired)))
                }
                Convergence::Unknown => Ok((kind, VerdictValue::Undetermined, provenance("first Borel-Cantelli lemma (inhomogeneous)", Monotonicity::NotRequired))),
            }
        }
    }
}

fn two_way(c: Convergence, conv: VerdictValue, div: VerdictValue) -> VerdictValue {
    match c {
        Convergence::Convergent => conv,
        Convergence::Divergent => div,
        Convergence::Unknown => VerdictValue::Undetermined,
    }
}

fn hausdorff(eng: &mut Engine<'_>, f: &DimensionFunction, s_mode: bool, mode: &Mode) -> Result<Outcome> {
    let kind = match (mode, s_mode) {
        (Mode::Doubly, _) => MeasureKind::Doubly_F,
        (_, true) => MeasureKind::Hausdorff_s,
        (_, false) => MeasureKind::Hausdorff_f,
    };
    let big_d = eng.d * eng.m;
    let bd = big_d as f64;
    let s = f.s();
    let trivial = |stmt: &str| provenance(stmt, Monotonicity::NotRequired);
    if s == bd && (s_mode || f.is_pure_power()) {
        return Err(Error::OutOfRange(format!(
            "s = {s} equals the ambient dimension: the s-volume zero-infinity law would contradict the conjectured full-measure law there"
        )));
    }
    if s > bd {
        return Ok((kind, VerdictValue::OutOfRange_Zero, trivial("s exceeds the ambient dimension")));
    }
    if s < bd - 1.0 || (s == bd - 1.0 && f.is_pure_power()) {
        return Ok((kind, VerdictValue::OutOfRange_Infinite, trivial("s is at most the ambient dimension minus one")));
    }
    if !(s > bd - 1.0 && s < bd) {
        eng.notes.push("leading power on the edge of the range and log factors present".into());
        return Ok((kind, VerdictValue::Undetermined, trivial("outside the regular range")));
    }
    let grid = GeometricGrid::default();
    if let ConditionOne::Fails { x, y } = check_condition_one(f, big_d, &grid)? {
        eng.notes.push(format!("f fails the doubling-type bound between {x} and {y}"));
        return Ok((kind, VerdictValue::Undetermined, trivial("regularity conditions on f not met")));
    }
    if let ConditionTwo::Fails { .. } = check_condition_two(f, big_d, &grid)? {
        eng.notes.push(format!("x^(1-{big_d}) f(x) is not increasing"));
        return Ok((kind, VerdictValue::Undetermined, trivial("regularity conditions on f not met")));
    }

    if let Mode::Multivariable(_) = mode {
        let c = eng.run(SeriesKind::MultiPsiConv, Some(f))?;
        let mono = monotone_use(eng.psi);
        return Ok(match c {
            Convergence::Convergent => (kind, VerdictValue::Zero, trivial("multivariable f-measure convergence bound")),
            Convergence::Divergent if mono == Monotonicity::RequiredSatisfied => {
                (kind, VerdictValue::Conjectural_Infinite, provenance("multivariable f-measure divergence conjecture", mono))
            }
            Convergence::Divergent => {
                eng.notes.push("the divergence conjecture assumes a monotone psi".into());
                (kind, VerdictValue::Undetermined, provenance("multivariable f-measure divergence conjecture", mono))
            }
            Convergence::Unknown => (kind, VerdictValue::Undetermined, trivial("multivariable f-measure convergence bound")),
        });
    }

    if f.is_pure_power() && !matches!(mode, Mode::Doubly) {
        let conv = eng.run(SeriesKind::BvConv, Some(f))?;
        let div = eng.run(SeriesKind::BvDiv, Some(f))?;
        if conv == Convergence::Divergent && div == Convergence::Convergent {
            eng.notes.push("the s-volume law with the extra log factor is inconclusive here".into());
        }
    }
    let main = eng.run(SeriesKind::Main, Some(f))?;
    if !matches!(mode, Mode::Doubly) {
        eng.run(SeriesKind::Bugeaud, Some(f))?;
    }
    let statement = match mode {
        Mode::Doubly => "doubly metric F-measure zero-infinity law, F(x) = x^d f(x)",
        _ => "multiplicative f-measure zero-infinity law",
    };
    let mono = monotone_use(eng.psi);
    Ok(match main {
        Convergence::Convergent => (kind, VerdictValue::Zero, provenance(&format!("{statement}, convergence half"), Monotonicity::NotRequired)),
        Convergence::Divergent if mono == Monotonicity::RequiredSatisfied => {
            (kind, VerdictValue::Infinite, provenance(&format!("{statement}, divergence half"), mono))
        }
        Convergence::Divergent => {
            eng.notes.push("divergent sum but psi is not monotone; the divergence half does not apply".into());
            (kind, VerdictValue::Undetermined, provenance(&format!("{statement}, divergence half"), mono))
        }
        Convergence::Unknown => (kind, VerdictValue::Undetermined, provenance(statement, Monotonicity::NotRequired)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn psi(a: f64, b: f64) -> ApproximatingFunction {
        ApproximatingFunction::power_log(1.0, a, b).unwrap()
    }

    fn power(s: f64) -> DimensionFunction {
        DimensionFunction::power(s).unwrap()
    }

    fn class(kind: SeriesKind, p: &ApproximatingFunction, f: Option<&DimensionFunction>, d: u32) -> Convergence {
        classify_powerlog(&build_series_term(kind, p, f, d, 1).unwrap()).verdict
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.1, 0.0, 0.0)).verdict, Convergence::Convergent);
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.0, -1.5, 0.0)).verdict, Convergence::Convergent);
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.0, -1.0, 0.0)).verdict, Convergence::Divergent);
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.0, -1.0, -1.01)).verdict, Convergence::Convergent);
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.0, -1.0, -1.0)).verdict, Convergence::Divergent);
        assert_eq!(classify_powerlog(&PowerLogTerm::new(-1.0 + 1e-12, -2.0, 0.0)).verdict, Convergence::Convergent);
    }

    #[test]
    fn integral_test_oracle() {
        // sum_{q>=3} 1/(q ln^1.5 q) is bounded by T(3) + 2/sqrt(ln 3)
        let mut s = 0.0;
        for q in 3..2_000_000u64 {
            let l = (q as f64).ln();
            s += 1.0 / (q as f64 * l.powf(1.5));
        }
        let bound = 1.0 / (3.0 * 3f64.ln().powf(1.5)) + 2.0 / 3f64.ln().sqrt();
        assert!(s < bound);
        // sum 1/(q ln q) - ln ln Q stays flat
        let mut s = 0.0;
        let mut offsets = Vec::new();
        for q in 3..=1_000_000u64 {
            let l = (q as f64).ln();
            s += 1.0 / (q as f64 * l);
            if [1_000u64, 10_000, 100_000, 1_000_000].contains(&q) {
                offsets.push(s - l.ln());
            }
        }
        assert!(offsets.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-3), "{offsets:?}");
    }

    /// `ln T(q) - ln T_sym(q)` must approach a constant as `q` grows.
    fn assert_matches_definition(kind: SeriesKind, p: &ApproximatingFunction, f: Option<&DimensionFunction>, d: u32, m: u32) {
        let term = build_series_term(kind, p, f, d, m).unwrap();
        let gap = |q: f64| series_term_value(kind, p, f, d, m, q as u64).unwrap().ln() - term.ln_value(q.ln());
        let drift = gap(1e18) - gap(1e12);
        assert!(drift.abs() < 0.05, "{kind:?}: drift {drift}");
    }

    #[test]
    fn series_terms_match_definitions() {
        let f = DimensionFunction::new(1.6, 1.0, -0.5).unwrap();
        let g = DimensionFunction::new(3.5, -2.0, 0.0).unwrap();
        for p in [psi(2.0, 0.0), psi(1.5, 1.0), psi(3.0, -1.0)] {
            assert_matches_definition(SeriesKind::Gallagher, &p, None, 3, 1);
            assert_matches_definition(SeriesKind::BvConv, &p, Some(&power(2.4)), 3, 1);
            assert_matches_definition(SeriesKind::BvDiv, &p, Some(&power(2.4)), 3, 1);
            assert_matches_definition(SeriesKind::Main, &p, Some(&f), 2, 1);
            assert_matches_definition(SeriesKind::Bugeaud, &p, Some(&f), 2, 1);
            assert_matches_definition(SeriesKind::MultiEqcon, &p, None, 2, 2);
            assert_matches_definition(SeriesKind::MultiPsiConv, &p, Some(&g), 2, 2);
        }
    }

    #[test]
    fn build_examples() {
        let t = build_series_term(SeriesKind::Main, &psi(2.0, 0.0), Some(&power(1.6)), 2, 1).unwrap();
        assert!((t.e + 0.8).abs() < 1e-12 && t.h == 0.0);
        assert_eq!(classify_powerlog(&t).verdict, Convergence::Divergent);
        let t = build_series_term(SeriesKind::Gallagher, &psi(1.0, 3.0), None, 3, 1).unwrap();
        assert_eq!((t.e, t.h), (-1.0, -1.0));
        assert_eq!(classify_powerlog(&t).verdict, Convergence::Divergent);
        let t = build_series_term(SeriesKind::Bugeaud, &psi(2.0, 0.0), Some(&power(1.5)), 2, 1).unwrap();
        assert!((t.e + 0.5).abs() < 1e-12);
        assert_eq!(classify_powerlog(&t).verdict, Convergence::Divergent);
    }

    #[test]
    fn gap_family_resolution() {
        for alpha in [1.2, 1.5, 2.0] {
            let p = ApproximatingFunction::gap_family(3, 2.5, alpha).unwrap();
            let f = power(2.5);
            let conv = build_series_term(SeriesKind::BvConv, &p, Some(&f), 3, 1).unwrap();
            let div = build_series_term(SeriesKind::BvDiv, &p, Some(&f), 3, 1).unwrap();
            let main = build_series_term(SeriesKind::Main, &p, Some(&f), 3, 1).unwrap();
            assert!((conv.h - (1.0 - alpha)).abs() < 1e-12 && (div.h + alpha).abs() < 1e-12);
            assert_eq!(classify_powerlog(&conv).verdict, Convergence::Divergent);
            assert_eq!(classify_powerlog(&div).verdict, Convergence::Convergent);
            assert_eq!(classify_powerlog(&main).verdict, Convergence::Convergent);
            let v = verdict(&p, &Gauge::Power(2.5), 3, &Mode::Inhomogeneous(InhomogeneousShift::new(&[0.3, 0.4, 0.5]).unwrap())).unwrap();
            assert_eq!(v.value, VerdictValue::Zero);
            assert!(v.notes.iter().any(|n| n.contains("inconclusive")));
        }
    }

    #[test]
    fn lebesgue_verdicts() {
        let v = verdict(&psi(1.0, 0.0), &Gauge::Lebesgue, 2, &Mode::Homogeneous).unwrap();
        assert_eq!((v.measure_kind, v.value), (MeasureKind::Lebesgue_d, VerdictValue::One));
        let theta = InhomogeneousShift::new(&[0.3, 0.4]).unwrap();
        let v = verdict(&psi(1.0, 0.0), &Gauge::Lebesgue, 2, &Mode::Inhomogeneous(theta.clone())).unwrap();
        assert_eq!(v.value, VerdictValue::Conjectural_One);
        let v = verdict(&psi(1.0, 2.5), &Gauge::Lebesgue, 2, &Mode::Inhomogeneous(theta)).unwrap();
        assert_eq!(v.value, VerdictValue::Zero);
        let v = verdict(&psi(1.0, 0.5), &Gauge::Lebesgue, 2, &Mode::Doubly).unwrap();
        assert_eq!(v.value, VerdictValue::One);
        let v = verdict(&psi(1.0, 0.0), &Gauge::Lebesgue, 2, &Mode::Multivariable(2)).unwrap();
        // 2^2 * 2 Q psi^2 log Q = Q^-1 log Q
        assert_eq!(v.value, VerdictValue::Conjectural_One);
        assert_eq!(v.dim_h, None);
    }

    #[test]
    fn transition_at_five_thirds() {
        let p = psi(2.0, 0.0);
        let v = verdict(&p, &Gauge::Power(1.7), 2, &Mode::Homogeneous).unwrap();
        assert_eq!((v.measure_kind, v.value), (MeasureKind::Hausdorff_s, VerdictValue::Zero));
        assert_eq!(v.dim_h, Some(5.0 / 3.0));
        assert!(v.notes.iter().any(|n| n.contains("H^s0 = infinity")));
        let v = verdict(&p, &Gauge::Power(1.6), 2, &Mode::Homogeneous).unwrap();
        assert_eq!(v.value, VerdictValue::Infinite);
        assert_eq!(v.provenance.monotonicity, Monotonicity::RequiredSatisfied);
    }

    #[test]
    fn out_of_range_gauges() {
        let p = psi(2.0, 0.0);
        assert_eq!(verdict(&p, &Gauge::Power(0.9), 2, &Mode::Homogeneous).unwrap().value, VerdictValue::OutOfRange_Infinite);
        assert_eq!(verdict(&p, &Gauge::Power(1.0), 2, &Mode::Homogeneous).unwrap().value, VerdictValue::OutOfRange_Infinite);
        assert_eq!(verdict(&p, &Gauge::Power(2.5), 2, &Mode::Homogeneous).unwrap().value, VerdictValue::OutOfRange_Zero);
        assert!(matches!(verdict(&p, &Gauge::Power(2.0), 2, &Mode::Homogeneous), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn non_monotone_divergence_is_undetermined() {
        let raw = ApproximatingFunction::raw(Arc::new(|q| Some(1.0 / (q as f64).powi(2))), false);
        let v = verdict(&raw, &Gauge::Power(1.6), 2, &Mode::Homogeneous).unwrap();
        assert_eq!(v.value, VerdictValue::Undetermined);
        assert_eq!(v.provenance.monotonicity, Monotonicity::RequiredViolated);
        assert!(v.series.iter().all(|s| s.mode == ClassificationMode::Heuristic));
        let raw = ApproximatingFunction::raw(Arc::new(|q| Some(1.0 / (q as f64).powi(2))), true);
        assert_eq!(verdict(&raw, &Gauge::Power(1.6), 2, &Mode::Homogeneous).unwrap().value, VerdictValue::Infinite);
        assert_eq!(verdict(&raw, &Gauge::Power(1.7), 2, &Mode::Homogeneous).unwrap().value, VerdictValue::Zero);
    }

    #[test]
    fn condition_failure_is_undetermined() {
        let f = DimensionFunction::new(1.5, 3.0, 0.0).unwrap();
        let v = verdict(&psi(2.0, 0.0), &Gauge::Function(f), 2, &Mode::Homogeneous).unwrap();
        assert_eq!(v.value, VerdictValue::Undetermined);
    }

    #[test]
    fn doubly_hausdorff() {
        let v = verdict(&psi(3.0, 0.0), &Gauge::Power(1.6), 2, &Mode::Doubly).unwrap();
        assert_eq!(v.measure_kind, MeasureKind::Doubly_F);
        assert_eq!(v.dim_h, Some(3.5));
        // Main: e = 1 - 4 * 0.6 = -1.4
        assert_eq!(v.value, VerdictValue::Zero);
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(hausdorff_dimension(&psi(2.0, 0.0), 2, DimensionMode::Single).unwrap().value, 5.0 / 3.0);
        assert_eq!(hausdorff_dimension(&psi(1.0, 0.0), 2, DimensionMode::Single).unwrap().value, 2.0);
        assert_eq!(hausdorff_dimension(&psi(3.0, 0.0), 2, DimensionMode::Double).unwrap().value, 3.5);
        assert!((dimension_from_tau(1e12, 2, DimensionMode::Double) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn transition_matrix() {
        for tau in [1.5, 2.0, 3.0] {
            for d in [2u32, 3] {
                let s0 = dimension_from_tau(tau, d, DimensionMode::Single);
                let p = psi(tau, 0.0);
                assert_eq!(class(SeriesKind::Main, &p, Some(&power(s0 - 0.01)), d), Convergence::Divergent);
                assert_eq!(class(SeriesKind::Main, &p, Some(&power(s0 + 0.01)), d), Convergence::Convergent);
            }
        }
    }

    #[test]
    fn numeric_classifier_reads_partial_sums() {
        let c = classify_powerlog_numeric(&PowerLogTerm::new(-1.2, 3.0, 0.0));
        assert_eq!(c.verdict, Convergence::Convergent);
        let c = classify_powerlog_numeric(&PowerLogTerm::new(-0.95, -4.0, 1.0));
        assert_eq!(c.verdict, Convergence::Divergent);
    }

    proptest! {
        #[test]
        fn scale_never_changes_classification(c in 1e-3f64..1e3, a in 0.0f64..4.0, b in -3.0f64..3.0, s in 1.01f64..1.99) {
            let base = psi(a, b);
            let scaled = ApproximatingFunction::power_log(c, a, b).unwrap();
            let f = power(s);
            for kind in [SeriesKind::Gallagher, SeriesKind::BvConv, SeriesKind::BvDiv, SeriesKind::Main, SeriesKind::Bugeaud] {
                prop_assert_eq!(class(kind, &base, Some(&f), 2), class(kind, &scaled, Some(&f), 2));
            }
        }

        #[test]
        fn dominance(d in 2u32..6, frac in 0.01f64..0.99, a in 0.0f64..5.0, b in -4.0f64..4.0) {
            let s = d as f64 - 1.0 + frac;
            let p = psi(a, b);
            let f = power(s);
            if class(SeriesKind::BvConv, &p, Some(&f), d) == Convergence::Convergent {
                prop_assert_eq!(class(SeriesKind::Main, &p, Some(&f), d), Convergence::Convergent);
            }
            if class(SeriesKind::Main, &p, Some(&f), d) == Convergence::Divergent {
                prop_assert_eq!(class(SeriesKind::BvDiv, &p, Some(&f), d), Convergence::Divergent);
            }
        }

        #[test]
        fn exact_and_numeric_agree(e in -3.0f64..1.0, h in -4.0f64..4.0, h2 in -2.0f64..2.0) {
            prop_assume!((e + 1.0).abs() >= 0.05);
            let t = PowerLogTerm::new(e, h, h2);
            prop_assert_eq!(classify_powerlog(&t).verdict, classify_powerlog_numeric(&t).verdict);
        }
    }
}
