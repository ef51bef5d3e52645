//! Truncated `f`-dimensional cost of the fine cover of the set of
//! multiplicatively `psi`-approximable points, built from translated and
//! scaled hyperbola covers, plus the doubly metric analogue where the shift
//! varies with the point.
//!
//! A ledger never claims convergence. It records partial sums, the comparison
//! series `sum q^d psi^(1-d) f(psi/q)` and a trend flag.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{
    check_condition_one, check_condition_two, ApproximatingFunction, ConditionTwo, DimensionFunction, GeometricGrid,
};
use crate::hyperbola_cover::{cover_cost, cover_groups, HyperbolaRegion, SideCost};
use crate::numerics::{least_squares_slope, DoubleDouble};

/// Inhomogeneous parameter reduced into `[0, 1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InhomogeneousShift {
    theta: Vec<f64>,
}

impl InhomogeneousShift {
    pub fn new(theta: &[f64]) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("shift must be finite".into()));
        }
        let theta = theta
            .iter()
            .map(|&t| {
                let r = t - t.floor();
                if r >= 1.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        Ok(InhomogeneousShift { theta })
    }

    pub fn zero(d: u32) -> Self {
        InhomogeneousShift { theta: vec![0.0; d as usize] }
    }

    pub fn components(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// The translates `p + theta` with `-1 <= p_i + theta_i < q + 1` that are
/// needed at level `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantCellFamily {
    pub q: u64,
    pub per_axis: Vec<u64>,
}

impl ResonantCellFamily {
    pub fn new(q: u64, shift: &InhomogeneousShift) -> Self {
        let qf = q as f64;
        let per_axis = shift
            .components()
            .iter()
            .map(|&t| ((qf + 1.0 - t).ceil() - (-1.0 - t).ceil()) as u64)
            .collect();
        ResonantCellFamily { q, per_axis }
    }

    /// `|Z_q|`, the exact product of the per-axis counts.
    pub fn p_count(&self) -> u128 {
        self.per_axis.iter().map(|&c| c as u128).product()
    }

    /// `(q + 2)^d`.
    pub fn nominal_count(&self) -> u128 {
        (self.q as u128 + 2).pow(self.per_axis.len() as u32)
    }

    pub fn scale(&self) -> f64 {
        1.0 / self.q as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    ConvergentTrend,
    DivergentTrend,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub q: u64,
    /// Dyadic exponent of the hyperbola cover used at this `q`.
    pub n: u32,
    /// `psi(q) > 2^-d`: the whole-cube cover was used.
    pub degenerate: bool,
    pub term: f64,
    pub running_total: f64,
    pub comparison_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostLedger {
    pub mode: CoverMode,
    pub d: u32,
    pub q_max: u64,
    pub rows: Vec<LedgerRow>,
    #[serde(skip)]
    pub total: DoubleDouble,
    #[serde(skip)]
    pub comparison_total: DoubleDouble,
    /// Smallest and largest `term / comparison_term`; the ratio of totals
    /// always lies between them.
    pub k_lower: f64,
    pub k_upper: f64,
    pub trend: Trend,
    pub degenerate_qs: Vec<u64>,
    /// `(q, |Z_q|)` wherever the exact count differs from `(q + 2)^d`.
    pub cell_count_discrepancies: Vec<(u64, u128)>,
    /// Range of `ceil(1/delta)^d delta^d` over every grid cell (doubly metric only).
    pub collapse_range: Option<(f64, f64)>,
}

impl CostLedger {
    pub fn total_value(&self) -> f64 {
        self.total.value()
    }

    pub fn comparison_value(&self) -> f64 {
        self.comparison_total.value()
    }

    pub fn ratio(&self) -> f64 {
        self.total_value() / self.comparison_value()
    }
}

/// `q^d psi(q)^(1-d) f(psi(q)/q)`.
pub fn comparison_term(q: u64, psi_q: f64, f: &DimensionFunction, d: u32) -> f64 {
    let qf = q as f64;
    qf.powi(d as i32) * psi_q.powi(1 - d as i32) * f.evaluate(psi_q / qf)
}

fn check_regular(f: &DimensionFunction, d: u32) -> Result<()> {
    let grid = GeometricGrid::default();
    check_condition_one(f, d, &grid)?;
    if let ConditionTwo::Fails { witness, .. } = check_condition_two(f, d, &grid)? {
        return Err(Error::Domain(format!(
            "x^(1-d) f(x) is not increasing for d = {d} (first violation at {witness:?})"
        )));
    }
    Ok(())
}

/// Hyperbola region used for `psi(q)`; the flag marks the whole-cube fallback.
fn region_for(d: u32, psi_q: f64) -> Result<(HyperbolaRegion, bool)> {
    if psi_q > (-(d as f64)).exp2() {
        Ok((HyperbolaRegion::dyadic(d, d)?, true))
    } else {
        Ok((HyperbolaRegion::from_radius(d, psi_q)?, false))
    }
}

struct Term {
    q: u64,
    n: u32,
    degenerate: bool,
    cells: u128,
    term: f64,
    comparison: f64,
    collapse: Option<(f64, f64)>,
}

fn assemble(mode: CoverMode, d: u32, q_max: u64, terms: Vec<Term>) -> CostLedger {
    let mut rows = Vec::with_capacity(terms.len());
    let mut total = DoubleDouble::ZERO;
    let mut comparison_total = DoubleDouble::ZERO;
    let (mut k_lower, mut k_upper) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut degenerate_qs = Vec::new();
    let mut discrepancies = Vec::new();
    let mut collapse_range: Option<(f64, f64)> = None;
    for t in terms {
        total += t.term;
        comparison_total += t.comparison;
        let r = t.term / t.comparison;
        k_lower = k_lower.min(r);
        k_upper = k_upper.max(r);
        if t.degenerate {
            degenerate_qs.push(t.q);
        }
        if t.cells != (t.q as u128 + 2).pow(d) {
            discrepancies.push((t.q, t.cells));
        }
        if let Some((lo, hi)) = t.collapse {
            collapse_range = Some(match collapse_range {
                Some((a, b)) => (a.min(lo), b.max(hi)),
                None => (lo, hi),
            });
        }
        rows.push(LedgerRow {
            q: t.q,
            n: t.n,
            degenerate: t.degenerate,
            term: t.term,
            running_total: total.value(),
            comparison_term: t.comparison,
        });
    }
    let trend = trend_of(&rows);
    CostLedger {
        mode,
        d,
        q_max,
        rows,
        total,
        comparison_total,
        k_lower,
        k_upper,
        trend,
        degenerate_qs,
        cell_count_discrepancies: discrepancies,
        collapse_range,
    }
}

/// Log-log slope of the terms over the last three quarters of the window.
fn trend_of(rows: &[LedgerRow]) -> Trend {
    let tail: Vec<&LedgerRow> = rows.iter().filter(|r| r.q * 4 >= rows.len() as u64 && r.term > 0.0).collect();
    if tail.len() < 8 {
        return Trend::Undetermined;
    }
    let xs: Vec<f64> = tail.iter().map(|r| (r.q as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.term.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    if slope < -1.05 {
        Trend::ConvergentTrend
    } else if slope > -0.95 {
        Trend::DivergentTrend
    } else {
        Trend::Undetermined
    }
}

/// Partial cost `sum_{q <= Q} |Z_q| * cost(cover of M(psi(q)) scaled by 1/q)`.
pub fn finecover_cost_truncated(
    psi: &ApproximatingFunction,
    f: &DimensionFunction,
    d: u32,
    shift: &InhomogeneousShift,
    q_max: u64,
) -> Result<CostLedger> {
    if q_max < 2 {
        return Err(Error::Domain(format!("truncation Q must be >= 2, got {q_max}")));
    }
    if shift.dim() != d as usize {
        return Err(Error::Domain(format!("shift has {} components, d = {d}", shift.dim())));
    }
    check_regular(f, d)?;
    let terms = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let psi_q = psi.evaluate(q)?;
            let (region, degenerate) = region_for(d, psi_q)?;
            let cells = ResonantCellFamily::new(q, shift).p_count();
            let cover = cover_cost(region.n(), d, &SideCost::Scaled { f, shrink: q as f64 })?;
            Ok(Term {
                q,
                n: region.n(),
                degenerate,
                cells,
                term: cells as f64 * cover.value(),
                comparison: comparison_term(q, psi_q, f, d),
                collapse: None,
            })
        })
        .collect::<Result<Vec<Term>>>()?;
    Ok(assemble(CoverMode::Single, d, q_max, terms))
}

/// Doubly metric partial cost with `F(x) = x^d f(x)`: every scaled cube of
/// side `t/q` is paired with a grid of `(q 2^k_max)^d` shift cells of the
/// same side, and the product set has max-norm diameter `(t/q)(1 + 1/q)`.
pub fn doubly_metric_cost_truncated(
    psi: &ApproximatingFunction,
    f: &DimensionFunction,
    d: u32,
    q_max: u64,
) -> Result<CostLedger> {
    if q_max < 2 {
        return Err(Error::Domain(format!("truncation Q must be >= 2, got {q_max}")));
    }
    check_regular(f, d)?;
    let shift = InhomogeneousShift::zero(d);
    let dd = d as i32;
    let terms = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let psi_q = psi.evaluate(q)?;
            let (region, degenerate) = region_for(d, psi_q)?;
            let cells = ResonantCellFamily::new(q, &shift).p_count();
            let qf = q as f64;
            let mut acc = DoubleDouble::ZERO;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for g in cover_groups(region.n(), d)? {
                // grid cell side delta0 = 2^-k_max / q, so 1/delta0 = q 2^k_max exactly
                let inv_delta0 = qf * (g.k_max as f64).exp2();
                let per_axis = inv_delta0.ceil();
                let grid = per_axis.powi(dd);
                let delta0 = g.side / qf;
                let diameter = (delta0 * (1.0 + 1.0 / qf)).max(delta0);
                let big_f = diameter.powi(dd) * f.evaluate(diameter);
                acc += g.cubes_f64() * grid * big_f;
                let collapse = (per_axis / inv_delta0).powi(dd);
                lo = lo.min(collapse);
                hi = hi.max(collapse);
            }
            Ok(Term {
                q,
                n: region.n(),
                degenerate,
                cells,
                term: cells as f64 * acc.value(),
                comparison: comparison_term(q, psi_q, f, d),
                collapse: Some((lo, hi)),
            })
        })
        .collect::<Result<Vec<Term>>>()?;
    Ok(assemble(CoverMode::Double, d, q_max, terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Doubling {
    /// `max(f(2r)/f(r), f(r)/f(2r)) <= ratio_bound` on every sample.
    Holds { ratio_bound: f64 },
    Fails { witness: f64 },
}

/// `f(2r) ≍ f(r)` on a geometric sample of `r <= x0`.
pub fn f_doubling_check(f: &DimensionFunction) -> Doubling {
    let base = 2f64.powf(f.s());
    let grid = GeometricGrid::default();
    let mut bound: f64 = 0.0;
    for r in grid.points().into_iter().filter(|&r| r <= f.cutoff()) {
        let up = base * (f.log_factor(2.0 * r) / f.log_factor(r));
        if !up.is_finite() || up <= 0.0 {
            return Doubling::Fails { witness: r };
        }
        bound = bound.max(up.max(1.0 / up));
    }
    Doubling::Holds { ratio_bound: bound }
}
