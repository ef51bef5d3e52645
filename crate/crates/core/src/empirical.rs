//! Desk-scale probes of the truncated set
//! `{x in I^d : prod ||q x_i - theta_i|| < psi(q) for some Q1 <= q <= Q2}`:
//! hit counting for explicit points, Monte Carlo Lebesgue estimates and
//! analytic box counting. Every output is a truncated proxy for the lim-sup
//! set, never the set itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::ApproximatingFunction;
use crate::numerics::{least_squares_slope, wilson_interval, DoubleDouble, Z_95};

pub const TRUNCATED_PROXY: &str = "truncated proxy";

/// Samples drawn from one RNG stream.
const BATCH: u64 = 4096;

/// Default memory budget for box counting.
pub const DEFAULT_BOX_BUDGET: u64 = 1 << 30;

/// `||q x - theta||` with `q x` carried in double-double.
fn distance(q: u64, x: f64, theta: f64) -> f64 {
    let v = DoubleDouble::from_f64(x).mul_f64(q as f64) + (-theta);
    let n = v.hi.round_ties_even();
    ((v.hi - n) + v.lo).abs()
}

/// `prod_i ||q x_i - theta_i||` in double-double.
fn product(q: u64, x: &[f64], theta: &[f64]) -> DoubleDouble {
    let mut acc = DoubleDouble::from_f64(1.0);
    for (&xi, &ti) in x.iter().zip(theta) {
        acc = acc.mul_f64(distance(q, xi, ti));
    }
    acc
}

fn reduce(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v - v.floor()).collect()
}

fn check_point(x: &[f64], theta: &[f64]) -> Result<()> {
    if x.is_empty() || x.len() != theta.len() {
        return Err(Error::Domain(format!("x has {} components, theta has {}", x.len(), theta.len())));
    }
    if x.iter().chain(theta).any(|v| !v.is_finite()) {
        return Err(Error::Domain("coordinates must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRecord {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub q_max: u64,
    pub hits: Vec<u64>,
    /// Product value at each hit.
    pub products: Vec<f64>,
}

/// Every `q <= Q` with `prod ||q x_i - theta_i|| < psi(q)`.
pub fn count_hits(x: &[f64], theta: &[f64], psi: &ApproximatingFunction, q_max: u64) -> Result<HitRecord> {
    check_point(x, theta)?;
    if q_max < 1 {
        return Err(Error::Domain("Q must be >= 1".into()));
    }
    // integer translates give the same distances
    let xr = reduce(x);
    let mut hits = Vec::new();
    let mut products = Vec::new();
    for q in 1..=q_max {
        let p = product(q, &xr, theta);
        if p.lt_f64(psi.evaluate(q)?) {
            hits.push(q);
            products.push(p.value());
        }
    }
    Ok(HitRecord { x: x.to_vec(), theta: theta.to_vec(), q_max, hits, products })
}

fn window_values(psi: &ApproximatingFunction, q1: u64, q2: u64) -> Result<Vec<(u64, f64)>> {
    if q1 < 1 || q1 > q2 {
        return Err(Error::Domain(format!("window [{q1}, {q2}] must satisfy 1 <= Q1 <= Q2")));
    }
    (q1..=q2).map(|q| Ok((q, psi.evaluate(q)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub samples: u64,
    pub seed: u64,
    pub window: (u64, u64),
    pub label: &'static str,
}

/// Monte Carlo fraction of `I^d` in the union over the window, with a Wilson
/// 95% interval. Batch `b` draws from ChaCha8 stream `b` of `seed`.
pub fn lebesgue_tail_estimate(
    psi: &ApproximatingFunction,
    theta: &[f64],
    d: u32,
    q1: u64,
    q2: u64,
    samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if theta.len() != d as usize || d == 0 {
        return Err(Error::Domain(format!("theta has {} components, d = {d}", theta.len())));
    }
    if samples < 10_000 {
        return Err(Error::Domain(format!("need at least 10^4 samples, got {samples}")));
    }
    let window = window_values(psi, q1, q2)?;
    let batches = samples.div_ceil(BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = BATCH.min(samples - b * BATCH);
            let mut x = vec![0.0; d as usize];
            let mut hits = 0u64;
            for _ in 0..n {
                x.iter_mut().for_each(|v| *v = rng.random::<f64>());
                if window.iter().any(|&(q, p)| product(q, &x, theta).lt_f64(p)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(hits, samples, Z_95);
    Ok(TailEstimate {
        estimate: hits as f64 / samples as f64,
        ci_low,
        ci_high,
        hits,
        samples,
        seed,
        window: (q1, q2),
        label: TRUNCATED_PROXY,
    })
}

/// Area of `{x in I^2 : ||q x_1|| ||q x_2|| < delta}`, which does not depend
/// on `q` or on the shift: `4 delta (1 - ln(4 delta))` for `delta <= 1/4`.
pub fn single_q_area_2d(delta: f64) -> f64 {
    if delta >= 0.25 {
        1.0
    } else if delta <= 0.0 {
        0.0
    } else {
        4.0 * delta * (1.0 - (4.0 * delta).ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCountResult {
    pub js: Vec<u32>,
    pub resolutions: Vec<f64>,
    pub counts: Vec<u64>,
    pub fitted_dimension: f64,
    pub window: (u64, u64),
    pub label: &'static str,
}

/// `min ||q y - theta||` over `y` in `[c/n, (c+1)/n]`, for every cell `c`.
fn axis_minima(q: u64, theta: f64, n: u64) -> Vec<f64> {
    let step = 1.0 / n as f64;
    (0..n)
        .map(|c| {
            let lo = q as f64 * (c as f64 * step) - theta;
            let hi = q as f64 * ((c + 1) as f64 * step) - theta;
            if hi.floor() >= lo.ceil() {
                0.0
            } else {
                let dl = (lo - lo.round()).abs();
                let dh = (hi - hi.round()).abs();
                dl.min(dh)
            }
        })
        .collect()
}

/// Per-axis minima for one `q`, with the non-first axes also sorted.
struct AxisTable {
    psi: f64,
    first: Vec<f64>,
    sorted: Vec<Vec<(f64, u32)>>,
    raw: Vec<Vec<f64>>,
}

fn axis_tables(window: &[(u64, f64)], theta: &[f64], n: u64) -> Vec<AxisTable> {
    window
        .par_iter()
        .map(|&(q, p)| {
            let first = axis_minima(q, theta[0], n);
            let raw: Vec<Vec<f64>> = theta[1..].iter().map(|&t| axis_minima(q, t, n)).collect();
            let sorted = raw
                .iter()
                .map(|m| {
                    let mut v: Vec<(f64, u32)> = m.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
                    v.sort_by(|a, b| a.0.total_cmp(&b.0));
                    v
                })
                .collect();
            AxisTable { psi: p, first, sorted, raw }
        })
        .collect()
}

/// Occupied boxes in the slab `c1` of the first axis.
fn count_slab(tables: &[AxisTable], c1: usize, n: usize, d: usize) -> u64 {
    let cells = n.pow(d as u32 - 1);
    let mut marked = vec![false; cells];
    for t in tables {
        let m1 = t.first[c1];
        if m1 == 0.0 {
            return cells as u64;
        }
        let bound = t.psi / m1;
        match d {
            2 => {
                for &(m2, c2) in t.sorted[0].iter().take_while(|(m, _)| *m < bound) {
                    if m1 * m2 < t.psi {
                        marked[c2 as usize] = true;
                    }
                }
            }
            _ => {
                for (c2, &m2) in t.raw[0].iter().enumerate() {
                    if m2 == 0.0 {
                        marked[c2 * n..(c2 + 1) * n].iter_mut().for_each(|b| *b = true);
                        continue;
                    }
                    let bound3 = bound / m2;
                    for &(m3, c3) in t.sorted[1].iter().take_while(|(m, _)| *m < bound3) {
                        if m1 * m2 * m3 < t.psi {
                            marked[c2 * n + c3 as usize] = true;
                        }
                    }
                }
            }
        }
    }
    marked.iter().filter(|&&b| b).count() as u64
}

/// Bytes needed at resolution `2^-j`: the per-`q` axis tables plus one slab
/// marker per worker.
pub fn box_count_memory(d: u32, j: u32, window_len: u64, workers: u64) -> Option<u64> {
    let n = 1u64.checked_shl(j)?;
    let tables = window_len.checked_mul(n)?.checked_mul(8 + (d as u64 - 1) * 20)?;
    let slab = n.checked_pow(d - 1)?.checked_mul(workers)?;
    tables.checked_add(slab)
}

/// Box counts of the union over the window at resolutions `2^-j`,
/// `j_min <= j <= j_max`, each box decided analytically.
pub fn box_dimension_estimate(
    psi: &ApproximatingFunction,
    theta: &[f64],
    d: u32,
    q1: u64,
    q2: u64,
    j_min: u32,
    j_max: u32,
    budget: u64,
) -> Result<BoxCountResult> {
    if !(d == 2 || d == 3) {
        return Err(Error::Domain(format!("box counting supports d = 2 or 3, got {d}")));
    }
    if theta.len() != d as usize {
        return Err(Error::Domain(format!("theta has {} components, d = {d}", theta.len())));
    }
    if j_min > j_max || j_max > 24 {
        return Err(Error::Domain(format!("resolution range {j_min}..={j_max} must be ordered with j_max <= 24")));
    }
    let window = window_values(psi, q1, q2)?;
    let workers = rayon::current_num_threads() as u64;
    let required = box_count_memory(d, j_max, window.len() as u64, workers).unwrap_or(u64::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut js = Vec::new();
    let mut counts = Vec::new();
    for j in j_min..=j_max {
        let n = 1usize << j;
        let tables = axis_tables(&window, theta, n as u64);
        let count: u64 = (0..n).into_par_iter().map(|c1| count_slab(&tables, c1, n, d as usize)).sum();
        js.push(j);
        counts.push(count);
    }
    let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).log2()).collect();
    let fitted_dimension = if js.len() >= 2 { least_squares_slope(&xs, &ys) } else { f64::NAN };
    Ok(BoxCountResult {
        resolutions: js.iter().map(|&j| (-(j as f64)).exp2()).collect(),
        js,
        counts,
        fitted_dimension,
        window: (q1, q2),
        label: TRUNCATED_PROXY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn psi(a: f64) -> ApproximatingFunction {
        ApproximatingFunction::power(a).unwrap()
    }

    #[test]
    fn rational_point_hits_even_q() {
        let r = count_hits(&[0.5, 0.5], &[0.0, 0.0], &psi(5.0), 10).unwrap();
        assert_eq!(r.hits, vec![2, 4, 6, 8, 10]);
        assert!(r.products.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn shifted_rational_point_table() {
        // exact table in units of 1/4: q x = 2q/4, q x - theta = (2q - 1)/4
        let mut want = Vec::new();
        for q in 1..=8u64 {
            let dist4 = |num: i64| {
                let r = num.rem_euclid(4);
                r.min(4 - r)
            };
            let prod16 = dist4(2 * q as i64 - 1) * dist4(2 * q as i64);
            // prod16 / 16 < psi(q) = 1/max(q, 2)
            if prod16 * (q.max(2) as i64) < 16 {
                want.push(q);
            }
        }
        let r = count_hits(&[0.5, 0.5], &[0.25, 0.0], &psi(1.0), 8).unwrap();
        assert_eq!(r.hits, want);
        assert_eq!(want, (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn constructed_zero_forces_hit() {
        let x = [0.3, 0.7];
        let q0 = 7u64;
        let theta: Vec<f64> = x.iter().map(|&v| (v * q0 as f64).rem_euclid(1.0)).collect();
        let r = count_hits(&x, &theta, &psi(30.0), 10).unwrap();
        assert!(r.hits.contains(&q0));
    }

    #[test]
    fn constant_psi_fills_the_cube() {
        let one = ApproximatingFunction::constant(1.0).unwrap();
        let t = lebesgue_tail_estimate(&one, &[0.0, 0.0], 2, 3, 5, 10_000, 1).unwrap();
        assert_eq!(t.estimate, 1.0);
        let b = box_dimension_estimate(&one, &[0.0, 0.0], 2, 3, 5, 2, 6, DEFAULT_BOX_BUDGET).unwrap();
        assert_eq!(b.counts, vec![16, 64, 256, 1024, 4096]);
        assert_eq!(b.fitted_dimension, 2.0);
    }

    #[test]
    fn single_q_estimate_matches_quadrature() {
        let p = psi(1.0);
        for q in [10u64, 37] {
            let t = lebesgue_tail_estimate(&p, &[0.0, 0.0], 2, q, q, 100_000, 9).unwrap();
            let area = single_q_area_2d(1.0 / q as f64);
            assert!(t.ci_low <= area && area <= t.ci_high, "{q}: {t:?} vs {area}");
            let t = lebesgue_tail_estimate(&p, &[0.3, 0.8], 2, q, q, 100_000, 9).unwrap();
            assert!(t.ci_low <= area && area <= t.ci_high, "{q}: {t:?} vs {area}");
        }
    }

    #[test]
    fn area_formula_by_quadrature() {
        // midpoint rule over u in [0, 1/2] of min(1/2, delta/u), times 4
        for delta in [1e-3, 0.01, 0.2] {
            let n = 2_000_000;
            let h = 0.5 / n as f64;
            let s: f64 = (0..n).map(|i| (delta / ((i as f64 + 0.5) * h)).min(0.5) * h).sum();
            assert!((4.0 * s / single_q_area_2d(delta) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn tail_respects_union_bound() {
        let p = psi(3.0);
        let t = lebesgue_tail_estimate(&p, &[0.0, 0.0], 2, 10, 20, 100_000, 42).unwrap();
        let bound: f64 = (10..=20u64).map(|q| single_q_area_2d(p.evaluate(q).unwrap())).sum();
        assert!(t.ci_low <= bound);
        assert!(t.estimate > 0.0);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let p = psi(2.0);
        let a = lebesgue_tail_estimate(&p, &[0.1, 0.2], 2, 5, 40, 50_000, 7).unwrap();
        let b = lebesgue_tail_estimate(&p, &[0.1, 0.2], 2, 5, 40, 50_000, 7).unwrap();
        assert_eq!(a, b);
        let c = lebesgue_tail_estimate(&p, &[0.1, 0.2], 2, 5, 40, 50_000, 8).unwrap();
        assert_ne!(a.hits, c.hits);
    }

    #[test]
    fn box_counts_nest() {
        let b = box_dimension_estimate(&psi(2.0), &[0.0, 0.0], 2, 16, 32, 2, 9, DEFAULT_BOX_BUDGET).unwrap();
        for w in b.counts.windows(2) {
            assert!(w[0] <= w[1] && w[1] <= 4 * w[0]);
        }
        assert!((0.0..=2.0).contains(&b.fitted_dimension));
    }

    #[test]
    fn box_counts_match_brute_force() {
        // independent check: sample a fine lattice inside every box and the
        // exact interval minimum from a dense scan
        let p = psi(2.0);
        let (q1, q2, j) = (5u64, 9u64, 5u32);
        let b = box_dimension_estimate(&p, &[0.1, 0.0], 2, q1, q2, j, j, DEFAULT_BOX_BUDGET).unwrap();
        let n = 1u64 << j;
        let scan = |q: u64, c: u64, theta: f64| {
            (0..=256u64)
                .map(|k| {
                    let y = (c as f64 + k as f64 / 256.0) / n as f64;
                    let v = q as f64 * y - theta;
                    (v - v.round()).abs()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut count = 0;
        for c1 in 0..n {
            for c2 in 0..n {
                let hit = (q1..=q2).any(|q| scan(q, c1, 0.1) * scan(q, c2, 0.0) < p.evaluate(q).unwrap());
                count += hit as u64;
            }
        }
        assert_eq!(b.counts[0], count);
    }

    #[test]
    fn single_q_slope_between_one_and_two() {
        let p = ApproximatingFunction::constant(1e-4).unwrap();
        let b = box_dimension_estimate(&p, &[0.0, 0.0], 2, 64, 64, 8, 12, DEFAULT_BOX_BUDGET).unwrap();
        assert!((1.0..=2.0).contains(&b.fitted_dimension), "{}", b.fitted_dimension);
    }

    #[test]
    fn three_dimensional_counts_nest() {
        let b = box_dimension_estimate(&psi(1.5), &[0.0, 0.0, 0.0], 3, 4, 8, 2, 6, DEFAULT_BOX_BUDGET).unwrap();
        for w in b.counts.windows(2) {
            assert!(w[0] <= w[1] && w[1] <= 8 * w[0]);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = box_dimension_estimate(&psi(2.0), &[0.0; 3], 3, 2, 4, 6, 20, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { required, budget } if required > budget));
    }

    proptest! {
        #[test]
        fn integer_translation_invariance(
            a in 0u64..(1 << 30), b in 0u64..(1 << 30), k1 in -50i32..50, k2 in -50i32..50,
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
        ) {
            let x = [a as f64 / (1u64 << 30) as f64, b as f64 / (1u64 << 30) as f64];
            let moved = [x[0] + k1 as f64, x[1] + k2 as f64];
            let p = psi(1.0);
            let r = count_hits(&x, &[t1, t2], &p, 300).unwrap();
            let s = count_hits(&moved, &[t1, t2], &p, 300).unwrap();
            prop_assert_eq!(r.hits, s.hits);
        }

        #[test]
        fn larger_psi_never_loses(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, a in 1.0f64..3.0, shrink in 0.0f64..1.0) {
            let big = psi(a);
            let small = ApproximatingFunction::power(a + shrink).unwrap();
            let hb = count_hits(&[x1, x2], &[0.0, 0.0], &big, 200).unwrap();
            let hs = count_hits(&[x1, x2], &[0.0, 0.0], &small, 200).unwrap();
            prop_assert!(hs.hits.iter().all(|q| hb.hits.contains(q)));
        }
    }

    #[test]
    fn larger_psi_never_loses_tail_or_boxes() {
        let (big, small) = (psi(1.5), psi(2.5));
        let tb = lebesgue_tail_estimate(&big, &[0.2, 0.0], 2, 8, 30, 20_000, 3).unwrap();
        let ts = lebesgue_tail_estimate(&small, &[0.2, 0.0], 2, 8, 30, 20_000, 3).unwrap();
        assert!(tb.hits >= ts.hits);
        let bb = box_dimension_estimate(&big, &[0.2, 0.0], 2, 8, 30, 3, 8, DEFAULT_BOX_BUDGET).unwrap();
        let bs = box_dimension_estimate(&small, &[0.2, 0.0], 2, 8, 30, 3, 8, DEFAULT_BOX_BUDGET).unwrap();
        assert!(bb.counts.iter().zip(&bs.counts).all(|(b, s)| b >= s));
    }
}
