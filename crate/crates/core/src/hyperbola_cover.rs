//! Dyadic hypercube covers of the hyperbolic region
//! `M(r) = { x : |x_i| <= 1, prod |x_i| <= r }`.
//!
//! With `r = 2^-N` the cover is indexed by the exponent set
//! `S = { k in Z^d : k_i >= 0, sum k_i = N - d }`. Each box
//! `B(k) = prod [-2^-k_i, 2^-k_i]` is split into `prod 2^(k_max - k_i + 1)`
//! cubes of side `2^-k_max`. All diameters use the max norm, so a cube's
//! diameter is its side.
//!
//! Costs are computed in closed form by grouping `S` by `k_max`; explicit cube
//! lists are only built on request and behind a cap.

use std::collections::HashMap;

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::DimensionFunction;
use crate::numerics::{binomial, largest_dyadic_exponent, least_squares_slope, DoubleDouble};

pub const DEFAULT_MATERIALIZE_CAP: u128 = 10_000_000;

/// `M(2^-N)` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperbolaRegion {
    d: u32,
    n: u32,
}

impl HyperbolaRegion {
    pub fn dyadic(d: u32, n: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {d}")));
        }
        if n < d {
            return Err(Error::Domain(format!("need N >= d, got N = {n}, d = {d}")));
        }
        Ok(HyperbolaRegion { d, n })
    }

    /// Region for a general radius `0 < r <= 2^-d`, with `N` the largest
    /// integer such that `r <= 2^-N`.
    pub fn from_radius(d: u32, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let n = largest_dyadic_exponent(r);
        if n < d as i64 {
            return Err(Error::Domain(format!("radius {r} exceeds 2^-{d}")));
        }
        let n = u32::try_from(n).map_err(|_| Error::Overflow(format!("N = {n} for r = {r}")))?;
        Self::dyadic(d, n)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `N - d`, the coordinate sum of every exponent vector.
    pub fn excess(&self) -> u32 {
        self.n - self.d
    }

    pub fn radius(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    /// Exact membership test for finite `f64` coordinates.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.d as usize {
            return Err(Error::Domain(format!("point has {} coordinates, region has d = {}", x.len(), self.d)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("point has non-finite coordinates".into()));
        }
        if x.iter().any(|v| v.abs() > 1.0) {
            return Ok(false);
        }
        if x.iter().any(|&v| v == 0.0) {
            return Ok(true);
        }
        // prod m_i * 2^(sum e_i) <= 2^-N  <=>  prod m_i <= 2^(-N - sum e_i)
        let mut prod = BigUint::from(1u32);
        let mut exp: i64 = 0;
        for &v in x {
            let (m, e) = integer_decode(v.abs());
            prod *= m;
            exp += e;
        }
        let k = -(self.n as i64) - exp;
        if k < 0 {
            return Ok(false);
        }
        Ok(prod <= (BigUint::from(1u32) << (k as u64)))
    }
}

/// `v = m * 2^e` with integer `m`, for positive finite `v`.
fn integer_decode(v: f64) -> (u64, i64) {
    let bits = v.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    }
}

/// One element `k` of the exponent set together with its cube bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExponentVector {
    k: Vec<u32>,
    k_max: u32,
    count_log2: u32,
}

impl ExponentVector {
    /// `excess` is `N - d`; the parts must sum to it.
    pub fn new(k: Vec<u32>, excess: u32) -> Result<Self> {
        let sum: u64 = k.iter().map(|&v| v as u64).sum();
        if sum != excess as u64 {
            return Err(Error::Domain(format!("exponent vector {k:?} does not sum to {excess}")));
        }
        let d = k.len() as u32;
        let k_max = k.iter().copied().max().unwrap_or(0);
        let count_log2 = d
            .checked_mul(k_max)
            .and_then(|v| v.checked_add(d))
            .map(|v| v - excess)
            .ok_or_else(|| Error::Overflow(format!("cube count exponent for {k:?}")))?;
        Ok(ExponentVector { k, k_max, count_log2 })
    }

    pub fn parts(&self) -> &[u32] {
        &self.k
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// `log2` of `prod_i 2^(k_max - k_i + 1) = 2^(d k_max - (N - d) + d)`.
    pub fn cube_count_log2(&self) -> u32 {
        self.count_log2
    }

    /// Exact cube count, `None` past `u128`.
    pub fn cube_count(&self) -> Option<u128> {
        1u128.checked_shl(self.count_log2).filter(|_| self.count_log2 < 128)
    }

    /// Cube side `2^-k_max`.
    pub fn side(&self) -> f64 {
        (-(self.k_max as f64)).exp2()
    }

    /// Whether `x` lies in the box `prod [-2^-k_i, 2^-k_i]`.
    pub fn box_contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.k).all(|(v, &k)| v.abs() <= (-(k as f64)).exp2())
    }
}

/// Compositions of `excess` into `d` non-negative parts, first part
/// descending: `(n,0,..,0), (n-1,1,0,..), ..., (0,..,0,n)`.
#[derive(Debug, Clone)]
pub struct ExponentSet {
    current: Vec<u32>,
    excess: u32,
    first: bool,
    done: bool,
}

impl Iterator for ExponentSet {
    type Item = ExponentVector;

    fn next(&mut self) -> Option<ExponentVector> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
        } else {
            let d = self.current.len();
            let Some(i) = (0..d - 1).rev().find(|&i| self.current[i] > 0) else {
                self.done = true;
                return None;
            };
            self.current[i] -= 1;
            let tail: u32 = self.current[i + 1..].iter().sum();
            self.current[i + 1..].iter_mut().for_each(|v| *v = 0);
            self.current[i + 1] = tail + 1;
        }
        Some(ExponentVector::new(self.current.clone(), self.excess).expect("composition sums to excess"))
    }
}

/// All exponent vectors for `M(2^-N)` in dimension `d`; there are `C(N-1, d-1)`.
pub fn exponent_set(n: u32, d: u32) -> Result<ExponentSet> {
    let region = HyperbolaRegion::dyadic(d, n)?;
    let mut current = vec![0; d as usize];
    current[0] = region.excess();
    Ok(ExponentSet { current, excess: region.excess(), first: true, done: false })
}

/// `|S| = C(N-1, d-1)`.
pub fn exponent_set_len(n: u32, d: u32) -> Result<u128> {
    HyperbolaRegion::dyadic(d, n)?;
    binomial(n as u64 - 1, d as u64 - 1).ok_or_else(|| Error::Overflow(format!("C({}, {})", n - 1, d - 1)))
}

/// Number of compositions of `excess` into `d` parts each `<= bound`.
fn bounded_compositions(excess: u32, d: u32, bound: u32) -> u128 {
    let (n, d, b) = (excess as i64, d as i64, bound as i64);
    let mut total: i128 = 0;
    for j in 0..=d {
        let rest = n - j * (b + 1);
        if rest < 0 {
            break;
        }
        let term = binomial(d as u64, j as u64).unwrap() as i128
            * binomial((rest + d - 1) as u64, (d - 1) as u64).unwrap() as i128;
        total += if j % 2 == 0 { term } else { -term };
    }
    total as u128
}

/// Number of vectors in `S` whose largest part is exactly `k_max`.
pub fn vectors_with_max(excess: u32, d: u32, k_max: u32) -> u128 {
    let upto = bounded_compositions(excess, d, k_max);
    let below = if k_max == 0 { 0 } else { bounded_compositions(excess, d, k_max - 1) };
    upto - below
}

/// How a single cube of side `t` is charged.
#[derive(Debug, Clone, Copy)]
pub enum SideCost<'a> {
    /// `t^s`
    Power(f64),
    /// `f(t)`
    Dimension(&'a DimensionFunction),
    /// `f(t / shrink)`, the cost of the cube after scaling by `1/shrink`.
    Scaled { f: &'a DimensionFunction, shrink: f64 },
}

impl SideCost<'_> {
    pub fn eval(&self, side: f64) -> f64 {
        match *self {
            SideCost::Power(s) => side.powf(s),
            SideCost::Dimension(f) => f.evaluate(side),
            SideCost::Scaled { f, shrink } => f.evaluate(side / shrink),
        }
    }
}

/// Per-`k_max` slice of the cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmaxGroup {
    pub k_max: u32,
    /// Exponent vectors with this largest part.
    pub vectors: u128,
    /// `log2` of the cube count of each of these vectors.
    pub cubes_per_vector_log2: u32,
    pub side: f64,
    /// `vectors * 2^cubes_per_vector_log2 * cost(side)`.
    pub contribution: f64,
}

impl KmaxGroup {
    pub fn cubes(&self) -> Option<u128> {
        if self.cubes_per_vector_log2 >= 128 {
            return None;
        }
        self.vectors.checked_mul(1u128 << self.cubes_per_vector_log2)
    }

    /// Cube count as a float, exact up to 2^1023.
    pub fn cubes_f64(&self) -> f64 {
        self.vectors as f64 * (self.cubes_per_vector_log2 as f64).exp2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverCost {
    pub n: u32,
    pub d: u32,
    pub total: DoubleDouble,
    /// Ascending in `k_max`.
    pub groups: Vec<KmaxGroup>,
}

impl CoverCost {
    pub fn value(&self) -> f64 {
        self.total.value()
    }
}

/// `k_max` groups of the cover of `M(2^-N)`, without costs.
pub fn cover_groups(n: u32, d: u32) -> Result<Vec<KmaxGroup>> {
    let region = HyperbolaRegion::dyadic(d, n)?;
    let excess = region.excess();
    let lowest = excess.div_ceil(d);
    let mut out = Vec::with_capacity((excess - lowest + 1) as usize);
    for m in lowest..=excess {
        let vectors = vectors_with_max(excess, d, m);
        if vectors == 0 {
            continue;
        }
        let log2 = d
            .checked_mul(m)
            .and_then(|v| v.checked_add(d))
            .map(|v| v - excess)
            .ok_or_else(|| Error::Overflow(format!("cube count exponent at k_max = {m}")))?;
        if log2 > 1023 || m > 1074 {
            return Err(Error::Overflow(format!(
                "cover of M(2^-{n}) in d = {d} needs 2^{log2} cubes of side 2^-{m}"
            )));
        }
        out.push(KmaxGroup {
            k_max: m,
            vectors,
            cubes_per_vector_log2: log2,
            side: (-(m as f64)).exp2(),
            contribution: 0.0,
        });
    }
    Ok(out)
}

/// Closed-form cost `sum_{k in S} cube_count(k) * cost(2^-k_max)`.
pub fn cover_cost(n: u32, d: u32, cost: &SideCost<'_>) -> Result<CoverCost> {
    if let SideCost::Power(s) = *cost {
        check_s(d, s)?;
    }
    let mut groups = cover_groups(n, d)?;
    let mut total = DoubleDouble::ZERO;
    for g in &mut groups {
        g.contribution = g.cubes_f64() * cost.eval(g.side);
        total += g.contribution;
    }
    Ok(CoverCost { n, d, total, groups })
}

/// Exact total cube count `sum_{k in S} cube_count(k)`.
pub fn total_cube_count(n: u32, d: u32) -> Result<u128> {
    cover_groups(n, d)?.iter().try_fold(0u128, |acc, g| {
        g.cubes()
            .and_then(|c| acc.checked_add(c))
            .ok_or_else(|| Error::Overflow(format!("cube count of M(2^-{n}) in d = {d}")))
    })
}

fn check_s(d: u32, s: f64) -> Result<()> {
    let df = d as f64;
    if !(s > df - 1.0 && s < df) {
        return Err(Error::OutOfRange(format!("s = {s} lies outside ({}, {d})", d - 1)));
    }
    Ok(())
}

/// Closed cube with dyadic centre `center[i] / 2^(level + 1)` and side `2^-level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub center: Vec<i64>,
    pub level: u32,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let scale = (-(self.level as f64 + 1.0)).exp2();
        ((self.center[i] - 1) as f64 * scale, (self.center[i] + 1) as f64 * scale)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            let (lo, hi) = self.bounds(i);
            lo <= v && v <= hi
        })
    }

    /// Centre coordinates as `p/2^m` strings.
    pub fn center_strings(&self) -> Vec<String> {
        self.center.iter().map(|p| format!("{p}/2^{}", self.level + 1)).collect()
    }

    pub fn side_string(&self) -> String {
        format!("2^-{}", self.level)
    }
}

/// Explicit cube list, ordered by exponent vector (as enumerated by
/// [`exponent_set`]) and then row-major within each box.
#[derive(Debug, Clone)]
pub struct MaterializedCover {
    pub region: HyperbolaRegion,
    pub vectors: Vec<ExponentVector>,
    offsets: Vec<usize>,
    index: HashMap<Vec<u32>, usize>,
    pub cubes: Vec<DyadicCube>,
}

pub fn materialize_cover(n: u32, d: u32, cap: u128) -> Result<MaterializedCover> {
    let region = HyperbolaRegion::dyadic(d, n)?;
    let count = total_cube_count(n, d)?;
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let mut cubes = Vec::with_capacity(count as usize);
    let mut vectors = Vec::new();
    let mut offsets = Vec::new();
    let mut index = HashMap::new();
    for v in exponent_set(n, d)? {
        offsets.push(cubes.len());
        index.insert(v.parts().to_vec(), vectors.len());
        let m = v.k_max();
        // per-axis centre numerators over 2^(m+1)
        let axes: Vec<Vec<i64>> = v
            .parts()
            .iter()
            .map(|&k| {
                let pieces = 1i64 << (m - k + 1);
                (0..pieces).map(|j| -pieces + 2 * j + 1).collect()
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        for flat in 0..total {
            // mixed radix, last axis fastest
            let mut rest = flat;
            let mut center = vec![0i64; d as usize];
            for i in (0..d as usize).rev() {
                center[i] = axes[i][rest % axes[i].len()];
                rest /= axes[i].len();
            }
            cubes.push(DyadicCube { center, level: m });
        }
        vectors.push(v);
    }
    debug_assert_eq!(cubes.len() as u128, count);
    Ok(MaterializedCover { region, vectors, offsets, index, cubes })
}

impl MaterializedCover {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn min_side(&self) -> f64 {
        self.cubes.iter().map(DyadicCube::side).fold(f64::INFINITY, f64::min)
    }

    /// Sum of `cost(side)` over every cube.
    pub fn cost(&self, cost: &SideCost<'_>) -> f64 {
        let mut acc = DoubleDouble::ZERO;
        for c in &self.cubes {
            acc += cost.eval(c.side());
        }
        acc.value()
    }

    /// Index of a cube containing `x`, found through [`point_to_box`].
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        let v = point_to_box(x, &self.region)?;
        let vi = self.index[v.parts()];
        let m = v.k_max();
        let mut flat = 0usize;
        for (i, &k) in v.parts().iter().enumerate() {
            let pieces = 1usize << (m - k + 1);
            let half = (-(k as f64)).exp2();
            let width = (-(m as f64)).exp2();
            let guess = ((x[i] + half) / width).floor().clamp(0.0, pieces as f64 - 1.0) as usize;
            // rounding in the guess can be off by one at a cube boundary
            let j = [guess, guess.saturating_sub(1), (guess + 1).min(pieces - 1)]
                .into_iter()
                .find(|&j| {
                    let lo = -half + j as f64 * width;
                    lo <= x[i] && x[i] <= lo + width
                })
                .ok_or_else(|| Error::Domain(format!("coordinate {} escapes its box", x[i])))?;
            flat = flat * pieces + j;
        }
        let at = self.offsets[vi] + flat;
        debug_assert!(self.cubes[at].contains(x));
        Ok(at)
    }
}

/// Exponent vector `k' in S` whose box contains `x`.
///
/// Each `k_i` is the largest integer with `|x_i| <= 2^-k_i`, capped at `N - d`
/// (zero coordinates take the cap). The excess over `N - d` is removed one unit
/// at a time from the largest coordinate, lowest index first on ties.
pub fn point_to_box(x: &[f64], region: &HyperbolaRegion) -> Result<ExponentVector> {
    if !region.contains(x)? {
        return Err(Error::Domain(format!("point {x:?} is not in M(2^-{})", region.n())));
    }
    let cap = region.excess();
    let mut k: Vec<u32> = x
        .iter()
        .map(|&v| {
            if v == 0.0 {
                cap
            } else {
                largest_dyadic_exponent(v.abs()).clamp(0, cap as i64) as u32
            }
        })
        .collect();
    let sum: u64 = k.iter().map(|&v| v as u64).sum();
    if sum < cap as u64 {
        return Err(Error::Domain(format!("exponents {k:?} sum below N - d = {cap}")));
    }
    for _ in 0..(sum - cap as u64) {
        let (i, _) = k.iter().enumerate().fold((0, 0), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        k[i] -= 1;
    }
    let v = ExponentVector::new(k, cap)?;
    if !v.box_contains(x) {
        return Err(Error::Domain(format!("point {x:?} escapes B({:?})", v.parts())));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: u32,
    pub cost: f64,
    /// `cost / r^(s-d+1)` with `r = 2^-N`.
    pub ratio: f64,
    /// Least-squares slope of `log2(cost)` against `-N` over rows up to this one.
    pub slope_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub d: u32,
    pub s: f64,
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    /// `(N - d - k_max, contribution)` for the largest `N`, ascending in the
    /// first component.
    pub profile: Vec<(u32, f64)>,
}

impl ScalingReport {
    pub fn expected_slope(&self) -> f64 {
        self.s - self.d as f64 + 1.0
    }
}

pub fn cost_scaling_report(d: u32, s: f64, n_min: u32, n_max: u32) -> Result<ScalingReport> {
    check_s(d, s)?;
    if n_min > n_max {
        return Err(Error::Domain(format!("empty N range {n_min}..={n_max}")));
    }
    let mut rows: Vec<ScalingRow> = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut last = None;
    for n in n_min..=n_max {
        let c = cover_cost(n, d, &SideCost::Power(s))?;
        let cost = c.value();
        xs.push(-(n as f64));
        ys.push(cost.log2());
        let slope_so_far = if xs.len() >= 2 { least_squares_slope(&xs, &ys) } else { f64::NAN };
        rows.push(ScalingRow { n, cost, ratio: cost * (n as f64 * (s - d as f64 + 1.0)).exp2(), slope_so_far });
        last = Some(c);
    }
    let last = last.expect("non-empty range");
    let excess = last.n - d;
    let mut profile: Vec<(u32, f64)> = last.groups.iter().map(|g| (excess - g.k_max, g.contribution)).collect();
    profile.reverse();
    Ok(ScalingReport {
        d,
        s,
        slope: rows.last().map(|r| r.slope_so_far).unwrap_or(f64::NAN),
        sup_ratio: rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        inf_ratio: rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
        rows,
        profile,
    })
}

/// A region with its closed-form cost and, optionally, the explicit cubes.
#[derive(Debug, Clone)]
pub struct HypercubeCover {
    pub region: HyperbolaRegion,
    pub cost: CoverCost,
    pub materialized: Option<MaterializedCover>,
}

impl HypercubeCover {
    pub fn build(region: HyperbolaRegion, cost: &SideCost<'_>, materialize_cap: Option<u128>) -> Result<Self> {
        let closed = cover_cost(region.n(), region.d(), cost)?;
        let materialized = match materialize_cap {
            Some(cap) => Some(materialize_cover(region.n(), region.d(), cap)?),
            None => None,
        };
        Ok(HypercubeCover { region, cost: closed, materialized })
    }

    pub fn vectors(&self) -> ExponentSet {
        exponent_set(self.region.n(), self.region.d()).expect("region already validated")
    }
}
