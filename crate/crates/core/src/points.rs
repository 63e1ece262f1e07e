//! Generic sample points and certified orbit-distance predicates.
//!
//! A [`GenericPoint`] is a symbolic point: per axis a stream of branch indices,
//! realized lazily. Its coordinate is the intersection of the nested cylinders
//! named by the prefixes of the stream, and `T^n x` is the point named by the
//! stream shifted by `n`. No floating-point orbit is ever simulated.
//!
//! # Reproducible sampling
//!
//! Point `i` of a run with master seed `m` uses the seed
//! `splitmix64(m + 0x9E3779B97F4A7C15 * (i + 1))` (wrapping arithmetic, the
//! SplitMix64 output finalizer), see [`point_seed`]. Axis `a` of that point
//! draws from `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(a)`.
//!
//! Each symbol consumes one or more `u64` outputs. With branch lengths
//! `w_s / Q` over a common denominator `Q`, a draw `r` is rejected when
//! `r > 2^64 - 1 - (2^64 mod Q)`; otherwise the symbol is the first `s` with
//! `r mod Q < w_0 + ... + w_s`. For `Q` a power of two nothing is ever rejected.
//!
//! # Deciding `d(T^n x, y) < r`
//!
//! Both points are known only through enclosures, so the predicate refines
//! until the interval comparison is decisive:
//!
//! - On an axis whose branches are `x -> b x - j` the coordinate is a base-`b`
//!   digit string and `T^n` is a shift. The difference of the two digit
//!   strings truncated to `k` digits is an integer `D`, and the true distance
//!   lies in `[(|D|-1) b^-k, (|D|+1) b^-k]`. One digit is consumed per step
//!   with plain integer arithmetic.
//! - Other axes compose the branch affine maps in `f64` and widen the
//!   resulting cylinders by a bound on the accumulated rounding error.
//! - Once `f64` runs out of room both paths continue in exact rationals.
//!
//! The loop gives up after `ceil(log_lambda(1/r)) + 2 + refinement_cap` symbols
//! and reports [`Outcome::Unresolved`].

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::maps::{AxisCylinder, AxisMap, MapError, MapSpec};
use crate::rate::RateFunction;
use crate::rational::Rational;

/// Default number of refinement symbols beyond the radius scale.
pub const DEFAULT_REFINEMENT_CAP: u32 = 256;
/// Default realization budget (symbols per axis).
pub const DEFAULT_BUDGET: usize = 1 << 26;

const F64_SAFE: f64 = 4503599627370496.0; // 2^52
const REL: f64 = 1.0 / 2251799813685248.0; // 2^-51

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PointError {
    #[error("depth {requested} exceeds the precision budget of {budget} symbols")]
    BudgetExceeded { requested: usize, budget: usize },
    #[error("axis {axis}: symbol {symbol} out of range for {branches} branches")]
    BadSymbol { axis: usize, symbol: u8, branches: usize },
    #[error("expected {expected} symbol streams, got {got}")]
    AxisCount { expected: usize, got: usize },
    #[error("axis {axis}: the periodic part of a forced stream must be non-empty")]
    EmptyCycle { axis: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Hit,
    Miss,
    Unresolved,
}

impl Outcome {
    pub fn is_hit(self) -> bool {
        self == Outcome::Hit
    }
}

/// Per-axis distance on `[0,1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// `|x - y|`
    #[default]
    Interval,
    /// `min(|x - y|, 1 - |x - y|)`
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredicateOptions {
    pub refinement_cap: u32,
    pub metric: Metric,
    /// Use the digit-shift path on digit axes. Disabling it routes every axis
    /// through the affine path, which is useful for cross-checks.
    pub fast_path: bool,
}

impl Default for PredicateOptions {
    fn default() -> Self {
        PredicateOptions {
            refinement_cap: DEFAULT_REFINEMENT_CAP,
            metric: Metric::Interval,
            fast_path: true,
        }
    }
}

/// Per-axis radius `psi_i(n)` as seen by the predicate.
pub trait RadiusBounds {
    /// `f64` bounds with `lo <= psi_i <= hi`.
    fn filter(&self, axis: usize) -> (f64, f64);
    /// Rational bounds of width about `2^-bits` (exact when possible).
    fn enclose(&self, axis: usize, bits: u32) -> (Rational, Rational);
}

impl RadiusBounds for [Rational] {
    fn filter(&self, axis: usize) -> (f64, f64) {
        (self[axis].to_f64_down(), self[axis].to_f64_up())
    }

    fn enclose(&self, axis: usize, _bits: u32) -> (Rational, Rational) {
        (self[axis].clone(), self[axis].clone())
    }
}

impl RadiusBounds for Vec<Rational> {
    fn filter(&self, axis: usize) -> (f64, f64) {
        self.as_slice().filter(axis)
    }

    fn enclose(&self, axis: usize, bits: u32) -> (Rational, Rational) {
        self.as_slice().enclose(axis, bits)
    }
}

/// The radii `psi_i(n)` of a rate function at a fixed `n`.
#[derive(Debug, Clone, Copy)]
pub struct RateRadii<'a> {
    pub rate: &'a RateFunction,
    pub n: u64,
}

impl RadiusBounds for RateRadii<'_> {
    fn filter(&self, axis: usize) -> (f64, f64) {
        self.rate.filter(axis, self.n)
    }

    fn enclose(&self, axis: usize, bits: u32) -> (Rational, Rational) {
        self.rate.enclose(axis, self.n, bits)
    }
}

/// SplitMix64 output finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of point `index` in a run with the given master seed.
pub fn point_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1))))
}

/// Per-axis RNG of a point.
pub fn axis_rng(seed: u64, axis: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(axis as u64);
    rng
}

#[derive(Debug, Clone)]
struct Sampler {
    total: u64,
    zone: u64,
    cumulative: Vec<u64>,
    uniform: bool,
}

impl Sampler {
    fn new(axis: &AxisMap) -> Self {
        let total = axis.weight_total();
        let mut acc = 0;
        let cumulative = axis
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect::<Vec<_>>();
        Sampler {
            total,
            zone: u64::MAX - (u64::MAX % total + 1) % total,
            uniform: axis.weights().iter().all(|&w| w == 1),
            cumulative,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u8 {
        loop {
            let r = rng.next_u64();
            if r > self.zone {
                continue;
            }
            let v = r % self.total;
            return if self.uniform {
                v as u8
            } else {
                self.cumulative.partition_point(|&c| c <= v) as u8
            };
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Random {
        rngs: Vec<ChaCha8Rng>,
        samplers: Vec<Sampler>,
    },
    Periodic {
        prefix: Vec<Vec<u8>>,
        cycle: Vec<Vec<u8>>,
    },
    Orbit {
        orbit: Vec<Vec<Rational>>,
    },
}

/// Per-axis closed intervals containing a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    pub axes: Vec<(Rational, Rational)>,
}

impl Enclosure {
    pub fn width(&self, axis: usize) -> Rational {
        &self.axes[axis].1 - &self.axes[axis].0
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.axes.iter().zip(x).all(|((lo, hi), v)| lo <= v && v <= hi)
    }

    pub fn is_subset_of(&self, other: &Enclosure) -> bool {
        self.axes
            .iter()
            .zip(&other.axes)
            .all(|((a, b), (c, d))| c <= a && b <= d)
    }
}

/// A point of `[0,1]^d` given by lazily realized symbol streams.
#[derive(Debug, Clone)]
pub struct GenericPoint {
    map: Arc<MapSpec>,
    seed: Option<u64>,
    budget: usize,
    streams: Vec<Vec<u8>>,
    source: Source,
}

/// A shrinking-target center with its precomputed itinerary.
#[derive(Debug, Clone)]
pub struct TargetPoint {
    x0: Vec<Rational>,
    x0_f64: Vec<(f64, f64)>,
    digits: Vec<Vec<u8>>,
}

impl TargetPoint {
    /// Default itinerary length kept for the digit path.
    pub const DEFAULT_DEPTH: usize = 2048;

    pub fn new(map: &MapSpec, x0: Vec<Rational>) -> Result<Self, MapError> {
        Self::with_depth(map, x0, Self::DEFAULT_DEPTH)
    }

    pub fn with_depth(map: &MapSpec, x0: Vec<Rational>, depth: usize) -> Result<Self, MapError> {
        map.check_point(&x0)?;
        let digits = map
            .axes()
            .iter()
            .zip(&x0)
            .map(|(axis, v)| {
                if axis.digit_base().is_none() {
                    return Vec::new();
                }
                let mut y = v.clone();
                (0..depth)
                    .map(|_| {
                        let s = axis.branch_index(&y);
                        y = axis.branches()[s].apply(&y);
                        s as u8
                    })
                    .collect()
            })
            .collect();
        let x0_f64 = x0.iter().map(|v| (v.to_f64_down(), v.to_f64_up())).collect();
        Ok(TargetPoint { x0, x0_f64, digits })
    }

    pub fn center(&self) -> &[Rational] {
        &self.x0
    }
}

#[derive(Clone, Copy)]
enum Reference<'a> {
    Own,
    Target(&'a TargetPoint),
}

impl GenericPoint {
    /// A Lebesgue-random point determined by `seed`.
    pub fn sample(map: &MapSpec, seed: u64) -> Self {
        let d = map.dimension();
        GenericPoint {
            map: Arc::new(map.clone()),
            seed: Some(seed),
            budget: DEFAULT_BUDGET,
            streams: vec![Vec::new(); d],
            source: Source::Random {
                rngs: (0..d).map(|a| axis_rng(seed, a)).collect(),
                samplers: map.axes().iter().map(Sampler::new).collect(),
            },
        }
    }

    /// The point with symbol streams `prefix[a]` followed by `cycle[a]`
    /// repeated forever.
    pub fn eventually_periodic(
        map: &MapSpec,
        prefix: Vec<Vec<u8>>,
        cycle: Vec<Vec<u8>>,
    ) -> Result<Self, PointError> {
        let d = map.dimension();
        for streams in [&prefix, &cycle] {
            if streams.len() != d {
                return Err(PointError::AxisCount {
                    expected: d,
                    got: streams.len(),
                });
            }
        }
        for (axis, (p, c)) in prefix.iter().zip(&cycle).enumerate() {
            if c.is_empty() {
                return Err(PointError::EmptyCycle { axis });
            }
            let branches = map.axis(axis).branch_count();
            if let Some(&symbol) = p.iter().chain(c).find(|&&s| s as usize >= branches) {
                return Err(PointError::BadSymbol {
                    axis,
                    symbol,
                    branches,
                });
            }
        }
        Ok(GenericPoint {
            map: Arc::new(map.clone()),
            seed: None,
            budget: DEFAULT_BUDGET,
            streams: vec![Vec::new(); d],
            source: Source::Periodic { prefix, cycle },
        })
    }

    /// The point whose streams repeat `cycle[a]` forever.
    pub fn periodic(map: &MapSpec, cycle: Vec<Vec<u8>>) -> Result<Self, PointError> {
        let d = cycle.len();
        Self::eventually_periodic(map, vec![Vec::new(); d], cycle)
    }

    /// The exact rational point `x`; its streams are its itinerary.
    pub fn from_rational(map: &MapSpec, x: Vec<Rational>) -> Result<Self, PointError> {
        map.check_point(&x)?;
        let d = map.dimension();
        Ok(GenericPoint {
            map: Arc::new(map.clone()),
            seed: None,
            budget: DEFAULT_BUDGET,
            streams: vec![Vec::new(); d],
            source: Source::Orbit {
                orbit: x.into_iter().map(|v| vec![v]).collect(),
            },
        })
    }

    /// Caps the number of symbols that may be realized per axis.
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn dimension(&self) -> usize {
        self.map.dimension()
    }

    /// Number of symbols realized so far on every axis.
    pub fn realized_depth(&self) -> usize {
        self.streams.iter().map(Vec::len).min().unwrap_or(0)
    }

    fn is_random(&self) -> bool {
        matches!(self.source, Source::Random { .. })
    }

    /// Realizes at least `len` symbols per axis.
    pub fn ensure(&mut self, len: usize) -> Result<(), PointError> {
        if len > self.budget {
            return Err(PointError::BudgetExceeded {
                requested: len,
                budget: self.budget,
            });
        }
        let map = Arc::clone(&self.map);
        for (a, stream) in self.streams.iter_mut().enumerate() {
            if stream.len() >= len {
                continue;
            }
            stream.reserve(len - stream.len());
            match &mut self.source {
                Source::Random { rngs, samplers } => {
                    let (rng, sampler) = (&mut rngs[a], &samplers[a]);
                    while stream.len() < len {
                        stream.push(sampler.draw(rng));
                    }
                }
                Source::Periodic { prefix, cycle } => {
                    let (p, c) = (&prefix[a], &cycle[a]);
                    while stream.len() < len {
                        let i = stream.len();
                        stream.push(if i < p.len() { p[i] } else { c[(i - p.len()) % c.len()] });
                    }
                }
                Source::Orbit { orbit } => {
                    let axis = map.axis(a);
                    let orbit = &mut orbit[a];
                    while stream.len() < len {
                        let y = orbit.last().expect("seeded with x");
                        let s = axis.branch_index(y);
                        let next = axis.branches()[s].apply(y);
                        stream.push(s as u8);
                        orbit.push(next);
                    }
                }
            }
        }
        Ok(())
    }

    /// The first `len` symbols of one axis.
    pub fn symbols(&mut self, axis: usize, len: usize) -> Result<&[u8], PointError> {
        self.ensure(len)?;
        Ok(&self.streams[axis][..len])
    }

    /// The depth-`depth` cylinder rectangle containing the point (closed).
    pub fn enclose(&mut self, depth: usize) -> Result<Enclosure, PointError> {
        self.ensure(depth)?;
        let axes = self
            .map
            .axes()
            .iter()
            .zip(&self.streams)
            .map(|(axis, s)| {
                let c = AxisCylinder::from_word(axis, &s[..depth]);
                (c.left, c.right)
            })
            .collect();
        Ok(Enclosure { axes })
    }

    /// Exact coordinate of `T^n x` on one axis, for non-random points.
    pub fn exact_coordinate(&mut self, axis: usize, n: usize) -> Option<Rational> {
        match &self.source {
            Source::Random { .. } => None,
            Source::Orbit { .. } => {
                self.ensure(n).ok()?;
                match &self.source {
                    Source::Orbit { orbit } => Some(orbit[axis][n].clone()),
                    _ => unreachable!(),
                }
            }
            Source::Periodic { prefix, cycle } => {
                let (p, c) = (&prefix[axis], &cycle[axis]);
                let am = self.map.axis(axis);
                let (head, rotated): (&[u8], Vec<u8>) = if n < p.len() {
                    (&p[n..], c.clone())
                } else {
                    let r = (n - p.len()) % c.len();
                    (&[], c[r..].iter().chain(&c[..r]).copied().collect())
                };
                let cyc = AxisCylinder::from_word(am, &rotated);
                // Fixed point of K y - z = y.
                let y = &cyc.offset / (&cyc.slope - Rational::one());
                let pre = AxisCylinder::from_word(am, head);
                Some((y + &pre.offset) / &pre.slope)
            }
        }
    }

    /// Decides `d(x_i, T^n(x)_i) < psi_i(n)` on every axis.
    pub fn recurrence(
        &mut self,
        n: u64,
        radii: &(impl RadiusBounds + ?Sized),
        opts: &PredicateOptions,
    ) -> Outcome {
        self.predicate(Reference::Own, n, radii, opts)
    }

    /// Decides `d(T^n(x)_i, x0_i) < psi_i(n)` on every axis.
    pub fn target(
        &mut self,
        target: &TargetPoint,
        n: u64,
        radii: &(impl RadiusBounds + ?Sized),
        opts: &PredicateOptions,
    ) -> Outcome {
        self.predicate(Reference::Target(target), n, radii, opts)
    }

    fn predicate(
        &mut self,
        reference: Reference<'_>,
        n: u64,
        radii: &(impl RadiusBounds + ?Sized),
        opts: &PredicateOptions,
    ) -> Outcome {
        let d = self.dimension();
        let mut filters = Vec::with_capacity(d);
        for axis in 0..d {
            let (lo, hi) = radii.filter(axis);
            if hi <= 0.0 && radii.enclose(axis, 64).1.is_zero() {
                return Outcome::Miss;
            }
            filters.push((lo, hi));
        }
        let mut unresolved = false;
        for (axis, &(rlo, rhi)) in filters.iter().enumerate() {
            let out = if self.is_random() {
                self.random_axis(reference, axis, n, rlo, rhi, radii, opts)
            } else {
                self.exact_axis(reference, axis, n, radii, opts)
            };
            match out {
                Outcome::Miss => return Outcome::Miss,
                Outcome::Unresolved => unresolved = true,
                Outcome::Hit => {}
            }
        }
        if unresolved {
            Outcome::Unresolved
        } else {
            Outcome::Hit
        }
    }

    fn exact_axis(
        &mut self,
        reference: Reference<'_>,
        axis: usize,
        n: u64,
        radii: &(impl RadiusBounds + ?Sized),
        opts: &PredicateOptions,
    ) -> Outcome {
        let Some(y) = self.exact_coordinate(axis, n as usize) else {
            log::warn!("n = {n} exceeds the budget of an exact point");
            return Outcome::Unresolved;
        };
        let x = match reference {
            Reference::Own => self.exact_coordinate(axis, 0).expect("non-random"),
            Reference::Target(t) => t.x0[axis].clone(),
        };
        let dist = apply_metric_exact((&y - &x).abs(), opts.metric);
        let mut bits = 64;
        while bits <= 4096 {
            let (rlo, rhi) = radii.enclose(axis, bits);
            if dist < rlo {
                return Outcome::Hit;
            }
            if dist >= rhi {
                return Outcome::Miss;
            }
            bits *= 2;
        }
        log::warn!("distance within 2^-4096 of the radius at n = {n}");
        Outcome::Unresolved
    }

    #[allow(clippy::too_many_arguments)]
    fn random_axis(
        &mut self,
        reference: Reference<'_>,
        axis: usize,
        n: u64,
        rlo: f64,
        rhi: f64,
        radii: &(impl RadiusBounds + ?Sized),
        opts: &PredicateOptions,
    ) -> Outcome {
        let lambda = self.map.lambda().to_f64();
        let scale_steps = if rhi >= 1.0 {
            0.0
        } else {
            ((1.0 / rhi).ln() / lambda.ln()).ceil()
        };
        let mut kmax = scale_steps as usize + 2 + opts.refinement_cap as usize;
        let n = n as usize;
        if n + kmax > self.budget {
            if n >= self.budget {
                log::warn!("n = {n} exceeds the precision budget {}", self.budget);
                return Outcome::Unresolved;
            }
            kmax = self.budget - n;
        }
        if let Reference::Target(t) = reference {
            if !t.digits[axis].is_empty() {
                kmax = kmax.min(t.digits[axis].len());
            }
        }
        self.ensure(n + kmax).expect("within budget");
        let map = Arc::clone(&self.map);
        let am = map.axis(axis);
        let stream = &self.streams[axis];
        let shifted = &stream[n..n + kmax];
        let out = match (am.digit_base(), opts.fast_path) {
            (Some(b), true) => {
                let left: &[u8] = match reference {
                    Reference::Own => &stream[..kmax],
                    Reference::Target(t) => &t.digits[axis][..kmax],
                };
                digit_compare(shifted, left, b, axis, (rlo, rhi), radii, opts.metric)
            }
            _ => {
                let left = match reference {
                    Reference::Own => Left::Word(&stream[..kmax]),
                    Reference::Target(t) => Left::Point(t.x0_f64[axis], &t.x0[axis]),
                };
                affine_compare(am, shifted, left, axis, (rlo, rhi), radii, opts.metric)
            }
        };
        if out == Outcome::Unresolved {
            log::debug!("axis {axis}, n = {n}: unresolved after {kmax} symbols");
        }
        out
    }
}

/// Shorthand for spec-style call sites: `p.recurrence(n, radii, opts)`.
pub fn distance_predicate(
    p: &mut GenericPoint,
    n: u64,
    radii: &(impl RadiusBounds + ?Sized),
    opts: &PredicateOptions,
) -> Outcome {
    p.recurrence(n, radii, opts)
}

fn apply_metric_exact(d: Rational, metric: Metric) -> Rational {
    match metric {
        Metric::Interval => d,
        Metric::Torus => {
            let other = Rational::one() - &d;
            d.min(other)
        }
    }
}

/// Bounds on the metric distance given bounds `[lo, hi]` on `|x - y|` within `[0, 1]`.
fn metric_bounds_f64(lo: f64, hi: f64, metric: Metric) -> (f64, f64) {
    match metric {
        Metric::Interval => (lo, hi),
        Metric::Torus => {
            const SLACK: f64 = 1.0 / 4503599627370496.0;
            let far_lo = (1.0 - hi) - SLACK;
            let far_hi = (1.0 - lo) + SLACK;
            (lo.min(far_lo).max(0.0), hi.min(far_hi))
        }
    }
}

fn metric_bounds_exact(lo: Rational, hi: Rational, metric: Metric) -> (Rational, Rational) {
    match metric {
        Metric::Interval => (lo, hi),
        Metric::Torus => {
            let one = Rational::one();
            let far_lo = &one - &hi;
            let far_hi = &one - &lo;
            (lo.min(far_lo), hi.min(far_hi))
        }
    }
}

fn decide_f64(lo: f64, hi: f64, rlo: f64, rhi: f64) -> Option<Outcome> {
    if hi < rlo {
        Some(Outcome::Hit)
    } else if lo >= rhi {
        Some(Outcome::Miss)
    } else {
        None
    }
}

fn decide_exact(lo: &Rational, hi: &Rational, rlo: &Rational, rhi: &Rational) -> Option<Outcome> {
    if hi < rlo {
        Some(Outcome::Hit)
    } else if lo >= rhi {
        Some(Outcome::Miss)
    } else {
        None
    }
}

fn radius_bits(k: usize, log2_lambda: f64) -> u32 {
    ((k as f64 * log2_lambda).ceil() as u32).saturating_add(16)
}

/// Digit-shift comparison of the streams `right` (the orbit point) and `left`.
fn digit_compare(
    right: &[u8],
    left: &[u8],
    b: u32,
    axis: usize,
    (rlo, rhi): (f64, f64),
    radii: &(impl RadiusBounds + ?Sized),
    metric: Metric,
) -> Outcome {
    let kmax = right.len();
    let bi = b as i64;
    let bf = b as f64;
    let mut diff: i64 = 0;
    let mut scale = 1.0f64;
    for k in 0..kmax {
        diff = diff * bi + (right[k] as i64 - left[k] as i64);
        scale *= bf;
        if scale > F64_SAFE {
            return digit_compare_exact(right, left, b, k + 1, axis, radii, metric);
        }
        let ad = diff.unsigned_abs() as f64;
        let lo = ((ad - 1.0).max(0.0) / scale) * (1.0 - REL);
        let hi = (((ad + 1.0) / scale) * (1.0 + REL)).min(1.0);
        let (lo, hi) = metric_bounds_f64(lo, hi, metric);
        if let Some(out) = decide_f64(lo, hi, rlo, rhi) {
            return out;
        }
    }
    Outcome::Unresolved
}

fn digit_compare_exact(
    right: &[u8],
    left: &[u8],
    b: u32,
    start: usize,
    axis: usize,
    radii: &(impl RadiusBounds + ?Sized),
    metric: Metric,
) -> Outcome {
    let kmax = right.len();
    let big_b = BigInt::from(b);
    let mut diff = BigInt::zero();
    let mut scale = BigInt::from(1);
    for k in 0..start - 1 {
        diff = diff * &big_b + (right[k] as i64 - left[k] as i64);
        scale *= &big_b;
    }
    let (rlo, rhi) = radii.enclose(axis, radius_bits(kmax, (b as f64).log2()));
    let one = Rational::one();
    for k in start - 1..kmax {
        diff = diff * &big_b + (right[k] as i64 - left[k] as i64);
        scale *= &big_b;
        let s = Rational::from_bigint(scale.clone());
        let ad = Rational::from_bigint(diff.abs());
        let lo = ((&ad - &one) / &s).max(Rational::zero());
        let hi = ((&ad + &one) / &s).min(one.clone());
        let (lo, hi) = metric_bounds_exact(lo, hi, metric);
        if let Some(out) = decide_exact(&lo, &hi, &rlo, &rhi) {
            return out;
        }
    }
    Outcome::Unresolved
}

#[derive(Clone, Copy)]
enum Left<'a> {
    Word(&'a [u8]),
    Point((f64, f64), &'a Rational),
}

/// Forward composition of branch maps in `f64`.
#[derive(Clone, Copy)]
struct AffineF64 {
    k: f64,
    z: f64,
}

impl AffineF64 {
    fn push(&mut self, s: u8, consts: &[(f64, f64)]) {
        let (slope, offset) = consts[s as usize];
        self.z = slope * self.z + offset;
        self.k *= slope;
    }

    fn interval(&self, widen: f64) -> (f64, f64) {
        let a = self.z / self.k;
        let b = (self.z + 1.0) / self.k;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        (lo - widen, hi + widen)
    }
}

fn separation_f64(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let lo = (a.0 - b.1).max(b.0 - a.1).max(0.0);
    let hi = (a.1 - b.0).max(b.1 - a.0).min(1.0);
    (lo, hi)
}

fn separation_exact(a: (&Rational, &Rational), b: (&Rational, &Rational)) -> (Rational, Rational) {
    let lo = (a.0 - b.1).max(b.0 - a.1).max(Rational::zero());
    let hi = (a.1 - b.0).max(b.1 - a.0).min(Rational::one());
    (lo, hi)
}

/// Cylinder-interval comparison for arbitrary full-branch axes.
fn affine_compare(
    axis: &AxisMap,
    right: &[u8],
    left: Left<'_>,
    axis_index: usize,
    (rlo, rhi): (f64, f64),
    radii: &(impl RadiusBounds + ?Sized),
    metric: Metric,
) -> Outcome {
    let consts: Vec<(f64, f64)> = axis
        .branches()
        .iter()
        .map(|b| (b.slope.to_f64(), b.offset.to_f64()))
        .collect();
    let kmax = right.len();
    let mut r = AffineF64 { k: 1.0, z: 0.0 };
    let mut l = AffineF64 { k: 1.0, z: 0.0 };
    for k in 0..kmax {
        r.push(right[k], &consts);
        if let Left::Word(w) = left {
            l.push(w[k], &consts);
        }
        let widen = (k as f64 + 3.0) * (1.0 / 281474976710656.0); // 2^-48 per step
        let too_fine = |c: &AffineF64| c.k.abs() > 1e270 || 1.0 / c.k.abs() < 1024.0 * widen;
        if too_fine(&r) || matches!(left, Left::Word(_)) && too_fine(&l) {
            return affine_compare_exact(axis, right, left, k + 1, axis_index, radii, metric);
        }
        let ri = r.interval(widen);
        let li = match left {
            Left::Word(_) => l.interval(widen),
            Left::Point(p, _) => p,
        };
        let (lo, hi) = separation_f64(ri, li);
        let (lo, hi) = metric_bounds_f64(lo, hi, metric);
        if let Some(out) = decide_f64(lo, hi, rlo, rhi) {
            return out;
        }
    }
    Outcome::Unresolved
}

fn affine_compare_exact(
    axis: &AxisMap,
    right: &[u8],
    left: Left<'_>,
    start: usize,
    axis_index: usize,
    radii: &(impl RadiusBounds + ?Sized),
    metric: Metric,
) -> Outcome {
    let kmax = right.len();
    let log2_lambda = axis.min_abs_slope().to_f64().log2();
    let (rlo, rhi) = radii.enclose(axis_index, radius_bits(kmax, log2_lambda));
    let compose = |word: &[u8]| {
        let c = AxisCylinder::from_word(axis, word);
        (c.slope, c.offset)
    };
    let step = |(k, z): &(Rational, Rational), s: u8| {
        let br = &axis.branches()[s as usize];
        (&br.slope * k, &br.slope * z + &br.offset)
    };
    let mut rc = compose(&right[..start - 1]);
    let mut lc = match left {
        Left::Word(w) => Some(compose(&w[..start - 1])),
        Left::Point(..) => None,
    };
    for k in start - 1..kmax {
        rc = step(&rc, right[k]);
        if let (Some(c), Left::Word(w)) = (lc.as_mut(), left) {
            *c = step(c, w[k]);
        }
        let ri = AxisCylinder::from_affine(0, rc.0.clone(), rc.1.clone());
        let (lo, hi) = match (&lc, left) {
            (Some(c), _) => {
                let li = AxisCylinder::from_affine(0, c.0.clone(), c.1.clone());
                separation_exact((&ri.left, &ri.right), (&li.left, &li.right))
            }
            (None, Left::Point(_, x0)) => separation_exact((&ri.left, &ri.right), (x0, x0)),
            (None, Left::Word(_)) => unreachable!(),
        };
        let (lo, hi) = metric_bounds_exact(lo, hi, metric);
        if let Some(out) = decide_exact(&lo, &hi, &rlo, &rhi) {
            return out;
        }
    }
    Outcome::Unresolved
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn radii(s: &str) -> Vec<Rational> {
        vec![q(s)]
    }

    #[test]
    fn sampling_is_deterministic() {
        let map = MapSpec::doubling();
        let mut a = GenericPoint::sample(&map, 42);
        let mut b = GenericPoint::sample(&map, 42);
        assert_eq!(a.symbols(0, 500).unwrap(), b.symbols(0, 500).unwrap());
        for depth in [0, 1, 7, 64] {
            assert_eq!(a.enclose(depth).unwrap(), b.enclose(depth).unwrap());
        }
        // Extending never rewrites earlier symbols.
        let early = a.symbols(0, 10).unwrap().to_vec();
        a.ensure(10_000).unwrap();
        assert_eq!(a.symbols(0, 10).unwrap(), &early[..]);
    }

    #[test]
    fn documented_generator() {
        let map = MapSpec::doubling();
        let mut p = GenericPoint::sample(&map, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(0);
        let expected: Vec<u8> = (0..64).map(|_| (rand_core::RngCore::next_u64(&mut rng) % 2) as u8).collect();
        assert_eq!(p.symbols(0, 64).unwrap(), &expected[..]);
    }

    #[test]
    fn distinct_seeds_differ() {
        let map = MapSpec::tent();
        let mut same = 0;
        for s in 0..200u64 {
            let mut a = GenericPoint::sample(&map, point_seed(1, s));
            let mut b = GenericPoint::sample(&map, point_seed(1, s + 1000));
            if a.enclose(64).unwrap() == b.enclose(64).unwrap() {
                same += 1;
            }
        }
        assert_eq!(same, 0);
    }

    #[test]
    fn symbol_frequencies_follow_lengths() {
        let map = MapSpec::luroth_truncated(4).unwrap();
        let mut p = GenericPoint::sample(&map, 3);
        let n = 200_000;
        let s = p.symbols(0, n).unwrap().to_vec();
        for (j, br) in map.axis(0).branches().iter().enumerate() {
            let count = s.iter().filter(|&&v| v as usize == j).count() as f64;
            let pr = br.length().to_f64();
            let sd = (n as f64 * pr * (1.0 - pr)).sqrt();
            assert!((count - n as f64 * pr).abs() < 5.0 * sd, "branch {j}");
        }
    }

    #[test]
    fn forced_stream_enclosures() {
        let map = MapSpec::doubling();
        let mut p = GenericPoint::periodic(&map, vec![vec![0, 1]]).unwrap();
        let e = p.enclose(2).unwrap();
        assert_eq!(e.axes[0], (q("1/4"), q("1/2")));
        let e0 = p.enclose(0).unwrap();
        assert_eq!(e0.axes[0], (q("0"), q("1")));
        let mut prev = e0;
        for depth in 1..40 {
            let e = p.enclose(depth).unwrap();
            assert!(e.is_subset_of(&prev));
            assert_eq!(e.width(0) * Rational::from_integer(2), prev.width(0));
            assert!(e.contains(&[q("1/3")]));
            prev = e;
        }
        assert_eq!(p.exact_coordinate(0, 0), Some(q("1/3")));
    }

    #[test]
    fn budget_is_enforced() {
        let map = MapSpec::doubling();
        let mut p = GenericPoint::sample(&map, 1).with_budget(100);
        assert!(p.enclose(100).is_ok());
        assert!(matches!(p.enclose(101), Err(PointError::BudgetExceeded { .. })));
        assert_eq!(p.recurrence(200, &radii("1/4"), &PredicateOptions::default()), Outcome::Unresolved);
    }

    #[test]
    fn fifth_orbit_examples() {
        let map = MapSpec::doubling();
        let opts = PredicateOptions::default();
        // 1/5 = 0.0011 0011 ... in binary
        let mut p = GenericPoint::periodic(&map, vec![vec![0, 0, 1, 1]]).unwrap();
        assert_eq!(p.exact_coordinate(0, 0), Some(q("1/5")));
        assert_eq!(p.recurrence(4, &radii("1/10"), &opts), Outcome::Hit);
        assert_eq!(p.recurrence(1, &radii("1/10"), &opts), Outcome::Miss);
        assert_eq!(p.recurrence(4, &radii("0"), &opts), Outcome::Miss);
        let mut r = GenericPoint::from_rational(&map, vec![q("1/5")]).unwrap();
        assert_eq!(r.recurrence(4, &radii("1/10"), &opts), Outcome::Hit);
        assert_eq!(r.recurrence(1, &radii("1/10"), &opts), Outcome::Miss);
        // distance exactly equal to the radius is a miss
        assert_eq!(r.recurrence(1, &radii("1/5"), &opts), Outcome::Miss);
    }

    #[test]
    fn zero_radius_misses_random_points() {
        let map = MapSpec::doubling();
        let mut p = GenericPoint::sample(&map, 9);
        for n in 1..50 {
            assert_eq!(p.recurrence(n, &radii("0"), &PredicateOptions::default()), Outcome::Miss);
        }
    }

    #[test]
    fn periodic_streams_hit_at_period_multiples() {
        let maps = [MapSpec::doubling(), MapSpec::tent(), MapSpec::base(3).unwrap()];
        for map in &maps {
            let b = map.axis(0).branch_count() as u8;
            let cycle: Vec<u8> = (0..5).map(|i| (i * 7 + 1) % b).collect();
            let mut p = GenericPoint::periodic(map, vec![cycle]).unwrap();
            for m in 1..6 {
                assert_eq!(
                    p.recurrence(5 * m, &radii("1/1000000"), &PredicateOptions::default()),
                    Outcome::Hit
                );
            }
        }
    }

    #[test]
    fn target_examples() {
        let map = MapSpec::doubling();
        let opts = PredicateOptions::default();
        let t = TargetPoint::new(&map, vec![q("0")]).unwrap();
        // 1/3 = 0.0101...; orbit 2/3, 1/3, 2/3, ...
        let mut p = GenericPoint::periodic(&map, vec![vec![0, 1]]).unwrap();
        let hits: Vec<_> = (1..=4).map(|n| p.target(&t, n, &radii("2/5"), &opts)).collect();
        assert_eq!(hits, [Outcome::Miss, Outcome::Hit, Outcome::Miss, Outcome::Hit]);
    }

    #[test]
    fn torus_metric() {
        let map = MapSpec::doubling();
        let mut p = GenericPoint::from_rational(&map, vec![q("1/10")]).unwrap();
        let torus = PredicateOptions {
            metric: Metric::Torus,
            ..Default::default()
        };
        // T^3 x = 4/5: interval distance 7/10, torus distance 3/10.
        assert_eq!(p.recurrence(3, &radii("1/3"), &PredicateOptions::default()), Outcome::Miss);
        assert_eq!(p.recurrence(3, &radii("1/3"), &torus), Outcome::Hit);
    }

    #[test]
    fn seed_derivation_is_stable() {
        assert_eq!(splitmix64(0), 0);
        assert_ne!(point_seed(0, 0), point_seed(0, 1));
        assert_eq!(point_seed(5, 3), point_seed(5, 3));
    }

    /// Exact distance oracle on the depth-60 cylinder midpoint.
    fn midpoint_oracle(map: &MapSpec, word: &[u8], n: usize, r: &Rational) -> Option<bool> {
        let c = AxisCylinder::from_word(map.axis(0), word);
        let mid = (&c.left + &c.right) / Rational::from_integer(2);
        let y = map.iterate(std::slice::from_ref(&mid), n as u32).unwrap().remove(0);
        let d = (&y - &mid).abs();
        // The true point is within 2^-60 of the midpoint, and T^n moves that
        // error to at most 2^(n-60).
        let slack = Rational::from_dyadic(BigInt::from(1), 60)
            * (Rational::one() + Rational::from_integer(1i64 << n));
        if &d + &slack < *r {
            Some(true)
        } else if &d - &slack >= *r {
            Some(false)
        } else {
            None
        }
    }

    #[test]
    fn oracle_agreement_doubling() {
        let map = MapSpec::doubling();
        let opts = PredicateOptions::default();
        let mut checked = 0;
        for seed in 0..50u64 {
            let mut p = GenericPoint::sample(&map, point_seed(11, seed));
            let word = p.symbols(0, 60).unwrap().to_vec();
            for n in 1..=30usize {
                let r = Rational::new(1, 2 * n as i64 + 1);
                let got = p.recurrence(n as u64, &vec![r.clone()], &opts);
                if let Some(expected) = midpoint_oracle(&map, &word, n, &r) {
                    assert_eq!(got.is_hit(), expected, "seed {seed} n {n}");
                    assert_ne!(got, Outcome::Unresolved);
                    checked += 1;
                }
            }
        }
        assert!(checked > 1400);
    }

    #[test]
    fn irrational_radius_and_exact_fallback() {
        let map = MapSpec::doubling();
        let rate = RateFunction::power(q("1/2"), q("1/2")).unwrap();
        let mut p = GenericPoint::sample(&map, 5);
        let tiny = RateFunction::power(q("1"), q("20")).unwrap();
        for n in 1..200u64 {
            let a = p.recurrence(n, &RateRadii { rate: &rate, n }, &PredicateOptions::default());
            assert_ne!(a, Outcome::Unresolved);
            // radius ~ n^-20 forces the exact digit path for n >= 7
            let b = p.recurrence(n, &RateRadii { rate: &tiny, n }, &PredicateOptions::default());
            assert_ne!(b, Outcome::Unresolved);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fast_path_matches_affine_path(seed in any::<u64>(), n in 1u64..400, num in 1i64..400) {
            let r = vec![Rational::new(num, 800)];
            for map in [MapSpec::doubling(), MapSpec::base(3).unwrap()] {
                let mut p = GenericPoint::sample(&map, seed);
                let fast = p.recurrence(n, &r, &PredicateOptions::default());
                let slow = p.recurrence(n, &r, &PredicateOptions { fast_path: false, ..Default::default() });
                prop_assert_eq!(fast, slow);
                let t = TargetPoint::new(&map, vec![Rational::new(num, 401)]).unwrap();
                let fast = p.target(&t, n, &r, &PredicateOptions::default());
                let slow = p.target(&t, n, &r, &PredicateOptions { fast_path: false, ..Default::default() });
                prop_assert_eq!(fast, slow);
            }
        }

        #[test]
        fn larger_radii_never_lose_hits(seed in any::<u64>(), n in 1u64..200, a in 1i64..100, extra in 0i64..100) {
            let map = MapSpec::tent();
            let mut p = GenericPoint::sample(&map, seed);
            let small = vec![Rational::new(a, 200)];
            let big = vec![Rational::new(a + extra, 200)];
            let opts = PredicateOptions::default();
            if p.recurrence(n, &small, &opts) == Outcome::Hit {
                prop_assert_eq!(p.recurrence(n, &big, &opts), Outcome::Hit);
            }
        }

        #[test]
        fn product_map_axes_agree_with_1d(seed in any::<u64>(), n in 1u64..100) {
            // On toral-diag(2,3) a hit requires both axes to hit.
            let map = MapSpec::toral_diag(&[2, 3]).unwrap();
            let mut p = GenericPoint::sample(&map, seed);
            let r = vec![Rational::new(1, 4), Rational::new(1, 4)];
            let both = p.recurrence(n, &r, &PredicateOptions::default());
            let wide = vec![Rational::new(1, 4), Rational::from_integer(2)];
            let first = p.recurrence(n, &wide, &PredicateOptions::default());
            if both == Outcome::Hit {
                prop_assert_eq!(first, Outcome::Hit);
            }
        }
    }
}
