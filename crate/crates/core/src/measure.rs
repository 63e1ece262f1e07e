//! Exact Lebesgue measures of recurrence and target events by cylinder
//! decomposition.
//!
//! On a depth-`n` cylinder with `T^n(x)_i = K_i x_i - z_i`, the recurrence
//! condition `|T^n(x)_i - x_i| < psi_i(n)` is the open interval
//! `|(K_i - 1) x_i - z_i| < psi_i(n)` clipped to the cylinder. Every event used
//! here is a product over axes of one-dimensional sets (the map is a product
//! and the balls are per-axis), so an [`EventSet`] keeps one sorted interval
//! list per axis and measures are products of one-dimensional sums.
//!
//! Only the interval metric is supported.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::maps::{visit_axis_cylinders, AxisCylinder, AxisMap, MapError, MapSpec, DEFAULT_CYLINDER_CAP};
use crate::rate::{RateError, RateFunction};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("rectangle has {got} axes, map has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("rectangle side [{lo}, {hi}] is not inside [0,1]")]
    BadRectangle { lo: Rational, hi: Rational },
    #[error("events have different dimensions")]
    Mismatch,
}

/// An exact measure in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasureValue(Rational);

impl MeasureValue {
    pub fn new(value: Rational) -> Self {
        debug_assert!(!value.is_negative() && value <= Rational::one(), "{value}");
        MeasureValue(value)
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

impl fmt::Display for MeasureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A closed coordinate-parallel rectangle, one `(lo, hi)` per axis.
pub type Rect = Vec<(Rational, Rational)>;

pub fn rect_measure(r: &[(Rational, Rational)]) -> Rational {
    r.iter()
        .fold(Rational::one(), |acc, (lo, hi)| acc * (hi - lo).max(Rational::zero()))
}

fn check_rect(map: &MapSpec, r: &[(Rational, Rational)]) -> Result<(), MeasureError> {
    if r.len() != map.dimension() {
        return Err(MeasureError::Dimension {
            expected: map.dimension(),
            got: r.len(),
        });
    }
    for (lo, hi) in r {
        if lo.is_negative() || *hi > Rational::one() || lo > hi {
            return Err(MeasureError::BadRectangle {
                lo: lo.clone(),
                hi: hi.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventTag {
    Recurrence { n: u32 },
    Target { n: u32 },
    Pullback { n: u32 },
    Intersection { m: u32, n: u32 },
}

/// The part of an event inside one axis cylinder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Piece {
    /// Lexicographic index of the depth-`n` axis cylinder.
    pub cylinder: u64,
    pub lo: Rational,
    pub hi: Rational,
}

impl Piece {
    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }
}

/// A product event: per axis a sorted list of disjoint non-empty intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSet {
    pub tag: EventTag,
    pub depth: u32,
    pub axes: Vec<Vec<Piece>>,
}

impl EventSet {
    pub fn axis_measure(&self, axis: usize) -> Rational {
        self.axes[axis].iter().map(Piece::length).sum()
    }

    pub fn measure(&self) -> MeasureValue {
        MeasureValue::new(
            (0..self.axes.len()).fold(Rational::one(), |acc, i| acc * self.axis_measure(i)),
        )
    }

    /// `mu(self ∩ rect)`.
    pub fn measure_within(&self, rect: &[(Rational, Rational)]) -> MeasureValue {
        let mut total = Rational::one();
        for (pieces, (lo, hi)) in self.axes.iter().zip(rect) {
            total *= pieces
                .iter()
                .map(|p| overlap(&p.lo, &p.hi, lo, hi))
                .sum::<Rational>();
        }
        MeasureValue::new(total)
    }

    /// Membership of an exact point (interior of the pieces).
    pub fn contains(&self, x: &[Rational]) -> bool {
        self.axes.iter().zip(x).all(|(pieces, v)| {
            let i = pieces.partition_point(|p| p.hi <= *v);
            pieces.get(i).is_some_and(|p| p.lo < *v && *v < p.hi)
        })
    }

    /// Number of product rectangles (non-empty cylinder portions).
    pub fn rectangle_count(&self) -> u128 {
        self.axes.iter().map(|a| a.len() as u128).product()
    }

    /// All product rectangles, axis 0 most significant.
    pub fn rectangles(&self) -> impl Iterator<Item = Rect> + '_ {
        let total = self.rectangle_count() as usize;
        (0..total).map(move |mut i| {
            let mut out = vec![(Rational::zero(), Rational::zero()); self.axes.len()];
            for (slot, list) in out.iter_mut().zip(&self.axes).rev() {
                let p = &list[i % list.len()];
                *slot = (p.lo.clone(), p.hi.clone());
                i /= list.len();
            }
            out
        })
    }

    /// The intersection, as an event at the deeper of the two depths.
    pub fn intersect(&self, other: &EventSet) -> Result<EventSet, MeasureError> {
        if self.axes.len() != other.axes.len() {
            return Err(MeasureError::Mismatch);
        }
        let (shallow, deep) = if self.depth <= other.depth {
            (self, other)
        } else {
            (other, self)
        };
        let axes = shallow
            .axes
            .iter()
            .zip(&deep.axes)
            .map(|(a, b)| intersect_sorted(a, b))
            .collect();
        Ok(EventSet {
            tag: EventTag::Intersection {
                m: shallow.depth,
                n: deep.depth,
            },
            depth: deep.depth,
            axes,
        })
    }
}

fn overlap(a: &Rational, b: &Rational, c: &Rational, d: &Rational) -> Rational {
    let lo = if a > c { a } else { c };
    let hi = if b < d { b } else { d };
    if hi > lo {
        hi - lo
    } else {
        Rational::zero()
    }
}

/// Two-pointer intersection of sorted disjoint interval lists; pieces keep the
/// cylinder labels of `deep`.
fn intersect_sorted(shallow: &[Piece], deep: &[Piece]) -> Vec<Piece> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < shallow.len() && j < deep.len() {
        let (a, b) = (&shallow[i], &deep[j]);
        let lo = if a.lo > b.lo { &a.lo } else { &b.lo };
        let hi = if a.hi < b.hi { &a.hi } else { &b.hi };
        if lo < hi {
            out.push(Piece {
                cylinder: b.cylinder,
                lo: lo.clone(),
                hi: hi.clone(),
            });
        }
        if a.hi < b.hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Window of `|(K-1) x - z| < psi` inside the cylinder `c`.
fn recurrence_window(c: &AxisCylinder, psi: &Rational) -> Option<(Rational, Rational)> {
    if !psi.is_positive() {
        return None;
    }
    let km1 = &c.slope - Rational::one();
    let a = (&c.offset - psi) / &km1;
    let b = (&c.offset + psi) / &km1;
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let lo = a.max(c.left.clone());
    let hi = b.min(c.right.clone());
    (lo < hi).then_some((lo, hi))
}

/// Preimage of `[a, b] ⊆ [0,1]` under the cylinder's affine branch.
fn pullback_window(c: &AxisCylinder, a: &Rational, b: &Rational) -> Option<(Rational, Rational)> {
    if a >= b {
        return None;
    }
    let u = (a + &c.offset) / &c.slope;
    let v = (b + &c.offset) / &c.slope;
    Some(if u <= v { (u, v) } else { (v, u) })
}

fn sorted(mut pieces: Vec<Piece>) -> Vec<Piece> {
    pieces.sort_by(|p, q| p.lo.cmp(&q.lo));
    pieces
}

fn axis_pieces(
    axis: &AxisMap,
    n: u32,
    mut window: impl FnMut(&AxisCylinder) -> Option<(Rational, Rational)>,
) -> Vec<Piece> {
    let mut pieces = Vec::new();
    visit_axis_cylinders(axis, n, |c| {
        if let Some((lo, hi)) = window(&c) {
            pieces.push(Piece {
                cylinder: c.index,
                lo,
                hi,
            });
        }
    });
    sorted(pieces)
}

fn clipped_ball(center: &Rational, r: &Rational) -> (Rational, Rational) {
    ((center - r).max(Rational::zero()), (center + r).min(Rational::one()))
}

/// `A_n = {x : |T^n(x)_i - x_i| < psi_i(n) for all i}`.
pub fn event_recurrence(map: &MapSpec, rate: &RateFunction, n: u32) -> Result<EventSet, MeasureError> {
    event_recurrence_with_cap(map, rate, n, DEFAULT_CYLINDER_CAP)
}

pub fn event_recurrence_with_cap(
    map: &MapSpec,
    rate: &RateFunction,
    n: u32,
    cap: u64,
) -> Result<EventSet, MeasureError> {
    map.check_depth(n, cap)?;
    rate.check_dimension(map.dimension())?;
    let radii = rate.exact_radii(n as u64)?;
    let axes = map
        .axes()
        .iter()
        .zip(&radii)
        .map(|(axis, psi)| axis_pieces(axis, n, |c| recurrence_window(c, psi)))
        .collect();
    Ok(EventSet {
        tag: EventTag::Recurrence { n },
        depth: n,
        axes,
    })
}

/// `E_n = T^-n B(x0, psi(n))`, balls clipped to `[0,1]^d`.
pub fn event_target(
    map: &MapSpec,
    rate: &RateFunction,
    x0: &[Rational],
    n: u32,
) -> Result<EventSet, MeasureError> {
    rate.check_dimension(map.dimension())?;
    map.check_point(x0)?;
    let radii = rate.exact_radii(n as u64)?;
    let ball: Rect = x0.iter().zip(&radii).map(|(c, r)| clipped_ball(c, r)).collect();
    let mut e = event_pullback(map, &ball, n)?;
    e.tag = EventTag::Target { n };
    Ok(e)
}

/// `T^-n F` for a rectangle `F`.
pub fn event_pullback(map: &MapSpec, f: &[(Rational, Rational)], n: u32) -> Result<EventSet, MeasureError> {
    map.check_depth(n, DEFAULT_CYLINDER_CAP)?;
    check_rect(map, f)?;
    let axes = map
        .axes()
        .iter()
        .zip(f)
        .map(|(axis, (a, b))| axis_pieces(axis, n, |c| pullback_window(c, a, b)))
        .collect();
    Ok(EventSet {
        tag: EventTag::Pullback { n },
        depth: n,
        axes,
    })
}

pub fn measure(e: &EventSet) -> MeasureValue {
    e.measure()
}

/// `mu(a ∩ b)`.
pub fn measure_intersection(a: &EventSet, b: &EventSet) -> Result<MeasureValue, MeasureError> {
    Ok(a.intersect(b)?.measure())
}

/// `mu(A_n)` without materializing the pieces.
pub fn recurrence_measure(map: &MapSpec, rate: &RateFunction, n: u32) -> Result<MeasureValue, MeasureError> {
    map.check_depth(n, DEFAULT_CYLINDER_CAP)?;
    rate.check_dimension(map.dimension())?;
    let radii = rate.exact_radii(n as u64)?;
    let mut total = Rational::one();
    for (axis, psi) in map.axes().iter().zip(&radii) {
        let mut sum = Rational::zero();
        visit_axis_cylinders(axis, n, |c| {
            if let Some((lo, hi)) = recurrence_window(&c, psi) {
                sum += hi - lo;
            }
        });
        total *= sum;
    }
    Ok(MeasureValue::new(total))
}

/// `Phi(N) = sum_{n<=N} mu(A_n)`.
pub fn phi_sum(map: &MapSpec, rate: &RateFunction, n_max: u32) -> Result<Rational, MeasureError> {
    Ok(phi_partial_sums(map, rate, n_max)?.pop().unwrap_or_else(Rational::zero))
}

/// `[Phi(1), ..., Phi(N)]`.
pub fn phi_partial_sums(map: &MapSpec, rate: &RateFunction, n_max: u32) -> Result<Vec<Rational>, MeasureError> {
    let mut acc = Rational::zero();
    (1..=n_max)
        .map(|n| {
            acc += recurrence_measure(map, rate, n)?.into_inner();
            Ok(acc.clone())
        })
        .collect()
}

/// Depth-`n` cylinder of one axis containing `x` (half-open convention).
fn axis_locate(axis: &AxisMap, x: &Rational, n: u32) -> AxisCylinder {
    let mut word = Vec::with_capacity(n as usize);
    let mut y = x.clone();
    for _ in 0..n {
        let s = axis.branch_index(&y);
        word.push(s as u8);
        y = axis.branches()[s].apply(&y);
    }
    AxisCylinder::from_word(axis, &word)
}

/// `mu(E_i ∩ T_i^-n [a, b])` on one axis. Cylinders strictly inside `E_i`
/// contribute `(b - a)` times their length; only the two cylinders holding
/// the endpoints of `E_i` are cut explicitly.
fn axis_pullback_within(axis: &AxisMap, n: u32, e: &(Rational, Rational), f: &(Rational, Rational)) -> Rational {
    let (lo, hi) = e;
    let (a, b) = f;
    if lo >= hi || a >= b {
        return Rational::zero();
    }
    let cut = |c: &AxisCylinder| {
        pullback_window(c, a, b).map_or_else(Rational::zero, |(u, v)| overlap(&u, &v, lo, hi))
    };
    let first = axis_locate(axis, lo, n);
    let last = axis_locate(axis, hi, n);
    if first.index == last.index {
        return cut(&first);
    }
    let inner = (&last.left - &first.right).max(Rational::zero());
    cut(&first) + cut(&last) + inner * (b - a)
}

/// `mu(E ∩ T^-n F) - mu(E) mu(F)` for a rectangle `E` and a disjoint union
/// of rectangles `F`.
pub fn mixing_deficit(
    map: &MapSpec,
    e: &[(Rational, Rational)],
    f: &[Rect],
    n: u32,
) -> Result<Rational, MeasureError> {
    map.check_depth(n, DEFAULT_CYLINDER_CAP)?;
    check_rect(map, e)?;
    let mut joint = Rational::zero();
    let mut mu_f = Rational::zero();
    for rect in f {
        check_rect(map, rect)?;
        mu_f += rect_measure(rect);
        joint += map
            .axes()
            .iter()
            .zip(e)
            .zip(rect)
            .fold(Rational::one(), |acc, ((axis, ei), fi)| acc * axis_pullback_within(axis, n, ei, fi));
    }
    Ok(joint - rect_measure(e) * mu_f)
}

/// [`mixing_deficit`] computed by visiting every depth-`n` cylinder.
pub fn mixing_deficit_direct(
    map: &MapSpec,
    e: &[(Rational, Rational)],
    f: &[Rect],
    n: u32,
) -> Result<Rational, MeasureError> {
    check_rect(map, e)?;
    let mut joint = Rational::zero();
    let mut mu_f = Rational::zero();
    for rect in f {
        mu_f += rect_measure(rect);
        joint += event_pullback(map, rect, n)?.measure_within(e).into_inner();
    }
    Ok(joint - rect_measure(e) * mu_f)
}

/// Header of the oracle CSV.
pub const ORACLE_CSV_HEADER: &str = "kind,n,m,measure_exact,measure_float";

/// One oracle CSV row. `m` is empty except for intersections.
pub fn oracle_csv_row(kind: &str, n: u32, m: Option<u32>, value: &Rational) -> String {
    let m = m.map_or_else(String::new, |m| m.to_string());
    format!("{kind},{n},{m},{value},{}", value.to_f64())
}
