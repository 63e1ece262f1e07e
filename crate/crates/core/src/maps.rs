//! Expanding piecewise-linear full-branch maps on `[0,1]^d` and their cylinders.
//!
//! A [`MapSpec`] is a product of one-dimensional maps. On every axis the
//! branches are affine maps `x -> slope * x - offset` defined on half-open
//! intervals `[left, right)` that tile `[0,1)`, each sent onto `[0,1]`. The
//! point `1` belongs to the last branch.
//!
//! A depth-`m` cylinder is the set of points sharing the first `m` symbols of
//! their itinerary. On it `T^m` is affine, `T^m(x)_i = K_i x_i - z_i`, and the
//! composition rule in orbit order is `(K, z) -> (k K, k z + w)` when the
//! next branch is `x -> k x - w`.

use std::fmt;

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// Default bound on the number of cylinders any enumeration may produce.
pub const DEFAULT_CYLINDER_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("axis {axis}: map has no branches")]
    NoBranches { axis: usize },
    #[error("axis {axis}, branch {branch}: branch image is not [0,1] (slope {slope} on [{left},{right}) with offset {offset})")]
    NotFullBranch {
        axis: usize,
        branch: usize,
        left: Rational,
        right: Rational,
        slope: Rational,
        offset: Rational,
    },
    #[error("axis {axis}, branch {branch}: |slope| must exceed 1, got {slope}")]
    NotExpanding {
        axis: usize,
        branch: usize,
        slope: Rational,
    },
    #[error("axis {axis}: branch domains must tile [0,1) left to right ({detail})")]
    NotPartition { axis: usize, detail: String },
    #[error("axis {axis}: at most 256 branches are supported, got {count}")]
    TooManyBranches { axis: usize, count: usize },
    #[error("axis {axis}: branch lengths need a common denominator below 2^63 for exact sampling")]
    SamplingDenominator { axis: usize },
    #[error("map must have at least one axis")]
    NoAxes,
    #[error("unknown built-in map `{0}`")]
    UnknownBuiltin(String),
    #[error("point has dimension {got}, map has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {axis} = {value} lies outside [0,1]")]
    OutOfDomain { axis: usize, value: Rational },
    #[error("depth {depth} would need {count} cylinders, above the cap of {cap}")]
    DepthCapExceeded { depth: u32, count: String, cap: u64 },
}

/// One affine full branch `x -> slope * x - offset` on `[left, right)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchSpec1D {
    pub left: Rational,
    pub right: Rational,
    pub slope: Rational,
    pub offset: Rational,
}

impl BranchSpec1D {
    pub fn new(left: Rational, right: Rational, slope: Rational, offset: Rational) -> Self {
        BranchSpec1D {
            left,
            right,
            slope,
            offset,
        }
    }

    pub fn length(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x - &self.offset
    }

    /// Image endpoints must be exactly `{0, 1}`.
    fn is_full(&self) -> bool {
        let a = self.apply(&self.left);
        let b = self.apply(&self.right);
        let (zero, one) = (Rational::zero(), Rational::one());
        (a == zero && b == one) || (a == one && b == zero)
    }
}

/// The branches of one coordinate, sorted by `left`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisMap {
    branches: Vec<BranchSpec1D>,
    #[serde(skip)]
    weights: Vec<u64>,
    #[serde(skip)]
    weight_total: u64,
    #[serde(skip)]
    digit_base: Option<u32>,
}

impl AxisMap {
    fn new(axis: usize, mut branches: Vec<BranchSpec1D>) -> Result<Self, MapError> {
        if branches.is_empty() {
            return Err(MapError::NoBranches { axis });
        }
        if branches.len() > 256 {
            return Err(MapError::TooManyBranches {
                axis,
                count: branches.len(),
            });
        }
        branches.sort_by(|a, b| a.left.cmp(&b.left));
        let mut cursor = Rational::zero();
        for (i, b) in branches.iter().enumerate() {
            if b.left != cursor {
                return Err(MapError::NotPartition {
                    axis,
                    detail: format!("gap or overlap at {cursor}, next branch starts at {}", b.left),
                });
            }
            if b.right <= b.left {
                return Err(MapError::NotPartition {
                    axis,
                    detail: format!("empty branch [{}, {})", b.left, b.right),
                });
            }
            if !b.is_full() {
                return Err(MapError::NotFullBranch {
                    axis,
                    branch: i,
                    left: b.left.clone(),
                    right: b.right.clone(),
                    slope: b.slope.clone(),
                    offset: b.offset.clone(),
                });
            }
            if b.slope.abs() <= Rational::one() {
                return Err(MapError::NotExpanding {
                    axis,
                    branch: i,
                    slope: b.slope.clone(),
                });
            }
            cursor = b.right.clone();
        }
        if cursor != Rational::one() {
            return Err(MapError::NotPartition {
                axis,
                detail: format!("branches end at {cursor}, not 1"),
            });
        }

        let mut denom = num_bigint::BigInt::from(1);
        for b in &branches {
            denom = denom.lcm(&b.length().denom());
        }
        let total = denom
            .to_u64()
            .filter(|&q| q < (1u64 << 63))
            .ok_or(MapError::SamplingDenominator { axis })?;
        let weights = branches
            .iter()
            .map(|b| {
                (b.length() * Rational::from_bigint(denom.clone()))
                    .numer()
                    .to_u64()
                    .expect("weight bounded by total")
            })
            .collect();

        let digit_base = match branches[0].slope.numer().to_u32() {
            Some(base)
                if branches[0].slope.is_integer()
                    && base as usize == branches.len()
                    && branches.iter().all(|b| b.slope == branches[0].slope) =>
            {
                Some(base)
            }
            _ => None,
        };

        Ok(AxisMap {
            branches,
            weights,
            weight_total: total,
            digit_base,
        })
    }

    pub fn branches(&self) -> &[BranchSpec1D] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Sampling weights: branch `s` has probability `weights()[s] / weight_total()`.
    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn weight_total(&self) -> u64 {
        self.weight_total
    }

    /// `Some(b)` when every branch is `x -> b x - j` on `[j/b, (j+1)/b)`, so the
    /// coordinate is a base-`b` digit stream and `T` is the digit shift.
    pub fn digit_base(&self) -> Option<u32> {
        self.digit_base
    }

    pub fn min_abs_slope(&self) -> Rational {
        self.branches
            .iter()
            .map(|b| b.slope.abs())
            .min()
            .expect("non-empty")
    }

    pub fn max_abs_slope(&self) -> Rational {
        self.branches
            .iter()
            .map(|b| b.slope.abs())
            .max()
            .expect("non-empty")
    }

    /// Index of the branch containing `x` under the half-open convention.
    pub fn branch_index(&self, x: &Rational) -> usize {
        if *x >= Rational::one() {
            return self.branches.len() - 1;
        }
        // First branch whose right endpoint exceeds x.
        self.branches
            .partition_point(|b| b.right <= *x)
            .min(self.branches.len() - 1)
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        self.branches[self.branch_index(x)].apply(x)
    }
}

/// A product of one-dimensional full-branch expanding maps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapSpec {
    axes: Vec<AxisMap>,
    lambda: Rational,
}

impl MapSpec {
    /// Validates and builds a map from per-axis branch lists (any order).
    pub fn new(axes: Vec<Vec<BranchSpec1D>>) -> Result<Self, MapError> {
        if axes.is_empty() {
            return Err(MapError::NoAxes);
        }
        let axes = axes
            .into_iter()
            .enumerate()
            .map(|(i, b)| AxisMap::new(i, b))
            .collect::<Result<Vec<_>, _>>()?;
        let lambda = axes
            .iter()
            .map(AxisMap::min_abs_slope)
            .min()
            .expect("non-empty");
        Ok(MapSpec { axes, lambda })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisMap] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &AxisMap {
        &self.axes[i]
    }

    /// Minimum `|slope|` over all branches of all axes.
    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    /// True when every axis admits the digit-shift representation.
    pub fn is_digit_map(&self) -> bool {
        self.axes.iter().all(|a| a.digit_base().is_some())
    }

    /// `x -> 2x mod 1`.
    pub fn doubling() -> Self {
        Self::base(2).expect("valid")
    }

    /// `x -> 2x` on `[0,1/2)`, `x -> 2 - 2x` on `[1/2,1)`.
    pub fn tent() -> Self {
        let q = Rational::new;
        Self::new(vec![vec![
            BranchSpec1D::new(q(0, 1), q(1, 2), q(2, 1), q(0, 1)),
            BranchSpec1D::new(q(1, 2), q(1, 1), q(-2, 1), q(-2, 1)),
        ]])
        .expect("valid")
    }

    /// `x -> b x mod 1` (for negative `b`, `x -> b x + j + 1` on the `j`-th branch).
    pub fn base(b: i64) -> Result<Self, MapError> {
        Self::new(vec![base_axis(b)?])
    }

    /// Diagonal toral endomorphism `x -> (a_1 x_1, ..., a_d x_d) mod 1`.
    pub fn toral_diag(factors: &[i64]) -> Result<Self, MapError> {
        if factors.is_empty() {
            return Err(MapError::NoAxes);
        }
        Self::new(
            factors
                .iter()
                .map(|&a| base_axis(a))
                .collect::<Result<Vec<_>, _>>()?,
        )
    }

    /// Lüroth branches `x -> n(n+1) x - n` on `[1/(n+1), 1/n)` for `n < k`, with
    /// the remaining mass `[0, 1/k)` merged into one branch `x -> k x`. This
    /// is a finite full-branch approximation of the Lüroth map.
    pub fn luroth_truncated(k: i64) -> Result<Self, MapError> {
        if k < 2 {
            return Err(MapError::UnknownBuiltin(format!("luroth-trunc-{k}")));
        }
        let q = Rational::new;
        let mut branches = vec![BranchSpec1D::new(q(0, 1), q(1, k), q(k, 1), q(0, 1))];
        for n in 1..k {
            branches.push(BranchSpec1D::new(
                q(1, n + 1),
                q(1, n),
                q(n * (n + 1), 1),
                q(n, 1),
            ));
        }
        Self::new(vec![branches])
    }

    /// Resolves a built-in name: `doubling`, `tent`, `base-<b>`,
    /// `luroth-trunc-<k>`, `toral-diag(a_1,...,a_d)`.
    pub fn builtin(name: &str) -> Result<Self, MapError> {
        let unknown = || MapError::UnknownBuiltin(name.to_string());
        let name_t = name.trim();
        match name_t {
            "doubling" => return Ok(Self::doubling()),
            "tent" => return Ok(Self::tent()),
            _ => {}
        }
        if let Some(b) = name_t.strip_prefix("base-") {
            let b: i64 = b.parse().map_err(|_| unknown())?;
            if b < 2 {
                return Err(unknown());
            }
            return Self::base(b);
        }
        if let Some(k) = name_t.strip_prefix("luroth-trunc-") {
            let k: i64 = k.parse().map_err(|_| unknown())?;
            return Self::luroth_truncated(k);
        }
        if let Some(rest) = name_t.strip_prefix("toral-diag(") {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            let factors = inner
                .split(',')
                .map(|s| s.trim().parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| unknown())?;
            if factors.iter().any(|a| a.abs() < 2) {
                return Err(unknown());
            }
            return Self::toral_diag(&factors);
        }
        Err(unknown())
    }

    /// `T(x)`, exactly.
    pub fn eval(&self, x: &[Rational]) -> Result<Vec<Rational>, MapError> {
        self.check_point(x)?;
        Ok(self
            .axes
            .iter()
            .zip(x)
            .map(|(axis, xi)| axis.apply(xi))
            .collect())
    }

    /// `T^n(x)`, exactly.
    pub fn iterate(&self, x: &[Rational], n: u32) -> Result<Vec<Rational>, MapError> {
        let mut y = x.to_vec();
        for _ in 0..n {
            y = self.eval(&y)?;
        }
        Ok(y)
    }

    /// Checks that `x` has the right dimension and lies in `[0,1]^d`.
    pub fn check_point(&self, x: &[Rational]) -> Result<(), MapError> {
        if x.len() != self.dimension() {
            return Err(MapError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        for (axis, v) in x.iter().enumerate() {
            if v.is_negative() || *v > Rational::one() {
                return Err(MapError::OutOfDomain {
                    axis,
                    value: v.clone(),
                });
            }
        }
        Ok(())
    }

    /// Number of depth-`m` cylinders, or `None` on overflow.
    pub fn cylinder_count(&self, m: u32) -> Option<u128> {
        let mut total: u128 = 1;
        for axis in &self.axes {
            let b = axis.branch_count() as u128;
            for _ in 0..m {
                total = total.checked_mul(b)?;
            }
        }
        Some(total)
    }

    pub(crate) fn check_depth(&self, m: u32, cap: u64) -> Result<(), MapError> {
        match self.cylinder_count(m) {
            Some(c) if c <= cap as u128 => Ok(()),
            c => Err(MapError::DepthCapExceeded {
                depth: m,
                count: c.map_or_else(|| "overflow".to_string(), |c| c.to_string()),
                cap,
            }),
        }
    }

    /// All depth-`m` cylinders, in lexicographic order of their words
    /// (axis 0 most significant), subject to [`DEFAULT_CYLINDER_CAP`].
    pub fn cylinders(&self, m: u32) -> Result<Cylinders, MapError> {
        self.cylinders_with_cap(m, DEFAULT_CYLINDER_CAP)
    }

    pub fn cylinders_with_cap(&self, m: u32, cap: u64) -> Result<Cylinders, MapError> {
        self.check_depth(m, cap)?;
        let per_axis = self
            .axes
            .iter()
            .map(|a| axis_cylinders(a, m))
            .collect::<Vec<_>>();
        let total = per_axis.iter().map(Vec::len).product();
        Ok(Cylinders {
            depth: m,
            per_axis,
            next: 0,
            total,
        })
    }

    /// The depth-`m` cylinder containing `x`.
    pub fn locate(&self, x: &[Rational], m: u32) -> Result<Cylinder, MapError> {
        self.locate_with_cap(x, m, DEFAULT_CYLINDER_CAP)
    }

    pub fn locate_with_cap(&self, x: &[Rational], m: u32, cap: u64) -> Result<Cylinder, MapError> {
        self.check_point(x)?;
        self.check_depth(m, cap)?;
        let axes = self
            .axes
            .iter()
            .zip(x)
            .map(|(axis, xi)| {
                let mut word = Vec::with_capacity(m as usize);
                let mut y = xi.clone();
                for _ in 0..m {
                    let s = axis.branch_index(&y);
                    word.push(s as u8);
                    y = axis.branches[s].apply(&y);
                }
                AxisCylinder::from_word(axis, &word)
            })
            .collect();
        Ok(Cylinder { depth: m, axes })
    }
}

fn base_axis(b: i64) -> Result<Vec<BranchSpec1D>, MapError> {
    if b.abs() < 2 {
        return Err(MapError::NotExpanding {
            axis: 0,
            branch: 0,
            slope: Rational::from_integer(b),
        });
    }
    let n = b.abs();
    Ok((0..n)
        .map(|j| {
            let offset = if b > 0 { j } else { -(j + 1) };
            BranchSpec1D::new(
                Rational::new(j, n),
                Rational::new(j + 1, n),
                Rational::from_integer(b),
                Rational::from_integer(offset),
            )
        })
        .collect())
}

/// One coordinate of a cylinder: `T^m(x)_i = slope * x_i - offset` on `[left, right)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxisCylinder {
    /// Lexicographic index of the symbol word (first symbol most significant).
    pub index: u64,
    pub left: Rational,
    pub right: Rational,
    /// Composed slope `K`.
    pub slope: Rational,
    /// Composed offset `z`.
    pub offset: Rational,
}

impl AxisCylinder {
    /// The cylinder determined by a symbol word.
    pub fn from_word(axis: &AxisMap, word: &[u8]) -> AxisCylinder {
        let b = axis.branch_count() as u64;
        let mut slope = Rational::one();
        let mut offset = Rational::zero();
        let mut index = 0u64;
        for &s in word {
            let br = &axis.branches[s as usize];
            offset = &br.slope * &offset + &br.offset;
            slope = &br.slope * &slope;
            index = index.wrapping_mul(b).wrapping_add(s as u64);
        }
        Self::from_affine(index, slope, offset)
    }

    pub(crate) fn from_affine(index: u64, slope: Rational, offset: Rational) -> AxisCylinder {
        // Preimage of [0,1] under y = K x - z.
        let a = &offset / &slope;
        let b = (&offset + Rational::one()) / &slope;
        let (left, right) = if a <= b { (a, b) } else { (b, a) };
        AxisCylinder {
            index,
            left,
            right,
            slope,
            offset,
        }
    }

    pub fn length(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x - &self.offset
    }
}

/// A depth-`m` cylinder of a product map.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cylinder {
    pub depth: u32,
    pub axes: Vec<AxisCylinder>,
}

impl Cylinder {
    pub fn measure(&self) -> Rational {
        self.axes
            .iter()
            .fold(Rational::one(), |acc, a| acc * a.length())
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.axes.iter().zip(x).map(|(a, xi)| a.apply(xi)).collect()
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[{},{}) K={} z={}", a.left, a.right, a.slope, a.offset)?;
        }
        Ok(())
    }
}

/// Visits the depth-`m` cylinders of one axis in lexicographic word order.
pub fn visit_axis_cylinders(axis: &AxisMap, m: u32, mut f: impl FnMut(AxisCylinder)) {
    fn rec(
        axis: &AxisMap,
        depth: u32,
        index: u64,
        slope: &Rational,
        offset: &Rational,
        f: &mut dyn FnMut(AxisCylinder),
    ) {
        if depth == 0 {
            f(AxisCylinder::from_affine(index, slope.clone(), offset.clone()));
            return;
        }
        let b = axis.branch_count() as u64;
        for (s, br) in axis.branches.iter().enumerate() {
            let k = &br.slope * slope;
            let z = &br.slope * offset + &br.offset;
            rec(axis, depth - 1, index * b + s as u64, &k, &z, f);
        }
    }
    rec(axis, m, 0, &Rational::one(), &Rational::zero(), &mut f);
}

/// The depth-`m` cylinders of one axis, in lexicographic word order.
pub fn axis_cylinders(axis: &AxisMap, m: u32) -> Vec<AxisCylinder> {
    let mut out = Vec::new();
    visit_axis_cylinders(axis, m, |c| out.push(c));
    out
}

/// Iterator over the product cylinders of a map at one depth.
#[derive(Debug, Clone)]
pub struct Cylinders {
    depth: u32,
    per_axis: Vec<Vec<AxisCylinder>>,
    next: usize,
    total: usize,
}

impl Cylinders {
    pub fn per_axis(&self) -> &[Vec<AxisCylinder>] {
        &self.per_axis
    }

    /// Product cylinder number `i` (axis 0 most significant).
    pub fn get(&self, mut i: usize) -> Cylinder {
        let mut axes = vec![None; self.per_axis.len()];
        for (slot, list) in axes.iter_mut().zip(&self.per_axis).rev() {
            let n = list.len();
            *slot = Some(list[i % n].clone());
            i /= n;
        }
        Cylinder {
            depth: self.depth,
            axes: axes.into_iter().map(|a| a.expect("filled")).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

impl Iterator for Cylinders {
    type Item = Cylinder;

    fn next(&mut self) -> Option<Cylinder> {
        if self.next >= self.total {
            return None;
        }
        let c = self.get(self.next);
        self.next += 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.total - self.next;
        (r, Some(r))
    }
}

impl ExactSizeIterator for Cylinders {}
