//! Rate functions `psi_i(n)` and certified enclosures of their values.
//!
//! Rates with fractional exponents or logarithms take irrational values, so
//! every family provides two views of `psi_i(n)`:
//!
//! - [`RateFunction::filter`]: a cheap `f64` interval used to settle almost
//!   every comparison. Exactly-rational values are rounded outward; the other
//!   families are evaluated with `powf`/`ln` and widened by a relative
//!   `2^-40`, far beyond the few-ulp error of any libm.
//! - [`RateFunction::enclose`]: a rigorous rational interval of width at most
//!   about `2^-bits`, built from integer roots and an `atanh` series for `ln`.
//!   This is what near-ties fall back to.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

const FILTER_WIDEN: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RateError {
    #[error("psi must be >= 0: {0}")]
    Negative(String),
    #[error("exponent denominator too large in {0}")]
    Exponent(String),
    #[error("rate has {rate} axes but the map has {map}")]
    Dimension { rate: usize, map: usize },
    #[error("psi_{axis}({n}) is irrational; an exact value is not available")]
    Irrational { axis: usize, n: u64 },
}

/// One coordinate's rate family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RateFamily {
    /// `c * n^-p`
    Power { c: Rational, p: Rational },
    /// `c * n^-p * ln(n+1)^-q`
    PowerLog { c: Rational, p: Rational, q: Rational },
    /// `c`
    Constant { c: Rational },
    /// `values[n-1]`; zero past the end.
    Table { values: Vec<Rational> },
}

impl RateFamily {
    pub fn power(c: Rational, p: Rational) -> Self {
        RateFamily::Power { c, p }
    }

    pub fn constant(c: Rational) -> Self {
        RateFamily::Constant { c }
    }

    fn validate(&self) -> Result<(), RateError> {
        let check_exp = |e: &Rational| -> Result<(), RateError> {
            match e.denom().to_u32() {
                Some(d) if d <= 64 && e.numer().abs() <= BigInt::from(64) => Ok(()),
                _ => Err(RateError::Exponent(format!("{self:?}"))),
            }
        };
        match self {
            RateFamily::Power { c, p } => {
                check_exp(p)?;
                if c.is_negative() {
                    return Err(RateError::Negative(format!("c = {c}")));
                }
            }
            RateFamily::PowerLog { c, p, q } => {
                check_exp(p)?;
                check_exp(q)?;
                if c.is_negative() {
                    return Err(RateError::Negative(format!("c = {c}")));
                }
            }
            RateFamily::Constant { c } => {
                if c.is_negative() {
                    return Err(RateError::Negative(format!("c = {c}")));
                }
            }
            RateFamily::Table { values } => {
                if let Some(v) = values.iter().find(|v| v.is_negative()) {
                    return Err(RateError::Negative(format!("table entry {v}")));
                }
            }
        }
        Ok(())
    }

    /// `Some(psi(n))` when the value is rational.
    pub fn exact(&self, n: u64) -> Option<Rational> {
        match self {
            RateFamily::Constant { c } => Some(c.clone()),
            RateFamily::Table { values } => {
                Some(values.get(n as usize - 1).cloned().unwrap_or_else(Rational::zero))
            }
            RateFamily::Power { c, p } => {
                if c.is_zero() {
                    return Some(Rational::zero());
                }
                power_exact(n, p).map(|v| c * v)
            }
            RateFamily::PowerLog { c, p, q } => {
                if c.is_zero() {
                    return Some(Rational::zero());
                }
                if q.is_zero() {
                    power_exact(n, p).map(|v| c * v)
                } else {
                    None
                }
            }
        }
    }

    /// Plain floating-point value (not certified).
    pub fn value_f64(&self, n: u64) -> f64 {
        let nf = n as f64;
        match self {
            RateFamily::Constant { c } => c.to_f64(),
            RateFamily::Table { values } => values.get(n as usize - 1).map_or(0.0, Rational::to_f64),
            RateFamily::Power { c, p } => c.to_f64() * nf.powf(-p.to_f64()),
            RateFamily::PowerLog { c, p, q } => {
                c.to_f64() * nf.powf(-p.to_f64()) * ((nf + 1.0).ln()).powf(-q.to_f64())
            }
        }
    }

    /// Certified `f64` interval containing `psi(n)`.
    pub fn filter(&self, n: u64) -> (f64, f64) {
        match self {
            RateFamily::Constant { c } => (c.to_f64_down(), c.to_f64_up()),
            RateFamily::Table { values } => values
                .get(n as usize - 1)
                .map_or((0.0, 0.0), |v| (v.to_f64_down(), v.to_f64_up())),
            RateFamily::Power { c, .. } | RateFamily::PowerLog { c, .. } if c.is_zero() => (0.0, 0.0),
            _ => {
                let v = self.value_f64(n);
                (v * (1.0 - FILTER_WIDEN), v * (1.0 + FILTER_WIDEN))
            }
        }
    }

    /// Rigorous rational interval containing `psi(n)`, of width about `2^-bits`
    /// relative to the value (exact when the value is rational).
    pub fn enclose(&self, n: u64, bits: u32) -> (Rational, Rational) {
        if let Some(v) = self.exact(n) {
            return (v.clone(), v);
        }
        let guard = bits + 16;
        match self {
            RateFamily::Power { c, p } => {
                let (lo, hi) = power_enclosure(n, p, guard);
                (c * lo, c * hi)
            }
            RateFamily::PowerLog { c, p, q } => {
                let (plo, phi) = power_enclosure(n, p, guard);
                let (llo, lhi) = ln_enclosure(&BigInt::from(n + 1), guard);
                let (qlo, qhi) = pow_rational_interval(&llo, &lhi, &(-q), guard);
                (round_down(&(c * plo * qlo), guard), round_up(&(c * phi * qhi), guard))
            }
            RateFamily::Constant { .. } | RateFamily::Table { .. } => unreachable!("exact"),
        }
    }
}

/// `n^-p` when it is rational.
fn power_exact(n: u64, p: &Rational) -> Option<Rational> {
    let a = p.numer().to_i64()?;
    let b = p.denom().to_u32()?;
    let nb = BigInt::from(n);
    let na = num_traits::pow(nb, a.unsigned_abs() as usize);
    let root = na.nth_root(b);
    if num_traits::pow(root.clone(), b as usize) != na {
        return None;
    }
    let r = Rational::from_bigint(root);
    Some(if a >= 0 { r.recip() } else { r })
}

fn pow2(k: u32) -> BigInt {
    BigInt::one() << k
}

pub(crate) fn round_down(x: &Rational, bits: u32) -> Rational {
    let scaled = x * Rational::from_bigint(pow2(bits));
    Rational::from_dyadic(scaled.floor(), bits)
}

pub(crate) fn round_up(x: &Rational, bits: u32) -> Rational {
    let scaled = x * Rational::from_bigint(pow2(bits));
    Rational::from_dyadic(scaled.ceil(), bits)
}

/// Floor and ceiling of the `b`-th root of a non-negative rational, at
/// resolution `2^-bits`.
fn root_bounds(x: &Rational, b: u32, bits: u32) -> (Rational, Rational) {
    debug_assert!(!x.is_negative());
    if b == 1 {
        return (round_down(x, bits), round_up(x, bits));
    }
    let scaled = x * Rational::from_bigint(pow2(bits * b));
    let (fl, cl) = (scaled.floor(), scaled.ceil());
    let lo = fl.nth_root(b);
    let mut hi = cl.nth_root(b);
    if num_traits::pow(hi.clone(), b as usize) < cl {
        hi += 1;
    }
    (Rational::from_dyadic(lo, bits), Rational::from_dyadic(hi, bits))
}

/// Enclosure of `x^e` for `x` in `[lo, hi]` with `0 < lo` and rational `e`.
fn pow_rational_interval(lo: &Rational, hi: &Rational, e: &Rational, bits: u32) -> (Rational, Rational) {
    let a = e.numer().to_i64().expect("validated exponent");
    let b = e.denom().to_u32().expect("validated exponent");
    // x^a is monotone on x > 0: increasing for a >= 0, decreasing otherwise.
    let (plo, phi) = if a >= 0 {
        (lo.pow(a as i32), hi.pow(a as i32))
    } else {
        (hi.pow(a as i32), lo.pow(a as i32))
    };
    let (plo, phi) = (round_down(&plo, bits + 8), round_up(&phi, bits + 8));
    let (rlo, _) = root_bounds(&plo, b, bits);
    let (_, rhi) = root_bounds(&phi, b, bits);
    (rlo, rhi)
}

fn power_enclosure(n: u64, p: &Rational, bits: u32) -> (Rational, Rational) {
    let x = Rational::from_integer(n as i64);
    // n^-p for n >= 1 is at most n^|p|; scale resolution with the magnitude.
    pow_rational_interval(&x, &x, &(-p), bits + 64)
}

/// `sum_{j<terms} t^(2j+1)/(2j+1)` bounds for `atanh(t)`, `0 <= t <= 1/3`.
fn atanh_enclosure(t: &Rational, bits: u32) -> (Rational, Rational) {
    let t2 = t * t;
    let mut term = t.clone();
    let mut sum = Rational::zero();
    let mut j: i64 = 0;
    let eps = Rational::from_dyadic(BigInt::one(), bits + 4);
    loop {
        sum += &term / Rational::from_integer(2 * j + 1);
        j += 1;
        term = &term * &t2;
        // tail <= t^(2j+1) / ((2j+1)(1 - t^2))
        let tail = &term / (Rational::from_integer(2 * j + 1) * (Rational::one() - &t2));
        if tail < eps || term.is_zero() {
            return (round_down(&sum, bits + 8), round_up(&(sum + tail), bits + 8));
        }
        if j % 4 == 0 {
            sum = round_down(&sum, bits + 24);
            term = round_up(&term, bits + 24);
        }
    }
}

/// Rigorous enclosure of `ln(y)` for an integer `y >= 1`.
pub(crate) fn ln_enclosure(y: &BigInt, bits: u32) -> (Rational, Rational) {
    if y.is_one() {
        return (Rational::zero(), Rational::zero());
    }
    let e = y.bits() - 1;
    let two_e = pow2(e as u32);
    // ln y = e ln 2 + 2 atanh((m-1)/(m+1)) with m = y / 2^e in [1, 2).
    let t = Rational::from_big(num_rational::BigRational::new(y - &two_e, y + &two_e));
    let (alo, ahi) = atanh_enclosure(&t, bits + 8);
    let (l2lo, l2hi) = atanh_enclosure(&Rational::new(1, 3), bits + 8 + 64 - (e.max(1)).leading_zeros());
    let two = Rational::from_integer(2);
    let ef = Rational::from_integer(e as i64);
    (
        round_down(&(&two * (&ef * l2lo + alo)), bits),
        round_up(&(&two * (&ef * l2hi + ahi)), bits),
    )
}

/// Per-axis rate functions; `psi(n)` is their product.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateFunction {
    axes: Vec<RateFamily>,
}

impl RateFunction {
    pub fn new(axes: Vec<RateFamily>) -> Result<Self, RateError> {
        for a in &axes {
            a.validate()?;
        }
        Ok(RateFunction { axes })
    }

    /// The same family on each of `d` axes.
    pub fn uniform(family: RateFamily, d: usize) -> Result<Self, RateError> {
        Self::new(vec![family; d])
    }

    /// One-dimensional `c * n^-p`.
    pub fn power(c: Rational, p: Rational) -> Result<Self, RateError> {
        Self::new(vec![RateFamily::power(c, p)])
    }

    pub fn constant(c: Rational, d: usize) -> Result<Self, RateError> {
        Self::uniform(RateFamily::constant(c), d)
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[RateFamily] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &RateFamily {
        &self.axes[i]
    }

    pub fn check_dimension(&self, d: usize) -> Result<(), RateError> {
        if self.dimension() != d {
            return Err(RateError::Dimension {
                rate: self.dimension(),
                map: d,
            });
        }
        Ok(())
    }

    pub fn exact(&self, axis: usize, n: u64) -> Option<Rational> {
        self.axes[axis].exact(n)
    }

    /// Exact per-axis radii at `n`.
    pub fn exact_radii(&self, n: u64) -> Result<Vec<Rational>, RateError> {
        (0..self.dimension())
            .map(|i| self.exact(i, n).ok_or(RateError::Irrational { axis: i, n }))
            .collect()
    }

    /// Exact `psi(n) = prod_i psi_i(n)`.
    pub fn exact_product(&self, n: u64) -> Result<Rational, RateError> {
        Ok(self
            .exact_radii(n)?
            .into_iter()
            .fold(Rational::one(), |acc, v| acc * v))
    }

    pub fn filter(&self, axis: usize, n: u64) -> (f64, f64) {
        self.axes[axis].filter(n)
    }

    pub fn enclose(&self, axis: usize, n: u64, bits: u32) -> (Rational, Rational) {
        self.axes[axis].enclose(n, bits)
    }

    /// Floating-point `psi(n)`.
    pub fn product_f64(&self, n: u64) -> f64 {
        self.axes.iter().map(|a| a.value_f64(n)).product()
    }

    /// True when every `psi_i(n)` is rational for all `n`.
    pub fn is_rational_valued(&self) -> bool {
        self.axes.iter().all(|a| match a {
            RateFamily::Constant { .. } | RateFamily::Table { .. } => true,
            RateFamily::Power { c, p } => c.is_zero() || p.is_integer(),
            RateFamily::PowerLog { c, p, q } => c.is_zero() || (p.is_integer() && q.is_zero()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn exact_values() {
        let half_over_n = RateFamily::power(q("1/2"), q("1"));
        assert_eq!(half_over_n.exact(4), Some(q("1/8")));
        let sqrt = RateFamily::power(q("1/2"), q("1/2"));
        assert_eq!(sqrt.exact(4), Some(q("1/4")));
        assert_eq!(sqrt.exact(2), None);
        let t = RateFamily::Table {
            values: vec![q("1/3"), q("0")],
        };
        assert_eq!(t.exact(1), Some(q("1/3")));
        assert_eq!(t.exact(9), Some(q("0")));
        let pl = RateFamily::PowerLog {
            c: q("1"),
            p: q("1"),
            q: q("1"),
        };
        assert_eq!(pl.exact(3), None);
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(matches!(
            RateFunction::power(q("-1"), q("1")),
            Err(RateError::Negative(_))
        ));
        assert!(RateFunction::new(vec![RateFamily::Table {
            values: vec![q("1"), q("-1/2")]
        }])
        .is_err());
    }

    #[test]
    fn ln_enclosure_brackets_f64() {
        for y in [2u64, 3, 10, 1000, 1_000_001, 123_456_789] {
            let (lo, hi) = ln_enclosure(&BigInt::from(y), 80);
            let l = (y as f64).ln();
            assert!(lo.to_f64() <= l * (1.0 + 1e-15) && hi.to_f64() >= l * (1.0 - 1e-15), "{y}");
            assert!(&hi - &lo < Rational::from_dyadic(BigInt::one(), 78));
        }
    }

    #[test]
    fn enclosures_are_tight_and_contain_filter_center() {
        let fams = [
            RateFamily::power(q("1/2"), q("1/2")),
            RateFamily::power(q("1/2"), q("1/4")),
            RateFamily::power(q("3"), q("-1/3")),
            RateFamily::PowerLog {
                c: q("1/2"),
                p: q("1/2"),
                q: q("3/2"),
            },
            RateFamily::PowerLog {
                c: q("2"),
                p: q("0"),
                q: q("-1"),
            },
        ];
        for f in &fams {
            for n in [1u64, 2, 3, 7, 100, 9999, 1_000_000] {
                let (lo, hi) = f.enclose(n, 64);
                assert!(lo <= hi);
                let v = f.value_f64(n);
                let width = (&hi - &lo).to_f64();
                assert!(width <= v * 1e-15 + 1e-18, "{f:?} n={n} width={width}");
                // the certified filter must contain the rigorous enclosure
                let (flo, fhi) = f.filter(n);
                assert!(flo <= lo.to_f64_down() && hi.to_f64_up() <= fhi, "{f:?} n={n}");
            }
        }
    }

    #[test]
    fn exact_root_detection() {
        let f = RateFamily::power(q("1"), q("1/2"));
        let (lo, hi) = f.enclose(9, 64);
        assert_eq!((lo, hi), (q("1/3"), q("1/3")));
    }

    #[test]
    fn rational_valued() {
        assert!(RateFunction::power(q("1/2"), q("1")).unwrap().is_rational_valued());
        assert!(!RateFunction::power(q("1/2"), q("1/2")).unwrap().is_rational_valued());
    }
}
