//! Main terms `Psi(N)` and the counting functions `R(x,N)` and `W(x,N)`.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::maps::MapSpec;
use crate::points::{GenericPoint, Outcome, PredicateOptions, RateRadii, TargetPoint};
use crate::rate::{RateError, RateFunction};
use crate::rational::Rational;

/// Largest `N` for which main terms are also summed exactly.
pub const EXACT_MAIN_TERM_LIMIT: u64 = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CountError {
    #[error("checkpoints must be positive and strictly increasing")]
    BadCheckpoints,
    #[error(
        "precision budget exceeded: N = {n_max} with psi_min = {psi_min:e} needs {required} \
         symbols per axis, budget is {budget}"
    )]
    Budget {
        n_max: u64,
        psi_min: f64,
        required: usize,
        budget: usize,
    },
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// `2^d * sum_{n<=N} prod_i psi_i(n)`, exactly.
pub fn psi_sum(rate: &RateFunction, n: u64) -> Result<Rational, RateError> {
    let mut total = Rational::zero();
    for k in 1..=n {
        total += rate.exact_product(k)?;
    }
    Ok(total * Rational::from_integer(1i64 << rate.dimension()))
}

/// `2^d * sum_{n<=N} prod_i psi_i(n)` in floating point (compensated sum).
pub fn psi_sum_f64(rate: &RateFunction, n: u64) -> f64 {
    let mut acc = Neumaier::default();
    for k in 1..=n {
        acc.add(rate.product_f64(k));
    }
    acc.value() * (1u64 << rate.dimension()) as f64
}

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A main term at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTerm {
    pub n: u64,
    /// Present for rational-valued rates and `n <= EXACT_MAIN_TERM_LIMIT`.
    pub exact: Option<Rational>,
    pub float: f64,
}

/// Main-term schedule for recurrence: `Psi(N_j)` at each checkpoint.
pub fn recurrence_main_terms(rate: &RateFunction, checkpoints: &[u64]) -> Vec<MainTerm> {
    let d = rate.dimension();
    let weight = Rational::from_integer(1i64 << d);
    main_terms(checkpoints, rate.is_rational_valued(), |n, want_exact| {
        (
            rate.product_f64(n) * (1u64 << d) as f64,
            want_exact.then(|| rate.exact_product(n).ok().map(|v| v * &weight)).flatten(),
        )
    })
}

/// Exact measure of the ball `prod_i B(x0_i, r_i)` clipped to `[0,1]^d`.
pub fn clipped_ball_measure(x0: &[Rational], radii: &[Rational]) -> Rational {
    let one = Rational::one();
    x0.iter().zip(radii).fold(Rational::one(), |acc, (c, r)| {
        let hi = (c + r).min(one.clone());
        let lo = (c - r).max(Rational::zero());
        acc * (hi - lo).max(Rational::zero())
    })
}

pub fn clipped_ball_measure_f64(x0: &[f64], radii: &[f64]) -> f64 {
    x0.iter()
        .zip(radii)
        .map(|(c, r)| ((c + r).min(1.0) - (c - r).max(0.0)).max(0.0))
        .product()
}

/// Main-term schedule for shrinking targets: `Phi(N_j) = sum_{n<=N_j} mu(B_n)`,
/// using `mu(T^-n B_n) = mu(B_n)`.
pub fn target_main_terms(rate: &RateFunction, x0: &[Rational], checkpoints: &[u64]) -> Vec<MainTerm> {
    let xf: Vec<f64> = x0.iter().map(Rational::to_f64).collect();
    let d = rate.dimension();
    main_terms(checkpoints, rate.is_rational_valued(), |n, want_exact| {
        let radii: Vec<f64> = (0..d).map(|i| rate.axis(i).value_f64(n)).collect();
        (
            clipped_ball_measure_f64(&xf, &radii),
            want_exact
                .then(|| rate.exact_radii(n).ok().map(|r| clipped_ball_measure(x0, &r)))
                .flatten(),
        )
    })
}

fn main_terms(
    checkpoints: &[u64],
    rational: bool,
    term: impl Fn(u64, bool) -> (f64, Option<Rational>),
) -> Vec<MainTerm> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut float = Neumaier::default();
    let mut exact = rational.then(Rational::zero);
    let mut next = 0;
    let last = checkpoints.last().copied().unwrap_or(0);
    for n in 1..=last {
        if n > EXACT_MAIN_TERM_LIMIT {
            exact = None;
        }
        let (f, e) = term(n, exact.is_some());
        float.add(f);
        exact = match (exact, e) {
            (Some(acc), Some(e)) => Some(acc + e),
            _ => None,
        };
        while next < checkpoints.len() && checkpoints[next] == n {
            out.push(MainTerm {
                n,
                exact: exact.clone(),
                float: float.value(),
            });
            next += 1;
        }
    }
    out
}

/// `ceil(10^(j/4))` for `j = 0, 1, ...` up to `n_max`, with `n_max` appended.
pub fn geometric_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for j in 0u32.. {
        let p = num_traits::pow(BigInt::from(10), j as usize);
        let r = p.nth_root(4);
        let c = if num_traits::pow(r.clone(), 4) == p { r } else { r + 1 };
        let c = c.to_u64().unwrap_or(u64::MAX);
        if c > n_max {
            break;
        }
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    if out.last() != Some(&n_max) && n_max > 0 {
        out.push(n_max);
    }
    out
}

/// Checkpoints from `ceil(10^(j/4)) >= from` up to `n_max`.
pub fn geometric_checkpoints_from(from: u64, n_max: u64) -> Vec<u64> {
    geometric_checkpoints(n_max)
        .into_iter()
        .filter(|&c| c >= from)
        .collect()
}

pub fn validate_checkpoints(checkpoints: &[u64]) -> Result<(), CountError> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CountError::BadCheckpoints);
    }
    Ok(())
}

/// Symbols per axis needed to decide every predicate up to `n_max`:
/// `n_max + ceil(log_lambda(1/psi_min)) + refinement_cap`.
pub fn required_depth(map: &MapSpec, rate: &RateFunction, n_max: u64, refinement_cap: u32) -> (usize, f64) {
    let mut psi_min = f64::INFINITY;
    for i in 0..rate.dimension() {
        for n in 1..=n_max {
            let (lo, _) = rate.filter(i, n);
            if lo > 0.0 && lo < psi_min {
                psi_min = lo;
            }
        }
    }
    let lambda = map.lambda().to_f64();
    let scale = if psi_min.is_finite() && psi_min < 1.0 {
        ((1.0 / psi_min).ln() / lambda.ln()).ceil() as usize
    } else {
        0
    };
    (n_max as usize + scale + 2 + refinement_cap as usize, psi_min)
}

pub fn check_budget(
    map: &MapSpec,
    rate: &RateFunction,
    n_max: u64,
    refinement_cap: u32,
    budget: usize,
) -> Result<usize, CountError> {
    let (required, psi_min) = required_depth(map, rate, n_max, refinement_cap);
    if required > budget {
        return Err(CountError::Budget {
            n_max,
            psi_min,
            required,
            budget,
        });
    }
    Ok(required)
}

/// Which counting function a record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Recurrence,
    Target,
}

/// One point's count at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointCount {
    pub n: u64,
    pub count: u64,
    pub unresolved: u64,
}

/// Counts of one point at every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub kind: EventKind,
    pub seed: Option<u64>,
    pub counts: Vec<CheckpointCount>,
    pub main_terms: Vec<MainTerm>,
    /// Hit times in increasing order, when retained.
    pub hits: Option<Vec<u32>>,
}

impl CountRecord {
    /// Final count.
    pub fn last_count(&self) -> u64 {
        self.counts.last().map_or(0, |c| c.count)
    }

    pub fn total_unresolved(&self) -> u64 {
        self.counts.last().map_or(0, |c| c.unresolved)
    }

    /// Largest hit time, when hits are retained.
    pub fn last_hit(&self) -> Option<u32> {
        self.hits.as_ref().and_then(|h| h.last().copied())
    }

    /// Rows `seed,N,R,Psi_exact,Psi_float,unresolved`.
    pub fn csv_rows(&self) -> Vec<String> {
        let seed = self.seed.map_or_else(String::new, |s| s.to_string());
        self.counts
            .iter()
            .zip(&self.main_terms)
            .map(|(c, m)| {
                format!(
                    "{seed},{},{},{},{},{}",
                    c.n,
                    c.count,
                    m.exact.as_ref().map_or_else(String::new, Rational::to_string),
                    m.float,
                    c.unresolved
                )
            })
            .collect()
    }
}

pub const COUNT_CSV_HEADER: &str = "seed,N,R,Psi_exact,Psi_float,unresolved";

/// Settings shared by the counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountOptions {
    pub predicate: PredicateOptions,
    /// Keep every hit time in the record.
    pub keep_hits: bool,
}

fn count_with(
    kind: EventKind,
    p: &mut GenericPoint,
    checkpoints: &[u64],
    main_terms: Vec<MainTerm>,
    opts: &CountOptions,
    mut test: impl FnMut(&mut GenericPoint, u64) -> Outcome,
) -> Result<CountRecord, CountError> {
    validate_checkpoints(checkpoints)?;
    let mut counts = Vec::with_capacity(checkpoints.len());
    let mut hits = opts.keep_hits.then(Vec::new);
    let (mut count, mut unresolved) = (0u64, 0u64);
    let mut next = 0;
    for n in 1..=*checkpoints.last().expect("validated") {
        match test(p, n) {
            Outcome::Hit => {
                count += 1;
                if let Some(h) = hits.as_mut() {
                    h.push(n as u32);
                }
            }
            Outcome::Miss => {}
            Outcome::Unresolved => unresolved += 1,
        }
        if checkpoints[next] == n {
            counts.push(CheckpointCount { n, count, unresolved });
            next += 1;
        }
    }
    Ok(CountRecord {
        kind,
        seed: p.seed(),
        counts,
        main_terms,
        hits,
    })
}

/// `R(x, N_j) = #{1 <= n <= N_j : d(T^n x, x) < psi(n)}`.
pub fn count_recurrence(
    rate: &RateFunction,
    p: &mut GenericPoint,
    checkpoints: &[u64],
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    count_recurrence_with_terms(rate, p, checkpoints, recurrence_main_terms(rate, checkpoints), opts)
}

/// As [`count_recurrence`] with precomputed main terms (shared across points).
pub fn count_recurrence_with_terms(
    rate: &RateFunction,
    p: &mut GenericPoint,
    checkpoints: &[u64],
    main_terms: Vec<MainTerm>,
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    rate.check_dimension(p.dimension())?;
    count_with(EventKind::Recurrence, p, checkpoints, main_terms, opts, |p, n| {
        p.recurrence(n, &RateRadii { rate, n }, &opts.predicate)
    })
}

/// `W(x, N_j) = #{1 <= n <= N_j : d(T^n x, x0) < psi(n)}`.
pub fn count_shrinking_target(
    rate: &RateFunction,
    target: &TargetPoint,
    p: &mut GenericPoint,
    checkpoints: &[u64],
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    let terms = target_main_terms(rate, target.center(), checkpoints);
    count_target_with_terms(rate, target, p, checkpoints, terms, opts)
}

pub fn count_target_with_terms(
    rate: &RateFunction,
    target: &TargetPoint,
    p: &mut GenericPoint,
    checkpoints: &[u64],
    main_terms: Vec<MainTerm>,
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    rate.check_dimension(p.dimension())?;
    count_with(EventKind::Target, p, checkpoints, main_terms, opts, |p, n| {
        p.target(target, n, &RateRadii { rate, n }, &opts.predicate)
    })
}
