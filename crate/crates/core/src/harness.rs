//! Seeded Monte Carlo experiments over many generic points, and the
//! statistics used to judge them.
//!
//! Points are processed in parallel on the current rayon pool. Each point's
//! result depends only on its own seed, and results are gathered in index
//! order, so reports are identical for any thread count.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{
    check_budget, count_recurrence_with_terms, count_target_with_terms, recurrence_main_terms,
    target_main_terms, validate_checkpoints, CountError, CountOptions, CountRecord, EventKind, MainTerm,
};
use crate::maps::{MapError, MapSpec};
use crate::measure::{recurrence_measure, MeasureError};
use crate::points::{point_seed, GenericPoint, PredicateOptions, TargetPoint, DEFAULT_BUDGET};
use crate::rate::{RateError, RateFunction};
use crate::rational::Rational;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("sample size must be at least 2, got {0}")]
    SampleSize(usize),
    #[error("target mode needs a center x0")]
    MissingTarget,
    #[error("need at least {needed} checkpoints with main term >= {min_main}, have {have}")]
    InsufficientCheckpoints { needed: usize, have: usize, min_main: f64 },
    #[error("range [{a}, {b}] is empty or exceeds the retained hits (N = {n_max})")]
    BadRange { a: u64, b: u64, n_max: u64 },
    #[error("per-n hit indicators were not retained")]
    MissingHits,
    #[error("rate is not summable at this scale: sum 2^d psi(n) over n <= {n_max} is {sum}, bound {bound}")]
    Divergent { n_max: u64, sum: f64, bound: f64 },
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Everything a Monte Carlo run depends on.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub rate: RateFunction,
    pub kind: EventKind,
    /// Center for [`EventKind::Target`].
    pub target: Option<Vec<Rational>>,
    pub samples: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    pub predicate: PredicateOptions,
    pub keep_hits: bool,
    pub budget: usize,
}

impl ExperimentConfig {
    pub fn new(map: MapSpec, rate: RateFunction, checkpoints: Vec<u64>) -> Self {
        ExperimentConfig {
            map,
            rate,
            kind: EventKind::Recurrence,
            target: None,
            samples: 2,
            master_seed: 0,
            checkpoints,
            predicate: PredicateOptions::default(),
            keep_hits: false,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn n_max(&self) -> u64 {
        self.checkpoints.last().copied().unwrap_or(0)
    }

    /// Checks everything that can fail before any point is simulated.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.samples < 2 {
            return Err(HarnessError::SampleSize(self.samples));
        }
        validate_checkpoints(&self.checkpoints)?;
        self.rate.check_dimension(self.map.dimension())?;
        if self.kind == EventKind::Target {
            let x0 = self.target.as_ref().ok_or(HarnessError::MissingTarget)?;
            self.map.check_point(x0)?;
        }
        check_budget(
            &self.map,
            &self.rate,
            self.n_max(),
            self.predicate.refinement_cap,
            self.budget,
        )?;
        Ok(())
    }

    fn main_terms(&self) -> Vec<MainTerm> {
        match self.kind {
            EventKind::Recurrence => recurrence_main_terms(&self.rate, &self.checkpoints),
            EventKind::Target => target_main_terms(
                &self.rate,
                self.target.as_deref().unwrap_or_default(),
                &self.checkpoints,
            ),
        }
    }
}

/// Aggregates of all points at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub n: u64,
    pub samples: usize,
    pub mean: f64,
    /// Unbiased sample variance of the counts.
    pub variance: f64,
    /// `Psi(N)` (recurrence) or `Phi(N)` (target), exact when available.
    pub main_exact: Option<Rational>,
    pub main_float: f64,
    pub abs_err_median: f64,
    pub abs_err_q90: f64,
    pub abs_err_max: f64,
    pub rel_err_median: f64,
    pub unresolved: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: EventKind,
    pub samples: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<CheckpointSummary>,
    pub unresolved_total: u64,
    /// Per-point records in point-index order.
    #[serde(skip)]
    pub records: Vec<CountRecord>,
}

impl ExperimentReport {
    /// Absolute errors `|R - Psi|` of every point at checkpoint `j`.
    pub fn errors_at(&self, j: usize) -> Vec<f64> {
        let main = self.checkpoints[j].main_float;
        self.records
            .iter()
            .map(|r| (r.counts[j].count as f64 - main).abs())
            .collect()
    }

    pub fn last(&self) -> &CheckpointSummary {
        self.checkpoints.last().expect("validated non-empty")
    }

    /// Fraction of (point, checkpoint) pairs with `|R - Psi| <= envelope(Psi)`.
    pub fn envelope_fraction(&self, envelope: impl Fn(f64) -> f64) -> f64 {
        let mut ok = 0usize;
        let mut total = 0usize;
        for (j, c) in self.checkpoints.iter().enumerate() {
            let bound = envelope(c.main_float);
            for e in self.errors_at(j) {
                total += 1;
                if e <= bound {
                    ok += 1;
                }
            }
        }
        ok as f64 / total.max(1) as f64
    }
}

/// `4 Psi^(1/2) (ln Psi)^1.6 + 50`, the default error envelope.
pub fn default_envelope(psi: f64) -> f64 {
    let log = psi.max(1.0).ln();
    4.0 * psi.max(0.0).sqrt() * log.powf(1.6) + 50.0
}

/// Runs a validated experiment on `samples` points seeded from the master seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let points: Vec<u64> = (0..config.samples as u64)
        .map(|i| point_seed(config.master_seed, i))
        .collect();
    run_on(config, points.len(), |i| {
        GenericPoint::sample(&config.map, points[i]).with_budget(config.budget)
    })
}

/// Runs an experiment on explicitly constructed points (forced streams etc.).
pub fn run_on_points(config: &ExperimentConfig, points: Vec<GenericPoint>) -> Result<ExperimentReport, HarnessError> {
    let mut c = config.clone();
    c.samples = points.len();
    c.validate()?;
    let points: Vec<std::sync::Mutex<Option<GenericPoint>>> =
        points.into_iter().map(|p| std::sync::Mutex::new(Some(p))).collect();
    run_on(&c, points.len(), |i| {
        points[i].lock().expect("unpoisoned").take().expect("each point used once")
    })
}

fn run_on(
    config: &ExperimentConfig,
    samples: usize,
    make: impl Fn(usize) -> GenericPoint + Sync,
) -> Result<ExperimentReport, HarnessError> {
    let terms = config.main_terms();
    let target = match config.kind {
        EventKind::Target => Some(TargetPoint::new(
            &config.map,
            config.target.clone().ok_or(HarnessError::MissingTarget)?,
        )?),
        EventKind::Recurrence => None,
    };
    let opts = CountOptions {
        predicate: config.predicate,
        keep_hits: config.keep_hits,
    };
    let records = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut p = make(i);
            match &target {
                None => count_recurrence_with_terms(&config.rate, &mut p, &config.checkpoints, terms.clone(), &opts),
                Some(t) => count_target_with_terms(&config.rate, t, &mut p, &config.checkpoints, terms.clone(), &opts),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(config, terms, records))
}

fn summarize(config: &ExperimentConfig, terms: Vec<MainTerm>, records: Vec<CountRecord>) -> ExperimentReport {
    let s = records.len();
    let checkpoints = terms
        .into_iter()
        .enumerate()
        .map(|(j, term)| {
            let counts: Vec<f64> = records.iter().map(|r| r.counts[j].count as f64).collect();
            let mean = counts.iter().sum::<f64>() / s as f64;
            let variance = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (s - 1).max(1) as f64;
            let mut errs: Vec<f64> = counts.iter().map(|c| (c - term.float).abs()).collect();
            errs.sort_by(f64::total_cmp);
            let median = quantile_sorted(&errs, 0.5);
            CheckpointSummary {
                n: term.n,
                samples: s,
                mean,
                variance,
                main_float: term.float,
                main_exact: term.exact,
                abs_err_median: median,
                abs_err_q90: quantile_sorted(&errs, 0.9),
                abs_err_max: errs.last().copied().unwrap_or(0.0),
                rel_err_median: if term.float > 0.0 { median / term.float } else { 0.0 },
                unresolved: records.iter().map(|r| r.counts[j].unresolved).sum(),
            }
        })
        .collect();
    ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: config.kind,
        samples: s,
        master_seed: config.master_seed,
        checkpoints,
        unresolved_total: records.iter().map(CountRecord::total_unresolved).sum(),
        records,
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Least-squares slope of `ln median|R - Psi|` against `ln Psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Central 95% bootstrap interval of the slope (points resampled).
    pub band: (f64, f64),
    pub checkpoints_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FitOutcome {
    Fitted(ExponentFit),
    /// Every median error is zero, so there is nothing to fit.
    ZeroResidual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_checkpoints: usize,
    pub min_main: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            min_checkpoints: 8,
            min_main: 10.0,
            bootstrap: 400,
            seed: 0x5EED,
        }
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn fit_medians(mains: &[f64], medians: &[f64]) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = mains
        .iter()
        .zip(medians)
        .filter(|(_, m)| **m > 0.0)
        .map(|(p, m)| (p.ln(), m.ln()))
        .unzip();
    (xs.len() >= 2).then(|| least_squares(&xs, &ys))
}

/// Fits the error exponent from main terms and per-point absolute errors
/// (`errors[j][point]`). This is also the injection point for synthetic data.
pub fn fit_error_exponent_from(
    mains: &[f64],
    errors: &[Vec<f64>],
    opts: &FitOptions,
) -> Result<FitOutcome, HarnessError> {
    let keep: Vec<usize> = (0..mains.len()).filter(|&j| mains[j] >= opts.min_main).collect();
    if keep.len() < opts.min_checkpoints {
        return Err(HarnessError::InsufficientCheckpoints {
            needed: opts.min_checkpoints,
            have: keep.len(),
            min_main: opts.min_main,
        });
    }
    let mains: Vec<f64> = keep.iter().map(|&j| mains[j]).collect();
    let errors: Vec<&Vec<f64>> = keep.iter().map(|&j| &errors[j]).collect();
    let medians: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    if medians.iter().all(|m| *m == 0.0) {
        return Ok(FitOutcome::ZeroResidual);
    }
    let usable = medians.iter().filter(|m| **m > 0.0).count();
    if usable < opts.min_checkpoints {
        return Err(HarnessError::InsufficientCheckpoints {
            needed: opts.min_checkpoints,
            have: usable,
            min_main: opts.min_main,
        });
    }
    let (slope, intercept) = fit_medians(&mains, &medians).expect("enough points");

    let s = errors[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut slopes = Vec::with_capacity(opts.bootstrap);
    let mut scratch = vec![0.0; s];
    for _ in 0..opts.bootstrap {
        let idx: Vec<usize> = (0..s).map(|_| (rng.next_u64() % s as u64) as usize).collect();
        let meds: Vec<f64> = errors
            .iter()
            .map(|e| {
                for (slot, &i) in scratch.iter_mut().zip(&idx) {
                    *slot = e[i];
                }
                median(&scratch)
            })
            .collect();
        if let Some((b, _)) = fit_medians(&mains, &meds) {
            slopes.push(b);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let band = if slopes.is_empty() {
        (slope, slope)
    } else {
        (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975))
    };
    Ok(FitOutcome::Fitted(ExponentFit {
        slope,
        intercept,
        band,
        checkpoints_used: usable,
    }))
}

pub fn fit_error_exponent(report: &ExperimentReport, opts: &FitOptions) -> Result<FitOutcome, HarnessError> {
    let mains: Vec<f64> = report.checkpoints.iter().map(|c| c.main_float).collect();
    let errors: Vec<Vec<f64>> = (0..mains.len()).map(|j| report.errors_at(j)).collect();
    fit_error_exponent_from(&mains, &errors, opts)
}

/// The sequences `c_n = phi_n` of the variance condition over `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QbcInstance {
    pub kind: EventKind,
    pub a: u64,
    pub b: u64,
    /// `c[n - a]` as a float.
    pub c: Vec<f64>,
    /// Exact `mu(A_n)` where the oracle was used.
    pub c_exact: Vec<Option<Rational>>,
    /// First `n` where `2^d psi(n)` stands in for the oracle, if any.
    pub proxy_from: Option<u64>,
}

impl QbcInstance {
    /// `c_n = mu(A_n)` from the exact oracle up to `oracle_cap`, `2^d psi(n)` beyond.
    pub fn recurrence(
        map: &MapSpec,
        rate: &RateFunction,
        a: u64,
        b: u64,
        oracle_cap: u32,
    ) -> Result<Self, HarnessError> {
        if a == 0 || a > b {
            return Err(HarnessError::BadRange { a, b, n_max: b });
        }
        let weight = (1u64 << rate.dimension()) as f64;
        let mut c = Vec::new();
        let mut c_exact = Vec::new();
        let mut proxy_from = None;
        for n in a..=b {
            let exact = if n <= oracle_cap as u64 && rate.is_rational_valued() {
                Some(recurrence_measure(map, rate, n as u32)?.into_inner())
            } else {
                None
            };
            match &exact {
                Some(v) => c.push(v.to_f64()),
                None => {
                    proxy_from.get_or_insert(n);
                    c.push((rate.product_f64(n) * weight).min(1.0));
                }
            }
            c_exact.push(exact);
        }
        Ok(QbcInstance {
            kind: EventKind::Recurrence,
            a,
            b,
            c,
            c_exact,
            proxy_from,
        })
    }

    /// An instance with explicit `c_n` (used for synthetic checks).
    pub fn explicit(a: u64, c: Vec<f64>) -> Self {
        let b = a + c.len() as u64 - 1;
        QbcInstance {
            kind: EventKind::Recurrence,
            a,
            b,
            c_exact: vec![None; c.len()],
            c,
            proxy_from: None,
        }
    }

    pub fn sum_phi(&self) -> f64 {
        self.c.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Mean over points of `(sum_{n=a}^{b} (f_n(x) - c_n))^2`.
    pub statistic: f64,
    pub std_error: f64,
    pub sum_phi: f64,
    /// `statistic / sum_phi`, the smallest admissible constant `C`.
    pub ratio: f64,
    pub samples: usize,
}

/// Per-point centered sums `sum_{n=a}^{b} (f_n(x) - c_n)` from sorted hit times.
pub fn centered_sums(hits: &[Vec<u32>], inst: &QbcInstance) -> Vec<f64> {
    let total_c: f64 = inst.sum_phi();
    hits.iter()
        .map(|h| {
            let count = h.iter().filter(|&&n| (inst.a..=inst.b).contains(&(n as u64))).count();
            count as f64 - total_c
        })
        .collect()
}

/// Empirical left side of the variance condition.
pub fn variance_statistic(hits: &[Vec<u32>], inst: &QbcInstance) -> VarianceEstimate {
    let sums = centered_sums(hits, inst);
    let s = sums.len();
    let squares: Vec<f64> = sums.iter().map(|x| x * x).collect();
    let mean = squares.iter().sum::<f64>() / s as f64;
    let var = squares.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1).max(1) as f64;
    let sum_phi = inst.sum_phi();
    VarianceEstimate {
        statistic: mean,
        std_error: (var / s as f64).sqrt(),
        sum_phi,
        ratio: if sum_phi > 0.0 { mean / sum_phi } else { 0.0 },
        samples: s,
    }
}

/// Hit times retained in the records of a report.
pub fn retained_hits(report: &ExperimentReport) -> Result<Vec<Vec<u32>>, HarnessError> {
    report
        .records
        .iter()
        .map(|r| r.hits.clone().ok_or(HarnessError::MissingHits))
        .collect()
}

/// Independent indicators with `P(f_n = 1) = c_n`, as hit-time lists.
pub fn synthetic_hits(inst: &QbcInstance, samples: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            inst.c
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| {
                    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                    (u < c).then_some((inst.a + i as u64) as u32)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    /// `sum_{n <= N} 2^d psi(n)`.
    pub psi_total: f64,
    pub samples: usize,
    pub max_final_count: u64,
    pub max_last_hit: Option<u32>,
    pub final_counts: Vec<u64>,
    pub unresolved_total: u64,
}

/// Runs the convergent-rate experiment after checking `sum 2^d psi <= bound`.
pub fn dichotomy_check(config: &ExperimentConfig, bound: f64) -> Result<DichotomyReport, HarnessError> {
    let n_max = config.n_max();
    let psi_total = crate::counting::psi_sum_f64(&config.rate, n_max);
    if psi_total > bound {
        return Err(HarnessError::Divergent {
            n_max,
            sum: psi_total,
            bound,
        });
    }
    let mut c = config.clone();
    c.keep_hits = true;
    if c.checkpoints.len() > 1 {
        c.checkpoints = vec![n_max];
    }
    let report = run_experiment(&c)?;
    let final_counts: Vec<u64> = report.records.iter().map(CountRecord::last_count).collect();
    Ok(DichotomyReport {
        psi_total,
        samples: report.samples,
        max_final_count: final_counts.iter().copied().max().unwrap_or(0),
        max_last_hit: report.records.iter().filter_map(CountRecord::last_hit).max(),
        final_counts,
        unresolved_total: report.unresolved_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{count_recurrence, geometric_checkpoints};

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn forced_points_match_counters() {
        let map = MapSpec::doubling();
        let rate = RateFunction::constant(q("1/10"), 1).unwrap();
        let cycles = [vec![0u8, 0, 1, 1], vec![0, 1, 1, 0], vec![1, 1, 0, 0]];
        let points: Vec<_> = cycles
            .iter()
            .map(|c| GenericPoint::periodic(&map, vec![c.clone()]).unwrap())
            .collect();
        let config = ExperimentConfig::new(map.clone(), rate.clone(), vec![4]);
        let report = run_on_points(&config, points.clone()).unwrap();
        for (rec, mut p) in report.records.iter().zip(points) {
            let direct = count_recurrence(&rate, &mut p, &[4], &CountOptions::default()).unwrap();
            assert_eq!(rec.counts, direct.counts);
            assert_eq!(rec.last_count(), 1);
        }
    }

    #[test]
    fn zero_rate_gives_zero_counts() {
        let mut config = ExperimentConfig::new(
            MapSpec::tent(),
            RateFunction::constant(q("0"), 1).unwrap(),
            geometric_checkpoints(1000),
        );
        config.samples = 5;
        let report = run_experiment(&config).unwrap();
        assert!(report.checkpoints.iter().all(|c| c.mean == 0.0 && c.variance == 0.0));
    }

    #[test]
    fn sample_size_guard() {
        let mut config = ExperimentConfig::new(
            MapSpec::doubling(),
            RateFunction::constant(q("1/4"), 1).unwrap(),
            vec![10],
        );
        config.samples = 0;
        assert_eq!(run_experiment(&config).unwrap_err(), HarnessError::SampleSize(0));
    }

    #[test]
    fn reports_are_deterministic_across_pools() {
        let mut config = ExperimentConfig::new(
            MapSpec::doubling(),
            RateFunction::power(q("1/2"), q("1/2")).unwrap(),
            geometric_checkpoints(5000),
        );
        config.samples = 16;
        config.master_seed = 123;
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| serde_json::to_string(&run_experiment(&config).unwrap()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn synthetic_power_law_fit() {
        let mains: Vec<f64> = (0..12).map(|j| 10f64.powf(1.0 + j as f64 / 4.0)).collect();
        let errors: Vec<Vec<f64>> = mains.iter().map(|p| vec![p.sqrt(); 20]).collect();
        match fit_error_exponent_from(&mains, &errors, &FitOptions::default()).unwrap() {
            FitOutcome::Fitted(fit) => {
                assert!((fit.slope - 0.5).abs() < 1e-6);
                assert!((fit.band.0 - 0.5).abs() < 1e-6 && (fit.band.1 - 0.5).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        let zeros: Vec<Vec<f64>> = mains.iter().map(|_| vec![0.0; 20]).collect();
        assert_eq!(
            fit_error_exponent_from(&mains, &zeros, &FitOptions::default()).unwrap(),
            FitOutcome::ZeroResidual
        );
        assert!(matches!(
            fit_error_exponent_from(&mains[..5], &errors[..5], &FitOptions::default()),
            Err(HarnessError::InsufficientCheckpoints { .. })
        ));
    }

    #[test]
    fn centered_statistic_vanishes_when_every_n_hits() {
        let map = MapSpec::doubling();
        let rate = RateFunction::constant(q("1/4"), 1).unwrap();
        let zero = GenericPoint::periodic(&map, vec![vec![0]]).unwrap();
        let mut config = ExperimentConfig::new(map, rate, vec![50]);
        config.keep_hits = true;
        let report = run_on_points(&config, vec![zero.clone(), zero]).unwrap();
        let inst = QbcInstance::explicit(1, vec![1.0; 50]);
        let v = variance_statistic(&retained_hits(&report).unwrap(), &inst);
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn synthetic_coins_reproduce_binomial_variance() {
        let c: Vec<f64> = (1..=200).map(|n| 1.0 / (n as f64)).collect();
        let inst = QbcInstance::explicit(1, c);
        let hits = synthetic_hits(&inst, 4000, 77);
        let v = variance_statistic(&hits, &inst);
        let expected: f64 = inst.c.iter().map(|c| c * (1.0 - c)).sum();
        assert!((v.statistic - expected).abs() <= 4.0 * v.std_error, "{v:?} vs {expected}");
    }

    #[test]
    fn oracle_instance_uses_proxy_beyond_cap() {
        let map = MapSpec::doubling();
        let rate = RateFunction::power(q("1/2"), q("1")).unwrap();
        let inst = QbcInstance::recurrence(&map, &rate, 1, 20, 8).unwrap();
        assert_eq!(inst.proxy_from, Some(9));
        assert_eq!(inst.c_exact[0], Some(q("1")));
        assert!((inst.c[19] - 1.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn dichotomy_guards() {
        let map = MapSpec::doubling();
        let divergent = RateFunction::power(q("1/2"), q("1")).unwrap();
        let mut config = ExperimentConfig::new(map.clone(), divergent, vec![100_000]);
        config.samples = 2;
        assert!(matches!(dichotomy_check(&config, 10.0), Err(HarnessError::Divergent { .. })));
        let mut zero = ExperimentConfig::new(map, RateFunction::constant(q("0"), 1).unwrap(), vec![1000]);
        zero.samples = 4;
        let r = dichotomy_check(&zero, 10.0).unwrap();
        assert_eq!(r.max_final_count, 0);
        assert_eq!(r.max_last_hit, None);
    }

    #[test]
    fn variance_split_identity() {
        // (X + Y)^2 = X^2 + Y^2 + 2XY holds sample by sample, and mixing keeps
        // the cross term small once a is large.
        let map = MapSpec::doubling();
        let rate = RateFunction::power(q("1/2"), q("1")).unwrap();
        let mut config = ExperimentConfig::new(map.clone(), rate.clone(), vec![600]);
        config.samples = 400;
        config.keep_hits = true;
        config.master_seed = 5;
        let report = run_experiment(&config).unwrap();
        let hits = retained_hits(&report).unwrap();
        let whole = QbcInstance::recurrence(&map, &rate, 50, 600, 12).unwrap();
        let left = QbcInstance::recurrence(&map, &rate, 50, 300, 12).unwrap();
        let right = QbcInstance::recurrence(&map, &rate, 301, 600, 12).unwrap();
        let (x, y) = (centered_sums(&hits, &left), centered_sums(&hits, &right));
        let cross = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / x.len() as f64;
        let total = variance_statistic(&hits, &whole).statistic;
        let parts = variance_statistic(&hits, &left).statistic + variance_statistic(&hits, &right).statistic;
        assert!((total - (parts + 2.0 * cross)).abs() < 1e-9 * total.max(1.0));
        assert!(cross.abs() <= 0.1 * total, "cross {cross} total {total}");
    }
}
