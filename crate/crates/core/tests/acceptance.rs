//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p qbc-core --test acceptance -- 1 4`.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use qbc_core::counting::{count_recurrence, geometric_checkpoints_from, CountOptions, EventKind};
use qbc_core::harness::{
    default_envelope, dichotomy_check, fit_error_exponent, median, retained_hits, run_experiment,
    synthetic_hits, variance_statistic, ExperimentConfig, ExperimentReport, FitOptions, FitOutcome,
    QbcInstance,
};
use qbc_core::measure::{
    event_pullback, event_recurrence, measure_intersection, mixing_deficit, phi_partial_sums, rect_measure,
    recurrence_measure, Rect,
};
use qbc_core::points::GenericPoint;
use qbc_core::rate::{RateFamily, RateFunction};
use qbc_core::{MapSpec, Rational};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

fn power(c: &str, p: &str) -> RateFunction {
    RateFunction::power(q(c), q(p)).unwrap()
}

fn constant(c: &str) -> RateFunction {
    RateFunction::constant(q(c), 1).unwrap()
}

/// Uniform rational in `[0, 1]` with a dyadic denominator.
fn unit(rng: &mut ChaCha8Rng, bits: u32) -> Rational {
    let den = 1i64 << bits;
    Rational::new((rng.next_u64() % (den as u64 + 1)) as i64, den)
}

fn interval(rng: &mut ChaCha8Rng) -> (Rational, Rational) {
    let (a, b) = (unit(rng, 20), unit(rng, 20));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn within(limit: u64, t: Duration) -> bool {
    t.as_secs() < limit
}

fn c1_oracle_exactness() -> Verdict {
    let map = MapSpec::doubling();
    let start = Instant::now();
    let rate = power("1/2", "1");
    let phis = phi_partial_sums(&map, &rate, 20).unwrap();
    let mut psi = Rational::zero();
    let mut worst = Rational::zero();
    for (i, phi) in phis.iter().enumerate() {
        psi += Rational::new(1, i as i64 + 1);
        worst = worst.max((phi - &psi).abs());
    }
    let a1 = recurrence_measure(&map, &constant("1/4"), 1).unwrap().into_inner();
    let a2 = recurrence_measure(&map, &constant("1/8"), 2).unwrap().into_inner();
    let t = start.elapsed();
    Verdict {
        pass: worst <= Rational::one() && a1 == q("1/2") && a2 == q("1/4") && within(10, t),
        detail: format!("max |Phi-Psi| = {:.4}, mu(A_1) = {a1}, mu(A_2) = {a2}, {t:.2?}", worst.to_f64()),
    }
}

fn c2_pairwise() -> Verdict {
    let map = MapSpec::doubling();
    let rate = power("1/2", "1");
    let start = Instant::now();
    let events: Vec<_> = (1..=12).map(|n| event_recurrence(&map, &rate, n).unwrap()).collect();
    let sum: Rational = events.iter().fold(Rational::zero(), |acc, e| acc + e.measure().into_inner());
    let mut pairs = Rational::zero();
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            pairs += measure_intersection(a, b).unwrap().into_inner();
        }
    }
    let lhs = Rational::from_integer(2) * pairs;
    let rhs = &sum * &sum + Rational::from_integer(8) * &sum + Rational::from_integer(8);
    let t = start.elapsed();
    Verdict {
        pass: lhs <= rhs && within(60, t),
        detail: format!("2 sum mu(A_m∩A_n) = {:.4} <= {:.4}, {t:.2?}", lhs.to_f64(), rhs.to_f64()),
    }
}

/// Random union of depth-`k` cylinders, merged into disjoint intervals.
fn cylinder_union(map: &MapSpec, rng: &mut ChaCha8Rng) -> Vec<Rect> {
    let k = 1 + (rng.next_u64() % 4) as u32;
    let mut chosen: Vec<(Rational, Rational)> = map
        .cylinders(k)
        .unwrap()
        .filter(|_| rng.next_u64() % 2 == 0)
        .map(|c| (c.axes[0].left.clone(), c.axes[0].right.clone()))
        .collect();
    chosen.sort();
    let mut merged: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in chosen {
        match merged.last_mut() {
            Some(last) if last.1 == a => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    merged.into_iter().map(|iv| vec![iv]).collect()
}

fn c3_mixing() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut violations = 0;
    for map in [MapSpec::doubling(), MapSpec::tent()] {
        let inv_lambda = map.lambda().recip();
        let d = Rational::from_integer(map.dimension() as i64);
        for n in 1..=12u32 {
            for _ in 0..100 {
                let e = vec![interval(&mut rng)];
                let f = cylinder_union(&map, &mut rng);
                let mu_f: Rational = f.iter().fold(Rational::zero(), |acc, r| acc + rect_measure(r));
                let deficit = mixing_deficit(&map, &e, &f, n).unwrap();
                let bound = Rational::from_integer(4) * &d * inv_lambda.pow(n as i32) * mu_f;
                checked += 1;
                if deficit.abs() > bound {
                    violations += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    Verdict {
        pass: violations == 0 && within(60, t),
        detail: format!("{violations} violations in {checked} instances, {t:.2?}"),
    }
}

fn c4_sandwich() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut checked = 0;
    for map in [MapSpec::doubling(), MapSpec::toral_diag(&[2, 3]).unwrap()] {
        let d = map.dimension();
        for _ in 0..50 {
            let m = 1 + (rng.next_u64() % 8) as u32;
            let mut psi = Vec::new();
            let (mut inner, mut outer, mut rect) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..d {
                // radii in units of 1/256 with r < psi <= 1/2
                let p = 1 + (rng.next_u64() % 128) as i64;
                let r = (rng.next_u64() % p as u64) as i64;
                let (p, r) = (Rational::new(p, 256), Rational::new(r, 256));
                let z = unit(&mut rng, 16);
                let clip = |c: &Rational, w: &Rational| {
                    ((c - w).max(Rational::zero()), (c + w).min(Rational::one()))
                };
                rect.push(clip(&z, &r));
                inner.push(clip(&z, &(&p - &r)));
                outer.push(clip(&z, &(&p + &r)));
                psi.push(RateFamily::constant(p));
            }
            let rate = RateFunction::new(psi).unwrap();
            let a = event_recurrence(&map, &rate, m).unwrap().measure_within(&rect);
            let lo = event_pullback(&map, &inner, m).unwrap().measure_within(&rect);
            let hi = event_pullback(&map, &outer, m).unwrap().measure_within(&rect);
            checked += 1;
            if !(lo <= a && a <= hi) {
                violations += 1;
            }
        }
    }
    Verdict {
        pass: violations == 0,
        detail: format!("{violations} violations in {checked} instances"),
    }
}

/// Median relative error at the last checkpoint and envelope coverage.
fn counting_stats(report: &ExperimentReport) -> (f64, f64) {
    let last = report.checkpoints.len() - 1;
    let main = report.last().main_float;
    let rel: Vec<f64> = report.errors_at(last).iter().map(|e| e / main).collect();
    (median(&rel), report.envelope_fraction(default_envelope))
}

fn c5_one_dim() -> Verdict {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(
        MapSpec::doubling(),
        power("1/2", "1/2"),
        geometric_checkpoints_from(100, 1_000_000),
    );
    config.samples = 200;
    config.master_seed = 5;
    let report = run_experiment(&config).unwrap();
    let (rel, cover) = counting_stats(&report);
    let fit = fit_error_exponent(&report, &FitOptions::default()).unwrap();
    let (band_ok, fit_text) = match &fit {
        FitOutcome::Fitted(f) => (f.band.1 <= 0.75, format!("slope {:.3} band [{:.3}, {:.3}]", f.slope, f.band.0, f.band.1)),
        FitOutcome::ZeroResidual => (true, "zero residual".into()),
    };
    let t = start.elapsed();
    Verdict {
        pass: rel <= 0.05 && cover >= 0.95 && band_ok,
        detail: format!(
            "Psi = {:.1}, median rel err {rel:.4}, envelope {:.1}%, {fit_text}, unresolved {}, {t:.1?}",
            report.last().main_float,
            100.0 * cover,
            report.unresolved_total
        ),
    }
}

fn c6_two_dim() -> Verdict {
    let start = Instant::now();
    let rate = RateFunction::uniform(RateFamily::power(q("1/2"), q("1/4")), 2).unwrap();
    let mut config = ExperimentConfig::new(
        MapSpec::toral_diag(&[2, 3]).unwrap(),
        rate,
        geometric_checkpoints_from(100, 100_000),
    );
    config.samples = 100;
    config.master_seed = 6;
    let report = run_experiment(&config).unwrap();
    let (rel, cover) = counting_stats(&report);
    let t = start.elapsed();
    Verdict {
        pass: rel <= 0.08 && cover >= 0.95,
        detail: format!(
            "Psi = {:.1}, median rel err {rel:.4}, envelope {:.1}%, unresolved {}, {t:.1?}",
            report.last().main_float,
            100.0 * cover,
            report.unresolved_total
        ),
    }
}

fn c7_target() -> Verdict {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(
        MapSpec::doubling(),
        power("1/2", "1/2"),
        geometric_checkpoints_from(100, 1_000_000),
    );
    config.kind = EventKind::Target;
    config.target = Some(vec![q("1/2")]);
    config.samples = 200;
    config.master_seed = 7;
    let report = run_experiment(&config).unwrap();
    let (rel, cover) = counting_stats(&report);
    let t = start.elapsed();
    Verdict {
        pass: rel <= 0.05 && cover >= 0.95,
        detail: format!(
            "Phi = {:.1}, median rel err {rel:.4}, envelope {:.1}%, unresolved {}, {t:.1?}",
            report.last().main_float,
            100.0 * cover,
            report.unresolved_total
        ),
    }
}

fn c8_dichotomy() -> Verdict {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(MapSpec::doubling(), power("1/2", "2"), vec![1_000_000]);
    config.samples = 200;
    config.master_seed = 8;
    let r = dichotomy_check(&config, 10.0).unwrap();
    let t = start.elapsed();
    Verdict {
        pass: r.max_final_count <= 20,
        detail: format!(
            "sum 2psi = {:.3}, max final R = {}, max last hit = {:?}, {t:.1?}",
            r.psi_total, r.max_final_count, r.max_last_hit
        ),
    }
}

fn c9_variance() -> Verdict {
    let start = Instant::now();
    let map = MapSpec::doubling();
    let rate = power("1/2", "1");
    let mut config = ExperimentConfig::new(map.clone(), rate.clone(), vec![500]);
    config.samples = 500;
    config.master_seed = 9;
    config.keep_hits = true;
    let report = run_experiment(&config).unwrap();
    let inst = QbcInstance::recurrence(&map, &rate, 1, 500, 16).unwrap();
    let v = variance_statistic(&retained_hits(&report).unwrap(), &inst);
    let synthetic = variance_statistic(&synthetic_hits(&inst, 20_000, 99), &inst);
    let binomial: f64 = inst.c.iter().map(|c| c * (1.0 - c)).sum();
    let z = (synthetic.statistic - binomial).abs() / synthetic.std_error;
    let t = start.elapsed();
    Verdict {
        pass: v.statistic <= 10.0 * v.sum_phi && z <= 4.0,
        detail: format!(
            "statistic {:.2} vs 10 sum phi = {:.2} (ratio {:.3}); synthetic {:.2} vs binomial {binomial:.2} ({z:.2} sigma), {t:.1?}",
            v.statistic,
            10.0 * v.sum_phi,
            v.ratio,
            synthetic.statistic
        ),
    }
}

fn c10_monte_carlo() -> Verdict {
    let start = Instant::now();
    let points = 100_000u64;
    let mut worst = 0.0f64;
    for (map, rate) in [(MapSpec::doubling(), constant("1/5")), (MapSpec::tent(), constant("1/5"))] {
        let exact: Vec<f64> = (1..=10).map(|n| recurrence_measure(&map, &rate, n).unwrap().to_f64()).collect();
        let mut freq = [0u64; 10];
        let opts = CountOptions {
            keep_hits: true,
            ..CountOptions::default()
        };
        for i in 0..points {
            let mut p = GenericPoint::sample(&map, qbc_core::points::point_seed(10, i));
            let rec = count_recurrence(&rate, &mut p, &[10], &opts).unwrap();
            for &n in rec.hits.as_deref().unwrap_or_default() {
                freq[n as usize - 1] += 1;
            }
        }
        for (f, mu) in freq.iter().zip(&exact) {
            let sigma = (mu * (1.0 - mu) / points as f64).sqrt();
            worst = worst.max((*f as f64 / points as f64 - mu).abs() / sigma);
        }
    }
    let t = start.elapsed();
    Verdict {
        pass: worst <= 4.0,
        detail: format!("worst deviation {worst:.2} sigma over n <= 10, {t:.1?}"),
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        ("oracle exactness", c1_oracle_exactness),
        ("pairwise independence on average", c2_pairwise),
        ("rectangular mixing bound", c3_mixing),
        ("rectangle sandwich", c4_sandwich),
        ("counting, 1-dim", c5_one_dim),
        ("counting, 2-dim", c6_two_dim),
        ("shrinking target", c7_target),
        ("dichotomy, convergent rate", c8_dichotomy),
        ("variance condition", c9_variance),
        ("Monte Carlo vs oracle", c10_monte_carlo),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {name}: {}", i + 1, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
