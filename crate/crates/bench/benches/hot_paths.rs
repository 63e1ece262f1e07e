use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qbc_core::counting::{count_recurrence, geometric_checkpoints, CountOptions};
use qbc_core::measure::{event_recurrence, recurrence_measure};
use qbc_core::points::{GenericPoint, PredicateOptions, RateRadii};
use qbc_core::rate::RateFunction;
use qbc_core::{MapSpec, Rational};

fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

fn predicate(c: &mut Criterion) {
    let mut g = c.benchmark_group("predicate");
    let rate = RateFunction::power(q("1/2"), q("1/2")).unwrap();
    for (name, map, fast) in [
        ("doubling/digits", MapSpec::doubling(), true),
        ("doubling/affine", MapSpec::doubling(), false),
        ("tent/affine", MapSpec::tent(), true),
    ] {
        let opts = PredicateOptions {
            fast_path: fast,
            ..PredicateOptions::default()
        };
        let mut p = GenericPoint::sample(&map, 7);
        p.ensure(20_000).unwrap();
        g.bench_function(name, |b| {
            let mut n = 1u64;
            b.iter(|| {
                n = n % 10_000 + 1;
                black_box(p.recurrence(n, &RateRadii { rate: &rate, n }, &opts))
            })
        });
    }
    g.finish();
}

fn count_point(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_point");
    g.sample_size(10);
    let map = MapSpec::doubling();
    let rate = RateFunction::power(q("1/2"), q("1/2")).unwrap();
    for n_max in [10_000u64, 100_000] {
        let cps = geometric_checkpoints(n_max);
        g.bench_with_input(BenchmarkId::from_parameter(n_max), &cps, |b, cps| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let mut p = GenericPoint::sample(&map, seed);
                black_box(count_recurrence(&rate, &mut p, cps, &CountOptions::default()).unwrap())
            })
        });
    }
    g.finish();
}

fn cylinders(c: &mut Criterion) {
    let mut g = c.benchmark_group("cylinders");
    for (name, map, depth) in [
        ("doubling", MapSpec::doubling(), 14u32),
        ("toral-diag(2,3)", MapSpec::toral_diag(&[2, 3]).unwrap(), 5),
    ] {
        g.bench_function(name, |b| b.iter(|| black_box(map.cylinders(depth).unwrap().count())));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    let map = MapSpec::doubling();
    let rate = RateFunction::power(q("1/2"), q("1")).unwrap();
    for n in [8u32, 12, 16] {
        g.bench_with_input(BenchmarkId::new("measure", n), &n, |b, &n| {
            b.iter(|| black_box(recurrence_measure(&map, &rate, n).unwrap()))
        });
    }
    g.bench_function("intersect/10x12", |b| {
        let a = event_recurrence(&map, &rate, 10).unwrap();
        let e = event_recurrence(&map, &rate, 12).unwrap();
        b.iter(|| black_box(a.intersect(&e).unwrap().measure()))
    });
    g.finish();
}

criterion_group!(benches, predicate, count_point, cylinders, oracle);
criterion_main!(benches);
