//! Compares the data-parallel inner loops against a sequential baseline.
//!
//! With the default `parallel` feature the library fans flag trials and
//! per-point analyses out on the rayon pool; running the same calls inside a
//! one-thread pool gives the sequential timing. Building with
//! `--no-default-features` removes rayon entirely, in which case both
//! benchmarks coincide.

use criterion::{criterion_group, criterion_main, Criterion};

use pfaffian_core::expr::parse::parse_expr;
use pfaffian_core::exterior::{Distribution, KForm, SmoothMap};
use pfaffian_core::fibration::PfaffianFibration;
use pfaffian_core::linalg::SamplingPolicy;
use pfaffian_core::tableau::{involutivity_test, random_tableau};
use pfaffian_core::{Chart, Expr};

fn contact() -> PfaffianFibration {
    let p = Chart::new("P", &["x", "u", "p"]).unwrap();
    let x = Chart::new("X", &["x"]).unwrap();
    let pi = SmoothMap::new(p.clone(), x, vec![parse_expr("x", &p).unwrap()]).unwrap();
    let theta = KForm::one_form(
        &p,
        vec![
            parse_expr("-p", &p).unwrap(),
            Expr::one(&p),
            Expr::zero(&p),
        ],
    );
    let dist = Distribution::from_annihilators(p, vec![theta]).unwrap();
    PfaffianFibration::validate(pi, dist, &SamplingPolicy::with_seed(1)).unwrap()
}

#[cfg(feature = "parallel")]
fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
}

fn bench_flag_search(c: &mut Criterion) {
    let tau = random_tableau(7, 4, 4, 12);
    let mut group = c.benchmark_group("flag_search_24_trials");
    group.bench_function("default_pool", |b| {
        b.iter(|| involutivity_test(&tau, 24, 9))
    });
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        group.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| involutivity_test(&tau, 24, 9)))
        });
    }
    group.finish();
}

fn bench_point_analysis(c: &mut Criterion) {
    let f = contact();
    let policy = SamplingPolicy::with_seed(5);
    let mut group = c.benchmark_group("integrability_8_points");
    group.sample_size(10);
    group.bench_function("default_pool", |b| {
        b.iter(|| f.one_integrability_report(&policy, 8, 8).unwrap())
    });
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        group.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| f.one_integrability_report(&policy, 8, 8).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_flag_search, bench_point_analysis);
criterion_main!(benches);
