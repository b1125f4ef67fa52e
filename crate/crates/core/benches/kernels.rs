//! Hot kernels, each measured on a single-thread pool and on the default
//! pool. Build with `--no-default-features` to measure the sequential
//! fallback instead.

use std::hint::black_box;

use adlab::commutator::{commutator, convergence_study, CommutatorNorm, CommutatorStudyConfig, WSource};
use adlab::library::FieldSpec;
use adlab::mollifier::{Mollifier, Mollify, Profile};
use adlab::regime::emit_region_map;
use adlab::solver::{solve, InitialDatum, SolverConfig, Velocity};
use adlab::spectral::{forward, inverse};
use adlab::TorusGrid;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

type Runner = Box<dyn Fn(&mut (dyn FnMut() + Send))>;

fn pools() -> Vec<(String, Runner)> {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let n = rayon::current_num_threads();
        vec![
            ("1-thread".to_string(), Box::new(move |f: &mut (dyn FnMut() + Send)| single.install(f))),
            (format!("default-{n}"), Box::new(|f: &mut (dyn FnMut() + Send)| f())),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential".to_string(), Box::new(|f: &mut (dyn FnMut() + Send)| f()))]
    }
}

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_round_trip");
    for (d, n) in [(2, 256), (2, 1024), (3, 64)] {
        let g = TorusGrid::new(d, n).unwrap();
        let u = InitialDatum::SmoothRandom { seed: 1, max_mode: 8 }.sample(&g).unwrap();
        for (name, run) in pools() {
            group.bench_with_input(BenchmarkId::new(name, format!("d{d}_n{n}")), &u, |b, u| {
                b.iter(|| run(&mut || {
                    black_box(inverse(&forward(u)));
                }))
            });
        }
    }
    group.finish();
}

fn mollify(c: &mut Criterion) {
    let g = TorusGrid::new(2, 512).unwrap();
    let b = FieldSpec::taylor_green(1.0).sample(&g, 0.0).unwrap();
    let w = InitialDatum::SmoothRandom { seed: 2, max_mode: 8 }.sample(&g).unwrap();
    let m = Mollifier::gaussian(0.02).unwrap();
    let mut group = c.benchmark_group("mollify_n512");
    for (name, run) in pools() {
        group.bench_function(BenchmarkId::new("vector", &name), |bch| {
            bch.iter(|| run(&mut || {
                black_box(b.mollify(&m).unwrap());
            }))
        });
        group.bench_function(BenchmarkId::new("commutator", &name), |bch| {
            bch.iter(|| run(&mut || {
                black_box(commutator(&b, &w, &m).unwrap());
            }))
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let g = TorusGrid::new(2, 128).unwrap();
    let b = Velocity::from_spec(&FieldSpec::taylor_green(1.0), &g).unwrap();
    let u0 = InitialDatum::SmoothRandom { seed: 3, max_mode: 6 }.sample(&g).unwrap();
    let cfg = SolverConfig::fixed(0.01, 1e-3);
    let mut group = c.benchmark_group("solve_n128_10_steps");
    group.sample_size(20);
    for (name, run) in pools() {
        group.bench_function(name, |bch| {
            bch.iter(|| run(&mut || {
                black_box(solve(&b, &u0, &cfg).unwrap());
            }))
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let g = TorusGrid::new(2, 256).unwrap();
    let study = CommutatorStudyConfig {
        b_spec: FieldSpec::power_singularity(1.0, 1.25),
        grid: g,
        w_source: WSource::Field(InitialDatum::SmoothRandom { seed: 4, max_mode: 6 }.sample(&g).unwrap()),
        delta0: 0.1,
        levels: 4,
        profile: Profile::BumpCompact,
        norm: CommutatorNorm::L2Hminus1,
        time_samples: 1,
        t_final: 1.0,
    };
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for (name, run) in pools() {
        group.bench_function(BenchmarkId::new("commutator_study_n256", &name), |bch| {
            bch.iter(|| run(&mut || {
                black_box(convergence_study(&study).unwrap());
            }))
        });
        group.bench_function(BenchmarkId::new("region_map_r256", &name), |bch| {
            bch.iter(|| run(&mut || {
                black_box(emit_region_map(3, 0.0, 256).unwrap());
            }))
        });
    }
    group.finish();
}

criterion_group!(benches, fft, mollify, solver, sweeps);
criterion_main!(benches);
