//! Compares the data-parallel map against the sequential fallback on
//! the pipeline's hot loops.
//!
//! Two angles: `pipeline` benches public entry points whose inner
//! loops dispatch through `par::map_indexed` under whatever features
//! are active, and `map_modes` runs identical loop bodies through the
//! active map and the always-sequential one side by side.  Running
//! the suite with and without `--no-default-features` gives the full
//! picture; on a single-core host the two modes are expected to tie,
//! with rayon paying a small scheduling overhead on tiny bodies.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sosgap::extremal::{build_extremal_real, conjecture_scan};
use sosgap::forms::{motzkin, Case};
use sosgap::numerics::min_on_sphere;
use sosgap::par;
use sosgap::tcone::{t_membership, EvalVector};
use sosgap::varieties::samples::{cube_config, grid_forms};
use sosgap::varieties::{cb_relation, complete_intersection};

fn mode_label() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group
        .sample_size(10)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(3));

    group.bench_function(BenchmarkId::new("intersect_grid", mode_label()), |b| {
        let forms = grid_forms();
        b.iter(|| complete_intersection(Case::TernarySextic, &forms, 11).expect("grid"));
    });

    group.bench_function(
        BenchmarkId::new("sphere_min_motzkin", mode_label()),
        |b| {
            let f = motzkin();
            b.iter(|| min_on_sphere(&f, 8, 7));
        },
    );

    let config = cube_config().expect("cube fixture");
    let rel = cb_relation(&config).expect("cube relation");
    let cert = build_extremal_real(&config, &rel, &vec![1.0; 7], 0).expect("cube certificate");
    group.bench_function(
        BenchmarkId::new("conjecture_scan_cube", mode_label()),
        |b| {
            b.iter(|| conjecture_scan(cert.kernel(), 4, 23).expect("scan"));
        },
    );

    group.finish();
}

fn map_modes(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_modes");
    group
        .sample_size(10)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2));

    // Body of the sphere sample scan: evaluate a sextic at a seeded
    // random unit point.
    let f = motzkin();
    let sample_eval = |i: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5E ^ i as u64);
        let mut x = [0.0f64; 3];
        for v in &mut x {
            *v = rng.gen_range(-1.0..1.0);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        for v in &mut x {
            *v /= norm;
        }
        f.evaluate_real(&x)
    };
    group.bench_function(BenchmarkId::new("sample_eval", mode_label()), |b| {
        b.iter(|| par::map_indexed(10_000, sample_eval));
    });
    group.bench_function(
        BenchmarkId::new("sample_eval", "forced_sequential"),
        |b| {
            b.iter(|| par::map_indexed_seq(10_000, sample_eval));
        },
    );

    // Body of the square-image membership scan: test a seeded random
    // positive value vector against the cone.
    let membership = |i: usize| -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7C0 ^ i as u64);
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..4.0)).collect();
        let v = EvalVector::new(x).expect("vector");
        t_membership(&v, None).expect("membership").member
    };
    group.bench_function(BenchmarkId::new("membership", mode_label()), |b| {
        b.iter(|| par::map_indexed(1_000, membership));
    });
    group.bench_function(
        BenchmarkId::new("membership", "forced_sequential"),
        |b| {
            b.iter(|| par::map_indexed_seq(1_000, membership));
        },
    );

    group.finish();
}

criterion_group!(benches, pipeline, map_modes);
criterion_main!(benches);
