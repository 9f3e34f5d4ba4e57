//! Cell-problem throughput. Run once with default features and once with
//! `--no-default-features`; the parallel build also benches a one-thread pool
//! so both paths show up in a single report.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use poro_homog::cell_elastic::elastic_coefficients;
use poro_homog::cell_flow::solve_b2;
use poro_homog::cell_thermal::solve_btheta;
use poro_homog::linsolve::SolverConfig;
use poro_homog::microcell::{build_cell, GeometrySpec, VoxelCell};
use poro_homog::Phase;

type Job = fn(&VoxelCell, &SolverConfig);

fn elastic(cell: &VoxelCell, cfg: &SolverConfig) {
    elastic_coefficients(cell, 1.0, 1.0, cfg).unwrap();
}

fn thermal(cell: &VoxelCell, cfg: &SolverConfig) {
    solve_btheta(cell, 1.0, cfg).unwrap();
}

fn stokes(cell: &VoxelCell, cfg: &SolverConfig) {
    solve_b2(cell, 1.0, cfg).unwrap();
}

fn cases() -> Vec<(&'static str, VoxelCell, Job)> {
    let sphere = |n| build_cell(&GeometrySpec::sphere([0.5; 3], 0.3, Phase::Fluid, n)).unwrap();
    let channel = |n| build_cell(&GeometrySpec::channel(0, 0.25, n)).unwrap();
    vec![
        ("elastic/sphere16", sphere(16), elastic as Job),
        ("btheta/sphere32", sphere(32), thermal as Job),
        ("b2/channel32", channel(32), stokes as Job),
    ]
}

fn bench(c: &mut Criterion) {
    let cfg = SolverConfig::with_tolerance(1e-9);
    let mut group = c.benchmark_group("cell_solves");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    for (name, cell, job) in cases() {
        #[cfg(feature = "parallel")]
        {
            let threads = rayon::current_num_threads();
            group.bench_with_input(BenchmarkId::new(name, format!("pool-{threads}")), &cell, |b, cell| {
                b.iter(|| job(cell, &cfg))
            });
            let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            group.bench_with_input(BenchmarkId::new(name, "single-thread"), &cell, |b, cell| {
                b.iter(|| single.install(|| job(cell, &cfg)))
            });
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_with_input(BenchmarkId::new(name, "sequential"), &cell, |b, cell| {
            b.iter(|| job(cell, &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
