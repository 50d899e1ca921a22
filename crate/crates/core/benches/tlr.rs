use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fradi::cholesky::factorize;
use fradi::tlr::assemble_tlr;
use fradi::{assemble, order_points, Execution, Grid, ProblemSpec};

const SCHEDULES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn tlr_paths(c: &mut Criterion) {
    let spec = ProblemSpec::beta_2d();
    let eps = 1e-6;
    for side in [32usize, 48] {
        let op = assemble(&spec, &Grid::with_points_per_axis(&spec, side).unwrap()).unwrap();
        let p = order_points(&op.grid.points(), side).unwrap();
        let a = assemble_tlr(&op, &p, eps, 1, Execution::Parallel).unwrap();
        let f = factorize(&a, eps, Execution::Parallel).unwrap();
        let x: Vec<f64> = (0..op.n()).map(|i| (i as f64 * 0.01).sin()).collect();
        let n = op.n();

        let mut g = c.benchmark_group("tlr");
        g.sample_size(10).measurement_time(Duration::from_secs(5));
        for (name, exec) in SCHEDULES {
            g.bench_with_input(BenchmarkId::new(format!("assemble/{name}"), n), &exec, |b, &e| {
                b.iter(|| assemble_tlr(&op, &p, eps, 1, e).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("factorize/{name}"), n), &exec, |b, &e| {
                b.iter(|| factorize(&a, eps, e).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("matvec/{name}"), n), &exec, |b, &e| {
                b.iter(|| a.matvec(black_box(&x), e).unwrap())
            });
        }
        g.bench_function(BenchmarkId::new("solve", n), |b| b.iter(|| f.solve(black_box(&x)).unwrap()));
        g.finish();
    }
}

criterion_group!(benches, tlr_paths);
criterion_main!(benches);
