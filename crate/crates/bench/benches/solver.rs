use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kslab::solver::{run, stable_dt, step};
use kslab::{DiagnosticsConfig, SolverConfig, VSolver};
use kslab_bench::bump;

fn single_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [256, 1024, 4096] {
        let (params, model, grid, state) = bump(n);
        let config = SolverConfig::for_mass(params.mass, 1.0);
        let dt = stable_dt(&state, &params, &model, &grid, &config);
        for mode in [VSolver::Explicit, VSolver::Implicit] {
            group.bench_with_input(BenchmarkId::new(mode.as_str(), n), &n, |b, _| {
                b.iter(|| step(black_box(&state), &params, &model, &grid, dt, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn short_run(c: &mut Criterion) {
    let (params, model, grid, state) = bump(256);
    let mut config = SolverConfig::for_mass(params.mass, 1e-3);
    config.output_stride = 100;
    let diagnostics = DiagnosticsConfig::default();
    c.bench_function("run n=256 t=1e-3", |b| {
        b.iter(|| {
            run(
                black_box(&state),
                &params,
                &model,
                &grid,
                &config,
                &diagnostics,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, single_step, short_run);
criterion_main!(benches);
