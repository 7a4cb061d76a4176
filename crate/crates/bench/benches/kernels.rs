use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use surfwave_bench::{grid, small_wave};
use surfwave_core::{LinearRhs, LinearSolver, Scheme, Stepper, SurfaceField};

fn product(c: &mut Criterion) {
    let mut group = c.benchmark_group("surface_product");
    for n in [32, 64, 128] {
        let g = grid(n, 8);
        let a = SurfaceField::from_fn(&g, |x, y| (x + y).sin() + 0.3 * (2.0 * x).cos());
        let b = SurfaceField::from_fn(&g, |x, y| (x - 2.0 * y).cos());
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(&a).product(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn linear_solve(c: &mut Criterion) {
    let g = grid(32, 24);
    let init = small_wave(&g);
    let solver = LinearSolver::new(&g, init.physics.linear_params());
    let mut rhs = LinearRhs::zeros(&g);
    rhs.kinematic = init.state.eta.clone();
    rhs.surfactant = SurfaceField::constant(&g, 1.0);
    // The first solve fills the factorization cache.
    solver.step_linear(1e-3, &rhs).unwrap();
    c.bench_function("linear_step_32x32x24", |bench| bench.iter(|| solver.step_linear(1e-3, black_box(&rhs)).unwrap()));
}

fn full_step(c: &mut Criterion) {
    let g = grid(32, 24);
    let init = small_wave(&g);
    let mut stepper = Stepper::new(&g, init.physics.clone(), Scheme::Imex1);
    stepper.step(&init.state, 1e-3).unwrap();
    c.bench_function("imex1_step_32x32x24", |bench| bench.iter(|| stepper.step(black_box(&init.state), 1e-3).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = product, linear_solve, full_step
}
criterion_main!(benches);
