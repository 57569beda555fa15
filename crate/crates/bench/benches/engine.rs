use criterion::{black_box, criterion_group, criterion_main, Criterion};

use positivep::kernels::{KernelOrdering, PhasePointSet, Spin12PointFamily};
use positivep::projection::Regularizer;
use positivep::*;

fn reference_params(n: usize) -> ModelParams {
    ModelParams::new(n, 1.5, 1.0, [0.2, 0.02, 0.1, 0.05], 0.001).unwrap()
}

fn bench_drift_diffusion(c: &mut Criterion) {
    let params = reference_params(10);
    let state = PhaseSpaceState::coherent_x(10);
    c.bench_function("drift_diffusion n=10", |b| {
        b.iter(|| drift_diffusion(black_box(&state), black_box(&params)).unwrap())
    });
}

fn bench_em_step(c: &mut Criterion) {
    let params = reference_params(10);
    let state = PhaseSpaceState::coherent_x(10);
    let noise = vec![0.1f64; noise_dim(&params)];
    c.bench_function("em_step n=10 full noise", |b| {
        b.iter(|| em_step(black_box(&state), black_box(&params), 1e-3, black_box(&noise)).unwrap())
    });
}

fn bench_projection(c: &mut Criterion) {
    let reg = Regularizer::new(Spin12PointFamily::new(0.0), DEFAULT_Z_MAX, DEFAULT_NU_MAX);
    let tame = (C64::new(1.3, 0.2), C64::new(0.4, -0.5));
    let deep = (C64::new(1.4, 0.3), C64::new(-0.65, 0.1));
    c.bench_function("projection tame state", |b| {
        b.iter(|| reg.project(black_box(tame.0), black_box(tame.1), 0.37).unwrap())
    });
    c.bench_function("projection near-pole state", |b| {
        b.iter(|| reg.project(black_box(deep.0), black_box(deep.1), 0.37).unwrap())
    });
}

fn bench_kernel_build(c: &mut Criterion) {
    c.bench_function("phase point set N=5", |b| {
        b.iter(|| PhasePointSet::build(black_box(5), KernelOrdering::Normal).unwrap())
    });
}

fn bench_trajectory(c: &mut Criterion) {
    let params = reference_params(5);
    let schedule = RunSchedule::uniform(1.0, 2, 1e-3, 1, 7);
    let reg = Regularizer::new(Spin12PointFamily::new(0.0), schedule.z_max, schedule.nu_max);
    let init = PhaseSpaceState::coherent_x(5);
    c.bench_function("trajectory n=5 t=1", |b| {
        b.iter(|| run_trajectory(black_box(&params), &schedule, 13, &init, &reg).unwrap())
    });
}

fn bench_exact_step(c: &mut Criterion) {
    let params = reference_params(5);
    let rho0 = DensityMatrix::all_x_plus(5);
    c.bench_function("exact evolve n=5 t=0.1", |b| {
        b.iter(|| evolve_exact(black_box(&params), &rho0, &[0.1], 1e-3).unwrap())
    });
}

criterion_group!(
    benches,
    bench_drift_diffusion,
    bench_em_step,
    bench_projection,
    bench_kernel_build,
    bench_trajectory,
    bench_exact_step
);
criterion_main!(benches);
