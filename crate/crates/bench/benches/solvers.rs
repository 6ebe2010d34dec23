use criterion::{black_box, criterion_group, criterion_main, Criterion};

use replab_bench::{line_problem, reference_problem};
use replab_core::resolvent::{default_psi, dense_resolvent_oracle, DefaultPsi};
use replab_core::{besov_norms, build_geometry, integrate_orbit, C64};

fn shifted_solve(c: &mut Criterion) {
    let p = reference_problem();
    let psi = default_psi(DefaultPsi::Gaussian, &p);
    let z = C64::new(1.0, 1e-3);
    c.bench_function("factor_and_solve_reference", |b| {
        b.iter(|| p.shifted(black_box(z)).unwrap().solve(&psi).unwrap())
    });
    let solver = p.shifted(z).unwrap();
    c.bench_function("solve_reference_factored", |b| b.iter(|| solver.solve(black_box(&psi)).unwrap()));
}

fn dense_oracle(c: &mut Criterion) {
    let p = line_problem(0.1, 19.0);
    let psi = vec![C64::new(1.0, 0.0); p.len()];
    c.bench_function("dense_oracle_379", |b| {
        b.iter(|| dense_resolvent_oracle(&p.hamiltonian, black_box(C64::new(1.0, 0.01)), &psi).unwrap())
    });
}

fn norms_and_geometry(c: &mut Criterion) {
    let p = reference_problem();
    let phi = p.shifted(C64::new(1.0, 1e-2)).unwrap().solve(&default_psi(DefaultPsi::Ring, &p)).unwrap();
    c.bench_function("besov_norms_reference", |b| b.iter(|| besov_norms(black_box(&phi), &p.decomp)));
    let grid = p.geom.grid.clone();
    c.bench_function("build_geometry_reference", |b| b.iter(|| build_geometry(black_box(&grid), 1.0, 1.0).unwrap()));
}

fn orbit(c: &mut Criterion) {
    c.bench_function("orbit_eps1_t100", |b| {
        b.iter(|| integrate_orbit(&[1.0], &[0.3], black_box(1.0), 100.0, 1e-3).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = shifted_solve, dense_oracle, norms_and_geometry, orbit
}
criterion_main!(benches);
