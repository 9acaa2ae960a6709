use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dynsolow::dynamics::{jacobian_reduced, rhs_full, rhs_reduced};
use dynsolow::equilibria::equilibria;
use dynsolow::stochastic::{MicroEnsemble, DEFAULT_ALPHA};
use dynsolow::{simulate, RegimeMode};
use dynsolow_bench::{base, general_run, sample_full_state, sample_reduced_state};

fn right_hand_sides(c: &mut Criterion) {
    let p = base();
    let full = sample_full_state();
    let reduced = sample_reduced_state();
    c.bench_function("rhs_full", |b| {
        b.iter(|| rhs_full(black_box(&full), &p, RegimeMode::General))
    });
    c.bench_function("rhs_reduced", |b| b.iter(|| rhs_reduced(black_box(&reduced), &p, 0.1)));
    c.bench_function("jacobian_reduced", |b| b.iter(|| jacobian_reduced(black_box(&reduced), &p)));
}

fn integration(c: &mut Criterion) {
    let p = base();
    let cfg = general_run(100.0);
    c.bench_function("simulate_general_100y", |b| b.iter(|| simulate(&p, black_box(&cfg))));
}

fn analysis(c: &mut Criterion) {
    let p = base();
    c.bench_function("equilibria_base", |b| b.iter(|| equilibria(black_box(&p))));
    c.bench_function("micro_ensemble_step_1e5", |b| {
        let mut e = MicroEnsemble::new(100_000, 0.0, p.tau_s, DEFAULT_ALPHA, 3);
        b.iter(|| e.step(black_box(0.4), 1.0))
    });
}

criterion_group!(benches, right_hand_sides, integration, analysis);
criterion_main!(benches);
