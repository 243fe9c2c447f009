use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hyperfield::energetics::e_hyper_dirac;
use hyperfield::evolve::{rhs, Model, Stepper};
use hyperfield::grid::ChannelGrid;
use hyperfield::initdata::{solve_helmholtz, SolverOptions};
use hyperfield::stencil::{Stencil, StencilOrder};
use hyperfield_bench::{gaussian_state, helmholtz_source, slice, u1_model};

fn bench_rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs");
    g.sample_size(10);
    for (name, model) in [("u1", u1_model()), ("free_dirac", Model::free_dirac(0.5))] {
        let y = gaussian_state(32, 0.25);
        let st = Stencil::new(StencilOrder::Fourth, 0.25);
        let mut out = ChannelGrid::zeros(y.grid(), y.fields.nch);
        g.bench_function(BenchmarkId::new(name, 32), |b| b.iter(|| rhs(&model, &st, black_box(&y.fields), 3.0, &mut out)));
    }
    g.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("rk4_step");
    g.sample_size(10);
    for n in [24, 32] {
        let mut y = gaussian_state(n, 0.25);
        let mut stepper = Stepper::new(u1_model(), StencilOrder::Fourth, y.grid());
        g.bench_function(BenchmarkId::new("u1", n), |b| b.iter(|| stepper.step(&mut y, 1e-3).unwrap()));
    }
    g.finish();
}

fn bench_slice(c: &mut Criterion) {
    let mut g = c.benchmark_group("slice_energy");
    for points in [1_000, 10_000] {
        let s = slice(points);
        g.bench_function(BenchmarkId::new("dirac", points), |b| b.iter(|| e_hyper_dirac(black_box(&s)).unwrap()));
    }
    g.finish();
}

fn bench_solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("helmholtz_cg");
    g.sample_size(10);
    for order in [StencilOrder::Second, StencilOrder::Fourth] {
        let f = helmholtz_source(32, 0.25);
        let opts = SolverOptions { order, ..Default::default() };
        g.bench_function(BenchmarkId::new(format!("{order:?}"), 32), |b| {
            b.iter(|| solve_helmholtz(black_box(&f), 0.5, None, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_rhs, bench_step, bench_slice, bench_solver);
criterion_main!(benches);
