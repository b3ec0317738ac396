use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gcgarch::estimation::fit_marginals;
use gcgarch::exec::Exec;
use gcgarch::simulate::{draw_scenarios, filtered_state, simulate_panel};
use gcgarch::synth::s1_model;
use std::hint::black_box;

fn scenarios(c: &mut Criterion) {
    let model = s1_model(10, 5, 2).unwrap();
    let history = simulate_panel(&model, 250, 6).unwrap();
    let state = filtered_state(&model, &history).unwrap();
    let mut g = c.benchmark_group("draw_scenarios");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), 5000), &exec, |b, &e| {
            b.iter(|| black_box(draw_scenarios(&state, 5000, 1, e)))
        });
    }
    g.finish();
}

fn marginals(c: &mut Criterion) {
    let model = s1_model(10, 5, 2).unwrap();
    let panel = simulate_panel(&model, 750, 7).unwrap();
    let mut g = c.benchmark_group("fit_marginals");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), panel.n_series()), &exec, |b, &e| {
            b.iter(|| black_box(fit_marginals(&panel, e).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, scenarios, marginals);
criterion_main!(benches);
