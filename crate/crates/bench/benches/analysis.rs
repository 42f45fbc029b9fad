use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use quantlim_bench::{grouped_corpus, interval_dataset, linear_corpus};
use quantlim_core::identifiability::{rho_grid, trace_example1};
use quantlim_core::mle::{self, FitOptions};
use quantlim_core::{fim, idqd, systems, ParameterPoint};

fn limits(c: &mut Criterion) {
    let corpus = grouped_corpus(1000);
    c.bench_function("idqd verdicts, 1000 grouped specs", |b| {
        b.iter(|| {
            for s in &corpus {
                black_box(idqd::verdict_for_spec(s, s.dim_theta).unwrap());
            }
        })
    });
}

fn fisher(c: &mut Criterion) {
    let ex1 = systems::scalar_mean_var(-2.0, 2.0).unwrap();
    let t = ParameterPoint(vec![0.3, 1.2]);
    c.bench_function("fim, scalar mean/variance", |b| b.iter(|| black_box(fim::fim(&ex1, &t).unwrap())));
    let corpus = linear_corpus(50);
    c.bench_function("fim, 50 linear specs", |b| {
        b.iter(|| {
            for (s, t) in &corpus {
                black_box(fim::fim(s, t).unwrap());
            }
        })
    });
}

fn trace(c: &mut Criterion) {
    let rhos = rho_grid(0.02, 0.98, 50);
    c.bench_function("equivalence trace, 50 rho", |b| {
        b.iter(|| black_box(trace_example1((0.0, 1.0), &rhos, -2.0, 2.0).unwrap()))
    });
}

fn fit(c: &mut Criterion) {
    let (spec, data) = interval_dataset(10_000);
    let opts = FitOptions::for_spec(&spec).unwrap();
    let mut g = c.benchmark_group("mle");
    g.sample_size(10);
    g.bench_function("fit, scalar mean/variance, n = 1e4", |b| {
        b.iter(|| black_box(mle::fit(&spec, &data, &opts).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, limits, fisher, trace, fit);
criterion_main!(benches);
