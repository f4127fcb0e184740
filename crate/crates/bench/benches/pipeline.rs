use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use presym_bench::{bounded_curvature, expression_corpus, quartic_oscillator, stabilized_ladder};
use presym_core::expr::{CompiledExpr, Layout};
use presym_core::{diff, integrate, run_ladder, simplify, AnalysisConfig, Gauge, IntegratorConfig, PhasePoint};

fn symbolic(c: &mut Criterion) {
    let corpus = expression_corpus();
    c.bench_function("diff+simplify corpus", |b| {
        b.iter(|| {
            for e in &corpus {
                for v in e.free_variables() {
                    black_box(simplify(&diff(e, &v)));
                }
            }
        })
    });

    let e = &corpus[0];
    let names: Vec<String> = e.free_variables().into_iter().collect();
    let compiled = CompiledExpr::new(e, &Layout::new(&names)).unwrap();
    let x: Vec<f64> = (0..names.len()).map(|i| 0.1 * i as f64 - 0.4).collect();
    c.bench_function("compiled eval", |b| b.iter(|| compiled.eval(black_box(&x)).unwrap()));
}

fn ladder(c: &mut Criterion) {
    let sys = bounded_curvature();
    let cfg = AnalysisConfig::default();
    let mut group = c.benchmark_group("ladder");
    group.sample_size(10);
    group.bench_function("bounded curvature", |b| b.iter(|| run_ladder(&sys, sys.domain(), &cfg).unwrap()));
    group.finish();
}

fn integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate");
    group.sample_size(10);

    let sys = quartic_oscillator();
    let ladder = stabilized_ladder(&sys);
    let x0 = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.8], vec![0.0, 0.8]);
    let cfg = IntegratorConfig::span(0.0, 1.0, 1e-3);
    group.bench_function("quartic feedback 1000 steps", |b| {
        b.iter(|| integrate(&sys, &ladder, None, &x0, &cfg).unwrap())
    });

    let sys = bounded_curvature();
    let ladder = stabilized_ladder(&sys);
    let x0 = sys.point(&ladder.final_points[0]);
    let cfg = IntegratorConfig {
        gauge: Gauge::Zero,
        ..IntegratorConfig::span(0.0, 1.0, 1e-3)
    };
    group.bench_function("bounded curvature multipliers 1000 steps", |b| {
        b.iter(|| integrate(&sys, &ladder, None, &x0, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, symbolic, ladder, integration);
criterion_main!(benches);
