use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tandem_core::fusion::{nested_cv_optimize, FusionConfig};
use tandem_core::metrics::{arm_comparison, auroc_rank, metric_report, BootstrapConfig, ScoredCase};
use tandem_core::sim::{paper_like, simulate};
use tandem_core::stats::{fisher_exact_2x2, levene, mann_whitney_u, t_test};

/// Deterministic, irregular values in (-1, 1).
fn wobble(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.7548776662 + phase).sin() * (i as f64 * 0.5698402910).cos()).collect()
}

fn bootstrap(c: &mut Criterion) {
    let cases: Vec<ScoredCase> =
        (0..1100).map(|i| ScoredCase { prediction: i % 7 != 0, truth: i % 3 != 0 }).collect();
    let cfg = BootstrapConfig::default();
    c.bench_function("metric_report_1100x2000", |b| b.iter(|| metric_report(black_box(&cases), &cfg).unwrap()));

    let log = simulate(&paper_like(), 42).unwrap();
    c.bench_function("arm_comparison_paper_like", |b| b.iter(|| arm_comparison(black_box(&log), None, &cfg).unwrap()));
}

fn nested_cv(c: &mut Criterion) {
    let log = simulate(&paper_like(), 42).unwrap();
    let cfg = FusionConfig::default();
    let mut group = c.benchmark_group("nested_cv");
    group.sample_size(10);
    group.bench_function("paper_like_default_grid", |b| b.iter(|| nested_cv_optimize(black_box(&log), &cfg).unwrap()));
    group.finish();
}

fn stats(c: &mut Criterion) {
    let (x, y) = (wobble(200, 0.0), wobble(220, 1.3));
    let truth: Vec<bool> = (0..1100).map(|i| i % 3 == 0).collect();
    let scores = wobble(1100, 0.4);
    c.bench_function("t_test_welch", |b| b.iter(|| t_test(black_box(&x), &y, false).unwrap()));
    c.bench_function("mann_whitney_normal", |b| b.iter(|| mann_whitney_u(black_box(&x), &y).unwrap()));
    c.bench_function("mann_whitney_exact", |b| b.iter(|| mann_whitney_u(black_box(&x[..15]), &y[..20]).unwrap()));
    let groups = vec![x.clone(), y.clone(), wobble(150, 2.1)];
    c.bench_function("levene_3_groups", |b| b.iter(|| levene(black_box(&groups)).unwrap()));
    c.bench_function("fisher_2x2_n4000", |b| b.iter(|| fisher_exact_2x2(black_box(1010), 990, 960, 1040).unwrap()));
    c.bench_function("auroc_rank_1100", |b| b.iter(|| auroc_rank(black_box(&scores), &truth).unwrap()));
}

criterion_group!(benches, bootstrap, nested_cv, stats);
criterion_main!(benches);
