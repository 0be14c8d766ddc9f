use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lookum::bench::TaskKind;
use lookum::lookum::{LookumConfig, SelectionScheme};
use lookum::models::ModelBackend;
use lookum::{decode_baseline, decode_lookum, BudgetSchedule, TokenRule, UnmaskOrder};
use lookum_bench::{binary_cube, instance};
use std::hint::black_box;

fn oracle_predict(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_predict");
    for len in [8, 12, 16] {
        let (support, prompt) = binary_cube(len);
        g.bench_with_input(BenchmarkId::from_parameter(1usize << len), &prompt, |b, p| {
            b.iter(|| support.predict(black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn decoders(c: &mut Criterion) {
    let mut g = c.benchmark_group("decode");
    for kind in TaskKind::ALL {
        let inst = instance(kind);
        let sched = BudgetSchedule::default();
        g.bench_function(BenchmarkId::new("baseline", kind.name()), |b| {
            b.iter(|| decode_baseline(&inst.belief, &inst.prompt, &sched, UnmaskOrder::Confidence, TokenRule::Argmax, 1).unwrap())
        });
        for (name, scheme) in [("nis_k4", SelectionScheme::nis(4, 0.1)), ("smc_k4", SelectionScheme::smc(4, 0.1))] {
            let cfg = LookumConfig { scheme, ..Default::default() };
            g.bench_function(BenchmarkId::new(name, kind.name()), |b| {
                b.iter(|| decode_lookum(&inst.belief, &inst.prompt, &cfg, 1).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, oracle_predict, decoders);
criterion_main!(benches);
