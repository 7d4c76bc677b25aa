use biokey::ecc::selftest::rs_random;
use biokey::eval::{gen_population, run_far_frr, BiometricKind, EvalConfig};
use biokey::par::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn eval_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("far_frr_sweep");
    group.sample_size(10);
    for kind in [BiometricKind::Fingerprint, BiometricKind::Iris] {
        let population = gen_population(kind, 40, 2048, 7).unwrap();
        for (name, exec) in MODES {
            let cfg = EvalConfig { seed: 7, exec, ..EvalConfig::default() };
            group.bench_with_input(BenchmarkId::new(format!("{kind:?}"), name), &cfg, |b, cfg| {
                b.iter(|| run_far_frr(&population, cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn ecc_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("rs_32_20_random");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| rs_random(exec, 7, 32, 20, 2_000, 1)));
    }
    group.finish();
}

criterion_group!(benches, eval_sweeps, ecc_suite);
criterion_main!(benches);
