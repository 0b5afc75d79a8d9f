use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmwb_bench::{atm_spec, black_scholes, variance_gamma};
use gmwb_core::{
    backward_markov_value, build_rollup_coefficients, build_weights, mc_guarantee_value,
    net_volga_after_varswap_hedge, MarkovConfig, McConfig, RollupConfig, SensitivityConfig,
    WeightConfig,
};

fn weights(c: &mut Criterion) {
    let mut g = c.benchmark_group("weights");
    g.sample_size(10);
    for n in [2, 5, 10] {
        let m = black_scholes(0.3, n);
        let spec = atm_spec(n);
        g.bench_with_input(BenchmarkId::new("black_scholes", n), &n, |b, _| {
            b.iter(|| build_weights(&m, &spec, &WeightConfig::default()).unwrap())
        });
    }
    let vg = variance_gamma(1.0, 5);
    let spec = atm_spec(5);
    g.bench_function("variance_gamma/5", |b| {
        b.iter(|| build_weights(&vg, &spec, &WeightConfig::default()).unwrap())
    });
    g.finish();
}

fn other_pipelines(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipelines");
    g.sample_size(10);
    let m = black_scholes(0.3, 5);
    let spec = atm_spec(5);
    g.bench_function("markov/5", |b| {
        b.iter(|| backward_markov_value(&m, &spec, &MarkovConfig::default()).unwrap())
    });
    let mc = McConfig::new(20_000, 1, true).unwrap();
    g.bench_function("monte_carlo/5/20k", |b| {
        b.iter(|| mc_guarantee_value(&m, &spec, &mc).unwrap())
    });
    let rollup = spec.with_rollup(0.0).unwrap();
    g.bench_function("rollup/5", |b| {
        b.iter(|| build_rollup_coefficients(&m, &rollup, &RollupConfig::default()).unwrap())
    });
    let two = black_scholes(0.3, 2);
    let spec2 = atm_spec(2);
    g.bench_function("net_volga/2", |b| {
        b.iter(|| {
            net_volga_after_varswap_hedge(&two, &spec2, &SensitivityConfig::default()).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, weights, other_pipelines);
criterion_main!(benches);
