use criterion::{criterion_group, criterion_main, Criterion};
use qnc_core::qnc::{simulate, Resolution};
use qnc_core::{
    draw_coefficients, generate_network, kappa_theorem, make_quantizer, random_orthonormal, sample_ensemble,
    simulate_forwarding, QuantizerPlan, SourceModel,
};

fn simulation(c: &mut Criterion) {
    let (n, edges) = (100, 800);
    c.bench_function("generate_network n=100 |E|=800", |b| b.iter(|| generate_network(n, edges, 1, 3).unwrap()));

    let dep = generate_network(n, edges, 1, 3).unwrap();
    let model = SourceModel::new(n, 0.05, 1.0, 0.01).unwrap();
    let phi = random_orthonormal(n, 3);
    let ens = sample_ensemble(&model, &phi, 3);
    let coeffs = draw_coefficients(&dep.graph, kappa_theorem(n, edges), 3).unwrap();
    let plan = QuantizerPlan::new(4.0, model.sigma_s(), Resolution::BlockLength(8));
    c.bench_function("qnc simulate L=8", |b| b.iter(|| simulate(&dep, &ens.x, &coeffs, &plan, n, 3).unwrap()));

    let q = make_quantizer(4.0, model.sigma_s(), 8, 1).unwrap();
    c.bench_function("forwarding L=8", |b| b.iter(|| simulate_forwarding(&dep, &ens.x, &q)));
    c.bench_function("haar orthonormal n=100", |b| b.iter(|| random_orthonormal(n, 3)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = simulation
}
criterion_main!(benches);
