use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use nsfem_core::benchmarks::case_gresho;
use nsfem_core::Simulation;

fn gresho_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("gresho_step");
    g.sample_size(10);
    for form in ["conv", "skew", "emac", "modconv"] {
        let case = case_gresho(&[("nx", "16"), ("form", form)]).unwrap();
        let mesh = case.mesh().unwrap();
        g.bench_function(BenchmarkId::new("cn1", form), |b| {
            b.iter_batched(
                || Simulation::new(mesh.clone(), case.scheme.clone()).unwrap(),
                |mut sim| sim.step().unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, gresho_step);
criterion_main!(benches);
