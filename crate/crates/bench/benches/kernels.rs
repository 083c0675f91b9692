use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nsfem_bench::Fixture;
use nsfem_core::assembly::{Assembler, ConvectiveForm};
use nsfem_core::linalg::{LuSolver, SaddleLayout};
use nsfem_core::{ElementPair, ReconstructionPlan, Reconstructor};

fn assembly(c: &mut Criterion) {
    let asm = Assembler::default();
    let mut g = c.benchmark_group("assembly");
    for pair in ElementPair::ALL {
        let f = Fixture::new(pair, 16);
        let rec = Reconstructor::new(&f.velocity, ReconstructionPlan::new(pair), |_| true).unwrap();
        let a = rec.apply(&f.u).unwrap();
        g.bench_function(BenchmarkId::new("mass", pair), |b| b.iter(|| asm.mass(black_box(&f.velocity))));
        g.bench_function(BenchmarkId::new("stiffness", pair), |b| b.iter(|| asm.stiffness(black_box(&f.velocity))));
        g.bench_function(BenchmarkId::new("conv", pair), |b| {
            b.iter(|| asm.convection(ConvectiveForm::Conv, black_box(&f.u), &f.velocity).unwrap())
        });
        g.bench_function(BenchmarkId::new("modconv", pair), |b| {
            b.iter(|| asm.convection(ConvectiveForm::ModConv, black_box(&a), &f.velocity).unwrap())
        });
    }
    g.finish();
}

fn reconstruction(c: &mut Criterion) {
    let mut g = c.benchmark_group("reconstruction");
    for pair in ElementPair::ALL {
        let f = Fixture::new(pair, 16);
        let rec = Reconstructor::new(&f.velocity, ReconstructionPlan::new(pair), |_| true).unwrap();
        g.bench_function(BenchmarkId::new("apply", pair), |b| b.iter(|| rec.apply(black_box(&f.u)).unwrap()));
        g.bench_function(BenchmarkId::new("setup", pair), |b| {
            b.iter(|| Reconstructor::new(&f.velocity, ReconstructionPlan::new(pair), |_| true).unwrap())
        });
    }
    g.finish();
}

fn saddle_lu(c: &mut Criterion) {
    let asm = Assembler::default();
    let mut g = c.benchmark_group("saddle_lu");
    g.sample_size(10);
    for n in [8, 16] {
        let f = Fixture::new(ElementPair::P2BubbleP1Disc, n);
        let k = asm.mass(&f.velocity).add(100.0, &asm.stiffness(&f.velocity), 0.5);
        let bm = asm.div(&f.velocity, &f.pressure).unwrap();
        let mean = asm.mean_vector(&f.pressure);
        let layout = SaddleLayout::new(&k, &bm, Some(&mean)).unwrap();
        let m = layout.assemble(&k, &bm, Some(&mean)).unwrap();
        let rhs = vec![1.0; layout.size()];
        g.bench_function(BenchmarkId::new("factor", n), |b| {
            let mut lu = LuSolver::new();
            b.iter(|| lu.factor(black_box(&m)).unwrap())
        });
        let mut lu = LuSolver::new();
        lu.factor(&m).unwrap();
        g.bench_function(BenchmarkId::new("solve", n), |b| b.iter(|| lu.solve(black_box(&rhs)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, reconstruction, saddle_lu);
criterion_main!(benches);
