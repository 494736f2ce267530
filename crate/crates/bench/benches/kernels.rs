use asep_core::formulas::{
    cumulative_crossing_one_wall_det, schutz_determinant, tasep_block_crossing, two_tasep_green, CrossingQuery, FormulaOptions,
    GreenQuery, WallQuery,
};
use asep_core::vertex::f_mu;
use asep_core::ParticleConfig;
use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

fn green(c: &mut Criterion) {
    let opts = FormulaOptions::default();
    let init = ParticleConfig::two_species(vec![0, 1, 2], &[1]).unwrap();
    let target = ParticleConfig::two_species(vec![1, 3, 5], &[2]).unwrap();
    let q = GreenQuery::new(init, target, 1.0);
    c.bench_function("two_species_green_n3", |b| b.iter(|| two_tasep_green(black_box(&q), &opts).unwrap()));
}

fn schutz(c: &mut Criterion) {
    c.bench_function("schutz_determinant_n4", |b| {
        b.iter(|| schutz_determinant(black_box(&[0, 1, 2, 3]), black_box(&[2, 4, 5, 7]), 2.0).unwrap())
    });
}

fn block_crossing(c: &mut Criterion) {
    let opts = FormulaOptions::default();
    let cq = CrossingQuery::new(vec![vec![2, 1], vec![0]], vec![vec![3, 2], vec![4]], 0.0, 1.0).unwrap();
    let mut g = c.benchmark_group("block_crossing");
    g.sample_size(10);
    g.bench_function("tasep_n3", |b| b.iter(|| tasep_block_crossing(black_box(&cq), &opts).unwrap()));
    g.finish();
}

fn wall(c: &mut Criterion) {
    let opts = FormulaOptions::default();
    let w = WallQuery { s1: -3, s2: 2, rho: 0.5, n: 2, m: 1, t: 2.0 };
    c.bench_function("one_wall_det_n2", |b| b.iter(|| cumulative_crossing_one_wall_det(black_box(&w), &opts).unwrap()));
}

fn vertex(c: &mut Criterion) {
    let z = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.25), Complex64::new(0.15, -0.3)];
    let s = Complex64::new(0.1, 0.0);
    c.bench_function("f_mu_n3", |b| b.iter(|| f_mu(black_box(&[2, 0, 1]), black_box(&z), 0.5, s).unwrap()));
}

criterion_group!(benches, green, schutz, block_crossing, wall, vertex);
criterion_main!(benches);
