use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdisc::approx::{minimax_poly, newman_rational_sign, BooleanFunctionTable};
use mdisc::construction::{build_low_disc_set, Mode};
use mdisc::discrepancy::{disc, random_search, IntegerMultiset};
use mdisc::distribution::{exact_distribution, Method};
use mdisc::expander::build_expander;
use std::hint::black_box;

fn discrepancy(c: &mut Criterion) {
    let mut g = c.benchmark_group("disc");
    for m in [1_009u64, 100_003, 1_000_003] {
        let z = match random_search(m, 200, 0.999, 1, 1) {
            Ok(z) => z,
            Err(_) => unreachable!("eps 0.999 accepts the first draw"),
        };
        g.bench_with_input(BenchmarkId::new("sparse", m), &z, |b, z| b.iter(|| disc(black_box(z))));
    }
    let dense = IntegerMultiset::trivial(65_536).unwrap();
    g.bench_function("dense/65536", |b| b.iter(|| disc(black_box(&dense))));
    g.finish();
}

fn distribution(c: &mut Criterion) {
    let z = IntegerMultiset::from_residues(257, &(1..=40).map(|i| (i * 37) % 257).collect::<Vec<_>>()).unwrap();
    let mut g = c.benchmark_group("distribution");
    g.bench_function("dp/257x40", |b| b.iter(|| exact_distribution(black_box(&z), Method::Dp).unwrap()));
    g.bench_function("walk/257x40", |b| b.iter(|| exact_distribution(black_box(&z), Method::Walk).unwrap()));
    g.finish();
}

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("construction");
    g.sample_size(10);
    g.bench_function("practical/1e5", |b| b.iter(|| build_low_disc_set(black_box(100_003), 0.3, Mode::Practical, 7)));
    g.bench_function("expander/10007", |b| b.iter(|| build_expander(black_box(10_007), 0.5, Mode::Practical, 7).unwrap()));
    g.finish();
}

fn approximation(c: &mut Criterion) {
    let mut g = c.benchmark_group("approx");
    g.sample_size(10);
    let maj = BooleanFunctionTable::majority(7).unwrap();
    g.bench_function("minimax/maj7/d3", |b| b.iter(|| minimax_poly(black_box(&maj), 3).unwrap()));
    g.bench_function("newman/1000/5", |b| b.iter(|| newman_rational_sign(black_box(1000.0), 5).unwrap()));
    g.finish();
}

criterion_group!(benches, discrepancy, distribution, construction, approximation);
criterion_main!(benches);
