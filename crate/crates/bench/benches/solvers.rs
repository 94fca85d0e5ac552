use std::hint::black_box;

use adaptcover::metric::held_karp;
use adaptcover::oracle::{opt_isolation_exact, opt_odt_exact};
use adaptcover::{
    adaptrp_solve, adaptsp_solve, iso_solve, odt_solve, LpgstConfig, Objective, OracleChoice, OracleLimits,
};
use adaptcover_bench::{cover, odt, SIZES};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn solvers(c: &mut Criterion) {
    let config = LpgstConfig::default();
    let oracle = OracleChoice::Auto.build();
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    for &(label, n, m) in SIZES {
        let iso = cover(7, n, m, Objective::Isolation, false);
        group.bench_with_input(BenchmarkId::new("isolation", label), &iso, |b, inst| {
            b.iter(|| iso_solve(black_box(inst), oracle.as_ref(), &config).unwrap())
        });
        let tsp = iso.with_objective(Objective::AdapTsp);
        group.bench_with_input(BenchmarkId::new("adaptsp", label), &tsp, |b, inst| {
            b.iter(|| adaptsp_solve(black_box(inst), oracle.as_ref(), &config).unwrap())
        });
        let trp = iso.with_objective(Objective::AdapTrp);
        group.bench_with_input(BenchmarkId::new("adaptrp", label), &trp, |b, inst| {
            b.iter(|| adaptrp_solve(black_box(inst), oracle.as_ref(), &config).unwrap())
        });
        let star = cover(7, n, m, Objective::Isolation, true);
        group.bench_with_input(BenchmarkId::new("isolation_star", label), &star, |b, inst| {
            b.iter(|| iso_solve(black_box(inst), oracle.as_ref(), &config).unwrap())
        });
    }
    for (diseases, tests) in [(6, 5), (10, 8)] {
        let inst = odt(3, diseases, tests);
        group.bench_with_input(BenchmarkId::new("odt", format!("m{diseases}_t{tests}")), &inst, |b, inst| {
            b.iter(|| odt_solve(black_box(inst), OracleChoice::Auto, &config).unwrap())
        });
    }
    group.finish();
}

fn oracles(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let inst = cover(5, 7, 5, Objective::Isolation, false);
    group.bench_function("isolation_n7_m5", |b| {
        b.iter(|| opt_isolation_exact(black_box(&inst), &OracleLimits::isolation()).unwrap())
    });
    let inst = odt(5, 6, 5);
    group.bench_function("odt_m6_t5", |b| b.iter(|| opt_odt_exact(black_box(&inst), &OracleLimits::odt()).unwrap()));
    let inst = cover(5, 11, 1, Objective::AdapTsp, false);
    let set: Vec<usize> = (1..11).collect();
    group.bench_function("held_karp_10", |b| b.iter(|| held_karp(&inst.metric, 0, black_box(&set))));
    group.finish();
}

criterion_group!(benches, solvers, oracles);
criterion_main!(benches);
