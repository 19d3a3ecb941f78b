//! Benchmarks for the pieces that dominate experiment runtime: closed-form
//! utilities, coalition formation, partition enumeration, moment
//! estimation, and one position draw of the channel-level estimator.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pilotcluster_bench::fixture;
use pilotcluster_core::baselines::{enumerate_partitions, exhaustive_optimum, random_structure};
use pilotcluster_core::formation::{run_formation, FormationOptions};
use pilotcluster_core::game::{Budget, CoalitionStructure};
use pilotcluster_core::propagation::PropagationStats;
use pilotcluster_core::seeds::sub_rng;
use pilotcluster_core::utility::{structure_utilities, CombiningScheme};
use pilotcluster_core::validator::monte_carlo_se;

fn bench_closed_form(c: &mut Criterion) {
    let (_, stats, params) = fixture(16, 500, 4000);
    let structure = CoalitionStructure::from_assignment(
        (0..16).map(|j| j % 4).collect::<Vec<_>>(),
    );
    c.bench_function("structure_utilities L=16 zfc", |b| {
        b.iter(|| {
            structure_utilities(
                black_box(&structure),
                black_box(&stats),
                black_box(&params),
                CombiningScheme::Zfc,
            )
            .unwrap()
        })
    });
}

fn bench_formation(c: &mut Criterion) {
    let (_, stats, params) = fixture(16, 500, 4000);
    let budgets = vec![Budget::Infinite; 16];
    let options = FormationOptions::for_cells(16);
    c.bench_function("run_formation L=16 singletons zfc", |b| {
        b.iter(|| {
            let mut rng = sub_rng(5, 0, "bench-formation");
            run_formation(
                CoalitionStructure::singletons(16),
                &budgets,
                &params,
                &stats,
                CombiningScheme::Zfc,
                &mut rng,
                &options,
            )
            .unwrap()
        })
    });
}

fn bench_enumeration(c: &mut Criterion) {
    c.bench_function("enumerate_partitions L=10", |b| {
        b.iter(|| enumerate_partitions(black_box(10)).unwrap().count())
    });
    let (_, stats, params) = fixture(7, 500, 2000);
    c.bench_function("exhaustive_optimum L=7 mrc", |b| {
        b.iter(|| exhaustive_optimum(7, &stats, &params, CombiningScheme::Mrc).unwrap())
    });
}

fn bench_moments(c: &mut Criterion) {
    let (deployment, _, _) = fixture(16, 500, 100);
    c.bench_function("estimate_mu L=16 n=2000", |b| {
        b.iter(|| {
            let mut rng = sub_rng(6, 0, "bench-mu");
            PropagationStats::estimate(black_box(&deployment), 2000, &mut rng).unwrap()
        })
    });
}

fn bench_validator(c: &mut Criterion) {
    let (deployment, _, params) = fixture(20, 100, 2000);
    let mut rng = sub_rng(7, 0, "bench-structure");
    let structure = random_structure(20, 5, &mut rng).unwrap();
    c.bench_function("monte_carlo_se L=20 M=100 mrc 1x10", |b| {
        b.iter(|| {
            let mut rng = sub_rng(8, 0, "bench-mc");
            monte_carlo_se(
                black_box(&structure),
                &params,
                &deployment,
                CombiningScheme::Mrc,
                2,
                10,
                &mut rng,
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_closed_form,
    bench_formation,
    bench_enumeration,
    bench_moments,
    bench_validator
);
criterion_main!(benches);
