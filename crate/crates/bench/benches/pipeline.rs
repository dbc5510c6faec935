use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semisic::optics::schedule_plates;
use semisic::povm::{random_rank_one_povm, verify_povm};
use semisic::selftest::{reference_scenario, sample_witness, seesaw_optimize, SampleOptions, ShotBudget};
use semisic::walk::{compile_povm, effective_povm, run_walk};
use semisic::PureQubit;
use semisic_bench::{povm, schedule, witness, OVERLAPS};

fn label(b: (u64, u64)) -> String {
    format!("{}/{}", b.0, b.1)
}

fn family(c: &mut Criterion) {
    let mut g = c.benchmark_group("family");
    for b in OVERLAPS {
        g.bench_with_input(BenchmarkId::new("build", label(b)), &b, |bench, &b| bench.iter(|| povm(black_box(b))));
        let p = povm(b);
        g.bench_with_input(BenchmarkId::new("verify", label(b)), &p, |bench, p| {
            bench.iter(|| verify_povm(black_box(p), Some(b.0 as f64 / b.1 as f64)))
        });
    }
    g.finish();
}

fn compiler(c: &mut Criterion) {
    let mut g = c.benchmark_group("compile");
    for b in OVERLAPS {
        let p = povm(b);
        g.bench_with_input(BenchmarkId::new("semi_sic", label(b)), &p, |bench, p| {
            bench.iter(|| compile_povm(black_box(p)).unwrap())
        });
        let s = schedule(b);
        g.bench_with_input(BenchmarkId::new("plates", label(b)), &s, |bench, s| {
            bench.iter(|| schedule_plates(black_box(s)).unwrap())
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random: Vec<_> = (0..16).map(|_| random_rank_one_povm(&mut rng)).collect();
    g.bench_function("random_rank_one_x16", |bench| {
        bench.iter(|| {
            for p in &random {
                black_box(compile_povm(p).unwrap());
            }
        })
    });
    g.finish();
}

fn walk(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk");
    let s = schedule((1, 13));
    let psi = PureQubit::plus();
    g.bench_function("run_plus", |bench| bench.iter(|| run_walk(black_box(&psi), &s)));
    g.bench_function("effective_povm", |bench| bench.iter(|| effective_povm(black_box(&s))));
    g.finish();
}

fn selftest(c: &mut Criterion) {
    let mut g = c.benchmark_group("selftest");
    g.sample_size(10);
    for b in OVERLAPS {
        let spec = witness(b);
        g.bench_with_input(BenchmarkId::new("seesaw_50", label(b)), &spec, |bench, spec| {
            bench.iter(|| seesaw_optimize(black_box(spec), 50, 0).unwrap())
        });
        let s = reference_scenario(b.0 as f64 / b.1 as f64, &spec).unwrap();
        let opts = SampleOptions::new(ShotBudget::PerSetting(10_000), 0);
        g.bench_with_input(BenchmarkId::new("sample_10k", label(b)), &s, |bench, s| {
            bench.iter(|| sample_witness(black_box(s), &spec, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, family, compiler, walk, selftest);
criterion_main!(benches);
