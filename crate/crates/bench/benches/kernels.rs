use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dgtpg::estimator::{gpomdp, sample_trajectories, svrg_estimate};
use dgtpg::graph::{spectral_gap, TopologyKind};
use dgtpg::oracle::exact_gradient;
use dgtpg::params::ParamVector;
use dgtpg::RewardTarget;
use dgtpg_bench::{mixing, rng, run_state, MountainCarFixture, TabularFixture};

fn estimators(c: &mut Criterion) {
    let f = MountainCarFixture::new(3, 64, 100, 10);
    let mu = gpomdp(&f.batch, &f.policy, &f.theta_ref, &f.settings, RewardTarget::Agent(0)).unwrap().gradient;

    c.bench_function("rollout_mc3_h100_x10", |b| {
        let mut r = rng();
        b.iter(|| sample_trajectories(&f.env, &f.policy, &f.theta, 10, f.horizon, &mut r).unwrap())
    });
    c.bench_function("gpomdp_mlp64_m10", |b| {
        b.iter(|| gpomdp(black_box(&f.batch), &f.policy, &f.theta, &f.settings, RewardTarget::Agent(0)).unwrap())
    });
    c.bench_function("svrg_mlp64_b10", |b| {
        b.iter(|| {
            svrg_estimate(black_box(&f.batch), &f.policy, &f.theta, &f.theta_ref, mu.as_slice(), &f.settings, 0)
                .unwrap()
        })
    });
}

fn oracle(c: &mut Criterion) {
    let f = TabularFixture::new(3);
    let (h, gamma) = (f.mdp.horizon(), f.mdp.gamma());
    c.bench_function("exact_gradient_oracle3", |b| {
        b.iter(|| exact_gradient(&f.mdp, &f.policy, black_box(&f.theta), h, gamma, RewardTarget::Collective).unwrap())
    });
}

fn graph(c: &mut Criterion) {
    for n in [5, 20] {
        c.bench_function(&format!("mixing_matrix_ring{n}"), |b| {
            b.iter(|| spectral_gap(&mixing(TopologyKind::Ring, black_box(n))))
        });
    }
    let dim = 3 * (6 * 64 + 64 + 64 + 1);
    c.bench_function("mixing_step_ring5", |b| {
        b.iter_batched(
            || run_state(TopologyKind::Ring, 5, dim),
            |mut s| {
                s.consensus_param_step(0.01);
                let v = vec![ParamVector::zeros(dim); 5];
                s.tracker_step(v).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, estimators, oracle, graph);
criterion_main!(benches);
