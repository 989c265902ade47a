use dgtpg::bounds::complexity;
use dgtpg::estimator::{self, EstimatorSettings};
use dgtpg::optimizer::{
    run, stream_rng, AdamSettings, AlgoConfig, ExactSource, GradientSource, RunState, SampledSource, Variant,
    INIT_STREAM,
};
use dgtpg::params::{disagreement_sq, mean_of};
use dgtpg::trajectory::RewardTarget;
use dgtpg::*;

fn mixing(kind: TopologyKind, n: usize) -> MixingMatrix {
    metropolis_weights(&build_topology(kind, n, None).unwrap()).unwrap()
}

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::from_vec(v.to_vec())
}

fn oracle_sampled(n: usize) -> SampledSource<TabularMdp, TabularSoftmaxPolicy> {
    let mdp = TabularMdp::oracle(n);
    let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
    SampledSource::new(mdp, policy, EstimatorSettings::new(0.9), 3, 5)
}

#[test]
fn consensus_step_examples() {
    // complete uniform W, alpha 0: everyone lands on the average
    let w = mixing(TopologyKind::Complete, 3);
    let thetas = vec![pv(&[1.0, 0.0]), pv(&[2.0, 3.0]), pv(&[6.0, -3.0])];
    let zeros = vec![pv(&[0.0, 0.0]); 3];
    let mut st = RunState::from_parts(w, thetas, zeros.clone(), zeros, 0, None).unwrap();
    st.consensus_param_step(0.0);
    for t in st.thetas() {
        assert!((t[0] - 3.0).abs() < 1e-15 && t[1].abs() < 1e-15);
    }

    // two agents, averaging
    let w = MixingMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let zeros = vec![pv(&[0.0]); 2];
    let mut st = RunState::from_parts(w, vec![pv(&[1.0]), pv(&[3.0])], zeros.clone(), zeros, 0, None).unwrap();
    st.consensus_param_step(0.7);
    assert_eq!(st.thetas(), vec![pv(&[2.0]), pv(&[2.0])]);

    // single agent: plain ascent step
    let w = MixingMatrix::from_rows(vec![vec![1.0]]).unwrap();
    let mut st = RunState::from_parts(w, vec![pv(&[1.0, 2.0])], vec![pv(&[0.5, -1.0])], vec![pv(&[0.0, 0.0])], 0, None)
        .unwrap();
    st.consensus_param_step(0.1);
    assert_eq!(st.thetas(), vec![pv(&[1.05, 1.9])]);
}

#[test]
fn tracker_step_examples() {
    let w = MixingMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let ys = vec![pv(&[1.0]), pv(&[-1.0])];
    let mut st = RunState::from_parts(w, vec![pv(&[0.0]); 2], ys.clone(), ys, 0, None).unwrap();
    let gap = st.tracker_step(vec![pv(&[2.0]), pv(&[0.0])]).unwrap();
    assert_eq!(st.ys(), vec![pv(&[1.0]), pv(&[1.0])]);
    assert!(gap < 1e-15);

    // unchanged v, complete W: every tracker becomes v̄
    let w = mixing(TopologyKind::Complete, 3);
    let vs = vec![pv(&[3.0]), pv(&[0.0]), pv(&[-6.0])];
    let mut st = RunState::from_parts(w, vec![pv(&[0.0]); 3], vs.clone(), vs.clone(), 0, None).unwrap();
    st.tracker_step(vs).unwrap();
    for y in st.ys() {
        assert!((y[0] + 1.0).abs() < 1e-15);
    }
}

#[test]
fn average_preservation_and_tracking_identity() {
    let src = oracle_sampled(4);
    let w = mixing(TopologyKind::Ring, 4);
    let cfg = AlgoConfig { epochs: 1, epoch_len: 1, batch: 8, minibatch: 4, alpha: 0.2, hetero_init: true, seed: 5, ..Default::default() };
    let mut st = RunState::init(&cfg, w, &src).unwrap();
    for _ in 0..6 {
        let before = st.theta_bar();
        let ybar = mean_of(&st.ys());
        st.consensus_param_step(cfg.alpha);
        let after = st.theta_bar();
        for j in 0..before.len() {
            assert!((after[j] - before[j] - cfg.alpha * ybar[j]).abs() <= 1e-12);
        }
        st.run_epoch(&cfg, &src).unwrap();
        assert!(st.tracking_gap() <= 1e-10);
    }
}

#[test]
fn alpha_zero_freezes_parameters_and_estimates() {
    // SVRG cancellation: sampling at the anchor point gives back the anchor exactly.
    let src = oracle_sampled(3);
    let cfg = AlgoConfig { epochs: 2, epoch_len: 3, batch: 6, minibatch: 3, alpha: 0.0, ..Default::default() };
    let theta0 = src.init_params(&mut stream_rng(1, INIT_STREAM));
    let zeros = vec![ParamVector::zeros(src.dim()); 3];
    let mut st =
        RunState::from_parts(mixing(TopologyKind::Ring, 3), vec![theta0.clone(); 3], zeros.clone(), zeros, 1, None).unwrap();
    for _ in 0..2 {
        st.run_epoch(&cfg, &src).unwrap();
        for a in st.agents() {
            for (t, t0) in a.theta.iter().zip(theta0.iter()) {
                assert!((t - t0).abs() <= 1e-15);
            }
            assert_eq!(a.v, a.mu_ref);
        }
    }
}

/// Straight-line exact-gradient DGT-SVRPG, written without the library's state types.
fn reference_epochs(src: &ExactSource, w: &MixingMatrix, theta0: &[f64], alpha: f64, s: usize, k: usize) -> Vec<Vec<f64>> {
    let n = w.n();
    let d = theta0.len();
    let grad = |i: usize, t: &[f64]| src.local_gradient(i, t).unwrap().into_vec();
    let mut theta: Vec<Vec<f64>> = vec![theta0.to_vec(); n];
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| grad(i, &theta[i])).collect();
    let mut y = v.clone();
    for _ in 0..s {
        for _ in 0..k {
            let mut next = vec![vec![0.0; d]; n];
            for i in 0..n {
                for j in 0..d {
                    let mut acc = 0.0;
                    for r in 0..n {
                        let wir = w.weight(i, r);
                        if wir != 0.0 {
                            acc += wir * theta[r][j];
                        }
                    }
                    next[i][j] = acc + 1.0 * (y[i][j] * alpha);
                }
            }
            theta = next;
            let v_new: Vec<Vec<f64>> = (0..n).map(|i| grad(i, &theta[i])).collect();
            let mut y_new = vec![vec![0.0; d]; n];
            for i in 0..n {
                for j in 0..d {
                    let mut acc = 0.0;
                    for r in 0..n {
                        let wir = w.weight(i, r);
                        if wir != 0.0 {
                            acc += wir * y[r][j];
                        }
                    }
                    y_new[i][j] = (acc + 1.0 * v_new[i][j]) + (-1.0) * v[i][j];
                }
            }
            y = y_new;
            v = v_new;
        }
    }
    theta
}

#[test]
fn exact_mode_matches_reference_bit_for_bit() {
    let src = ExactSource::new(TabularMdp::oracle(3));
    let w = mixing(TopologyKind::Ring, 3);
    let cfg = AlgoConfig { epochs: 1, epoch_len: 4, alpha: 0.05, seed: 9, ..Default::default() };
    let mut st = RunState::init(&cfg, w.clone(), &src).unwrap();
    let theta0 = st.thetas()[0].clone();
    st.run_epoch(&cfg, &src).unwrap();
    let reference = reference_epochs(&src, &w, &theta0, cfg.alpha, 1, 4);
    for (a, r) in st.thetas().iter().zip(&reference) {
        assert_eq!(a.as_slice(), r.as_slice());
    }
}

#[test]
fn exact_mode_tracking_variants_coincide() {
    let src = ExactSource::new(TabularMdp::oracle(3));
    let base = AlgoConfig { epochs: 5, epoch_len: 3, alpha: 0.05, hetero_init: true, seed: 2, ..Default::default() };
    let a = run(&base, mixing(TopologyKind::Star, 3), &src).unwrap();
    let b = run(&AlgoConfig { variant: Variant::DgtGpomdp, ..base }, mixing(TopologyKind::Star, 3), &src).unwrap();
    assert_eq!(a.theta_final, b.theta_final);
    assert!(a.diagnostics.max_tracking_gap() <= 1e-10);
}

#[test]
fn single_agent_reduces_to_svrpg() {
    let src = oracle_sampled(1);
    let cfg = AlgoConfig { epochs: 3, epoch_len: 4, batch: 10, minibatch: 4, alpha: 0.3, seed: 17, ..Default::default() };
    let out = run(&cfg, MixingMatrix::from_rows(vec![vec![1.0]]).unwrap(), &src).unwrap();

    let settings = EstimatorSettings::new(0.9);
    let (env, policy) = (src.env(), src.policy());
    let mut rng = stream_rng(cfg.seed, 0);
    let mut theta = policy.init_params(&mut stream_rng(cfg.seed, INIT_STREAM));
    let batch = estimator::sample_trajectories(env, policy, &theta, cfg.batch, 3, &mut rng).unwrap();
    let mut mu = estimator::gpomdp(&batch, policy, &theta, &settings, RewardTarget::Agent(0)).unwrap().gradient;
    let mut theta_ref = theta.clone();
    let mut v = mu.clone();
    for s in 0..cfg.epochs {
        if s > 0 {
            theta_ref = theta.clone();
            let batch = estimator::sample_trajectories(env, policy, &theta, cfg.batch, 3, &mut rng).unwrap();
            mu = estimator::gpomdp(&batch, policy, &theta, &settings, RewardTarget::Agent(0)).unwrap().gradient;
        }
        for _ in 0..cfg.epoch_len {
            theta.axpy(cfg.alpha, &v);
            let batch = estimator::sample_trajectories(env, policy, &theta, cfg.minibatch, 3, &mut rng).unwrap();
            v = estimator::svrg_estimate(&batch, policy, &theta, &theta_ref, &mu, &settings, 0).unwrap().estimate.gradient;
        }
    }
    for (a, b) in out.theta_final[0].iter().zip(theta.iter()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn trajectory_accounting_matches_complexity() {
    let src = oracle_sampled(4);
    let topo = build_topology(TopologyKind::Ring, 4, None).unwrap();
    let cfg = AlgoConfig { epochs: 3, epoch_len: 2, batch: 7, minibatch: 3, alpha: 0.1, ..Default::default() };
    let out = run(&cfg, metropolis_weights(&topo).unwrap(), &src).unwrap();
    let c = complexity(3, 2, 7, 3, &topo.degrees());
    assert_eq!(out.metrics.trajectories_per_agent as u64, c.trajectories_per_agent);
    assert_eq!(out.metrics.trajectories_per_agent, cfg.trajectories_per_agent());
    assert_eq!(out.metrics.rows.last().unwrap().trajectories, 3 * (7 + 2 * 3));
    assert_eq!(c.rounds_per_agent, vec![2 * 3 * 2; 4]);
    assert_eq!(out.metrics.rows.len(), 3 * 2 + 1);

    for variant in [Variant::DGpomdp, Variant::DgtGpomdp] {
        let cfg = AlgoConfig { variant, iterations: Some(5), ..cfg.clone() };
        let out = run(&cfg, metropolis_weights(&topo).unwrap(), &src).unwrap();
        assert_eq!(out.metrics.trajectories_per_agent, cfg.trajectories_per_agent());
        assert_eq!(out.metrics.rows.len(), 6);
    }
}

#[test]
fn output_selection() {
    let src = oracle_sampled(2);
    let cfg = AlgoConfig { epochs: 1, epoch_len: 1, batch: 3, minibatch: 2, ..Default::default() };
    let out = run(&cfg, mixing(TopologyKind::Ring, 2), &src).unwrap();
    assert_eq!(out.output_index, 0);
    assert_eq!(out.output_epoch_step, Some((0, 0)));

    let cfg = AlgoConfig { epochs: 4, epoch_len: 3, seed: 11, ..cfg };
    let out = run(&cfg, mixing(TopologyKind::Ring, 2), &src).unwrap();
    let (s, k) = out.output_epoch_step.unwrap();
    assert_eq!(s * 3 + k, out.output_index);
    assert!(out.output_index < 12);
    assert_eq!(out.theta_out.len(), 2);
}

#[test]
fn d_gpomdp_zero_rewards_only_mixes() {
    let mut spec = TabularMdp::oracle(4).to_spec();
    for r in spec.rewards.iter_mut().flatten().flatten() {
        *r = 0.0;
    }
    let mdp = TabularMdp::new(spec, 0.9, 3).unwrap();
    let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
    let src = SampledSource::new(mdp, policy, EstimatorSettings::new(0.9), 3, 2);
    let w = mixing(TopologyKind::Ring, 4);
    let sigma = w.sigma();
    let cfg = AlgoConfig { variant: Variant::DGpomdp, iterations: Some(10), batch: 2, hetero_init: true, ..Default::default() };
    let out = run(&cfg, w, &src).unwrap();
    for pair in out.metrics.rows.windows(2) {
        let ratio = (pair[1].consensus_err / pair[0].consensus_err).sqrt();
        assert!(ratio <= sigma + 1e-10, "{ratio} > {sigma}");
    }
}

#[test]
fn contraction_holds_for_all_variants_and_adam() {
    let src = oracle_sampled(5);
    for variant in [Variant::DgtSvrpg, Variant::DGpomdp, Variant::DgtGpomdp] {
        for adam in [None, Some(AdamSettings::default())] {
            for kind in [TopologyKind::Ring, TopologyKind::Star] {
                let cfg = AlgoConfig {
                    variant,
                    adam,
                    epochs: 4,
                    epoch_len: 3,
                    batch: 6,
                    minibatch: 3,
                    alpha: 0.5,
                    hetero_init: true,
                    ..Default::default()
                };
                let out = run(&cfg, mixing(kind, 5), &src).unwrap();
                assert!(out.diagnostics.contraction_holds(), "{variant} {adam:?} {kind}");
                assert_eq!(out.diagnostics.contraction.len(), cfg.total_iterations());
                if variant != Variant::DGpomdp {
                    assert!(out.diagnostics.max_tracking_gap() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn deterministic_across_worker_counts() {
    let src = oracle_sampled(4);
    let cfg = AlgoConfig { epochs: 3, epoch_len: 2, batch: 5, minibatch: 2, alpha: 0.2, seed: 3, ..Default::default() };
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&cfg, mixing(TopologyKind::Ring, 4), &src).unwrap())
    };
    let (a, b) = (go(1), go(4));
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.theta_final, b.theta_final);
    let c = run(&AlgoConfig { seed: 4, ..cfg.clone() }, mixing(TopologyKind::Ring, 4), &src).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn init_rejects_mismatched_graph() {
    let src = oracle_sampled(3);
    let err = RunState::init(&AlgoConfig::default(), mixing(TopologyKind::Ring, 4), &src).unwrap_err();
    assert!(matches!(err, Error::Shape(_)));
}

#[test]
fn homogeneous_init_has_zero_consensus_error() {
    let src = oracle_sampled(3);
    let st = RunState::init(&AlgoConfig::default(), mixing(TopologyKind::Ring, 3), &src).unwrap();
    assert_eq!(st.consensus_error(), 0.0);
    assert_eq!(disagreement_sq(&st.thetas()), 0.0);
    assert!(st.tracking_gap() <= 1e-15);
}
