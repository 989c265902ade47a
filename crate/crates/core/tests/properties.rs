use dgtpg::bounds::{g_matrix, lambda_rate};
use dgtpg::estimator::{importance_weight, rollout, DEFAULT_LOG_CAP};
use dgtpg::params::{disagreement_sq, mean_of};
use dgtpg::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A connected graph: a random spanning tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..9).prop_flat_map(|n| {
        let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
        let extra = prop::collection::vec((0..n, 0..n), 0..n);
        (Just(n), parents, extra).prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
            for (a, b) in extra {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
                    edges.push(e);
                }
            }
            (n, edges)
        })
    })
}

proptest! {
    #[test]
    fn metropolis_is_doubly_stochastic_and_contracts((n, edges) in connected_graph(), seed in any::<u64>()) {
        let topo = Topology::from_edges(n, &edges).unwrap();
        let w = metropolis_weights(&topo).unwrap();
        prop_assert!(w.validate().passed);
        prop_assert!(w.sigma() < 1.0 - 1e-9);
        prop_assert!((spectral_gap(&w) - w.sigma()).abs() < 1e-12);

        // mixing preserves the average and shrinks disagreement by at least sigma
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
        let y = w.apply(&x);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
        prop_assert!((mean(&x) - mean(&y)).abs() < 1e-12);
        let dev = |v: &[f64]| { let m = mean(v); v.iter().map(|a| (a - m).powi(2)).sum::<f64>().sqrt() };
        prop_assert!(dev(&y) <= w.sigma() * dev(&x) + 1e-12);
    }

    #[test]
    fn mean_and_disagreement(stack in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..6)) {
        let pvs: Vec<ParamVector> = stack.iter().cloned().map(ParamVector::from_vec).collect();
        let m = mean_of(&pvs);
        for j in 0..3 {
            let direct = stack.iter().map(|v| v[j]).sum::<f64>() / stack.len() as f64;
            prop_assert!((m[j] - direct).abs() < 1e-12);
        }
        let d = disagreement_sq(&pvs);
        prop_assert!(d >= 0.0);
        let same = vec![pvs[0].clone(); pvs.len()];
        prop_assert_eq!(disagreement_sq(&same), 0.0);
    }

    #[test]
    fn g_matrix_top_eigenvalue_below_lambda(sigma in 0.0f64..0.999, alpha in 0.0f64..1.0, psi in 1e-3f64..1e4) {
        let g = g_matrix(sigma, alpha, psi);
        prop_assert!(g.lambda1 <= g.lambda2);
        let lam = lambda_rate(sigma, alpha, psi).lambda;
        prop_assert!(g.lambda2 <= lam * (1.0 + 1e-12));
        // trace and determinant of the closed form match the entries
        let e = g.entries;
        let tr = e[0][0] + e[1][1];
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        prop_assert!((g.lambda1 + g.lambda2 - tr).abs() <= 1e-9 * tr.abs().max(1.0));
        prop_assert!((g.lambda1 * g.lambda2 - det).abs() <= 1e-9 * (g.lambda2 * g.lambda2).max(1.0));
    }

    #[test]
    fn importance_weight_is_antisymmetric(seed in any::<u64>(), shift in -0.5f64..0.5) {
        let mdp = TabularMdp::oracle(2);
        let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..policy.dim()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let t = rollout(&mdp, &policy, &a, mdp.horizon(), &mut rng).unwrap();
        let ab = importance_weight(&t, &policy, &a, &b, DEFAULT_LOG_CAP).unwrap();
        let ba = importance_weight(&t, &policy, &b, &a, DEFAULT_LOG_CAP).unwrap();
        prop_assert!((ab.log_omega + ba.log_omega).abs() < 1e-12);
        prop_assert_eq!(importance_weight(&t, &policy, &a, &a, DEFAULT_LOG_CAP).unwrap().omega, 1.0);
    }
}
