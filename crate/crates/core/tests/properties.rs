//! Randomized invariants of the graph helpers, both solvers and the oracle.

use flowsink::instances::{random_connected_graph, random_cost, random_marginal};
use flowsink::oracle::{certificate_violation, min_cost_flow, Arc};
use flowsink::{
    exact_ot, exact_w1, plan_schedule, project_c2, residuals, sweep, variation_seminorm,
    BlockProblem, DualState, FlowProblem, Graph, MinCostFlowInstance, OTProblem,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flow(seed: u64, n: usize, gamma: f64) -> FlowProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_connected_graph(&mut rng, n, 0.4);
    let b1 = random_marginal(&mut rng, n);
    let b2 = random_marginal(&mut rng, n);
    FlowProblem::new(g, b1, b2, gamma).unwrap()
}

fn ot(seed: u64, m1: usize, m2: usize, gamma: f64) -> OTProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_cost(&mut rng, m1, m2);
    OTProblem::new(c, random_marginal(&mut rng, m1), random_marginal(&mut rng, m2), gamma).unwrap()
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

fn vec_in(len: usize, amp: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-amp..amp, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_flow_meets_divergence(seed in any::<u64>(), n in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.3);
        let b1 = random_marginal(&mut rng, n);
        let b2 = random_marginal(&mut rng, n);
        let f = g.spanning_tree_flow(&b1, &b2).unwrap();
        let div = g.divergence(&f).unwrap();
        let target: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
        prop_assert!(l1_diff(&div, &target) <= 1e-12);
    }

    #[test]
    fn geodesics_form_a_metric(seed in any::<u64>(), n in 2usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.3);
        let d = g.geodesic_matrix();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                if i != j {
                    prop_assert!(d.get(i, j) > 0.0);
                }
                for k in 0..n {
                    prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn path_hop_diameter(n in 2usize..40) {
        let g = Graph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap();
        prop_assert_eq!(g.hop_diameter(), n - 1);
    }

    #[test]
    fn schedule_monotone_in_eps(e1 in 1e-3f64..1.0, factor in 1.0f64..10.0, x0 in 0.1f64..10.0, d in 3usize..1000) {
        let a = plan_schedule(e1, x0, 2.0, 3.0, 2.0, d).unwrap();
        let b = plan_schedule(e1 * factor, x0, 2.0, 3.0, 2.0, d).unwrap();
        prop_assert!(b.sweeps <= a.sweeps);
        prop_assert!(b.gamma >= a.gamma);
    }

    #[test]
    fn ot_half_step_meets_marginals(seed in any::<u64>(), m1 in 1usize..7, m2 in 1usize..7, gamma in 0.01f64..1.0, u2 in vec_in(6, 2.0)) {
        let p = ot(seed, m1, m2, gamma);
        let u2 = u2[..m2].to_vec();
        let u1 = p.block_update_1(&u2).unwrap();
        let state = DualState { u1, u2 };
        let (r1, _) = residuals(&p, &state).unwrap();
        prop_assert!(r1.iter().map(|r| r.abs()).sum::<f64>() <= 1e-10);
        let plan = p.plan_from_duals(&state).unwrap();
        let mass: f64 = plan.iter().flatten().sum();
        prop_assert!(plan.iter().flatten().all(|x| *x > 0.0));
        prop_assert!((mass - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn ot_translation_and_contraction(seed in any::<u64>(), c in -10.0f64..10.0, a in vec_in(5, 1.0), b in vec_in(5, 1.0)) {
        let p = ot(seed, 5, 4, 0.1);
        let shifted: Vec<f64> = a.iter().map(|x| x + c).collect();
        let lhs = p.block_update_2(&shifted).unwrap();
        let rhs: Vec<f64> = p.block_update_2(&a).unwrap().iter().map(|x| x - c).collect();
        prop_assert!(lhs.iter().zip(&rhs).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + c.abs())));
        let balance: Vec<f64> = p.apply_a1_adjoint(&[1.0; 5]).iter().zip(p.apply_a2_adjoint(&[1.0; 4])).map(|(x, y)| x - y).collect();
        prop_assert!(balance.iter().all(|x| *x == 0.0));
        let psi = |u: &[f64]| sweep(&p, &DualState { u1: vec![0.0; 5], u2: p.block_update_2(u).unwrap() }).unwrap().u1;
        let out: Vec<f64> = psi(&a).iter().zip(psi(&b)).map(|(x, y)| x - y).collect();
        let inn: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(variation_seminorm(&out).unwrap() <= variation_seminorm(&inn).unwrap() + 1e-12);
    }

    #[test]
    fn flow_projections(seed in any::<u64>(), n in 2usize..12, gamma in 0.05f64..2.0) {
        let p = flow(seed, n, gamma);
        let mut h = p.kernel().to_vec();
        for _ in 0..5 {
            let (f, g) = p.project_c1(&h).unwrap();
            let x: Vec<f64> = f.iter().chain(g.iter()).copied().collect();
            let div = p.apply_a1(&x);
            prop_assert!(l1_diff(&div, p.b1()) <= 1e-10);
            let merged = project_c2(&f, &g).unwrap();
            let twice: Vec<f64> = merged.iter().chain(merged.iter()).copied().collect();
            prop_assert!(p.apply_a2(&twice).iter().all(|x| *x == 0.0));
            h = merged.to_vec();
        }
    }

    #[test]
    fn flow_dual_structure(seed in any::<u64>(), n in 2usize..12, c in -10.0f64..10.0, v in vec_in(12, 3.0)) {
        let p = flow(seed, n, 0.2);
        let v = &v[..n];
        let e = p.graph().num_arcs();
        let psi2 = p.psi2(v);
        prop_assert!(variation_seminorm(&psi2).unwrap() <= variation_seminorm(v).unwrap() + 1e-12);
        let tau = p.coupling().tau();
        let at = p.apply_adjoint(&DualState { u1: vec![c; n], u2: vec![tau * c; e] });
        prop_assert!(at.iter().all(|x| x.abs() <= 1e-12 * (1.0 + c.abs())));
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = p.sweep_stable(&shifted).unwrap();
        let b = p.sweep_stable(v).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - (y + c)).abs() <= 1e-10));
    }

    #[test]
    fn flow_sweep_contracts(seed in any::<u64>(), n in 2usize..12, a in vec_in(12, 2.0), b in vec_in(12, 2.0)) {
        let p = flow(seed, n, 0.1);
        let (a, b) = (&a[..n], &b[..n]);
        let out: Vec<f64> = p.sweep_stable(a).unwrap().iter().zip(p.sweep_stable(b).unwrap()).map(|(x, y)| x - y).collect();
        let inn: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        prop_assert!(variation_seminorm(&out).unwrap() <= variation_seminorm(&inn).unwrap() + 1e-10);
    }

    #[test]
    fn flow_paths_agree(seed in any::<u64>(), n in 2usize..12, gamma in 0.1f64..1.0) {
        let p = flow(seed, n, gamma);
        let (mut v, mut sigma, mut h) = (vec![0.0; n], vec![1.0; n], p.kernel());
        for _ in 0..30 {
            v = p.sweep_stable(&v).unwrap();
            sigma = p.sweep_scaling(&sigma).unwrap();
            h = p.sweep_matrix(&h).unwrap();
        }
        let stable = p.flow_from_vertex(&v).unwrap();
        prop_assert!(rel_diff(&stable, &p.flow_from_scaling(&sigma).unwrap()) <= 1e-8);
        prop_assert!(rel_diff(&stable, &h) <= 1e-8);
    }

    #[test]
    fn stable_tracks_scaling_at_lower_gamma(seed in any::<u64>(), n in 2usize..10, gamma in 0.01f64..0.1) {
        let p = flow(seed, n, gamma);
        let (mut v, mut sigma) = (vec![0.0; n], vec![1.0; n]);
        for _ in 0..30 {
            v = p.sweep_stable(&v).unwrap();
            match p.sweep_scaling(&sigma) {
                Ok(s) => sigma = s,
                Err(_) => return Ok(()),
            }
        }
        if let Ok(f) = p.flow_from_scaling(&sigma) {
            if f.iter().all(|x| x.is_finite() && *x > 0.0) {
                prop_assert!(rel_diff(&p.flow_from_vertex(&v).unwrap(), &f) <= 1e-5);
            }
        }
    }

    #[test]
    fn oracle_agreement_and_homogeneity(seed in any::<u64>(), n in 2usize..15, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.3);
        let b1 = random_marginal(&mut rng, n);
        let b2 = random_marginal(&mut rng, n);
        let w1 = exact_w1(&g, &b1, &b2).unwrap();
        let ot = exact_ot(&g.geodesic_matrix().rows(), &b1, &b2).unwrap().value;
        prop_assert!((w1 - ot).abs() <= 1e-8);
        let scaled = exact_w1(&g.scaled(scale).unwrap(), &b1, &b2).unwrap();
        prop_assert!((scaled - scale * w1).abs() <= 1e-9 * (1.0 + scale * w1));
    }

    #[test]
    fn oracle_certificate(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.4);
        let b1 = random_marginal(&mut rng, n);
        let b2 = random_marginal(&mut rng, n);
        let arcs = g.edges().iter().flat_map(|e| {
            [Arc { from: e.i, to: e.j, cost: e.w, capacity: None }, Arc { from: e.j, to: e.i, cost: e.w, capacity: None }]
        }).collect();
        let inst = MinCostFlowInstance { n, arcs, supply: b1.iter().zip(&b2).map(|(a, b)| a - b).collect() };
        let sol = min_cost_flow(&inst).unwrap();
        prop_assert!(certificate_violation(&inst, &sol) <= 1e-9);
    }
}
