mod common;

use proptest::prelude::*;

use common::{gaussian, rng, uniform};
use rankflow::integrate::{integrate_flow, oracle_error};
use rankflow::models::{self, FormationTarget, Graph};
use rankflow::{integrate, CoupledSystem, CouplingSpec, IntegratorConfig, StateMatrix};

fn table1_systems(seed: u64) -> Vec<(CoupledSystem, StateMatrix)> {
    let mut g = rng(seed);
    let weights = uniform(&mut g, 1, 3, 0.05, 0.3);
    let edges: Vec<_> = (0..3).map(|k| (k, k + 1, weights[(0, k)])).collect();
    let weighted = Graph::undirected(4, &edges).unwrap();
    let x0 = models::random_state_with_rank(2, 4, 2, seed).unwrap();
    let small = StateMatrix::new(x0.matrix().scale(0.5));
    vec![
        (models::consensus(&weighted, 2).unwrap(), x0.clone()),
        (models::consensus_with_profile(&weighted, 2, |t| 1.0 + 0.5 * t.sin()).unwrap(), x0.clone()),
        (
            models::distance_formation(&weighted, FormationTarget::quadratic(vec![0.6, 0.8, 0.7]), 2).unwrap(),
            small,
        ),
        (
            models::affine_coordination(&weighted, 2, |_, _, t, _| 0.1 * (t.sin() + 2.0)).unwrap(),
            x0,
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adaptive_and_fixed_step_agree(seed in any::<u64>()) {
        for (sys, x0) in table1_systems(seed) {
            let dp = integrate(&sys, &x0, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
            let rk = integrate(&sys, &x0, 0.0, 10.0, &IntegratorConfig::rk4(0.002, 0.1)).unwrap();
            prop_assert_eq!(dp.len(), rk.len());
            for (a, b) in dp.states().iter().zip(rk.states()) {
                prop_assert!((a.matrix() - b.matrix()).max_abs() <= 1e-6, "{}", sys.label);
            }
        }
    }

    #[test]
    fn time_reversal_returns_to_start(seed in any::<u64>(), n in 1usize..=5, d in 1usize..=3) {
        let mut g = rng(seed);
        let w = gaussian(&mut g, n, n).scale(0.2);
        let x0 = StateMatrix::new(gaussian(&mut g, d, n));
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(w.clone(), d).unwrap(), "lti");
        let cfg = IntegratorConfig::default();
        let fwd = integrate(&sys, &x0, 0.0, 5.0, &cfg).unwrap();
        let wt = w.transpose();
        let back = integrate_flow(|_, x| Ok((x * &wt).scale(-1.0)), fwd.final_state(), 0.0, 5.0, &cfg).unwrap();
        prop_assert!((back.final_state().matrix() - x0.matrix()).max_abs() <= 1e-6);
    }

    #[test]
    fn constant_systems_match_exponential(seed in any::<u64>(), n in 1usize..=6, d in 1usize..=4) {
        let mut g = rng(seed);
        let w = gaussian(&mut g, n, n).scale(0.15);
        let x0 = StateMatrix::new(gaussian(&mut g, d, n));
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(w, d).unwrap(), "lti");
        let traj = integrate(&sys, &x0, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        prop_assert!(oracle_error(&traj, &sys).unwrap() <= 1e-7);
    }
}
