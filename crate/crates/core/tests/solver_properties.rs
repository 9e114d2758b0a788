use chemotaxis::grid::{integrate, Field, Grid};
use chemotaxis::model::{InitSpec, ModelParams, State};
use chemotaxis::solver::{simulate, stable_dt, step_with_info, Accumulators, SolverConfig};
use proptest::prelude::*;

fn random_state(g: Grid, seed: u64, hi: f64) -> State {
    let field = |s: u64, top: f64| {
        InitSpec::Random {
            seed: s,
            lo: 0.0,
            hi: top,
        }
        .sample(g)
        .unwrap()
    };
    State::new(field(seed, hi), field(seed + 1, hi), field(seed + 2, 2.0 * hi), 0.0).unwrap()
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (4usize..24).prop_map(|n| Grid::line(n, 1.0).unwrap()),
        (3usize..10, 3usize..10).prop_map(|(a, b)| Grid::rect(a, b, 1.0, 1.5).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_preserve_positivity_and_mass_identities(
        g in grid_strategy(),
        seed in 0u64..1000,
        hi in 0.1f64..4.0,
        theta in 1.2f64..3.0,
        eps in 0.0f64..0.9,
    ) {
        let p = ModelParams::new(theta, eps, g.dim() as u32).unwrap();
        let cfg = SolverConfig { linear_solver_tol: 1e-13, ..Default::default() };
        let mut s = random_state(g, seed, hi);
        for k in 0..5 {
            let dt = stable_dt(&s, &p, &cfg).unwrap();
            prop_assert!(dt > 0.0 && dt <= cfg.max_dt);
            let (next, info) = step_with_info(&s, &p, &cfg, dt, k).unwrap();
            prop_assert!(next.u.min() >= 0.0 && next.v.min() >= 0.0 && next.w.min() >= 0.0);
            prop_assert!(info.reaction_u_plus_max <= 1.0);
            let scale = 1.0 + integrate(&s.u).unwrap() + integrate(&s.v).unwrap() + integrate(&s.w).unwrap();
            let du = integrate(&next.u).unwrap() - integrate(&s.u).unwrap();
            let dv = integrate(&next.v).unwrap() - integrate(&s.v).unwrap();
            prop_assert!((du - info.sums.reaction_u).abs() <= 1e-11 * scale, "{du} vs {}", info.sums.reaction_u);
            prop_assert!((dv - info.sums.reaction_v).abs() <= 1e-11 * scale);
            s = next;
        }
    }

    #[test]
    fn trajectories_are_monotone_and_reproducible(
        seed in 0u64..1000,
        n in 4usize..9,
        theta in 1.2f64..3.0,
        eps in 0.0f64..0.9,
    ) {
        let g = Grid::rect(n, n, 1.0, 1.0).unwrap();
        let p = ModelParams::new(theta, eps, 2).unwrap();
        let cfg = SolverConfig::default();
        let a = simulate(random_state(g, seed, 1.0), &p, &cfg, 0.02, &[0.005, 0.013]).unwrap();
        let times = a.times();
        prop_assert!(times.windows(2).all(|t| t[1] > t[0]));
        for pair in a.snapshot_accumulators.windows(2) {
            let names = Accumulators::NAMES.iter();
            for ((name, x), y) in names.zip(pair[0].values()).zip(pair[1].values()) {
                // the signed kinetics integrals may decrease
                if *name == "reaction_u" || *name == "reaction_v" {
                    continue;
                }
                prop_assert!(y >= x, "{name}: {x} -> {y}");
            }
        }
        let b = simulate(random_state(g, seed, 1.0), &p, &cfg, 0.02, &[0.005, 0.013]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn flat_u_without_v_obeys_the_comparison_bound(u in 0.0f64..3.0, w in 0.0f64..2.0, theta in 1.1f64..3.0) {
        let g = Grid::line(6, 1.0).unwrap();
        let p = ModelParams::new(theta, 0.2, 1).unwrap();
        let cfg = SolverConfig::default();
        let s = State::new(Field::constant(g, u), Field::constant(g, 0.0), Field::constant(g, w), 0.0).unwrap();
        let dt = stable_dt(&s, &p, &cfg).unwrap();
        let (next, _) = step_with_info(&s, &p, &cfg, dt, 0).unwrap();
        let du = integrate(&next.u).unwrap() - integrate(&s.u).unwrap();
        prop_assert!(du <= dt * (u - u.powf(theta)) + 1e-13);
    }
}
