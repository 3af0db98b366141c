use hetnet_core::alloc::weighted_objective;
use hetnet_core::config::SimConfig;
use hetnet_core::cooperation::PricingParams;
use hetnet_core::dual::{solve_dual, DualOptions};
use hetnet_core::iterative::solve_iterative;
use hetnet_core::oracle::{exhaustive_optimum, exhaustive_optimum_weighted, tiny_instance};
use hetnet_core::scenario::build_instance;
use hetnet_core::{ChannelMatrix, Scenario, ScenarioKind, SolverRegistry};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solvers_stay_feasible_and_above_the_oracle(seed in any::<u64>()) {
        let (s, ch) = tiny_instance(seed).unwrap();
        let best = exhaustive_optimum(&s, &ch).unwrap();
        let dual = solve_dual(&s, &ch, &DualOptions::default()).unwrap();
        let iter = solve_iterative(&s, &ch, &PricingParams::default()).unwrap();
        for r in [&dual, &iter] {
            if r.feasible {
                prop_assert!(best.feasible);
                prop_assert!(r.allocation.as_ref().unwrap().check(&s, &ch).feasible());
                prop_assert!(r.objective >= best.objective - 1e-9 * best.objective);
            }
        }
        prop_assert!(dual.weak_duality_ok != Some(false));
        if let (Some(bound), true) = (dual.best_dual, best.feasible) {
            let weighted = exhaustive_optimum_weighted(&s, &ch, hetnet_core::alloc::FAP_COST_WEIGHT).unwrap();
            let value = weighted_objective(&s, weighted.allocation.as_ref().unwrap()).unwrap();
            prop_assert!(bound <= value + 1e-6 * value);
        }
    }
}

fn instance(users: usize, seed: u64) -> (Scenario, ChannelMatrix) {
    let mut cfg = SimConfig::default();
    cfg.network.num_outdoor_users = users;
    cfg.network.rng_seed = seed;
    build_instance(&cfg).unwrap()
}

#[test]
fn registry_solvers_agree_on_feasibility_at_full_scale() {
    let cfg = SimConfig::default();
    let registry = SolverRegistry::with_defaults(&cfg.dual, &cfg.pricing);
    for seed in 1..=3 {
        let (s, ch) = instance(40, seed);
        for kind in ScenarioKind::ALL {
            let s = s.with_kind(kind);
            for name in ["dual", "dual-all-active", "iterative"] {
                let r = registry.get(name).unwrap().solve(&s, &ch).unwrap();
                assert!(r.feasible, "{name} {kind} seed {seed}");
                assert_eq!(r.served, 40);
                assert!(r.rates.iter().all(|&x| x >= s.config.rate_threshold * (1.0 - 1e-9)));
            }
        }
    }
}

#[test]
fn switching_cells_off_never_costs_more_than_keeping_them_on() {
    let cfg = SimConfig::default();
    let registry = SolverRegistry::with_defaults(&cfg.dual, &cfg.pricing);
    for seed in 1..=5 {
        let (s, ch) = instance(20, seed);
        let s = s.with_kind(ScenarioKind::Ms);
        let on_off = registry.get("dual").unwrap().solve(&s, &ch).unwrap();
        let all_on = registry.get("dual-all-active").unwrap().solve(&s, &ch).unwrap();
        assert!(on_off.objective <= all_on.objective + 1e-9, "seed {seed}");
        assert_eq!(all_on.active_small_cells, s.num_small_cells());
    }
}

#[test]
fn instances_round_trip_through_json() {
    let (s, ch) = instance(12, 9);
    let s2 = Scenario::from_json(&s.to_json().unwrap()).unwrap();
    let ch2 = ChannelMatrix::from_json(&ch.to_json().unwrap()).unwrap();
    assert_eq!(s2, s);
    assert_eq!(ch2, ch);
    let a = solve_dual(&s, &ch, &DualOptions::default()).unwrap();
    let b = solve_dual(&s2, &ch2, &DualOptions::default()).unwrap();
    assert_eq!(a.allocation, b.allocation);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = SimConfig::default();
    let text = cfg.to_toml_string();
    assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
}
