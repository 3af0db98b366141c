use std::path::PathBuf;

use hetnet_core::config::{ScenarioKind, SimConfig};
use hetnet_core::SolverRegistry;
use hetnet_harness::experiment::{run_experiment, ExperimentId, ExperimentSpec};
use hetnet_harness::output::{read_pricing, read_trials, write_results};
use hetnet_harness::stats::{summarize_pricing, summarize_trials};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hetnet-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn registry() -> SolverRegistry {
    let cfg = SimConfig::default();
    SolverRegistry::with_defaults(&cfg.dual, &cfg.pricing)
}

#[test]
fn small_power_sweep_writes_files_that_summarize_identically() {
    let mut spec = ExperimentSpec::new(ExperimentId::PowerVsUsers, SimConfig::default());
    spec.sweep = vec![10.0, 20.0];
    spec.trials = 3;
    let table = run_experiment(&spec, &registry()).unwrap();
    assert!(table.complete());
    assert_eq!(table.trials.len(), 2 * 3 * 3 * 3);
    assert_eq!(table.summary.len(), 2 * 3 * 3);
    assert!(table.trials.iter().all(|r| r.feasible && r.outage == 0));

    let dir = scratch("power");
    let written = write_results(&dir, spec.id, &table).unwrap();
    assert_eq!(written.len(), 3);
    let svg = std::fs::read_to_string(dir.join("power_vs_users.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));

    let back = read_trials(&dir.join("power_vs_users_trials.csv")).unwrap();
    assert_eq!(back, table.trials);
    assert_eq!(summarize_trials(&back), table.summary);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runs_repeat_and_points_share_trial_seeds() {
    let mut spec = ExperimentSpec::new(ExperimentId::RateSweep, SimConfig::default());
    spec.sweep = vec![10.0, 30.0];
    spec.rate_thresholds = vec![1.0e6];
    spec.kinds = vec![ScenarioKind::Ms];
    spec.trials = 2;
    let a = run_experiment(&spec, &registry()).unwrap();
    let b = run_experiment(&spec, &registry()).unwrap();
    let key = |t: &hetnet_harness::experiment::TrialRow| (t.seed, t.reported_power_w, t.active_small_cells);
    assert_eq!(a.trials.iter().map(key).collect::<Vec<_>>(), b.trials.iter().map(key).collect::<Vec<_>>());
    let seeds_at = |u: f64| a.trials.iter().filter(|t| t.sweep_value == u).map(|t| t.seed).collect::<Vec<_>>();
    assert_eq!(seeds_at(10.0), seeds_at(30.0));
}

#[test]
fn pricing_sweep_rows_round_trip() {
    let mut spec = ExperimentSpec::new(ExperimentId::PricingVsRenewable, SimConfig::default());
    spec.sweep = vec![0.0, 50.0];
    spec.trials = 2;
    let table = run_experiment(&spec, &registry()).unwrap();
    assert!(table.complete());
    assert_eq!(table.pricing.len(), 2 * 2 * spec.base.network.num_small_cells);
    for row in table.pricing.iter().filter(|r| r.payout.is_some()) {
        assert!((row.payout.unwrap() - row.grid_payout.unwrap()).abs() <= 1e-3);
    }

    let dir = scratch("pricing");
    write_results(&dir, spec.id, &table).unwrap();
    let back = read_pricing(&dir.join("pricing_vs_renewable_pricing.csv")).unwrap();
    assert_eq!(back, table.pricing);
    assert_eq!(summarize_pricing(&back), table.pricing_summary);
    assert!(dir.join("pricing_vs_renewable.svg").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_solver_is_an_error_not_a_row() {
    let mut spec = ExperimentSpec::new(ExperimentId::RuntimeCompare, SimConfig::default());
    spec.trials = 1;
    spec.solvers = vec!["simplex".into()];
    assert!(run_experiment(&spec, &registry()).is_err());
}
