//! Monte-Carlo sweeps over one network parameter.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, ensure, Result};
use hetnet_core::config::{ScenarioKind, SimConfig};
use hetnet_core::cooperation::{coop_inputs, grid_pricing_oracle, solve_pricing};
use hetnet_core::scenario::build_instance;
use hetnet_core::{SolveReport, SolverRegistry};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{summarize_pricing, summarize_trials, PricingSummaryRow, SummaryRow};

/// Step of the renewable-price grid used to cross-check every pricing solve.
pub const PRICING_GRID_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    PowerVsUsers,
    RateSweep,
    FapBudgetSweep,
    SmallcellCountSweep,
    FapDensitySweep,
    PricingVsFossil,
    PricingVsRenewable,
    RuntimeCompare,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::PowerVsUsers,
        Self::RateSweep,
        Self::FapBudgetSweep,
        Self::SmallcellCountSweep,
        Self::FapDensitySweep,
        Self::PricingVsFossil,
        Self::PricingVsRenewable,
        Self::RuntimeCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PowerVsUsers => "power_vs_users",
            Self::RateSweep => "rate_sweep",
            Self::FapBudgetSweep => "fap_budget_sweep",
            Self::SmallcellCountSweep => "smallcell_count_sweep",
            Self::FapDensitySweep => "fap_density_sweep",
            Self::PricingVsFossil => "pricing_vs_fossil",
            Self::PricingVsRenewable => "pricing_vs_renewable",
            Self::RuntimeCompare => "runtime_compare",
        }
    }

    /// Name of the swept parameter, as written to the CSV files.
    pub fn sweep_param(self) -> &'static str {
        match self {
            Self::PowerVsUsers | Self::RateSweep | Self::RuntimeCompare => "users",
            Self::FapBudgetSweep => "fap_budget_w",
            Self::SmallcellCountSweep => "small_cells",
            Self::FapDensitySweep => "faps_per_cell",
            Self::PricingVsFossil => "fossil_price",
            Self::PricingVsRenewable => "renewable_mean_j",
        }
    }

    pub fn is_pricing(self) -> bool {
        matches!(self, Self::PricingVsFossil | Self::PricingVsRenewable)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|id| id.name() == wanted)
            .ok_or_else(|| anyhow::anyhow!("unknown experiment `{s}`; expected one of {}", names()))
    }
}

fn names() -> String {
    ExperimentId::ALL.map(|id| id.name()).join(", ")
}

/// One sweep: which parameter values, how many trials, which solvers and scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub sweep: Vec<f64>,
    /// Rate thresholds in bit/s; every sweep point runs once per entry.
    pub rate_thresholds: Vec<f64>,
    pub trials: usize,
    pub solvers: Vec<String>,
    pub kinds: Vec<ScenarioKind>,
    pub master_seed: u64,
    /// Configuration the sweep modifies.
    pub base: SimConfig,
    /// Run trials on the rayon pool. Timing sweeps run sequentially.
    pub parallel: bool,
}

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

impl ExperimentSpec {
    /// Default sweep for `id`, starting from `base`.
    pub fn new(id: ExperimentId, base: SimConfig) -> Self {
        let mut base = base;
        let users = range(10.0, 10.0, 8);
        let r0 = base.network.rate_threshold;
        let dual_iter = vec!["dual".to_string(), "iterative".to_string()];
        let (sweep, rates, solvers, kinds, trials) = match id {
            ExperimentId::PowerVsUsers => (
                users,
                vec![r0],
                vec!["dual".into(), "iterative".into(), "dual-all-active".into()],
                ScenarioKind::ALL.to_vec(),
                20,
            ),
            ExperimentId::RateSweep => (
                users,
                vec![0.5e6, 1.0e6],
                vec!["dual".into()],
                vec![ScenarioKind::Ms, ScenarioKind::MsfHybrid],
                20,
            ),
            ExperimentId::FapBudgetSweep => {
                base.network.num_outdoor_users = 60;
                (range(0.1, 0.1, 10), vec![0.5e6], vec!["dual".into()], vec![ScenarioKind::MsfHybrid], 20)
            }
            ExperimentId::SmallcellCountSweep => {
                base.network.num_outdoor_users = 60;
                base.network.num_faps_per_cell = 4;
                base.network.power.fap.p_max = 0.5;
                (
                    vec![2.0, 4.0, 6.0, 8.0],
                    vec![0.5e6],
                    vec!["dual".into()],
                    vec![ScenarioKind::MsfClosed, ScenarioKind::MsfHybrid],
                    20,
                )
            }
            ExperimentId::FapDensitySweep => {
                base.network.num_outdoor_users = 60;
                base.network.power.fap.p_max = 0.5;
                (range(2.0, 1.0, 5), vec![0.5e6], vec!["dual".into()], vec![ScenarioKind::MsfHybrid], 20)
            }
            ExperimentId::PricingVsFossil => {
                base.network.num_outdoor_users = 60;
                base.network.renewable.mean = 30.0;
                (range(0.1, 0.1, 10), vec![r0], vec!["dual".into()], vec![ScenarioKind::MsfHybrid], 20)
            }
            ExperimentId::PricingVsRenewable => {
                base.network.num_outdoor_users = 60;
                base.pricing.fossil_price = 0.5;
                (range(0.0, 10.0, 11), vec![r0], vec!["dual".into()], vec![ScenarioKind::MsfHybrid], 20)
            }
            ExperimentId::RuntimeCompare => (vec![60.0], vec![r0], dual_iter, ScenarioKind::ALL.to_vec(), 10),
        };
        ExperimentSpec {
            id,
            sweep,
            rate_thresholds: rates,
            trials,
            solvers,
            kinds,
            master_seed: base.network.rng_seed,
            base,
            parallel: id != ExperimentId::RuntimeCompare,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "an experiment needs at least one trial");
        ensure!(!self.sweep.is_empty(), "empty sweep for {}", self.id);
        ensure!(!self.rate_thresholds.is_empty(), "no rate threshold for {}", self.id);
        ensure!(!self.solvers.is_empty(), "no solver selected for {}", self.id);
        ensure!(!self.kinds.is_empty(), "no scenario selected for {}", self.id);
        for &v in &self.sweep {
            self.point_config(v, self.rate_thresholds[0], 0).validate()?;
        }
        Ok(())
    }

    /// Configuration of one trial at sweep value `value`.
    pub fn point_config(&self, value: f64, rate_threshold: f64, seed: u64) -> SimConfig {
        let mut cfg = self.base.clone();
        let net = &mut cfg.network;
        net.rate_threshold = rate_threshold;
        net.rng_seed = seed;
        match self.id {
            ExperimentId::PowerVsUsers | ExperimentId::RateSweep | ExperimentId::RuntimeCompare => {
                net.num_outdoor_users = value as usize;
            }
            ExperimentId::FapBudgetSweep => net.power.fap.p_max = value,
            ExperimentId::SmallcellCountSweep => net.num_small_cells = value as usize,
            ExperimentId::FapDensitySweep => net.num_faps_per_cell = value as usize,
            ExperimentId::PricingVsFossil => cfg.pricing.fossil_price = value,
            ExperimentId::PricingVsRenewable => net.renewable.mean = value,
        }
        cfg
    }
}

/// Seed of trial `trial`. The same trial index gets the same seed at every sweep
/// point, so points are compared on common random draws.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// One solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub rate_threshold_bps: f64,
    pub scenario: ScenarioKind,
    pub solver: String,
    pub trial: usize,
    pub seed: u64,
    pub users: usize,
    pub small_cells: usize,
    pub faps_per_cell: usize,
    pub fap_budget_w: f64,
    pub feasible: bool,
    pub served: usize,
    pub outage: usize,
    /// Operator power without the macro's constant term; empty when infeasible.
    pub reported_power_w: Option<f64>,
    pub total_power_w: Option<f64>,
    pub active_small_cells: usize,
    pub iterations: usize,
    pub operations: u64,
    pub wall_time_s: f64,
    pub error: String,
}

/// Cooperation prices of one small cell's FAP owner in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub solver: String,
    pub trial: usize,
    pub seed: u64,
    pub cell: usize,
    pub offloaded: f64,
    pub excess_j: f64,
    pub energy_closed_j: f64,
    pub energy_coop_j: f64,
    pub offloading_price: Option<f64>,
    pub renewable_price: Option<f64>,
    /// Renewable energy revenue the operator collects from this owner.
    pub renewable_payment: Option<f64>,
    pub payout: Option<f64>,
    pub grid_payout: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub trials: Vec<TrialRow>,
    pub pricing: Vec<PricingRow>,
    pub summary: Vec<SummaryRow>,
    pub pricing_summary: Vec<PricingSummaryRow>,
}

impl ResultTable {
    /// Whether every solver run finished without an error. Infeasible outcomes count
    /// as finished.
    pub fn complete(&self) -> bool {
        self.trials.iter().all(|r| r.error.is_empty())
    }

    pub fn errors(&self) -> impl Iterator<Item = &TrialRow> {
        self.trials.iter().filter(|r| !r.error.is_empty())
    }
}

struct Job {
    value: f64,
    rate: f64,
    trial: usize,
}

fn trial_row(spec: &ExperimentSpec, job: &Job, seed: u64, cfg: &SimConfig, kind: ScenarioKind, solver: &str) -> TrialRow {
    let net = &cfg.network;
    TrialRow {
        experiment: spec.id.name().into(),
        sweep_param: spec.id.sweep_param().into(),
        sweep_value: job.value,
        rate_threshold_bps: job.rate,
        scenario: kind,
        solver: solver.into(),
        trial: job.trial,
        seed,
        users: net.num_outdoor_users,
        small_cells: net.num_small_cells,
        faps_per_cell: net.num_faps_per_cell,
        fap_budget_w: net.power.fap.p_max,
        feasible: false,
        served: 0,
        outage: net.num_outdoor_users,
        reported_power_w: None,
        total_power_w: None,
        active_small_cells: 0,
        iterations: 0,
        operations: 0,
        wall_time_s: 0.0,
        error: String::new(),
    }
}

fn fill(row: &mut TrialRow, report: &SolveReport) {
    row.feasible = report.feasible;
    row.served = report.served;
    row.outage = row.users - report.served.min(row.users);
    if report.feasible {
        row.reported_power_w = Some(report.reported_objective);
        row.total_power_w = Some(report.objective);
    }
    row.active_small_cells = report.active_small_cells;
    row.iterations = report.iterations;
    row.operations = report.operations;
    row.wall_time_s = report.wall_time_s;
}

fn pricing_rows(
    spec: &ExperimentSpec,
    job: &Job,
    seed: u64,
    cfg: &SimConfig,
    scenario: &hetnet_core::Scenario,
    report: &SolveReport,
) -> Vec<PricingRow> {
    let blank = |cell: usize, error: String| PricingRow {
        experiment: spec.id.name().into(),
        sweep_param: spec.id.sweep_param().into(),
        sweep_value: job.value,
        solver: report.solver.clone(),
        trial: job.trial,
        seed,
        cell,
        offloaded: 0.0,
        excess_j: 0.0,
        energy_closed_j: 0.0,
        energy_coop_j: 0.0,
        offloading_price: None,
        renewable_price: None,
        renewable_payment: None,
        payout: None,
        grid_payout: None,
        error,
    };
    let Some(alloc) = report.allocation.as_ref().filter(|_| report.feasible) else {
        return vec![blank(0, "no feasible allocation to price".into())];
    };
    let inputs = match coop_inputs(scenario, alloc, &cfg.pricing) {
        Ok(i) => i,
        Err(e) => return vec![blank(0, e.to_string())],
    };
    (0..inputs.cells.len())
        .map(|i| {
            let single = inputs.single(i);
            let c = single.cells[0];
            let mut row = blank(i, String::new());
            row.offloaded = c.offloaded;
            row.excess_j = c.excess;
            row.energy_closed_j = c.energy_closed;
            row.energy_coop_j = c.energy_coop;
            match solve_pricing(&single) {
                Ok(a) => {
                    row.offloading_price = Some(a.offloading_price);
                    row.renewable_price = Some(a.renewable_price);
                    row.renewable_payment = Some(a.renewable_payments[0]);
                    row.payout = Some(a.payout);
                }
                Err(e) => row.error = e.to_string(),
            }
            row.grid_payout = grid_pricing_oracle(&single, PRICING_GRID_STEP).map(|g| g.0);
            row
        })
        .collect()
}

fn run_job(spec: &ExperimentSpec, registry: &SolverRegistry, job: &Job) -> (Vec<TrialRow>, Vec<PricingRow>) {
    let seed = trial_seed(spec.master_seed, job.trial);
    let cfg = spec.point_config(job.value, job.rate, seed);
    let mut rows = Vec::new();
    let mut pricing = Vec::new();
    let instance = build_instance(&cfg);
    for &kind in &spec.kinds {
        for name in &spec.solvers {
            let mut row = trial_row(spec, job, seed, &cfg, kind, name);
            let (scenario, channel) = match &instance {
                Ok(pair) => pair,
                Err(e) => {
                    row.error = e.to_string();
                    rows.push(row);
                    continue;
                }
            };
            let scenario = scenario.with_kind(kind);
            let started = Instant::now();
            let outcome = registry.get(name).and_then(|s| s.solve(&scenario, channel));
            match outcome {
                Ok(report) => {
                    fill(&mut row, &report);
                    if row.wall_time_s == 0.0 {
                        row.wall_time_s = started.elapsed().as_secs_f64();
                    }
                    if spec.id.is_pricing() && kind == ScenarioKind::MsfHybrid {
                        pricing.extend(pricing_rows(spec, job, seed, &cfg, &scenario, &report));
                    }
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    (rows, pricing)
}

/// Runs every sweep point and trial. Failures are recorded in the rows and never stop
/// the sweep; rows come back in (sweep value, rate threshold, trial) order whether or
/// not trials ran in parallel.
pub fn run_experiment(spec: &ExperimentSpec, registry: &SolverRegistry) -> Result<ResultTable> {
    spec.validate()?;
    for name in &spec.solvers {
        if !registry.contains(name) {
            bail!("solver `{name}` is not registered; available: {}", registry.names().join(", "));
        }
    }
    let mut jobs = Vec::new();
    for &value in &spec.sweep {
        for &rate in &spec.rate_thresholds {
            for trial in 0..spec.trials {
                jobs.push(Job { value, rate, trial });
            }
        }
    }
    let results: Vec<(Vec<TrialRow>, Vec<PricingRow>)> = if spec.parallel {
        jobs.par_iter().map(|job| run_job(spec, registry, job)).collect()
    } else {
        jobs.iter().map(|job| run_job(spec, registry, job)).collect()
    };
    let mut table = ResultTable::default();
    for (rows, pricing) in results {
        table.trials.extend(rows);
        table.pricing.extend(pricing);
    }
    table.summary = summarize_trials(&table.trials);
    table.pricing_summary = summarize_pricing(&table.pricing);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("fig9".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn seeds_differ_per_trial_and_repeat_per_master() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn point_config_sets_the_swept_parameter() {
        let spec = ExperimentSpec::new(ExperimentId::FapBudgetSweep, SimConfig::default());
        let cfg = spec.point_config(0.3, 0.5e6, 11);
        assert_eq!(cfg.network.power.fap.p_max, 0.3);
        assert_eq!(cfg.network.num_outdoor_users, 60);
        assert_eq!(cfg.network.rng_seed, 11);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let mut spec = ExperimentSpec::new(ExperimentId::PowerVsUsers, SimConfig::default());
        spec.sweep.clear();
        assert!(spec.validate().is_err());
        spec = ExperimentSpec::new(ExperimentId::PowerVsUsers, SimConfig::default());
        spec.trials = 0;
        assert!(spec.validate().is_err());
    }
}
