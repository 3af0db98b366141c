//! Low-complexity solver: capped per-carrier budgets, greedy assignment rounds with
//! budget redistribution, and one-cell-at-a-time switch-off.

use std::time::Instant;

use crate::alloc::{weighted_objective, AllocationState, Assignment, SlotTable, SolveReport};
use crate::assignment::{solve_partial, CostMatrix};
use crate::channel::ChannelMatrix;
use crate::config::ScenarioKind;
use crate::cooperation::{coop_inputs, solve_pricing_per_cell, PricingParams};
use crate::error::Result;
use crate::scenario::Scenario;

/// Equal split of a station budget over its carriers.
pub fn uniform_init(budget: f64, carriers: usize) -> Vec<f64> {
    if carriers == 0 {
        return Vec::new();
    }
    vec![budget / carriers as f64; carriers]
}

/// Power `required` if it fits under `cap`.
pub fn link_power_capped(required: f64, cap: f64) -> Option<f64> {
    (cap > 0.0 && required <= cap).then_some(required)
}

/// Outcome of the assignment rounds for one on/off pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub allocation: AllocationState,
    pub rounds: usize,
    pub operations: u64,
    /// Residual budget per station after the last round.
    pub residual: Vec<f64>,
}

/// Serves users in rounds under per-carrier power caps.
///
/// Each round matches unserved users to free slots of switched-on stations, serving as
/// many as possible and then spending the least weighted power. Allocated power is taken
/// off the station budget, and what is left is spread evenly over as many free carriers
/// as there are users still waiting. Stops when everyone is served or a round changes
/// neither the budgets nor the caps.
pub fn allocate_rounds(scenario: &Scenario, table: &SlotTable, active: &[bool]) -> RoundOutcome {
    let n_stations = scenario.stations.len();
    let mut residual: Vec<f64> = (0..n_stations).map(|s| scenario.station_budget(s)).collect();
    let mut free = vec![true; table.len()];
    let mut cap = vec![0.0; n_stations];
    for (s, range) in &table.stations {
        let carriers = scenario.stations[*s].carriers.len();
        cap[*s] = uniform_init(residual[*s], carriers).first().copied().unwrap_or(0.0);
        // FAP slots exclude the carriers held by registered users.
        if range.len() < carriers {
            cap[*s] = residual[*s] / range.len().max(1) as f64;
        }
    }
    let mut alloc = AllocationState::empty(scenario);
    let mut unserved: Vec<usize> = (0..table.users).collect();
    let mut rounds = 0;
    let mut operations = 0;
    let cols: Vec<usize> = table.available_slots(active);
    while !unserved.is_empty() {
        rounds += 1;
        let open: Vec<usize> = cols.iter().copied().filter(|&k| free[k]).collect();
        let mut costs = CostMatrix::new(unserved.len(), open.len(), f64::INFINITY);
        for (i, &u) in unserved.iter().enumerate() {
            for (j, &k) in open.iter().enumerate() {
                let slot = &table.slots[k];
                if let Some(p) = link_power_capped(table.required_power(u, k), cap[slot.station]) {
                    costs.set(i, j, slot.weight * p);
                }
            }
        }
        let matching = solve_partial(&costs);
        operations += matching.operations;
        let mut still = Vec::new();
        for (i, &u) in unserved.iter().enumerate() {
            match matching.row_to_col[i] {
                Some(j) => {
                    let k = open[j];
                    let slot = table.slots[k];
                    let p = table.required_power(u, k);
                    free[k] = false;
                    residual[slot.station] -= p;
                    alloc.assignments[u] = Some(Assignment { station: slot.station, carrier: slot.carrier, power: p });
                }
                None => still.push(u),
            }
        }
        let progressed = still.len() < unserved.len();
        unserved = still;
        if unserved.is_empty() {
            break;
        }
        let mut caps_changed = false;
        for (s, range) in &table.stations {
            let open_here = range.clone().filter(|&k| free[k]).count();
            let spread = open_here.min(unserved.len());
            let new_cap = if spread > 0 { residual[*s].max(0.0) / spread as f64 } else { 0.0 };
            if (new_cap - cap[*s]).abs() > 1e-15 * cap[*s].abs().max(1e-300) {
                caps_changed = true;
            }
            cap[*s] = new_cap;
        }
        if !progressed && !caps_changed {
            break;
        }
    }
    alloc.normalize_activity(scenario);
    RoundOutcome { allocation: alloc, rounds, operations, residual }
}

/// Weighted objective of a complete, feasible outcome.
fn evaluate(
    scenario: &Scenario,
    channel: &ChannelMatrix,
    outcome: &RoundOutcome,
    pricing: &PricingParams,
) -> Option<f64> {
    if outcome.allocation.served() < outcome.allocation.assignments.len() {
        return None;
    }
    if !outcome.allocation.check(scenario, channel).feasible() {
        return None;
    }
    if scenario.kind() == ScenarioKind::MsfHybrid {
        // The owners of hosting FAPs must be kept whole at an admissible price.
        let inputs = coop_inputs(scenario, &outcome.allocation, pricing).ok()?;
        let deals = solve_pricing_per_cell(&inputs).ok()?;
        let ok = deals.iter().enumerate().all(|(i, d)| d.satisfies(&inputs.single(i), 1e-9));
        if !ok {
            return None;
        }
    }
    weighted_objective(scenario, &outcome.allocation).ok()
}

/// Starts with every small cell on and repeatedly switches off the one cell whose
/// removal lowers total power the most, keeping every user served.
pub fn solve_iterative(scenario: &Scenario, channel: &ChannelMatrix, pricing: &PricingParams) -> Result<SolveReport> {
    let start = Instant::now();
    let table = SlotTable::build(scenario, channel);
    let cells = scenario.num_small_cells();
    let mut active = vec![true; cells];
    let mut operations = 0u64;
    let mut iterations = 1;
    let first = allocate_rounds(scenario, &table, &active);
    operations += first.operations;
    let Some(mut incumbent) = evaluate(scenario, channel, &first, pricing) else {
        let mut report = SolveReport::from_allocation("iterative", scenario, channel, Some(first.allocation))?;
        report.iterations = iterations;
        report.operations = operations;
        report.wall_time_s = start.elapsed().as_secs_f64();
        return Ok(report);
    };
    let mut best = first.allocation;
    loop {
        let mut round_best: Option<(f64, usize, AllocationState)> = None;
        for i in (0..cells).filter(|&i| active[i]) {
            let mut trial = active.clone();
            trial[i] = false;
            let outcome = allocate_rounds(scenario, &table, &trial);
            operations += outcome.operations;
            iterations += 1;
            if let Some(value) = evaluate(scenario, channel, &outcome, pricing) {
                if round_best.as_ref().is_none_or(|(v, _, _)| value < *v) {
                    round_best = Some((value, i, outcome.allocation));
                }
            }
        }
        match round_best {
            // A cell that can go without raising power is switched off.
            Some((value, cell, alloc)) if value <= incumbent + 1e-12 * incumbent.abs() => {
                incumbent = value;
                active[cell] = false;
                best = alloc;
            }
            _ => break,
        }
    }
    let mut report = SolveReport::from_allocation("iterative", scenario, channel, Some(best))?;
    report.iterations = iterations;
    report.operations = operations;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}
