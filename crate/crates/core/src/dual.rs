//! Lagrangian dual solver: per-carrier water-filling powers, joint assignment and
//! small-cell on/off selection, projected subgradient updates of the multipliers, and
//! recovery of a feasible allocation from the visited on/off patterns.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alloc::{min_power_allocation, weighted_objective, AllocationState, SlotTable, SolveReport};
use crate::assignment::{solve_assignment, CostMatrix};
use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualOptions {
    pub max_iterations: usize,
    /// Constant `c` of the `c / sqrt(t)` step rule.
    pub step_scale: f64,
    /// Stop when the best dual value improves by less than `stall_tolerance` (relative)
    /// over this many iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    /// When false every small cell stays on.
    pub onoff: bool,
    /// Above this many small cells the on/off pattern is searched greedily.
    pub exact_onoff_limit: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_scale: 1.0,
            stall_window: 25,
            stall_tolerance: 1e-4,
            onoff: true,
            exact_onoff_limit: 10,
        }
    }
}

/// Multipliers of the power budgets (per station id) and rate constraints (per user).
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// 1-based iteration counter used by the step rule.
    pub iteration: usize,
}

/// Power minimizing `price * p - mu * rate(p)` with rate in the units of `bandwidth`,
/// before any budget cap. `noise_to_gain` is `(I + N0) / h`.
pub fn optimal_carrier_power(mu: f64, price: f64, bandwidth: f64, noise_to_gain: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    if price <= 0.0 {
        return f64::INFINITY;
    }
    (mu * bandwidth / (LN_2 * price) - noise_to_gain).max(0.0)
}

/// Per-link Lagrangian term `price * p - mu * rate(p)`.
pub fn lagrangian_term(p: f64, price: f64, mu: f64, bandwidth: f64, snr_per_watt: f64) -> f64 {
    price * p - mu * bandwidth * (p * snr_per_watt).ln_1p() / LN_2
}

/// Result of minimizing the Lagrangian for fixed multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub active: Vec<bool>,
    /// Slot index per user.
    pub slot_of_user: Vec<usize>,
    pub power_of_user: Vec<f64>,
    /// Lagrangian value, i.e. the dual function at these multipliers.
    pub value: f64,
    pub operations: u64,
}

struct LinkTerms {
    power: Vec<f64>,
    term: Vec<f64>,
}

fn link_terms(table: &SlotTable, m: &Multipliers) -> LinkTerms {
    let k = table.len();
    let mut power = Vec::with_capacity(table.users * k);
    let mut term = Vec::with_capacity(table.users * k);
    for u in 0..table.users {
        for (j, slot) in table.slots.iter().enumerate() {
            let price = slot.weight + m.lambda[slot.station];
            let snr = table.snr(u, j);
            let p = optimal_carrier_power(m.mu[u], price, table.bandwidth_mhz, 1.0 / snr).min(slot.budget);
            power.push(p);
            term.push(lagrangian_term(p, price, m.mu[u], table.bandwidth_mhz, snr));
        }
    }
    LinkTerms { power, term }
}

/// Constant part of the Lagrangian that does not depend on the assignment.
fn fixed_part(scenario: &Scenario, table: &SlotTable, m: &Multipliers, active: &[bool]) -> f64 {
    let power = &scenario.config.power;
    let cells: f64 = active.iter().map(|&on| if on { power.small_cell.b } else { power.small_cell.p_sleep }).sum();
    let budgets: f64 = table.stations.iter().map(|(s, _)| m.lambda[*s] * scenario.station_budget(*s)).sum();
    let rates: f64 = m.mu.iter().sum::<f64>() * table.threshold_mbps;
    power.macro_cell.b + cells - budgets + rates
}

/// Assignment part of the Lagrangian with a given on/off pattern; `None` if the
/// available slots cannot hold every user.
fn assignment_part(table: &SlotTable, terms: &LinkTerms, active: &[bool], ops: &mut u64) -> Option<(f64, Vec<usize>)> {
    let cols = table.available_slots(active);
    if cols.len() < table.users {
        return None;
    }
    let k = table.len();
    let mut costs = CostMatrix::new(table.users, cols.len(), 0.0);
    for u in 0..table.users {
        for (j, &c) in cols.iter().enumerate() {
            costs.set(u, j, terms.term[u * k + c]);
        }
    }
    let m = solve_assignment(&costs).ok()?;
    *ops += m.operations;
    let slots = m.row_to_col.iter().map(|j| cols[j.expect("perfect matching")]).collect();
    Some((m.total_cost, slots))
}

/// Lower bound on the assignment part: every user takes its cheapest available slot.
fn row_minimum_bound(table: &SlotTable, terms: &LinkTerms, active: &[bool]) -> f64 {
    let k = table.len();
    (0..table.users)
        .map(|u| {
            (0..k)
                .filter(|&c| table.slot_available(c, active))
                .map(|c| terms.term[u * k + c])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn mask_to_active(mask: u64, cells: usize) -> Vec<bool> {
    (0..cells).map(|i| mask & (1 << i) != 0).collect()
}

/// Minimizes the Lagrangian jointly over the on/off pattern, the assignment and the
/// per-link powers.
///
/// Patterns are visited in order of their fixed cost and skipped when a lower bound
/// (fixed cost plus the all-on assignment value or the row-minimum bound) cannot beat
/// the incumbent, so the minimum is exact.
pub fn inner_minimize(
    scenario: &Scenario,
    table: &SlotTable,
    m: &Multipliers,
    opts: &DualOptions,
) -> Result<InnerSolution> {
    let cells = scenario.num_small_cells();
    let terms = link_terms(table, m);
    let mut ops = 0u64;
    let all_on = vec![true; cells];
    let Some((all_on_value, all_on_slots)) = assignment_part(table, &terms, &all_on, &mut ops) else {
        return Err(crate::error::HetNetError::Infeasible(format!(
            "{} users exceed the {} available slots",
            table.users,
            table.len()
        )));
    };
    let mut best_active = all_on.clone();
    let mut best_slots = all_on_slots;
    let mut best_value = fixed_part(scenario, table, m, &all_on) + all_on_value;

    if opts.onoff {
        let candidates: Vec<Vec<bool>> = if cells <= opts.exact_onoff_limit {
            let mut masks: Vec<u64> = (0..(1u64 << cells)).collect();
            masks.sort_by_key(|mask| (mask.count_ones(), *mask));
            masks.into_iter().map(|mask| mask_to_active(mask, cells)).filter(|a| a != &all_on).collect()
        } else {
            // Greedy: switch cells off one at a time while the Lagrangian drops.
            let mut current = all_on.clone();
            let mut visited = Vec::new();
            for i in 0..cells {
                let mut trial = current.clone();
                trial[i] = false;
                visited.push(trial.clone());
                current = trial;
            }
            visited
        };
        for active in candidates {
            let fixed = fixed_part(scenario, table, m, &active);
            if fixed + all_on_value >= best_value {
                continue;
            }
            let rowmin = row_minimum_bound(table, &terms, &active);
            if fixed + rowmin >= best_value {
                continue;
            }
            if let Some((value, slots)) = assignment_part(table, &terms, &active, &mut ops) {
                if fixed + value < best_value {
                    best_value = fixed + value;
                    best_active = active;
                    best_slots = slots;
                }
            }
        }
    }
    let k = table.len();
    let power_of_user = best_slots.iter().enumerate().map(|(u, &c)| terms.power[u * k + c]).collect();
    Ok(InnerSolution { active: best_active, slot_of_user: best_slots, power_of_user, value: best_value, operations: ops })
}

/// Projected subgradient update with diminishing steps `c / sqrt(t)`.
///
/// Steps are scaled per constraint: budget steps by the station's consumption slope
/// over its budget, rate steps by the user's initial multiplier over the rate threshold,
/// so one step moves each multiplier by a comparable fraction of its natural size.
pub fn subgradient_step(
    m: &Multipliers,
    inner: &InnerSolution,
    scenario: &Scenario,
    table: &SlotTable,
    mu_scale: &[f64],
    opts: &DualOptions,
) -> Multipliers {
    let step = opts.step_scale / (m.iteration as f64).sqrt();
    let mut load = vec![0.0; m.lambda.len()];
    for (u, &c) in inner.slot_of_user.iter().enumerate() {
        load[table.slots[c].station] += inner.power_of_user[u];
    }
    let small_slope = scenario.config.power.small_cell.a;
    let mut lambda = m.lambda.clone();
    for (s, range) in &table.stations {
        let budget = scenario.station_budget(*s);
        let weight = table.slots[range.start].weight.max(small_slope);
        let delta = step * weight / budget;
        lambda[*s] = (lambda[*s] - delta * (budget - load[*s])).max(0.0);
    }
    let mu = m
        .mu
        .iter()
        .enumerate()
        .map(|(u, &mu)| {
            let c = inner.slot_of_user[u];
            let achieved = table.rate_mbps(u, c, inner.power_of_user[u]);
            let varpi = step * mu_scale[u] / table.threshold_mbps;
            (mu + varpi * (table.threshold_mbps - achieved)).max(0.0)
        })
        .collect();
    Multipliers { lambda, mu, iteration: m.iteration + 1 }
}

/// Rate multipliers at which each user's cheapest operator link, on its own, would be
/// powered exactly to the rate threshold.
pub fn initial_multipliers(scenario: &Scenario, table: &SlotTable) -> Multipliers {
    let mu = (0..table.users)
        .map(|u| {
            let mut best = f64::INFINITY;
            for (c, slot) in table.slots.iter().enumerate() {
                if slot.fap {
                    continue;
                }
                let mu = slot.weight * LN_2 * (1.0 + table.snr_target) / (table.snr(u, c) * table.bandwidth_mhz);
                best = best.min(mu);
            }
            if best.is_finite() { best } else { 1.0 }
        })
        .collect();
    Multipliers { lambda: vec![0.0; scenario.stations.len()], mu, iteration: 1 }
}

struct Recovery {
    cache: HashMap<Vec<bool>, Option<(f64, AllocationState)>>,
    operations: u64,
}

impl Recovery {
    fn evaluate(&mut self, scenario: &Scenario, table: &SlotTable, active: &[bool]) -> Option<(f64, AllocationState)> {
        if let Some(hit) = self.cache.get(active) {
            return hit.clone();
        }
        let (alloc, ops) = min_power_allocation(scenario, table, active);
        self.operations += ops;
        let result = alloc.and_then(|a| weighted_objective(scenario, &a).ok().map(|obj| (obj, a)));
        self.cache.insert(active.to_vec(), result.clone());
        result
    }

    fn best(&self) -> Option<(f64, AllocationState)> {
        self.cache
            .values()
            .flatten()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .cloned()
    }
}

/// Full dual solve: iterate inner minimization and multiplier updates, recover a
/// feasible allocation from every visited on/off pattern, and finish with a flip-and-swap
/// local search around the best pattern.
pub fn solve_dual(scenario: &Scenario, channel: &ChannelMatrix, opts: &DualOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let table = SlotTable::build(scenario, channel);
    let cells = scenario.num_small_cells();
    let mut recovery = Recovery { cache: HashMap::new(), operations: 0 };
    let mut trace = Vec::new();
    let mut best_dual = f64::NEG_INFINITY;
    let mut operations = 0u64;
    let mut m = initial_multipliers(scenario, &table);
    let mu_scale = m.mu.clone();
    let mut iterations = 0;

    if table.users <= table.len() {
        for _ in 0..opts.max_iterations {
            iterations += 1;
            let inner = inner_minimize(scenario, &table, &m, opts)?;
            operations += inner.operations;
            trace.push(inner.value);
            best_dual = best_dual.max(inner.value);
            let pattern = if opts.onoff { inner.active.clone() } else { vec![true; cells] };
            recovery.evaluate(scenario, &table, &pattern);
            if trace.len() > opts.stall_window {
                let then = trace[..trace.len() - opts.stall_window].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if best_dual - then <= opts.stall_tolerance * best_dual.abs().max(1.0) {
                    break;
                }
            }
            m = subgradient_step(&m, &inner, scenario, &table, &mu_scale, opts);
        }
    }

    if opts.onoff {
        if recovery.best().is_none() {
            recovery.evaluate(scenario, &table, &vec![true; cells]);
        }
        // Local search around the best recovered pattern: flip one cell, or swap an
        // active cell for a sleeping one.
        while let Some((value, alloc)) = recovery.best() {
            let mut improved = false;
            let mut neighbours = Vec::new();
            for i in 0..cells {
                let mut trial = alloc.active.clone();
                trial[i] = !trial[i];
                neighbours.push(trial);
                for j in (0..cells).filter(|&j| alloc.active[i] && !alloc.active[j]) {
                    let mut trial = alloc.active.clone();
                    trial.swap(i, j);
                    neighbours.push(trial);
                }
            }
            for trial in neighbours {
                if let Some((v, _)) = recovery.evaluate(scenario, &table, &trial) {
                    if v < value - 1e-12 {
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    } else if recovery.best().is_none() {
        recovery.evaluate(scenario, &table, &vec![true; cells]);
    }

    let incumbent = recovery.best();
    let weak_duality_ok = incumbent.as_ref().map(|(primal, _)| {
        trace.iter().all(|d| *d <= primal + 1e-6 * primal.abs().max(1.0))
    });
    let allocation = incumbent.map(|(_, mut alloc)| {
        if !opts.onoff {
            alloc.active.fill(true);
        }
        alloc
    });
    let name = if opts.onoff { "dual" } else { "dual-all-active" };
    let mut report = SolveReport::from_allocation(name, scenario, channel, allocation)?;
    report.dual_trace = trace;
    report.best_dual = best_dual.is_finite().then_some(best_dual);
    report.iterations = iterations;
    report.operations = operations + recovery.operations;
    report.weak_duality_ok = weak_duality_ok;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}
