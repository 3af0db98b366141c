//! Decision variables of the operator problem, feasibility checks and the candidate
//! (station, carrier) slots both solvers assign users to.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_partial, CostMatrix};
use crate::channel::ChannelMatrix;
use crate::config::ScenarioKind;
use crate::error::Result;
use crate::power::{network_breakdown, BUDGET_TOLERANCE};
use crate::radio::{cross_tier_interference, rate, LinkBudget};
use crate::scenario::{Scenario, StationKind};

/// Relative slack on the rate threshold when judging QoS.
pub const RATE_TOLERANCE: f64 = 1e-9;

/// Cost multiplier applied to FAP transmit power when choosing among otherwise equal
/// allocations. FAP power is not part of the operator's bill, but spending it for
/// nothing is still avoided.
pub const FAP_COST_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub station: usize,
    pub carrier: usize,
    pub power: f64,
}

/// On/off state of every small cell plus the carrier and power of every outdoor user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub kind: ScenarioKind,
    /// Per small cell.
    pub active: Vec<bool>,
    /// Per outdoor user, in user id order.
    pub assignments: Vec<Option<Assignment>>,
}

impl AllocationState {
    pub fn empty(scenario: &Scenario) -> Self {
        Self {
            kind: scenario.kind(),
            active: vec![false; scenario.num_small_cells()],
            assignments: vec![None; scenario.num_outdoor_users()],
        }
    }

    /// Transmit sum per station.
    pub fn station_tx(&self, n_stations: usize) -> Vec<f64> {
        let mut tx = vec![0.0; n_stations];
        for a in self.assignments.iter().flatten() {
            tx[a.station] += a.power;
        }
        tx
    }

    pub fn served(&self) -> usize {
        self.assignments.iter().flatten().count()
    }

    pub fn active_small_cells(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Switches on exactly the small cells that serve someone.
    pub fn normalize_activity(&mut self, scenario: &Scenario) {
        self.active.fill(false);
        for a in self.assignments.iter().flatten() {
            if let Some(cell) = scenario.small_cell_of(a.station) {
                self.active[cell] = true;
            }
        }
    }

    /// Achieved rate of every outdoor user in bit/s, zero when unserved.
    pub fn rates(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Vec<f64> {
        self.assignments
            .iter()
            .enumerate()
            .map(|(u, a)| match a {
                Some(a) => {
                    let link = crate::radio::outdoor_link(scenario, channel, u, a.station, a.carrier);
                    rate(a.power, &link)
                }
                None => 0.0,
            })
            .collect()
    }

    /// Checks every constraint of the operator problem.
    pub fn check(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Feasibility {
        let n_stations = scenario.stations.len();
        let tx = self.station_tx(n_stations);
        let budgets_ok = tx
            .iter()
            .enumerate()
            .all(|(s, used)| *used <= scenario.station_budget(s) * (1.0 + BUDGET_TOLERANCE) + 1e-15);

        let mut seen = std::collections::HashSet::new();
        let mut exclusive_ok = true;
        let mut slots_ok = true;
        let mut activity_ok = true;
        for a in self.assignments.iter().flatten() {
            exclusive_ok &= seen.insert((a.station, a.carrier));
            let st = &scenario.stations[a.station];
            slots_ok &= st.carriers.contains(&a.carrier) && a.power >= 0.0;
            match st.kind {
                StationKind::SmallCell { cell } => activity_ok &= self.active[cell],
                StationKind::Fap { .. } => {
                    slots_ok &= self.kind == ScenarioKind::MsfHybrid && !scenario.is_occupied(a.station, a.carrier);
                }
                StationKind::Macro => {}
            }
        }
        let rates = self.rates(scenario, channel);
        let threshold = scenario.config.rate_threshold * (1.0 - RATE_TOLERANCE);
        let qos_ok = rates.iter().all(|r| *r >= threshold);
        Feasibility {
            budgets_ok,
            qos_ok,
            exclusive_ok,
            slots_ok,
            activity_ok,
            all_served: self.served() == self.assignments.len(),
            rates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub budgets_ok: bool,
    pub qos_ok: bool,
    pub exclusive_ok: bool,
    pub slots_ok: bool,
    pub activity_ok: bool,
    pub all_served: bool,
    pub rates: Vec<f64>,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.budgets_ok && self.qos_ok && self.exclusive_ok && self.slots_ok && self.activity_ok && self.all_served
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub kind: ScenarioKind,
    pub feasible: bool,
    /// Operator network power in watts, macro site power included; infinite when infeasible.
    pub objective: f64,
    /// `objective` without the macro's constant site power.
    pub reported_objective: f64,
    pub allocation: Option<AllocationState>,
    /// Per outdoor user, bit/s.
    pub rates: Vec<f64>,
    pub active_small_cells: usize,
    pub served: usize,
    /// Dual function value per iteration, for solvers that have one.
    pub dual_trace: Vec<f64>,
    pub best_dual: Option<f64>,
    pub iterations: usize,
    pub operations: u64,
    pub wall_time_s: f64,
    /// Whether every dual value stayed below every feasible objective seen.
    pub weak_duality_ok: Option<bool>,
}

impl SolveReport {
    /// Report for an allocation; feasibility is re-derived from the constraints.
    pub fn from_allocation(
        solver: &str,
        scenario: &Scenario,
        channel: &ChannelMatrix,
        allocation: Option<AllocationState>,
    ) -> Result<Self> {
        let mut report = SolveReport {
            solver: solver.to_string(),
            kind: scenario.kind(),
            feasible: false,
            objective: f64::INFINITY,
            reported_objective: f64::INFINITY,
            allocation: None,
            rates: vec![0.0; scenario.num_outdoor_users()],
            active_small_cells: 0,
            served: 0,
            dual_trace: Vec::new(),
            best_dual: None,
            iterations: 0,
            operations: 0,
            wall_time_s: 0.0,
            weak_duality_ok: None,
        };
        if let Some(alloc) = allocation {
            let check = alloc.check(scenario, channel);
            report.feasible = check.feasible();
            report.rates = check.rates;
            report.served = alloc.served();
            report.active_small_cells = alloc.active_small_cells();
            if report.feasible {
                let breakdown = network_breakdown(&alloc, scenario)?;
                report.objective = breakdown.total;
                report.reported_objective = breakdown.reported(scenario);
            }
            report.allocation = Some(alloc);
        }
        Ok(report)
    }
}

/// One (station, carrier) resource an outdoor user may be given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub station: usize,
    pub carrier: usize,
    /// Watts of consumption per watt transmitted, as seen by the optimizer.
    /// FAP slots carry [`FAP_COST_WEIGHT`].
    pub weight: f64,
    /// Station transmit budget available to outdoor users.
    pub budget: f64,
    /// Small-cell index for small-cell slots.
    pub cell: Option<usize>,
    pub fap: bool,
}

/// Every candidate slot of the scenario with precomputed link quality per outdoor user.
#[derive(Debug, Clone)]
pub struct SlotTable {
    pub slots: Vec<Slot>,
    pub users: usize,
    /// `gain / (interference + noise)` indexed `user * slots + slot`.
    pub snr_per_watt: Vec<f64>,
    /// SNR needed to reach the rate threshold on one carrier.
    pub snr_target: f64,
    /// Carrier bandwidth in MHz, so rates come out in Mbit/s.
    pub bandwidth_mhz: f64,
    /// Rate threshold in Mbit/s.
    pub threshold_mbps: f64,
    /// Distinct stations in slot order, with their slot ranges.
    pub stations: Vec<(usize, std::ops::Range<usize>)>,
}

impl SlotTable {
    pub fn build(scenario: &Scenario, channel: &ChannelMatrix) -> Self {
        let cfg = &scenario.config;
        let power = &cfg.power;
        let mut slots = Vec::new();
        let mut stations = Vec::new();
        for st in &scenario.stations {
            let start = slots.len();
            let (weight, cell, carriers) = match st.kind {
                StationKind::Macro => (power.macro_cell.a, None, st.carriers.clone()),
                StationKind::SmallCell { cell } => (power.small_cell.a, Some(cell), st.carriers.clone()),
                StationKind::Fap { .. } => {
                    if scenario.kind() != ScenarioKind::MsfHybrid || scenario.station_budget(st.id) <= 0.0 {
                        continue;
                    }
                    (FAP_COST_WEIGHT, None, scenario.fap_free_carriers(st.id))
                }
            };
            let budget = scenario.station_budget(st.id);
            let fap = matches!(st.kind, StationKind::Fap { .. });
            slots.extend(carriers.into_iter().map(|carrier| Slot { station: st.id, carrier, weight, budget, cell, fap }));
            stations.push((st.id, start..slots.len()));
        }
        let users = scenario.num_outdoor_users();
        let bw = cfg.carrier_bandwidth();
        let mut interference = vec![0.0; users * cfg.total_carriers];
        for u in 0..users {
            for r in 0..cfg.total_carriers {
                interference[u * cfg.total_carriers + r] =
                    cfg.neighbor_interference + cross_tier_interference(scenario, channel, u, r);
            }
        }
        let mut snr_per_watt = Vec::with_capacity(users * slots.len());
        for u in 0..users {
            for s in &slots {
                let impairment = interference[u * cfg.total_carriers + s.carrier] + cfg.noise_power;
                snr_per_watt.push(channel.gain(u, s.station, s.carrier) / impairment);
            }
        }
        let unit = LinkBudget { gain: 1.0, interference: 0.0, noise: 1.0, carrier_bandwidth: bw };
        SlotTable {
            slots,
            users,
            snr_per_watt,
            snr_target: crate::radio::rate_floor_power(cfg.rate_threshold, &unit),
            bandwidth_mhz: bw / 1e6,
            threshold_mbps: cfg.rate_threshold / 1e6,
            stations,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    #[inline]
    pub fn snr(&self, user: usize, slot: usize) -> f64 {
        self.snr_per_watt[user * self.slots.len() + slot]
    }

    /// Power for `user` to hit the rate threshold on `slot`.
    #[inline]
    pub fn required_power(&self, user: usize, slot: usize) -> f64 {
        self.snr_target / self.snr(user, slot)
    }

    /// Rate in Mbit/s at power `p`.
    #[inline]
    pub fn rate_mbps(&self, user: usize, slot: usize, p: f64) -> f64 {
        self.bandwidth_mhz * (p * self.snr(user, slot)).ln_1p() / std::f64::consts::LN_2
    }

    /// Whether the slot's station is switched on under the small-cell mask.
    pub fn slot_available(&self, slot: usize, active: &[bool]) -> bool {
        self.slots[slot].cell.is_none_or(|c| active[c])
    }

    /// Columns available under the mask.
    pub fn available_slots(&self, active: &[bool]) -> Vec<usize> {
        (0..self.slots.len()).filter(|&k| self.slot_available(k, active)).collect()
    }
}

/// Minimum-power allocation that serves every user at exactly the rate threshold with
/// the given small cells switched on.
///
/// Powers are weighted by each station's consumption slope. When a station's budget is
/// exceeded, its most expensive link is forbidden and the matching is re-solved.
/// Returns `None` when no allocation serving everyone is found, along with the work done.
pub fn min_power_allocation(
    scenario: &Scenario,
    table: &SlotTable,
    active: &[bool],
) -> (Option<AllocationState>, u64) {
    let cols = table.available_slots(active);
    let users = table.users;
    let mut operations = 0u64;
    if users > cols.len() {
        return (None, operations);
    }
    let mut costs = CostMatrix::new(users, cols.len(), f64::INFINITY);
    for u in 0..users {
        for (j, &k) in cols.iter().enumerate() {
            let p = table.required_power(u, k);
            if p <= table.slots[k].budget {
                costs.set(u, j, table.slots[k].weight * p);
            }
        }
    }
    let n_stations = scenario.stations.len();
    for _ in 0..=4 * users {
        let matching = solve_partial(&costs);
        operations += matching.operations;
        if matching.matched() < users {
            return (None, operations);
        }
        let mut tx = vec![0.0; n_stations];
        for (u, j) in matching.row_to_col.iter().enumerate() {
            let k = cols[j.expect("all rows matched")];
            tx[table.slots[k].station] += table.required_power(u, k);
        }
        let over = (0..n_stations)
            .find(|&s| tx[s] > scenario.station_budget(s) * (1.0 + BUDGET_TOLERANCE) + 1e-15);
        let Some(station) = over else {
            let mut alloc = AllocationState::empty(scenario);
            for (u, j) in matching.row_to_col.iter().enumerate() {
                let k = cols[j.expect("all rows matched")];
                let slot = table.slots[k];
                alloc.assignments[u] =
                    Some(Assignment { station: slot.station, carrier: slot.carrier, power: table.required_power(u, k) });
            }
            alloc.normalize_activity(scenario);
            return (Some(alloc), operations);
        };
        let (u, j) = matching
            .row_to_col
            .iter()
            .enumerate()
            .map(|(u, j)| (u, j.unwrap()))
            .filter(|(_, j)| table.slots[cols[*j]].station == station)
            .max_by(|a, b| {
                table.required_power(a.0, cols[a.1]).total_cmp(&table.required_power(b.0, cols[b.1]))
            })
            .expect("overloaded station serves someone");
        costs.set(u, j, f64::INFINITY);
    }
    (None, operations)
}

/// Operator power plus FAP transmit power at [`FAP_COST_WEIGHT`]: the quantity the
/// solvers actually minimize.
pub fn weighted_objective(scenario: &Scenario, alloc: &AllocationState) -> Result<f64> {
    let total = network_breakdown(alloc, scenario)?.total;
    let fap_tx: f64 = alloc
        .assignments
        .iter()
        .flatten()
        .filter(|a| matches!(scenario.stations[a.station].kind, StationKind::Fap { .. }))
        .map(|a| a.power)
        .sum();
    Ok(total + FAP_COST_WEIGHT * fap_tx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel, ChannelParams};
    use crate::config::{GeometrySpec, NetworkConfig, RenewableParams};
    use crate::power::{excess_renewable, network_power};
    use crate::scenario::generate;

    fn scenario(renewable: f64) -> (Scenario, ChannelMatrix) {
        let cfg = NetworkConfig {
            num_outdoor_users: 15,
            renewable: RenewableParams { mean: renewable, std_dev: 0.0 },
            ..Default::default()
        };
        let s = generate(&cfg, &GeometrySpec::default()).unwrap();
        let ch = build_channel(&s, &ChannelParams::default()).unwrap();
        (s, ch)
    }

    fn one_cell_full_load(s: &Scenario) -> AllocationState {
        let mut alloc = AllocationState::empty(s);
        let station = s.small_cell_station(0);
        for (u, carrier) in (30..45).enumerate() {
            alloc.assignments[u] = Some(Assignment { station, carrier, power: 2.0 / 15.0 });
        }
        alloc.active[0] = true;
        alloc
    }

    #[test]
    fn network_power_examples() {
        let (s, _) = scenario(50.0);
        let idle = AllocationState::empty(&s);
        assert!((network_power(&idle, &s).unwrap() - 147.2).abs() < 1e-9);
        let breakdown = network_breakdown(&idle, &s).unwrap();
        assert!((breakdown.reported(&s) - 17.2).abs() < 1e-9);
        let loaded = one_cell_full_load(&s);
        assert!((network_power(&loaded, &s).unwrap() - 157.7).abs() < 1e-9);
    }

    #[test]
    fn network_power_ignores_carrier_labels() {
        let (s, _) = scenario(50.0);
        let a = one_cell_full_load(&s);
        let mut b = a.clone();
        for (i, x) in b.assignments.iter_mut().flatten().enumerate() {
            x.carrier = 44 - i;
        }
        assert_eq!(network_power(&a, &s).unwrap(), network_power(&b, &s).unwrap());
    }

    #[test]
    fn over_budget_is_flagged() {
        let (s, _) = scenario(50.0);
        let mut alloc = one_cell_full_load(&s);
        alloc.assignments[0].as_mut().unwrap().power = 1.0;
        assert!(network_power(&alloc, &s).is_err());
    }

    #[test]
    fn excess_renewable_examples() {
        for (harvest, expected) in [(50.0, 35.2), (10.0, 0.0), (0.0, 0.0)] {
            let (s, _) = scenario(harvest);
            let ledger = excess_renewable(&s, &one_cell_full_load(&s), 1.0).unwrap();
            assert!((ledger.excess[0] - expected).abs() < 1e-9, "{harvest}: {}", ledger.excess[0]);
            assert!(ledger.excess.iter().all(|q| *q >= 0.0));
        }
    }

    #[test]
    fn min_power_allocation_is_feasible() {
        let (s, ch) = scenario(50.0);
        let table = SlotTable::build(&s, &ch);
        let (alloc, _) = min_power_allocation(&s, &table, &[true; 4]);
        let alloc = alloc.unwrap();
        let check = alloc.check(&s, &ch);
        assert!(check.feasible(), "{check:?}");
        let off = min_power_allocation(&s, &table, &[false; 4]).0.unwrap();
        assert_eq!(off.active_small_cells(), 0);
        assert!(off.check(&s, &ch).feasible());
    }

    #[test]
    fn unserved_user_is_infeasible() {
        let (s, ch) = scenario(50.0);
        let table = SlotTable::build(&s, &ch);
        let mut alloc = min_power_allocation(&s, &table, &[true; 4]).0.unwrap();
        alloc.assignments[3] = None;
        let check = alloc.check(&s, &ch);
        assert!(!check.feasible());
        assert!(!check.all_served);
    }
}
