//! Brute-force references for small instances. Nothing here goes through the solvers'
//! slot tables or assignment code; only the rate and consumption formulas are shared.

use std::f64::consts::LN_2;

use rand::Rng;

use crate::alloc::{AllocationState, Assignment, SolveReport, FAP_COST_WEIGHT};
use crate::channel::{build_channel, ChannelMatrix, ChannelParams};
use crate::config::{GeometrySpec, NetworkConfig, ScenarioKind, SimConfig};
use crate::error::{HetNetError, Result};
use crate::radio::{outdoor_link, rate, required_power};
use crate::scenario::{assign_fap_load, generate, seeded_rng, Scenario, StationKind};

/// Limit on (on/off pattern, partial assignment) states one search may visit.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Resource a user can be put on, with what it costs the operator per watt.
#[derive(Debug, Clone, Copy)]
struct Resource {
    station: usize,
    carrier: usize,
    /// Small cell that must be on for this resource to exist.
    cell: Option<usize>,
    per_watt: f64,
}

fn resources(scenario: &Scenario, fap_weight: f64) -> Vec<Resource> {
    let power = &scenario.config.power;
    let mut out = Vec::new();
    for st in &scenario.stations {
        match st.kind {
            StationKind::Macro => out.extend(st.carriers.iter().map(|&carrier| Resource {
                station: st.id,
                carrier,
                cell: None,
                per_watt: power.macro_cell.a,
            })),
            StationKind::SmallCell { cell } => out.extend(st.carriers.iter().map(|&carrier| Resource {
                station: st.id,
                carrier,
                cell: Some(cell),
                per_watt: power.small_cell.a,
            })),
            StationKind::Fap { .. } => {
                if scenario.kind() == ScenarioKind::MsfHybrid && scenario.station_budget(st.id) > 0.0 {
                    out.extend(
                        st.carriers
                            .iter()
                            .filter(|&&r| !scenario.is_occupied(st.id, r))
                            .map(|&carrier| Resource { station: st.id, carrier, cell: None, per_watt: fap_weight }),
                    );
                }
            }
        }
    }
    out
}

fn fixed_cost(scenario: &Scenario, active: &[bool]) -> f64 {
    let power = &scenario.config.power;
    power.macro_cell.b
        + active.iter().map(|&on| if on { power.small_cell.b } else { power.small_cell.p_sleep }).sum::<f64>()
}

struct Search<'a> {
    scenario: &'a Scenario,
    res: &'a [Resource],
    /// Minimal power per (user, resource), infinite if over the station budget.
    need: Vec<f64>,
    visited: u64,
    used: Vec<bool>,
    spent: Vec<f64>,
    choice: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn run(&mut self, user: usize, cost: f64, active: &[bool]) -> Result<()> {
        self.visited += 1;
        if self.visited > ENUMERATION_LIMIT {
            return Err(HetNetError::InvalidArgument("instance too large for exhaustive search".into()));
        }
        if self.best.as_ref().is_some_and(|(b, _)| cost >= *b) {
            return Ok(());
        }
        let users = self.choice.len();
        if user == users {
            self.best = Some((cost, self.choice.clone()));
            return Ok(());
        }
        let n = self.res.len();
        for k in 0..n {
            let r = self.res[k];
            if self.used[k] || r.cell.is_some_and(|c| !active[c]) {
                continue;
            }
            let p = self.need[user * n + k];
            if !p.is_finite() || self.spent[r.station] + p > self.scenario.station_budget(r.station) * (1.0 + 1e-9) {
                continue;
            }
            self.used[k] = true;
            self.spent[r.station] += p;
            self.choice[user] = k;
            self.run(user + 1, cost + r.per_watt * p, active)?;
            self.spent[r.station] -= p;
            self.used[k] = false;
        }
        Ok(())
    }
}

/// Exact minimum network power over every on/off pattern and every injective
/// placement of users on resources, each link at the least power meeting the rate
/// threshold. FAP power is counted at `fap_weight` per watt.
pub fn exhaustive_optimum_weighted(scenario: &Scenario, channel: &ChannelMatrix, fap_weight: f64) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let res = resources(scenario, fap_weight);
    let users = scenario.num_outdoor_users();
    let cells = scenario.num_small_cells();
    let r0 = scenario.config.rate_threshold;
    let mut need = Vec::with_capacity(users * res.len());
    for u in 0..users {
        for r in &res {
            let p = required_power(r0, &outdoor_link(scenario, channel, u, r.station, r.carrier))?;
            need.push(if p <= scenario.station_budget(r.station) { p } else { f64::INFINITY });
        }
    }
    let mut best: Option<(f64, Vec<bool>, Vec<usize>)> = None;
    let mut visited = 0;
    for mask in 0..(1u64 << cells) {
        let active: Vec<bool> = (0..cells).map(|i| mask & (1 << i) != 0).collect();
        let mut search = Search {
            scenario,
            res: &res,
            need: need.clone(),
            visited,
            used: vec![false; res.len()],
            spent: vec![0.0; scenario.stations.len()],
            choice: vec![usize::MAX; users],
            best: best.as_ref().map(|(b, _, c)| (*b, c.clone())),
        };
        let before = search.best.as_ref().map(|(b, _)| *b);
        search.run(0, fixed_cost(scenario, &active), &active)?;
        visited = search.visited;
        if let Some((value, choice)) = search.best {
            if before.is_none_or(|b| value < b) {
                best = Some((value, active, choice));
            }
        }
    }
    let allocation = best.map(|(_, active, choice)| {
        let mut alloc = AllocationState::empty(scenario);
        alloc.active = active;
        for (u, &k) in choice.iter().enumerate() {
            let r = res[k];
            alloc.assignments[u] =
                Some(Assignment { station: r.station, carrier: r.carrier, power: need[u * res.len() + k] });
        }
        alloc
    });
    let mut report = SolveReport::from_allocation("exhaustive", scenario, channel, allocation)?;
    report.operations = visited;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Exact minimum operator network power; see [`exhaustive_optimum_weighted`].
pub fn exhaustive_optimum(scenario: &Scenario, channel: &ChannelMatrix) -> Result<SolveReport> {
    exhaustive_optimum_weighted(scenario, channel, 0.0)
}

/// Exhaustive minimum of the Lagrangian over on/off patterns and injective placements,
/// each link at its unconstrained-minimizer power capped at the station budget.
/// Multipliers use watts and Mbit/s, `lambda` per station id and `mu` per outdoor user.
pub fn exhaustive_lagrangian(scenario: &Scenario, channel: &ChannelMatrix, lambda: &[f64], mu: &[f64]) -> Result<f64> {
    let res = resources(scenario, FAP_COST_WEIGHT);
    let cfg = &scenario.config;
    let users = scenario.num_outdoor_users();
    let cells = scenario.num_small_cells();
    let bw_mhz = cfg.carrier_bandwidth() / 1e6;
    let mut term = vec![0.0; users * res.len()];
    for u in 0..users {
        for (k, r) in res.iter().enumerate() {
            let link = outdoor_link(scenario, channel, u, r.station, r.carrier);
            let price = r.per_watt + lambda[r.station];
            let level = if price > 0.0 { mu[u] * bw_mhz / (LN_2 * price) } else { f64::INFINITY };
            let p = (level - link.impairment() / link.gain).max(0.0).min(scenario.station_budget(r.station));
            let p = if mu[u] > 0.0 { p } else { 0.0 };
            term[u * res.len() + k] = price * p - mu[u] * rate(p, &link) / 1e6;
        }
    }
    let mut stations: Vec<usize> = res.iter().map(|r| r.station).collect();
    stations.dedup();
    let constant = -stations.iter().map(|&s| lambda[s] * scenario.station_budget(s)).sum::<f64>()
        + mu.iter().sum::<f64>() * cfg.rate_threshold / 1e6;

    fn place(term: &[f64], res: &[Resource], active: &[bool], user: usize, used: &mut Vec<bool>, users: usize) -> f64 {
        if user == users {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for k in 0..res.len() {
            if used[k] || res[k].cell.is_some_and(|c| !active[c]) {
                continue;
            }
            used[k] = true;
            best = best.min(term[user * res.len() + k] + place(term, res, active, user + 1, used, users));
            used[k] = false;
        }
        best
    }
    let mut best = f64::INFINITY;
    for mask in 0..(1u64 << cells) {
        let active: Vec<bool> = (0..cells).map(|i| mask & (1 << i) != 0).collect();
        let value = fixed_cost(scenario, &active)
            + place(&term, &res, &active, 0, &mut vec![false; res.len()], users)
            + constant;
        best = best.min(value);
    }
    Ok(best)
}

/// Grid minimizer of `price * p - mu * rate(p)` over `[0, p_max]` with step `resolution`.
/// Rate is in the units of `bandwidth`; `snr_per_watt` is `h / (I + N0)`.
pub fn grid_minimize_d(price: f64, mu: f64, bandwidth: f64, snr_per_watt: f64, p_max: f64, resolution: f64) -> f64 {
    let steps = (p_max / resolution).round() as u64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let p = (i as f64 * resolution).min(p_max);
        let d = price * p - mu * bandwidth * (p * snr_per_watt).ln_1p() / LN_2;
        if d < best.0 {
            best = (d, p);
        }
    }
    best.1
}

/// A seeded desk-scale instance: at most four users, two small cells and eight carriers,
/// sized so the exhaustive search stays cheap. Some seeds add one FAP per small cell.
pub fn tiny_instance(seed: u64) -> Result<(Scenario, ChannelMatrix)> {
    let mut rng = seeded_rng(seed, 0x7117);
    let macro_carriers = rng.random_range(1..=3);
    let small_carriers = rng.random_range(2..=8 - macro_carriers);
    let users = rng.random_range(1..=4);
    let cells = rng.random_range(1..=2);
    let kind = ScenarioKind::ALL[rng.random_range(0..3)];
    let with_faps = kind != ScenarioKind::Ms;
    let rate_threshold = [0.5e6, 1.0e6, 2.0e6][rng.random_range(0..3)];
    let total = macro_carriers + small_carriers;
    let mut cfg = SimConfig::default();
    cfg.network = NetworkConfig {
        num_small_cells: cells,
        num_faps_per_cell: usize::from(with_faps),
        num_outdoor_users: users,
        indoor_users_per_fap: usize::from(with_faps),
        total_carriers: total,
        macro_carriers,
        smallcell_carriers: small_carriers,
        total_bandwidth: 200e3 * total as f64,
        rate_threshold,
        scenario_kind: kind,
        rng_seed: seed,
        ..cfg.network
    };
    cfg.geometry = GeometrySpec::default();
    let scenario = generate(&cfg.network, &cfg.geometry)?;
    let channel = build_channel(&scenario, &ChannelParams::default())?;
    let scenario = if with_faps { assign_fap_load(&scenario, &channel, cfg.network.fap_policy)? } else { scenario };
    Ok((scenario, channel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{inner_minimize, initial_multipliers, optimal_carrier_power, DualOptions, Multipliers};
    use crate::alloc::SlotTable;

    fn hand_instance(users: usize, macro_carriers: usize, small_carriers: usize) -> (Scenario, ChannelMatrix) {
        let total = macro_carriers + small_carriers;
        let cfg = NetworkConfig {
            num_small_cells: 1,
            num_faps_per_cell: 0,
            num_outdoor_users: users,
            indoor_users_per_fap: 0,
            total_carriers: total,
            macro_carriers,
            smallcell_carriers: small_carriers,
            total_bandwidth: 200e3 * total as f64,
            ..Default::default()
        };
        let s = generate(&cfg, &GeometrySpec::default()).unwrap();
        let ch = build_channel(&s, &ChannelParams::default()).unwrap();
        (s, ch)
    }

    #[test]
    fn single_user_single_carrier() {
        let (s, mut ch) = hand_instance(1, 1, 1);
        ch.gains.fill(1e-12);
        ch.set_gain(0, 0, 0, 1e-8);
        let r = exhaustive_optimum(&s, &ch).unwrap();
        assert!(r.feasible);
        assert_eq!(r.active_small_cells, 0);
        let a = r.allocation.unwrap().assignments[0].unwrap();
        assert_eq!((a.station, a.carrier), (0, 0));
        let expected = required_power(s.config.rate_threshold, &outdoor_link(&s, &ch, 0, 0, 0)).unwrap();
        assert!((a.power - expected).abs() < 1e-18);
    }

    #[test]
    fn expensive_small_cell_stays_off() {
        let (mut s, mut ch) = hand_instance(2, 2, 2);
        ch.gains.fill(1e-10);
        s.config.power.small_cell.b = 1e3;
        let r = exhaustive_optimum(&s, &ch).unwrap();
        assert!(r.feasible);
        assert_eq!(r.allocation.unwrap().active, vec![false]);
    }

    #[test]
    fn grid_agrees_with_closed_form() {
        let (price, mu, bw, snr, pmax) = (4.7, 2.0, 0.2, 40.0, 1.0);
        let res = pmax / 1e5;
        let closed = optimal_carrier_power(mu, price, bw, 1.0 / snr).min(pmax);
        let grid = grid_minimize_d(price, mu, bw, snr, pmax, res);
        assert!((closed - grid).abs() <= res);
        assert_eq!(grid_minimize_d(price, 0.0, bw, snr, pmax, res), 0.0);
    }

    #[test]
    fn sampled_term_is_convex() {
        let (price, mu, bw, snr) = (4.0, 1.5, 0.2, 25.0);
        let d = |p: f64| price * p - mu * bw * (p * snr).ln_1p() / LN_2;
        let h = 1e-3;
        for i in 1..1000 {
            let p = i as f64 * h;
            assert!(d(p + h) - 2.0 * d(p) + d(p - h) >= -1e-12);
        }
    }

    #[test]
    fn inner_minimum_matches_exhaustive_lagrangian() {
        let opts = DualOptions::default();
        for seed in 0..12 {
            let (s, ch) = tiny_instance(seed).unwrap();
            let table = SlotTable::build(&s, &ch);
            if table.users > table.len() {
                continue;
            }
            let base = initial_multipliers(&s, &table);
            let mut rng = seeded_rng(seed, 99);
            let m = Multipliers {
                lambda: base.lambda.iter().map(|_| rng.random_range(0.0..2.0)).collect(),
                mu: base.mu.iter().map(|x| x * rng.random_range(0.5..3.0)).collect(),
                iteration: 1,
            };
            let inner = inner_minimize(&s, &table, &m, &opts).unwrap();
            let oracle = exhaustive_lagrangian(&s, &ch, &m.lambda, &m.mu).unwrap();
            assert!((inner.value - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "seed {seed}: {} vs {oracle}", inner.value);
        }
    }

    #[test]
    fn tiny_instances_stay_within_limits() {
        for seed in 0..50 {
            let (s, _) = tiny_instance(seed).unwrap();
            assert!(s.num_outdoor_users() <= 4);
            assert!(s.num_small_cells() <= 2);
            assert!(s.config.total_carriers <= 8);
        }
    }
}
