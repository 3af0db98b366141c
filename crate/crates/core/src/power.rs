//! Base-station power consumption: EARTH model, its linear approximation, sleep mode
//! and renewable energy bookkeeping.

use serde::{Deserialize, Serialize};

use crate::alloc::AllocationState;
use crate::error::{HetNetError, Result};
use crate::scenario::{Scenario, StationKind};

/// Relative slack allowed when comparing a transmit sum against its budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Component-level parameters of the EARTH consumption model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthDetail {
    pub eta_pa: f64,
    pub sigma_feed: f64,
    pub p_rf: f64,
    pub p_bb: f64,
    pub sigma_dc: f64,
    pub sigma_ms: f64,
    pub sigma_cool: f64,
}

impl EarthDetail {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_feed, self.sigma_dc, self.sigma_ms, self.sigma_cool];
        if sigmas.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(HetNetError::InvalidArgument("loss factors must lie in [0, 1)".into()));
        }
        if !(self.eta_pa > 0.0) || self.p_rf < 0.0 || self.p_bb < 0.0 {
            return Err(HetNetError::InvalidArgument(
                "eta_pa must be positive and RF/baseband power nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Slope and offset of the linear model equivalent to this detail.
    ///
    /// The EARTH expression is affine in the transmit power, so two evaluations pin it.
    pub fn fit_linear(&self) -> Result<(f64, f64)> {
        let b = consumption_earth(0.0, self)?;
        let a = consumption_earth(1.0, self)? - b;
        Ok((a, b))
    }
}

/// Linear consumption model `a * P_tx + b` with a sleep floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub a: f64,
    /// Watts consumed by an active station independent of load.
    pub b: f64,
    pub p_sleep: f64,
    /// Transmit power budget in watts.
    pub p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earth_detail: Option<EarthDetail>,
}

impl PowerParams {
    pub fn linear(a: f64, b: f64, p_sleep: f64, p_max: f64) -> Self {
        Self { a, b, p_sleep, p_max, earth_detail: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(HetNetError::InvalidArgument("slope a must be positive".into()));
        }
        if !(self.p_sleep >= 0.0 && self.b >= self.p_sleep) {
            return Err(HetNetError::InvalidArgument("require b >= p_sleep >= 0".into()));
        }
        if !(self.p_max > 0.0) {
            return Err(HetNetError::InvalidArgument("p_max must be positive".into()));
        }
        if let Some(detail) = &self.earth_detail {
            detail.validate()?;
        }
        Ok(())
    }

    /// Consumption of an active station, no sleep branch.
    pub fn active(&self, p_tx: f64) -> f64 {
        self.a * p_tx + self.b
    }
}

/// Linear-model consumption of one station transmitting `p_tx` watts in total.
pub fn consumption_linear(p_tx: f64, params: &PowerParams) -> Result<f64> {
    if !(p_tx >= 0.0) {
        return Err(HetNetError::InvalidArgument(format!("negative transmit power {p_tx}")));
    }
    if p_tx > params.p_max * (1.0 + BUDGET_TOLERANCE) {
        return Err(HetNetError::InvalidArgument(format!(
            "transmit power {p_tx} W exceeds p_max {} W",
            params.p_max
        )));
    }
    Ok(if p_tx > 0.0 { params.active(p_tx) } else { params.p_sleep })
}

/// Full EARTH consumption model.
pub fn consumption_earth(p_tx: f64, detail: &EarthDetail) -> Result<f64> {
    detail.validate()?;
    if !(p_tx >= 0.0) {
        return Err(HetNetError::InvalidArgument(format!("negative transmit power {p_tx}")));
    }
    let radiated = p_tx / (detail.eta_pa * (1.0 - detail.sigma_feed));
    let losses = (1.0 - detail.sigma_dc) * (1.0 - detail.sigma_ms) * (1.0 - detail.sigma_cool);
    Ok((radiated + detail.p_rf + detail.p_bb) / losses)
}

/// Per-station consumption breakdown of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub macro_tx: f64,
    pub macro_consumption: f64,
    /// Transmit sum per small cell.
    pub small_tx: Vec<f64>,
    /// Consumption per small cell: active model when switched on, sleep power otherwise.
    pub small_consumption: Vec<f64>,
    /// Operator network total, macro offset included.
    pub total: f64,
}

impl PowerBreakdown {
    /// Total with the macro's constant site power removed, the convention used for plots.
    pub fn reported(&self, scenario: &Scenario) -> f64 {
        self.total - scenario.config.power.macro_cell.b
    }
}

/// Detailed operator network consumption. FAP consumption is not part of it.
pub fn network_breakdown(alloc: &AllocationState, scenario: &Scenario) -> Result<PowerBreakdown> {
    let tx = alloc.station_tx(scenario.stations.len());
    for (sid, used) in tx.iter().enumerate() {
        let budget = scenario.station_budget(sid);
        if *used > budget * (1.0 + BUDGET_TOLERANCE) + 1e-15 {
            return Err(HetNetError::BudgetExceeded { station: sid, used: *used, budget });
        }
    }
    let power = &scenario.config.power;
    let macro_tx = tx[scenario.macro_station()];
    let macro_consumption = power.macro_cell.active(macro_tx);
    let mut small_tx = Vec::with_capacity(scenario.num_small_cells());
    let mut small_consumption = Vec::with_capacity(scenario.num_small_cells());
    for cell in 0..scenario.num_small_cells() {
        let sid = scenario.small_cell_station(cell);
        let p = tx[sid];
        if !alloc.active[cell] && p > 0.0 {
            return Err(HetNetError::Infeasible(format!("sleeping small cell {cell} transmits {p} W")));
        }
        small_tx.push(p);
        small_consumption.push(if alloc.active[cell] {
            power.small_cell.active(p)
        } else {
            power.small_cell.p_sleep
        });
    }
    let total = macro_consumption + small_consumption.iter().sum::<f64>();
    Ok(PowerBreakdown { macro_tx, macro_consumption, small_tx, small_consumption, total })
}

/// Total operator power of an allocation: active small cells at `a P + b`, sleeping
/// ones at their sleep power, plus the always-on macro.
pub fn network_power(alloc: &AllocationState, scenario: &Scenario) -> Result<f64> {
    network_breakdown(alloc, scenario).map(|b| b.total)
}

/// Renewable energy accounting for each small cell over one operating interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub dt: f64,
    /// Harvested energy per small cell, joules.
    pub harvested: Vec<f64>,
    /// Consumed energy per small cell, joules.
    pub consumed: Vec<f64>,
    /// Energy left after the small cell's own consumption, joules.
    pub excess: Vec<f64>,
}

pub fn excess_renewable(scenario: &Scenario, alloc: &AllocationState, dt: f64) -> Result<EnergyLedger> {
    let breakdown = network_breakdown(alloc, scenario)?;
    let consumed: Vec<f64> = breakdown.small_consumption.iter().map(|p| p * dt).collect();
    let excess = scenario
        .renewable
        .iter()
        .zip(&consumed)
        .map(|(q, e)| (q - e).max(0.0))
        .collect();
    Ok(EnergyLedger { dt, harvested: scenario.renewable.clone(), consumed, excess })
}

/// Consumption of every FAP, split into the part due to registered users and the part
/// due to hosted outdoor users. Indexed by FAP station id offset (`fap_ordinal`).
#[derive(Debug, Clone, PartialEq)]
pub struct FapLoad {
    pub station: usize,
    pub cell: usize,
    pub registered_tx: f64,
    pub hosted_tx: f64,
    pub hosted_users: usize,
}

pub fn fap_loads(scenario: &Scenario, alloc: &AllocationState) -> Vec<FapLoad> {
    let tx = alloc.station_tx(scenario.stations.len());
    let mut hosted = vec![0usize; scenario.stations.len()];
    for a in alloc.assignments.iter().flatten() {
        hosted[a.station] += 1;
    }
    scenario
        .stations
        .iter()
        .filter_map(|st| match st.kind {
            StationKind::Fap { cell, .. } => Some(FapLoad {
                station: st.id,
                cell,
                registered_tx: scenario.fap_committed_power(st.id),
                hosted_tx: tx[st.id],
                hosted_users: hosted[st.id],
            }),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PowerParams {
        PowerParams::linear(4.0, 6.8, 4.3, 2.0)
    }

    fn macro_cell() -> PowerParams {
        PowerParams::linear(4.7, 130.0, 75.0, 20.0)
    }

    #[test]
    fn linear_model_examples() {
        assert!((consumption_linear(2.0, &small()).unwrap() - 14.8).abs() < 1e-12);
        assert_eq!(consumption_linear(0.0, &small()).unwrap(), 4.3);
        assert!((consumption_linear(20.0, &macro_cell()).unwrap() - 224.0).abs() < 1e-12);
    }

    #[test]
    fn linear_model_rejects_out_of_range() {
        assert!(consumption_linear(2.5, &small()).is_err());
        assert!(consumption_linear(-0.1, &small()).is_err());
    }

    #[test]
    fn sleep_saves_at_least_offset_gap() {
        let p = small();
        let just_above = consumption_linear(1e-12, &p).unwrap();
        assert!(just_above > p.b - 1e-9);
        assert!(just_above - consumption_linear(0.0, &p).unwrap() >= p.b - p.p_sleep - 1e-9);
    }

    fn identity_detail() -> EarthDetail {
        EarthDetail {
            eta_pa: 1.0,
            sigma_feed: 0.0,
            p_rf: 0.0,
            p_bb: 0.0,
            sigma_dc: 0.0,
            sigma_ms: 0.0,
            sigma_cool: 0.0,
        }
    }

    #[test]
    fn earth_model_examples() {
        assert!((consumption_earth(5.0, &identity_detail()).unwrap() - 5.0).abs() < 1e-12);
        let half = EarthDetail { eta_pa: 0.5, ..identity_detail() };
        assert!((consumption_earth(5.0, &half).unwrap() - 10.0).abs() < 1e-12);
        let bad = EarthDetail { sigma_cool: 1.0, ..identity_detail() };
        assert!(consumption_earth(1.0, &bad).is_err());
    }

    #[test]
    fn fitted_linear_model_reproduces_earth() {
        let detail = EarthDetail {
            eta_pa: 0.311,
            sigma_feed: 0.5,
            p_rf: 12.9,
            p_bb: 29.6,
            sigma_dc: 0.075,
            sigma_ms: 0.09,
            sigma_cool: 0.1,
        };
        let (a, b) = detail.fit_linear().unwrap();
        for p in [0.0, 0.3, 1.0, 7.5, 20.0] {
            let earth = consumption_earth(p, &detail).unwrap();
            assert!((a * p + b - earth).abs() < 1e-9 * earth.max(1.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn linear_model_is_monotone(p in 1e-9f64..2.0, dp in 0.0f64..1.0) {
            let params = small();
            let q = (p + dp).min(params.p_max);
            proptest::prop_assert!(
                consumption_linear(q, &params).unwrap() >= consumption_linear(p, &params).unwrap()
            );
        }
    }
}
