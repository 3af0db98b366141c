//! Operator and FAP-owner economics when FAPs host outdoor users: profits with and
//! without cooperation, and the offloading/renewable price pair that keeps every FAP
//! owner whole at minimum operator payout.

use serde::{Deserialize, Serialize};

use crate::alloc::AllocationState;
use crate::error::{HetNetError, Result};
use crate::power::{excess_renewable, fap_loads};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingParams {
    /// Fixed revenue a FAP owner earns from its registered users, money units.
    pub revenue: f64,
    /// Price of grid energy, money units per joule.
    pub fossil_price: f64,
    /// Length of the operating interval, seconds.
    pub dt: f64,
}

impl Default for PricingParams {
    fn default() -> Self {
        Self { revenue: 10.0, fossil_price: 0.5, dt: 1.0 }
    }
}

/// Pricing inputs of the FAPs under one small cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopCell {
    /// Renewable energy the small cell has left over, joules.
    pub excess: f64,
    /// FAP carriers used by hosted outdoor users.
    pub offloaded: f64,
    /// FAP energy when serving registered users only, joules.
    pub energy_closed: f64,
    /// FAP energy with the hosted users added, joules.
    pub energy_coop: f64,
}

impl CoopCell {
    /// Cell whose FAP energy is the same with and without hosting.
    pub fn flat(excess: f64, offloaded: f64, energy: f64) -> Self {
        Self { excess, offloaded, energy_closed: energy, energy_coop: energy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopInputs {
    pub cells: Vec<CoopCell>,
    pub revenue: f64,
    pub fossil_price: f64,
}

impl CoopInputs {
    pub fn validate(&self) -> Result<()> {
        let ok = self.revenue >= 0.0
            && self.fossil_price >= 0.0
            && self.cells.iter().all(|c| {
                c.excess >= 0.0 && c.offloaded >= 0.0 && c.energy_closed >= 0.0 && c.energy_coop >= 0.0
            });
        if ok {
            Ok(())
        } else {
            Err(HetNetError::InvalidArgument("pricing inputs must be nonnegative".into()))
        }
    }

    /// Inputs of cell `i` alone.
    pub fn single(&self, i: usize) -> CoopInputs {
        CoopInputs { cells: vec![self.cells[i]], revenue: self.revenue, fossil_price: self.fossil_price }
    }

    /// Upper limit on the offloading price searched by the solver.
    pub fn price_cap(&self) -> f64 {
        let max_energy = self.cells.iter().map(|c| c.energy_coop.max(c.energy_closed)).fold(0.0, f64::max);
        let cap = 10.0 * self.fossil_price * max_energy;
        if cap > 0.0 { cap } else { 1.0 }
    }

    /// Right-hand side of cell `i`'s break-even constraint
    /// `offloaded * p_r - excess * c_re >= threshold`.
    fn break_even(&self, i: usize) -> f64 {
        let c = &self.cells[i];
        self.fossil_price * ((c.energy_coop - c.excess).max(0.0) - c.energy_closed)
    }
}

/// FAP owner's profit when it serves only its registered users.
pub fn profit_uncooperative(inputs: &CoopInputs, i: usize) -> f64 {
    inputs.revenue - inputs.fossil_price * inputs.cells[i].energy_closed
}

/// FAP owner's profit when it hosts outdoor users for `offloading_price` per carrier and
/// buys the operator's surplus renewable energy at `renewable_price`.
pub fn profit_cooperative(inputs: &CoopInputs, i: usize, offloading_price: f64, renewable_price: f64) -> f64 {
    let c = &inputs.cells[i];
    inputs.revenue - renewable_price * c.excess + offloading_price * c.offloaded
        - inputs.fossil_price * (c.energy_coop - c.excess).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopAgreement {
    pub offloading_price: f64,
    pub renewable_price: f64,
    pub uncooperative: Vec<f64>,
    pub cooperative: Vec<f64>,
    /// Renewable energy revenue the operator collects per cell.
    pub renewable_payments: Vec<f64>,
    /// Total offloading payment by the operator.
    pub payout: f64,
}

impl CoopAgreement {
    pub fn satisfies(&self, inputs: &CoopInputs, tol: f64) -> bool {
        self.renewable_price <= inputs.fossil_price + tol
            && self.renewable_price >= -tol
            && self.offloading_price >= -tol
            && self.cooperative.iter().zip(&self.uncooperative).all(|(c, u)| *c >= *u - tol)
    }
}

fn agreement(inputs: &CoopInputs, offloading_price: f64, renewable_price: f64) -> CoopAgreement {
    let n = inputs.cells.len();
    CoopAgreement {
        offloading_price,
        renewable_price,
        uncooperative: (0..n).map(|i| profit_uncooperative(inputs, i)).collect(),
        cooperative: (0..n).map(|i| profit_cooperative(inputs, i, offloading_price, renewable_price)).collect(),
        renewable_payments: inputs.cells.iter().map(|c| renewable_price * c.excess).collect(),
        payout: offloading_price * inputs.cells.iter().map(|c| c.offloaded).sum::<f64>(),
    }
}

/// Minimizes the operator's offloading payout subject to every FAP owner earning at
/// least its closed-access profit and the renewable price staying at or below the
/// fossil price.
///
/// The feasible region only tightens as the renewable price grows, so the smallest
/// offloading price is attained at a zero renewable price. Among payout-optimal
/// points, the highest renewable price is returned: surplus energy is sold for as
/// much as the owners can bear without losing.
pub fn solve_pricing(inputs: &CoopInputs) -> Result<CoopAgreement> {
    inputs.validate()?;
    let cap = inputs.price_cap();
    let mut price = 0.0f64;
    for (i, c) in inputs.cells.iter().enumerate() {
        let need = inputs.break_even(i);
        if c.offloaded > 0.0 {
            price = price.max(need / c.offloaded);
        } else if need > 0.0 {
            return Err(HetNetError::Infeasible(format!(
                "cell {i} loses money without hosting anyone; no price compensates it"
            )));
        }
    }
    if price > cap {
        return Err(HetNetError::Infeasible(format!("offloading price {price} above cap {cap}")));
    }
    let mut renewable = inputs.fossil_price;
    for (i, c) in inputs.cells.iter().enumerate() {
        if c.excess > 0.0 {
            let slack = c.offloaded * price - inputs.break_even(i);
            renewable = renewable.min((slack / c.excess).max(0.0));
        }
    }
    Ok(agreement(inputs, price, renewable))
}

/// Solves every cell's pricing problem on its own.
pub fn solve_pricing_per_cell(inputs: &CoopInputs) -> Result<Vec<CoopAgreement>> {
    (0..inputs.cells.len()).map(|i| solve_pricing(&inputs.single(i))).collect()
}

/// Brute-force check of [`solve_pricing`]: renewable price on a grid of step
/// `resolution` over `[0, fossil_price]`, and for each grid value the smallest offloading
/// price meeting every cell's constraint. Returns (payout, offloading price, renewable price).
pub fn grid_pricing_oracle(inputs: &CoopInputs, resolution: f64) -> Option<(f64, f64, f64)> {
    let total: f64 = inputs.cells.iter().map(|c| c.offloaded).sum();
    let cap = inputs.price_cap();
    let steps = (inputs.fossil_price / resolution).round() as usize;
    let mut best: Option<(f64, f64, f64)> = None;
    for step in 0..=steps {
        let x = (step as f64 * resolution).min(inputs.fossil_price);
        let mut y = 0.0f64;
        let mut feasible = true;
        for i in 0..inputs.cells.len() {
            let c = &inputs.cells[i];
            let profit_gap = profit_uncooperative(inputs, i) - profit_cooperative(inputs, i, 0.0, x);
            if profit_gap <= 0.0 {
                continue;
            }
            if c.offloaded > 0.0 {
                y = y.max(profit_gap / c.offloaded);
            } else {
                feasible = false;
            }
        }
        if !feasible || y > cap {
            continue;
        }
        let value = y * total;
        if best.is_none_or(|(b, _, _)| value < b) {
            best = Some((value, y, x));
        }
    }
    best
}

/// Pricing inputs per small cell from a solved hybrid allocation.
pub fn coop_inputs(scenario: &Scenario, alloc: &AllocationState, params: &PricingParams) -> Result<CoopInputs> {
    let ledger = excess_renewable(scenario, alloc, params.dt)?;
    let fap = &scenario.config.power.fap;
    let mut cells: Vec<CoopCell> = ledger.excess.iter().map(|&q| CoopCell::flat(q, 0.0, 0.0)).collect();
    for load in fap_loads(scenario, alloc) {
        let cell = &mut cells[load.cell];
        cell.offloaded += load.hosted_users as f64;
        cell.energy_closed += fap.active(load.registered_tx) * params.dt;
        cell.energy_coop += fap.active(load.registered_tx + load.hosted_tx) * params.dt;
    }
    Ok(CoopInputs { cells, revenue: params.revenue, fossil_price: params.fossil_price })
}
