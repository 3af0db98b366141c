//! Aggregates over trials and the few statistics the acceptance checks need.

use hetnet_core::config::ScenarioKind;
use serde::{Deserialize, Serialize};

use crate::experiment::{PricingRow, TrialRow};

/// Sample mean and standard deviation (n - 1 denominator; zero for one sample).
/// `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Standard error of the difference of two sample means.
pub fn pooled_standard_error(a: &[f64], b: &[f64]) -> Option<f64> {
    let (_, sa) = mean_std(a)?;
    let (_, sb) = mean_std(b)?;
    Some((sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. `None` when either side is constant or the lengths
/// differ, since the coefficient is undefined there.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, _) = mean_std(&rx)?;
    let (my, _) = mean_std(&ry)?;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Aggregate of one (sweep value, rate threshold, scenario, solver) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub rate_threshold_bps: f64,
    pub scenario: ScenarioKind,
    pub solver: String,
    pub trials: usize,
    pub feasible: usize,
    pub errors: usize,
    /// Over feasible trials.
    pub mean_power_w: Option<f64>,
    pub std_power_w: Option<f64>,
    pub mean_active_small_cells: f64,
    pub std_active_small_cells: f64,
    pub mean_outage: f64,
    pub mean_wall_time_s: f64,
    pub std_wall_time_s: f64,
}

fn group_by<T, K: PartialEq>(rows: &[T], key: impl Fn(&T) -> K) -> Vec<Vec<&T>> {
    let mut keys: Vec<K> = Vec::new();
    let mut groups: Vec<Vec<&T>> = Vec::new();
    for row in rows {
        let k = key(row);
        match keys.iter().position(|x| *x == k) {
            Some(i) => groups[i].push(row),
            None => {
                keys.push(k);
                groups.push(vec![row]);
            }
        }
    }
    groups
}

/// Mean and standard deviation per group, in order of first appearance.
pub fn summarize_trials(rows: &[TrialRow]) -> Vec<SummaryRow> {
    group_by(rows, |r| (r.sweep_value.to_bits(), r.rate_threshold_bps.to_bits(), r.scenario, r.solver.clone()))
        .into_iter()
        .map(|group| {
            let first = group[0];
            let done: Vec<&TrialRow> = group.iter().copied().filter(|r| r.error.is_empty()).collect();
            let power: Vec<f64> = done.iter().filter_map(|r| r.reported_power_w).collect();
            let active: Vec<f64> = done.iter().map(|r| r.active_small_cells as f64).collect();
            let outage: Vec<f64> = done.iter().map(|r| r.outage as f64).collect();
            let time: Vec<f64> = done.iter().map(|r| r.wall_time_s).collect();
            let (mean_active, std_active) = mean_std(&active).unwrap_or((0.0, 0.0));
            let (mean_time, std_time) = mean_std(&time).unwrap_or((0.0, 0.0));
            SummaryRow {
                experiment: first.experiment.clone(),
                sweep_param: first.sweep_param.clone(),
                sweep_value: first.sweep_value,
                rate_threshold_bps: first.rate_threshold_bps,
                scenario: first.scenario,
                solver: first.solver.clone(),
                trials: group.len(),
                feasible: power.len(),
                errors: group.len() - done.len(),
                mean_power_w: mean_std(&power).map(|m| m.0),
                std_power_w: mean_std(&power).map(|m| m.1),
                mean_active_small_cells: mean_active,
                std_active_small_cells: std_active,
                mean_outage: mean_std(&outage).map_or(0.0, |m| m.0),
                mean_wall_time_s: mean_time,
                std_wall_time_s: std_time,
            }
        })
        .collect()
}

/// Price aggregate of one (sweep value, solver, cell) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSummaryRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub solver: String,
    pub cell: usize,
    pub trials: usize,
    pub priced: usize,
    pub mean_offloaded: f64,
    pub mean_offloading_price: Option<f64>,
    pub std_offloading_price: Option<f64>,
    pub mean_renewable_price: Option<f64>,
    pub std_renewable_price: Option<f64>,
    pub mean_renewable_payment: Option<f64>,
    pub std_renewable_payment: Option<f64>,
    /// Largest |payout - grid payout| over the group.
    pub max_grid_gap: Option<f64>,
}

pub fn summarize_pricing(rows: &[PricingRow]) -> Vec<PricingSummaryRow> {
    group_by(rows, |r| (r.sweep_value.to_bits(), r.solver.clone(), r.cell))
        .into_iter()
        .map(|group| {
            let first = group[0];
            let priced: Vec<&PricingRow> = group.iter().copied().filter(|r| r.payout.is_some()).collect();
            let col = |f: fn(&PricingRow) -> Option<f64>| -> Vec<f64> { priced.iter().filter_map(|r| f(r)).collect() };
            let p = mean_std(&col(|r| r.offloading_price));
            let c = mean_std(&col(|r| r.renewable_price));
            let pay = mean_std(&col(|r| r.renewable_payment));
            let gap = priced
                .iter()
                .filter_map(|r| Some((r.payout? - r.grid_payout?).abs()))
                .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
            let offloaded: Vec<f64> = group.iter().map(|r| r.offloaded).collect();
            PricingSummaryRow {
                experiment: first.experiment.clone(),
                sweep_param: first.sweep_param.clone(),
                sweep_value: first.sweep_value,
                solver: first.solver.clone(),
                cell: first.cell,
                trials: group.len(),
                priced: priced.len(),
                mean_offloaded: mean_std(&offloaded).map_or(0.0, |m| m.0),
                mean_offloading_price: p.map(|m| m.0),
                std_offloading_price: p.map(|m| m.1),
                mean_renewable_price: c.map(|m| m.0),
                std_renewable_price: c.map(|m| m.1),
                mean_renewable_payment: pay.map(|m| m.0),
                std_renewable_payment: pay.map(|m| m.1),
                max_grid_gap: gap,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[9.0, 7.0, 5.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0, 4.0, 9.0, 16.0]), Some(1.0));
        assert_eq!(spearman(&x, &[2.0, 2.0, 2.0, 2.0]), None);
        // one swapped pair out of five: 1 - 6*2/(5*24)
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    #[test]
    fn pooled_error_example() {
        let se = pooled_standard_error(&[1.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((se - 1.0).abs() < 1e-12);
    }
}
