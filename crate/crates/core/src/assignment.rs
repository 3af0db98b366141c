//! Minimum-cost linear assignment (Hungarian method with potentials).

use crate::error::{HetNetError, Result};

/// Dense row-major cost table. `f64::INFINITY` marks a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, fill: f64) -> Self {
        Self { rows, cols, data: vec![fill; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(HetNetError::InvalidArgument("cost matrix rows differ in length".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        self.data[row * self.cols + col] = cost;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn forbidden_penalty(&self) -> f64 {
        let spread: f64 = (0..self.rows)
            .map(|r| self.row(r).iter().filter(|c| c.is_finite()).fold(0.0f64, |m, c| m.max(c.abs())))
            .sum();
        2.0 * spread + 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Column matched to each row; `None` for rows left unserved.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the matched finite costs.
    pub total_cost: f64,
    /// Inner-loop steps performed, as a machine-independent work measure.
    pub operations: u64,
}

impl Matching {
    pub fn matched(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }
}

/// Core solver for `n <= m` on a finite table. Returns the column of each row.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64, ops: &mut u64) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            *ops += m as u64;
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Serves as many rows as possible, then minimizes total cost among those matchings.
///
/// Forbidden pairs carry a penalty larger than any achievable spread of finite costs,
/// so the count of served rows dominates. Extra rows beyond the column count are
/// matched to penalty-only dummy columns and come back unserved.
pub fn solve_partial(costs: &CostMatrix) -> Matching {
    let (n, m) = (costs.rows, costs.cols);
    let mut operations = 0;
    if n == 0 {
        return Matching { row_to_col: Vec::new(), total_cost: 0.0, operations };
    }
    let penalty = costs.forbidden_penalty();
    let width = m.max(n);
    let lookup = |i: usize, j: usize| {
        if j >= m {
            return penalty;
        }
        let c = costs.get(i, j);
        if c.is_finite() { c } else { penalty }
    };
    let cols = hungarian(n, width, lookup, &mut operations);
    let mut total_cost = 0.0;
    let row_to_col = cols
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            if j < m && costs.get(i, j).is_finite() {
                total_cost += costs.get(i, j);
                Some(j)
            } else {
                None
            }
        })
        .collect();
    Matching { row_to_col, total_cost, operations }
}

/// Perfect matching of every row at minimum total cost.
pub fn solve_assignment(costs: &CostMatrix) -> Result<Matching> {
    if costs.rows > costs.cols {
        return Err(HetNetError::Infeasible(format!(
            "{} rows cannot be matched into {} columns",
            costs.rows, costs.cols
        )));
    }
    if let Some(r) = (0..costs.rows).find(|&r| costs.row(r).iter().all(|c| !c.is_finite())) {
        return Err(HetNetError::Infeasible(format!("row {r} has no allowed column")));
    }
    let matching = solve_partial(costs);
    if matching.matched() < costs.rows {
        return Err(HetNetError::Infeasible(format!(
            "only {} of {} rows can be matched",
            matching.matched(),
            costs.rows
        )));
    }
    Ok(matching)
}
