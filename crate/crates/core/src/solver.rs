//! Solvers behind one interface, looked up by name.

use std::collections::BTreeMap;

use crate::alloc::SolveReport;
use crate::channel::ChannelMatrix;
use crate::cooperation::PricingParams;
use crate::dual::{solve_dual, DualOptions};
use crate::error::{HetNetError, Result};
use crate::iterative::solve_iterative;
use crate::oracle::exhaustive_optimum;
use crate::scenario::Scenario;

pub trait Solver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Result<SolveReport>;
}

pub struct DualSolver {
    pub options: DualOptions,
}

impl Solver for DualSolver {
    fn name(&self) -> &str {
        if self.options.onoff { "dual" } else { "dual-all-active" }
    }

    fn solve(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Result<SolveReport> {
        solve_dual(scenario, channel, &self.options)
    }
}

pub struct IterativeSolver {
    pub pricing: PricingParams,
}

impl Solver for IterativeSolver {
    fn name(&self) -> &str {
        "iterative"
    }

    fn solve(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Result<SolveReport> {
        solve_iterative(scenario, channel, &self.pricing)
    }
}

/// Exhaustive search; only usable on tiny instances.
pub struct ExhaustiveSolver;

impl Solver for ExhaustiveSolver {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn solve(&self, scenario: &Scenario, channel: &ChannelMatrix) -> Result<SolveReport> {
        exhaustive_optimum(scenario, channel)
    }
}

#[derive(Default)]
pub struct SolverRegistry {
    solvers: BTreeMap<String, Box<dyn Solver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with every built-in solver.
    pub fn with_defaults(dual: &DualOptions, pricing: &PricingParams) -> Self {
        let mut reg = Self::new();
        reg.register(Box::new(DualSolver { options: DualOptions { onoff: true, ..dual.clone() } }));
        reg.register(Box::new(DualSolver { options: DualOptions { onoff: false, ..dual.clone() } }));
        reg.register(Box::new(IterativeSolver { pricing: *pricing }));
        reg.register(Box::new(ExhaustiveSolver));
        reg
    }

    pub fn register(&mut self, solver: Box<dyn Solver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn remove(&mut self, name: &str) -> Option<Box<dyn Solver>> {
        self.solvers.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&dyn Solver> {
        self.solvers.get(name).map(|s| s.as_ref()).ok_or_else(|| HetNetError::UnknownSolver(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.solvers.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.solvers.keys().map(String::as_str).collect()
    }
}
