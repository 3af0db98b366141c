//! Energy-aware radio resource management for heterogeneous cellular networks.
//!
//! A network consists of one macro cell, a ring of operator-owned small cells and
//! privately owned femtocell access points (FAPs). The crate builds seeded network
//! snapshots, computes channels, rates and power consumption, and minimizes total
//! operator power through joint carrier assignment, per-carrier power allocation and
//! small-cell sleep switching. Solvers are exposed through [`solver::Solver`] and
//! selected by name from a [`solver::SolverRegistry`].

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod assignment;
pub mod channel;
pub mod config;
pub mod cooperation;
pub mod dual;
pub mod error;
pub mod iterative;
pub mod oracle;
pub mod power;
pub mod radio;
pub mod scenario;
pub mod solver;

pub use alloc::{AllocationState, Assignment, SolveReport};
pub use channel::{build_channel, ChannelMatrix, ChannelParams};
pub use config::{GeometrySpec, NetworkConfig, ScenarioKind};
pub use error::{HetNetError, Result};
pub use scenario::{generate, Scenario};
pub use solver::{Solver, SolverRegistry};
