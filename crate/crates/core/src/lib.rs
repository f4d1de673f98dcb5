//! Propagation of simultaneous supply and demand shocks through
//! input-output production networks.
//!
//! The crate computes best-case feasible allocations by linear programming,
//! bottom-up allocations under four rationing rules, mixed endogenous/exogenous
//! model solutions with feasibility diagnostics, and sweeps over shock
//! magnitude and network density.

// `!(v > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod economy;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod meem;
pub mod rationing;
pub mod shocks;
pub mod stats;

pub use economy::{coefficients, metrics, Economy, EconomyMetrics, LeontiefOperator};
pub use error::{Error, Result};
pub use experiments::{
    run_scenario, summarize, sweep_density, sweep_scale, RemovalMode, SummaryRow, SweepRecord,
    SweepSpec,
};
pub use shocks::{
    aggregate_shocks, direct_allocation, make_constraints, supply_shock, Allocation, Constraints,
    Method, ShockInputs, ShockScenario,
};
