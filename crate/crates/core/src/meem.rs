//! Mixed endogenous/exogenous model.
//!
//! Each industry is either supply constrained (output fixed at its ceiling,
//! final consumption solved for) or demand constrained (final consumption
//! fixed at its ceiling, output solved for). Partitioning `x = A x + f`
//! accordingly gives
//!
//! ```text
//! x_d = (I - A_dd)^{-1} (A_ds x_s + f_d)
//! f_s = (I - A_ss) x_s - A_sd x_d
//! ```
//!
//! Nothing ties `f_s` to `[0, f^max]`, so the solution can be infeasible;
//! [`check_feasibility`] reports where.

use ndarray::{Array1, Array2};

use crate::economy::{Economy, LeontiefOperator};
use crate::error::{Error, Result};
use crate::linalg::{identity_minus, Lu};
use crate::shocks::{Allocation, Constraints, Method, ShockScenario};

/// Relative slack before a bound violation is flagged.
pub const DIAGNOSTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MeemPartition {
    pub supply_set: Vec<usize>,
    pub demand_set: Vec<usize>,
    /// Output lost to the supply shock, `α^S ε^S_i x_i0`.
    pub supply_shock: Array1<f64>,
    /// Consumption lost to the demand shock, `α^D ε^D_i f_i0`.
    pub demand_shock: Array1<f64>,
}

/// Supply constrained iff the output loss strictly exceeds the consumption
/// loss; ties, including no shock at all, count as demand constrained.
pub fn classify(e: &Economy, s: &ShockScenario) -> Result<MeemPartition> {
    if s.n() != e.n() {
        return Err(Error::DimensionMismatch {
            what: "shock scenario",
            expected: e.n(),
            found: s.n(),
        });
    }
    let n = e.n();
    let supply_shock: Array1<f64> = (0..n)
        .map(|i| s.effective_supply(i) * e.gross_output()[i])
        .collect();
    let demand_shock: Array1<f64> = (0..n)
        .map(|i| s.effective_demand(i) * e.final_demand()[i])
        .collect();
    let (supply_set, demand_set) = (0..n).partition(|&i| supply_shock[i] > demand_shock[i]);
    Ok(MeemPartition {
        supply_set,
        demand_set,
        supply_shock,
        demand_shock,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IndustryFlags {
    pub negative_consumption: bool,
    pub consumption_above_max: bool,
    pub output_above_max: bool,
    pub negative_output: bool,
}

impl IndustryFlags {
    pub fn any(&self) -> bool {
        self.negative_consumption
            || self.consumption_above_max
            || self.output_above_max
            || self.negative_output
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlagCounts {
    pub negative_consumption: usize,
    pub consumption_above_max: usize,
    pub output_above_max: usize,
    pub negative_output: usize,
}

impl FlagCounts {
    pub fn tally(flags: &[IndustryFlags]) -> FlagCounts {
        let mut c = FlagCounts::default();
        for d in flags {
            c.negative_consumption += d.negative_consumption as usize;
            c.consumption_above_max += d.consumption_above_max as usize;
            c.output_above_max += d.output_above_max as usize;
            c.negative_output += d.negative_output as usize;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeemSolution {
    pub partition: MeemPartition,
    /// Endogenous consumption of the supply-constrained industries.
    pub f_supply: Array1<f64>,
    /// Endogenous output of the demand-constrained industries.
    pub x_demand: Array1<f64>,
    pub x: Array1<f64>,
    pub f: Array1<f64>,
    pub diagnostics: Vec<IndustryFlags>,
    pub feasible: bool,
}

impl MeemSolution {
    pub fn flag_counts(&self) -> FlagCounts {
        FlagCounts::tally(&self.diagnostics)
    }

    pub fn to_allocation(&self) -> Allocation {
        Allocation {
            x: self.x.clone(),
            f: self.f.clone(),
            method: Method::Meem,
            feasible: self.feasible,
            iterations: 0,
        }
    }
}

fn block(m: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| m[[rows[r], cols[c]]])
}

fn gather(v: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

pub fn solve_meem(
    op: &LeontiefOperator,
    c: &Constraints,
    p: &MeemPartition,
) -> Result<MeemSolution> {
    let n = op.n();
    if c.n() != n || p.supply_set.len() + p.demand_set.len() != n {
        return Err(Error::DimensionMismatch {
            what: "MEEM partition",
            expected: n,
            found: p.supply_set.len() + p.demand_set.len(),
        });
    }
    let a = op.coefficients();
    let (sup, dem) = (&p.supply_set, &p.demand_set);
    let x_s = gather(&c.x_max, sup);
    let f_d = gather(&c.f_max, dem);

    let x_demand = if dem.is_empty() {
        Array1::zeros(0)
    } else {
        let rhs = block(a, dem, sup).dot(&x_s) + &f_d;
        let lu = Lu::factor(identity_minus(block(a, dem, dem).view()).view())
            .ok_or(Error::SingularBlock)?;
        lu.solve(rhs.view())
    };
    let f_supply =
        identity_minus(block(a, sup, sup).view()).dot(&x_s) - block(a, sup, dem).dot(&x_demand);

    let mut x = Array1::zeros(n);
    let mut f = Array1::zeros(n);
    for (k, &i) in sup.iter().enumerate() {
        x[i] = x_s[k];
        f[i] = f_supply[k];
    }
    for (k, &i) in dem.iter().enumerate() {
        x[i] = x_demand[k];
        f[i] = f_d[k];
    }
    let mut sol = MeemSolution {
        partition: p.clone(),
        f_supply,
        x_demand,
        x,
        f,
        diagnostics: Vec::new(),
        feasible: true,
    };
    sol.diagnostics = check_feasibility(&sol, c);
    sol.feasible = !sol.diagnostics.iter().any(IndustryFlags::any);
    Ok(sol)
}

/// Flags endogenous quantities that leave their admissible range.
pub fn check_feasibility(sol: &MeemSolution, c: &Constraints) -> Vec<IndustryFlags> {
    let mut flags = vec![IndustryFlags::default(); c.n()];
    let scale = c
        .x_max
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let slack = |bound: f64| DIAGNOSTIC_TOL * bound.abs() + 1e-12 * scale;
    for (k, &i) in sol.partition.supply_set.iter().enumerate() {
        let fs = sol.f_supply[k];
        flags[i].negative_consumption = fs < -slack(0.0);
        flags[i].consumption_above_max = fs > c.f_max[i] + slack(c.f_max[i]);
    }
    for (k, &i) in sol.partition.demand_set.iter().enumerate() {
        let xd = sol.x_demand[k];
        flags[i].negative_output = xd < -slack(0.0);
        flags[i].output_above_max = xd > c.x_max[i] + slack(c.x_max[i]);
    }
    flags
}
