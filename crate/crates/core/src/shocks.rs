//! Supply and demand shocks, production and consumption ceilings, and the
//! [`Allocation`] type shared by every propagation method.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};

use crate::economy::{Economy, LeontiefOperator};
use crate::error::{Error, Result};

fn check_unit(what: impl Into<String>, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            what: what.into(),
            value,
        })
    }
}

/// Share of an industry's output lost during lockdown: the labor that is
/// neither essential nor able to work remotely.
pub fn supply_shock(rli: f64, essential: f64) -> Result<f64> {
    let rli = check_unit("remote labor index", rli)?;
    let essential = check_unit("essential share", essential)?;
    Ok((1.0 - rli) * (1.0 - essential))
}

/// Raw per-industry indicators from which supply shocks are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockInputs {
    pub rli: Array1<f64>,
    pub essential: Array1<f64>,
    pub demand_shock: Array1<f64>,
}

impl ShockInputs {
    pub fn supply_shocks(&self) -> Result<Array1<f64>> {
        self.rli
            .iter()
            .zip(self.essential.iter())
            .map(|(&r, &e)| supply_shock(r, e))
            .collect()
    }

    pub fn to_scenario(&self) -> Result<ShockScenario> {
        ShockScenario::new(self.supply_shocks()?, self.demand_shock.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockScenario {
    eps_supply: Array1<f64>,
    eps_demand: Array1<f64>,
    alpha_supply: f64,
    alpha_demand: f64,
}

impl ShockScenario {
    /// Unscaled scenario (both scaling factors equal to one).
    pub fn new(eps_supply: Array1<f64>, eps_demand: Array1<f64>) -> Result<ShockScenario> {
        if eps_supply.len() != eps_demand.len() {
            return Err(Error::DimensionMismatch {
                what: "demand shock vector",
                expected: eps_supply.len(),
                found: eps_demand.len(),
            });
        }
        for (i, &v) in eps_supply.iter().enumerate() {
            check_unit(format!("supply shock of industry {}", i + 1), v)?;
        }
        for (i, &v) in eps_demand.iter().enumerate() {
            check_unit(format!("demand shock of industry {}", i + 1), v)?;
        }
        Ok(ShockScenario {
            eps_supply,
            eps_demand,
            alpha_supply: 1.0,
            alpha_demand: 1.0,
        })
    }

    pub fn zero(n: usize) -> ShockScenario {
        ShockScenario {
            eps_supply: Array1::zeros(n),
            eps_demand: Array1::zeros(n),
            alpha_supply: 1.0,
            alpha_demand: 1.0,
        }
    }

    pub fn scaled(&self, alpha_supply: f64, alpha_demand: f64) -> Result<ShockScenario> {
        Ok(ShockScenario {
            alpha_supply: check_unit("alpha_supply", alpha_supply)?,
            alpha_demand: check_unit("alpha_demand", alpha_demand)?,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.eps_supply.len()
    }

    pub fn eps_supply(&self) -> &Array1<f64> {
        &self.eps_supply
    }

    pub fn eps_demand(&self) -> &Array1<f64> {
        &self.eps_demand
    }

    pub fn alpha_supply(&self) -> f64 {
        self.alpha_supply
    }

    pub fn alpha_demand(&self) -> f64 {
        self.alpha_demand
    }

    /// Effective supply shock `α^S ε^S_i`.
    pub fn effective_supply(&self, i: usize) -> f64 {
        self.alpha_supply * self.eps_supply[i]
    }

    pub fn effective_demand(&self, i: usize) -> f64 {
        self.alpha_demand * self.eps_demand[i]
    }
}

/// Output and consumption ceilings.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub x_max: Array1<f64>,
    pub f_max: Array1<f64>,
}

impl Constraints {
    pub fn n(&self) -> usize {
        self.x_max.len()
    }

    /// Ceilings equal to the pre-shock economy.
    pub fn unshocked(e: &Economy) -> Constraints {
        Constraints {
            x_max: e.gross_output().clone(),
            f_max: e.final_demand().clone(),
        }
    }
}

pub fn make_constraints(e: &Economy, s: &ShockScenario) -> Result<Constraints> {
    if s.n() != e.n() {
        return Err(Error::DimensionMismatch {
            what: "shock scenario",
            expected: e.n(),
            found: s.n(),
        });
    }
    let x0 = e.gross_output();
    let f0 = e.final_demand();
    let x_max = (0..e.n())
        .map(|i| (1.0 - s.effective_supply(i)) * x0[i])
        .collect();
    let f_max = (0..e.n())
        .map(|i| {
            if f0[i] == 0.0 {
                0.0
            } else {
                (1.0 - s.effective_demand(i)) * f0[i]
            }
        })
        .collect();
    Ok(Constraints { x_max, f_max })
}

/// Economy-wide supply and demand shocks `(1 - Σx^max/Σx0, 1 - Σf^max/Σf0)`.
pub fn aggregate_shocks(e: &Economy, c: &Constraints) -> Result<(f64, f64)> {
    let x0 = e.total_output();
    let f0 = e.total_consumption();
    if !(x0 > 0.0) {
        return Err(Error::ZeroAggregate("gross output"));
    }
    if !(f0 > 0.0) {
        return Err(Error::ZeroAggregate("final consumption"));
    }
    Ok((1.0 - c.x_max.sum() / x0, 1.0 - c.f_max.sum() / f0))
}

/// Propagation method that produced an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Direct,
    LpOutput,
    LpConsumption,
    Proportional,
    Mixed,
    LargestFirst,
    Random,
    Meem,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Direct,
        Method::LpOutput,
        Method::LpConsumption,
        Method::Proportional,
        Method::Mixed,
        Method::LargestFirst,
        Method::Random,
        Method::Meem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::LpOutput => "lp_output",
            Method::LpConsumption => "lp_consumption",
            Method::Proportional => "proportional",
            Method::Mixed => "mixed",
            Method::LargestFirst => "largest_first",
            Method::Random => "random",
            Method::Meem => "meem",
        }
    }

    pub fn is_rationing(self) -> bool {
        matches!(
            self,
            Method::Proportional | Method::Mixed | Method::LargestFirst | Method::Random
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == normalized)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown method {s:?}")))
    }
}

/// A candidate market allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Array1<f64>,
    pub f: Array1<f64>,
    pub method: Method,
    pub feasible: bool,
    pub iterations: usize,
}

impl Allocation {
    pub fn total_output(&self) -> f64 {
        self.x.sum()
    }

    pub fn total_consumption(&self) -> f64 {
        self.f.sum()
    }
}

/// Checks `0 <= x <= x^max`, `0 <= f <= f^max` and `x = L f`, each up to
/// `rel_tol` relative to the magnitude of the quantities involved.
pub fn is_feasible(
    op: &LeontiefOperator,
    c: &Constraints,
    x: ArrayView1<'_, f64>,
    f: ArrayView1<'_, f64>,
    rel_tol: f64,
) -> bool {
    let n = c.n();
    if x.len() != n || f.len() != n || op.n() != n {
        return false;
    }
    let floor = 1e-12
        * c.x_max
            .iter()
            .chain(x.iter())
            .map(|v| v.abs())
            .sum::<f64>()
            .max(1e-300);
    let slack = |a: f64, b: f64| rel_tol * a.abs().max(b.abs()) + floor;
    let lf = op.inverse().dot(&f);
    (0..n).all(|i| {
        x[i] >= -slack(x[i], 0.0)
            && f[i] >= -slack(f[i], 0.0)
            && x[i] <= c.x_max[i] + slack(x[i], c.x_max[i])
            && f[i] <= c.f_max[i] + slack(f[i], c.f_max[i])
            && (x[i] - lf[i]).abs() <= slack(x[i], lf[i])
    })
}

/// Tolerance used when grading non-iterative allocations.
pub const DIRECT_FEASIBILITY_TOL: f64 = 1e-9;

/// First-order allocation `(x^max, f^max)`, ignoring all network effects.
pub fn direct_allocation(op: &LeontiefOperator, c: &Constraints) -> Allocation {
    Allocation {
        feasible: is_feasible(
            op,
            c,
            c.x_max.view(),
            c.f_max.view(),
            DIRECT_FEASIBILITY_TOL,
        ),
        x: c.x_max.clone(),
        f: c.f_max.clone(),
        method: Method::Direct,
        iterations: 0,
    }
}
