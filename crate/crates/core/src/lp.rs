//! Box-constrained linear programs for best-case feasible allocations, and a
//! dense bounded-variable primal simplex to solve them.
//!
//! Every program here has the form
//!
//! ```text
//! maximize    c'v
//! subject to  lo  <= v  <= up
//!             rlo <= Gv <= rup
//! ```
//!
//! Rows are handled as bounded logical variables `w = Gv`, so two-sided
//! constraints need no doubling. A phase one with artificials restores primal
//! feasibility when the all-lower-bounds start violates a row.

use std::fmt;

use ndarray::{Array1, Array2};

use crate::economy::LeontiefOperator;
use crate::error::{Error, Result};
use crate::linalg::{identity_minus, Lu};
use crate::shocks::{is_feasible, Allocation, Constraints, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub rows: Array2<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_rows();
        for (what, len, expected) in [
            ("variable lower bounds", self.var_lower.len(), n),
            ("variable upper bounds", self.var_upper.len(), n),
            ("constraint matrix columns", self.rows.ncols(), n),
            ("row lower bounds", self.row_lower.len(), m),
            ("row upper bounds", self.row_upper.len(), m),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found: len,
                });
            }
        }
        let bounds = self
            .var_lower
            .iter()
            .zip(&self.var_upper)
            .chain(self.row_lower.iter().zip(&self.row_upper));
        for (k, (lo, up)) in bounds.enumerate() {
            if !lo.is_finite() || !up.is_finite() || lo > up {
                return Err(Error::InvalidSpec(format!(
                    "bound pair {k} is [{lo}, {up}]; bounds must be finite with lower <= upper"
                )));
            }
        }
        if self
            .objective
            .iter()
            .chain(self.rows.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// True when `values` satisfies every bound within `abs + rel * |bound|`.
    pub fn satisfies(&self, values: &[f64], abs: f64, rel: f64) -> bool {
        let within = |v: f64, lo: f64, up: f64| {
            v >= lo - abs - rel * lo.abs() && v <= up + abs + rel * up.abs()
        };
        let vars_ok = values
            .iter()
            .zip(self.var_lower.iter().zip(&self.var_upper))
            .all(|(&v, (&lo, &up))| within(v, lo, up));
        vars_ok
            && (0..self.num_rows()).all(|r| {
                let g: f64 = self
                    .rows
                    .row(r)
                    .iter()
                    .zip(values)
                    .map(|(a, v)| a * v)
                    .sum();
                within(g, self.row_lower[r], self.row_upper[r])
            })
    }
}

/// Plain-text dump for cross-checking against external solvers.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# maximize c'v subject to variable and row bounds")?;
        writeln!(f, "variable\tlower\tupper\tobjective")?;
        for j in 0..self.num_vars() {
            writeln!(
                f,
                "v{}\t{}\t{}\t{}",
                j + 1,
                self.var_lower[j],
                self.var_upper[j],
                self.objective[j]
            )?;
        }
        write!(f, "row\tlower\tupper")?;
        for j in 0..self.num_vars() {
            write!(f, "\tv{}", j + 1)?;
        }
        writeln!(f)?;
        for r in 0..self.num_rows() {
            write!(
                f,
                "r{}\t{}\t{}",
                r + 1,
                self.row_lower[r],
                self.row_upper[r]
            )?;
            for v in self.rows.row(r) {
                write!(f, "\t{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexOptions {
    /// Pivot budget; defaults to `50 * (variables + rows)`.
    pub max_iter: Option<usize>,
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, SimplexOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut tableau = Tableau::new(lp);
    let limit = opts
        .max_iter
        .unwrap_or(50 * (lp.num_vars() + lp.num_rows()).max(1));

    let mut iterations = 0;
    if tableau.has_artificials() {
        let cost = tableau.phase_one_cost();
        match tableau.optimize(&cost, limit, &mut iterations) {
            Phase::Optimal => {}
            Phase::IterationLimit => {
                return Ok(tableau.solution(lp, LpStatus::IterationLimit, iterations))
            }
        }
        if tableau.artificial_infeasibility() > tableau.feas_tol {
            return Ok(tableau.solution(lp, LpStatus::Infeasible, iterations));
        }
        tableau.retire_artificials();
    }
    let cost = tableau.phase_two_cost(lp);
    let status = match tableau.optimize(&cost, limit, &mut iterations) {
        Phase::Optimal => LpStatus::Optimal,
        Phase::IterationLimit => LpStatus::IterationLimit,
    };
    tableau.polish();
    Ok(tableau.solution(lp, status, iterations))
}

enum Phase {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Dense tableau `B^{-1} [ -G | I | diag(σ) ]` over structural, logical and
/// artificial columns.
struct Tableau {
    n: usize,
    m: usize,
    /// Original (unreduced) columns, used for the final re-solve.
    original: Array2<f64>,
    t: Array2<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    beta: Vec<f64>,
    artificial_rows: Vec<usize>,
    feas_tol: f64,
    pivot_tol: f64,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let start: Vec<f64> = lp.var_lower.clone();

        let mut artificial_rows = Vec::new();
        let mut row_values = Vec::with_capacity(m);
        for r in 0..m {
            let g: f64 = lp.rows.row(r).iter().zip(&start).map(|(a, v)| a * v).sum();
            if g < lp.row_lower[r] || g > lp.row_upper[r] {
                artificial_rows.push(r);
            }
            row_values.push(g);
        }
        let k = artificial_rows.len();
        let width = n + m + k;

        let mut a = Array2::zeros((m, width));
        for r in 0..m {
            for j in 0..n {
                a[[r, j]] = -lp.rows[[r, j]];
            }
            a[[r, n + r]] = 1.0;
        }

        let mut lower = lp.var_lower.clone();
        let mut upper = lp.var_upper.clone();
        lower.extend_from_slice(&lp.row_lower);
        upper.extend_from_slice(&lp.row_upper);
        lower.extend(std::iter::repeat_n(0.0, k));
        upper.extend(std::iter::repeat_n(f64::INFINITY, k));

        let mut state = vec![VarState::AtLower; width];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        for r in 0..m {
            state[n + r] = VarState::Basic(r);
            basis[r] = n + r;
            beta[r] = row_values[r];
        }
        for (idx, &r) in artificial_rows.iter().enumerate() {
            let col = n + m + idx;
            let g = row_values[r];
            let (bound, at) = if g < lp.row_lower[r] {
                (lp.row_lower[r], VarState::AtLower)
            } else {
                (lp.row_upper[r], VarState::AtUpper)
            };
            let sigma = if g > bound { 1.0 } else { -1.0 };
            a[[r, col]] = sigma;
            state[n + r] = at;
            state[col] = VarState::Basic(r);
            basis[r] = col;
            beta[r] = (g - bound).abs();
        }

        let mut t = a.clone();
        for &r in &artificial_rows {
            // basis column is σ e_r, so B^{-1} scales the row by σ
            let sigma = a[[r, basis[r]]];
            t.row_mut(r).mapv_inplace(|v| v * sigma);
        }

        let magnitude = lower
            .iter()
            .chain(upper.iter())
            .filter(|v| v.is_finite())
            .fold(1.0_f64, |acc, v| acc.max(v.abs()));

        Tableau {
            n,
            m,
            original: a,
            t,
            lower,
            upper,
            state,
            basis,
            beta,
            artificial_rows,
            feas_tol: 1e-9 * magnitude,
            pivot_tol: 1e-11,
        }
    }

    fn width(&self) -> usize {
        self.lower.len()
    }

    fn has_artificials(&self) -> bool {
        !self.artificial_rows.is_empty()
    }

    fn phase_one_cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.width()];
        c[self.n + self.m..].fill(-1.0);
        c
    }

    fn phase_two_cost(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut c = vec![0.0; self.width()];
        c[..self.n].copy_from_slice(&lp.objective);
        c
    }

    fn artificial_infeasibility(&self) -> f64 {
        ((self.n + self.m)..self.width())
            .map(|col| self.value(col).abs())
            .sum()
    }

    /// Pins every artificial to zero for phase two.
    fn retire_artificials(&mut self) {
        for col in (self.n + self.m)..self.width() {
            self.upper[col] = 0.0;
            if self.state[col] == VarState::AtUpper {
                self.state[col] = VarState::AtLower;
            }
        }
    }

    fn value(&self, col: usize) -> f64 {
        match self.state[col] {
            VarState::Basic(r) => self.beta[r],
            VarState::AtLower => self.lower[col],
            VarState::AtUpper => self.upper[col],
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (dj, tj) in d.iter_mut().zip(self.t.row(r)) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64], limit: usize, iterations: &mut usize) -> Phase {
        let cost_scale = cost.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
        let opt_tol = 1e-9 * cost_scale;
        let bland_after = 3 * (self.n + self.m).max(1);
        let mut degenerate_run = 0;

        loop {
            let d = self.reduced_costs(cost);
            let bland = degenerate_run >= bland_after;
            let entering = self.choose_entering(&d, opt_tol, bland);
            let Some((j, dir)) = entering else {
                return Phase::Optimal;
            };
            if *iterations >= limit {
                return Phase::IterationLimit;
            }
            *iterations += 1;

            let step = self.ratio_test(j, dir, bland);
            let theta = step.theta;
            if theta <= self.feas_tol * 1e-3 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for r in 0..self.m {
                self.beta[r] -= self.t[[r, j]] * dir * theta;
            }
            match step.leaving {
                None => {
                    self.state[j] = match self.state[j] {
                        VarState::AtLower => VarState::AtUpper,
                        _ => VarState::AtLower,
                    };
                }
                Some((r, hits_upper)) => {
                    let start = match self.state[j] {
                        VarState::AtLower => self.lower[j],
                        _ => self.upper[j],
                    };
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.beta[r] = start + dir * theta;
                    self.state[leaving] = if hits_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    if leaving >= self.n + self.m {
                        // artificials never re-enter
                        self.upper[leaving] = 0.0;
                        self.state[leaving] = VarState::AtLower;
                    }
                }
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn choose_entering(&self, d: &[f64], opt_tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.width() {
            if self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let dir = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower if d[j] > opt_tol => 1.0,
                VarState::AtUpper if d[j] < -opt_tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| d[j].abs() > score) {
                best = Some((j, dir, d[j].abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, j: usize, dir: f64, bland: bool) -> Step {
        let mut theta = self.upper[j] - self.lower[j];
        let mut leaving: Option<(usize, bool)> = None;
        let mut leaving_alpha = 0.0;
        for r in 0..self.m {
            let alpha = dir * self.t[[r, j]];
            let b = self.basis[r];
            let (limit, hits_upper) = if alpha > self.pivot_tol {
                ((self.beta[r] - self.lower[b]) / alpha, false)
            } else if alpha < -self.pivot_tol && self.upper[b].is_finite() {
                ((self.upper[b] - self.beta[r]) / -alpha, true)
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let tie = 1e-12 * theta.abs().max(1.0);
            let better = if limit < theta - tie {
                true
            } else if limit > theta + tie {
                false
            } else {
                match leaving {
                    None => limit < theta,
                    // ties: Bland takes the lowest index, Dantzig the largest pivot
                    Some((prev, _)) if bland => b < self.basis[prev],
                    Some(_) => alpha.abs() > leaving_alpha,
                }
            };
            if better {
                theta = limit.min(theta);
                leaving = Some((r, hits_upper));
                leaving_alpha = alpha.abs();
            }
        }
        assert!(
            theta.is_finite(),
            "unbounded direction cannot occur with finite bounds"
        );
        Step { theta, leaving }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.t[[r, j]];
        self.t.row_mut(r).mapv_inplace(|v| v / piv);
        let pivot_row = self.t.row(r).to_owned();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.t[[i, j]];
            if factor != 0.0 {
                self.t
                    .row_mut(i)
                    .zip_mut_with(&pivot_row, |v, p| *v -= factor * p);
            }
        }
        let old = self.basis[r];
        self.basis[r] = j;
        self.state[j] = VarState::Basic(r);
        self.state[old] = VarState::AtLower;
    }

    /// Recomputes basic values from the original columns to shed drift
    /// accumulated over many tableau updates.
    fn polish(&mut self) {
        if self.m == 0 {
            return;
        }
        let mut b = Array2::zeros((self.m, self.m));
        for (r, &col) in self.basis.iter().enumerate() {
            b.column_mut(r).assign(&self.original.column(col));
        }
        let mut rhs = Array1::zeros(self.m);
        for col in 0..self.width() {
            if !matches!(self.state[col], VarState::Basic(_)) {
                let v = self.value(col);
                if v != 0.0 {
                    rhs.scaled_add(-v, &self.original.column(col));
                }
            }
        }
        if let Some(lu) = Lu::factor(b.view()) {
            let xb = lu.solve(rhs.view());
            self.beta = xb.to_vec();
        }
    }

    fn solution(&self, lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpSolution {
        let primal: Vec<f64> = (0..self.n)
            .map(|j| {
                let v = self.value(j);
                let (lo, up) = (self.lower[j], self.upper[j]);
                if v < lo && v >= lo - self.feas_tol {
                    lo
                } else if v > up && v <= up + self.feas_tol {
                    up
                } else {
                    v
                }
            })
            .collect();
        LpSolution {
            status,
            objective: lp.evaluate(&primal),
            primal,
            iterations,
        }
    }
}

struct Step {
    theta: f64,
    leaving: Option<(usize, bool)>,
}

/// Which aggregate the planner maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Output,
    Consumption,
}

fn check_dims(op: &LeontiefOperator, c: &Constraints) -> Result<()> {
    if op.n() != c.n() || c.f_max.len() != c.n() {
        return Err(Error::DimensionMismatch {
            what: "constraints",
            expected: op.n(),
            found: c.n(),
        });
    }
    Ok(())
}

/// Maximize `i'L f` over `f in [0, f^max]` with `L f in [0, x^max]`.
pub fn build_max_output_lp(op: &LeontiefOperator, c: &Constraints) -> Result<LinearProgram> {
    check_dims(op, c)?;
    let l = op.inverse();
    Ok(LinearProgram {
        objective: l.sum_axis(ndarray::Axis(0)).to_vec(),
        var_lower: vec![0.0; c.n()],
        var_upper: c.f_max.to_vec(),
        rows: l.clone(),
        row_lower: vec![0.0; c.n()],
        row_upper: c.x_max.to_vec(),
    })
}

/// Maximize `i'(I - A) x` over `x in [0, x^max]` with `(I - A) x in [0, f^max]`.
pub fn build_max_consumption_lp(op: &LeontiefOperator, c: &Constraints) -> Result<LinearProgram> {
    check_dims(op, c)?;
    let ima = identity_minus(op.coefficients().view());
    Ok(LinearProgram {
        objective: ima.sum_axis(ndarray::Axis(0)).to_vec(),
        var_lower: vec![0.0; c.n()],
        var_upper: c.x_max.to_vec(),
        rows: ima,
        row_lower: vec![0.0; c.n()],
        row_upper: c.f_max.to_vec(),
    })
}

/// Tolerance for grading LP allocations as feasible.
pub const LP_FEASIBILITY_TOL: f64 = 1e-8;

/// Best-case feasible allocation for the chosen objective.
pub fn optimal_allocation(
    op: &LeontiefOperator,
    c: &Constraints,
    objective: Objective,
) -> Result<Allocation> {
    let lp = match objective {
        Objective::Output => build_max_output_lp(op, c)?,
        Objective::Consumption => build_max_consumption_lp(op, c)?,
    };
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::IterationLimit => return Err(Error::IterationLimit(sol.iterations)),
    }
    let primal = Array1::from(sol.primal);
    let (x, f, method) = match objective {
        Objective::Output => (op.inverse().dot(&primal), primal, Method::LpOutput),
        Objective::Consumption => (
            primal.clone(),
            op.net_output(primal.view()),
            Method::LpConsumption,
        ),
    };
    Ok(Allocation {
        feasible: is_feasible(op, c, x.view(), f.view(), LP_FEASIBILITY_TOL),
        x,
        f,
        method,
        iterations: sol.iterations,
    })
}
