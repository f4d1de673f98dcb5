//! Bottom-up rationing dynamics.
//!
//! Starting from unconstrained demand `d = L f^max`, suppliers that cannot
//! meet their orders create input bottlenecks for their customers, which cut
//! production, which cuts deliveries to final consumers, which lowers demand
//! again. The loop runs until total demand stops changing.
//!
//! The four rules differ only in how a supplier's capacity ratio is computed:
//!
//! * proportional: every customer, final consumers included, gets the same
//!   share `x^max_i / d_i`;
//! * mixed: intermediate customers share proportionally and are served
//!   before final consumers;
//! * largest first: intermediate customers are served in order of their
//!   initial demand, final consumers last;
//! * random: like largest first with a random service order.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::economy::{Economy, LeontiefOperator};
use crate::error::{Error, Result};
use crate::shocks::{is_feasible, Allocation, Constraints, Method};
use crate::stats::Quantiles;

/// Name of the generator behind random rankings, recorded in outputs.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), streams split by SplitMix64";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Proportional,
    Mixed,
    LargestFirst,
    Random { seed: u64 },
}

impl Rule {
    pub fn method(self) -> Method {
        match self {
            Rule::Proportional => Method::Proportional,
            Rule::Mixed => Method::Mixed,
            Rule::LargestFirst => Method::LargestFirst,
            Rule::Random { .. } => Method::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationingOptions {
    /// Relative sup-norm change in total demand that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trajectory: bool,
}

impl Default for RationingOptions {
    fn default() -> Self {
        RationingOptions {
            tol: 1e-10,
            max_iter: 1_000_000,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub d: Array1<f64>,
    pub x: Array1<f64>,
    pub f: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationingResult {
    pub allocation: Allocation,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

impl RationingResult {
    /// Turns a run that hit `max_iter` into [`Error::NonConvergence`].
    pub fn require_converged(self) -> Result<RationingResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Per-supplier service order over customers with a positive input coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rankings(Vec<Vec<usize>>);

impl Rankings {
    /// Largest initial intermediate demand `a_ik d_k` first; ties by index.
    pub fn largest_first(a: &Array2<f64>, d: &Array1<f64>) -> Rankings {
        Rankings(
            (0..a.nrows())
                .map(|i| {
                    let mut customers = customers_of(a, i);
                    customers.sort_by(|&p, &q| {
                        let dp = a[[i, p]] * d[p];
                        let dq = a[[i, q]] * d[q];
                        dq.partial_cmp(&dp).expect("finite demand").then(p.cmp(&q))
                    });
                    customers
                })
                .collect(),
        )
    }

    /// Uniformly random order per supplier, drawn from one seeded stream.
    pub fn random(a: &Array2<f64>, seed: u64) -> Rankings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Rankings(
            (0..a.nrows())
                .map(|i| {
                    let mut customers = customers_of(a, i);
                    customers.shuffle(&mut rng);
                    customers
                })
                .collect(),
        )
    }

    pub fn of(&self, supplier: usize) -> &[usize] {
        &self.0[supplier]
    }
}

fn customers_of(a: &Array2<f64>, supplier: usize) -> Vec<usize> {
    (0..a.ncols()).filter(|&k| a[[supplier, k]] > 0.0).collect()
}

fn ratio(capacity: f64, demand: f64) -> f64 {
    if demand > 0.0 {
        capacity / demand
    } else {
        f64::INFINITY
    }
}

/// Input bottleneck factors `s` for the current demand.
fn bottlenecks(
    rule: Rule,
    a: &Array2<f64>,
    x_max: &Array1<f64>,
    d: &Array1<f64>,
    rankings: Option<&Rankings>,
) -> Array1<f64> {
    let n = d.len();
    let mut s = Array1::from_elem(n, 1.0_f64);
    match (rule, rankings) {
        (Rule::Proportional | Rule::Mixed, _) => {
            for i in 0..n {
                let demand = match rule {
                    Rule::Proportional => d[i],
                    _ => (0..n).map(|k| a[[i, k]] * d[k]).sum(),
                };
                let r = ratio(x_max[i], demand).min(1.0);
                if r < 1.0 {
                    for k in 0..n {
                        if a[[i, k]] > 0.0 && r < s[k] {
                            s[k] = r;
                        }
                    }
                }
            }
        }
        (Rule::LargestFirst | Rule::Random { .. }, Some(rankings)) => {
            for i in 0..n {
                let mut cumulative = 0.0;
                for &k in rankings.of(i) {
                    cumulative += a[[i, k]] * d[k];
                    let r = ratio(x_max[i], cumulative).min(1.0);
                    if r < s[k] {
                        s[k] = r;
                    }
                }
            }
        }
        (_, None) => unreachable!("priority rules need rankings"),
    }
    s
}

/// Runs one rationing rule to its fixed point.
///
/// On convergence the allocation reports `x = L f`, the output implied by the
/// final deliveries, and `f`, the deliveries of the last sweep.
pub fn ration(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    rule: Rule,
    opts: &RationingOptions,
) -> Result<RationingResult> {
    let n = op.n();
    if c.n() != n || e.n() != n {
        return Err(Error::DimensionMismatch {
            what: "constraints",
            expected: n,
            found: c.n(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let a = op.coefficients();
    let l = op.inverse();
    let floor = 1e-12 * e.total_output();

    let mut d = l.dot(&c.f_max);
    let rankings = match rule {
        Rule::LargestFirst => Some(Rankings::largest_first(a, &d)),
        Rule::Random { seed } => Some(Rankings::random(a, seed)),
        _ => None,
    };
    let mut trajectory = opts.record_trajectory.then(Vec::new);
    let mut residual = f64::INFINITY;
    let mut f = c.f_max.clone();

    for t in 1..=opts.max_iter {
        let s = bottlenecks(rule, a, &c.x_max, &d, rankings.as_ref());
        let x: Array1<f64> = (0..n).map(|i| c.x_max[i].min(s[i] * d[i])).collect();
        let intermediate = a.dot(&x);
        f = (0..n)
            .map(|i| c.f_max[i].min((x[i] - intermediate[i]).max(0.0)))
            .collect();
        let next = l.dot(&f);
        residual = (0..n)
            .map(|i| (next[i] - d[i]).abs() / d[i].max(floor))
            .fold(0.0, f64::max);
        if let Some(log) = trajectory.as_mut() {
            log.push(TrajectoryStep {
                t,
                d: d.clone(),
                x: x.clone(),
                f: f.clone(),
            });
        }
        d = next;
        if residual <= opts.tol {
            return Ok(RationingResult {
                allocation: Allocation {
                    feasible: is_feasible(op, c, d.view(), f.view(), 10.0 * opts.tol),
                    x: d,
                    f,
                    method: rule.method(),
                    iterations: t,
                },
                converged: true,
                iterations: t,
                residual,
                trajectory,
            });
        }
    }
    Ok(RationingResult {
        allocation: Allocation {
            feasible: false,
            x: d,
            f,
            method: rule.method(),
            iterations: opts.max_iter,
        },
        converged: false,
        iterations: opts.max_iter,
        residual,
        trajectory,
    })
}

pub fn ration_proportional(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    opts: &RationingOptions,
) -> Result<RationingResult> {
    ration(e, op, c, Rule::Proportional, opts)
}

pub fn ration_mixed(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    opts: &RationingOptions,
) -> Result<RationingResult> {
    ration(e, op, c, Rule::Mixed, opts)
}

pub fn ration_largest_first(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    opts: &RationingOptions,
) -> Result<RationingResult> {
    ration(e, op, c, Rule::LargestFirst, opts)
}

pub fn ration_random(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    seed: u64,
    opts: &RationingOptions,
) -> Result<RationingResult> {
    ration(e, op, c, Rule::Random { seed }, opts)
}

/// Derives an independent child seed; the same `(parent, stream)` pair always
/// yields the same child.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut z = parent ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub samples: usize,
    pub failures: usize,
    pub output: Quantiles,
    pub consumption: Quantiles,
    pub mean_x: Array1<f64>,
    pub mean_f: Array1<f64>,
    pub master_seed: u64,
}

/// Random rationing over `n_samples` seeds derived from `master_seed`.
///
/// Non-converged samples are counted in `failures` and left out of the
/// statistics.
pub fn ensemble_random(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    n_samples: usize,
    master_seed: u64,
    opts: &RationingOptions,
) -> Result<EnsembleStats> {
    if n_samples == 0 {
        return Err(Error::InvalidSpec(
            "ensemble needs at least one sample".into(),
        ));
    }
    let runs: Vec<RationingResult> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| ration_random(e, op, c, derive_seed(master_seed, k), opts))
        .collect::<Result<_>>()?;
    let converged: Vec<&Allocation> = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| &r.allocation)
        .collect();
    let failures = n_samples - converged.len();
    if converged.is_empty() {
        return Err(Error::NonConvergence {
            iterations: opts.max_iter,
            residual: runs.iter().map(|r| r.residual).fold(0.0, f64::max),
        });
    }
    let count = converged.len() as f64;
    let n = op.n();
    let mut mean_x = Array1::zeros(n);
    let mut mean_f = Array1::zeros(n);
    for a in &converged {
        mean_x += &a.x;
        mean_f += &a.f;
    }
    mean_x /= count;
    mean_f /= count;
    let outputs: Vec<f64> = converged.iter().map(|a| a.total_output()).collect();
    let consumptions: Vec<f64> = converged.iter().map(|a| a.total_consumption()).collect();
    Ok(EnsembleStats {
        samples: converged.len(),
        failures,
        output: Quantiles::of(&outputs).expect("nonempty"),
        consumption: Quantiles::of(&consumptions).expect("nonempty"),
        mean_x,
        mean_f,
        master_seed,
    })
}

/// Writes a trajectory as CSV, one row per iteration and industry.
pub fn write_trajectory<W: std::io::Write>(
    out: W,
    labels: &[String],
    trajectory: &[TrajectoryStep],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "industry", "d", "x", "f"])?;
    for step in trajectory {
        for (i, label) in labels.iter().enumerate() {
            w.write_record([
                step.t.to_string(),
                label.clone(),
                step.d[i].to_string(),
                step.x[i].to_string(),
                step.f[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
