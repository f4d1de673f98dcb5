//! Shock-magnitude and network-density sweeps over every propagation method.
//!
//! Work is split into independent units, one per (grid point, replicate).
//! Each unit gets a seed derived from the master seed and its indices, so the
//! merged table does not depend on the number of worker threads or on
//! scheduling order.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::economy::{coefficients, metrics, Economy, LeontiefOperator};
use crate::error::{Error, Result};
use crate::lp::{optimal_allocation, Objective};
use crate::meem::{classify, solve_meem, FlagCounts, IndustryFlags};
use crate::rationing::{derive_seed, ration, RationingOptions, Rule};
use crate::shocks::{
    direct_allocation, make_constraints, Allocation, Constraints, Method, ShockScenario,
};
use crate::stats::Quantiles;

/// Stream id separating link-removal draws from rationing seeds.
const REMOVAL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalMode {
    Random,
    SmallestFirst,
}

impl std::str::FromStr for RemovalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<RemovalMode> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(RemovalMode::Random),
            "smallest_first" => Ok(RemovalMode::SmallestFirst),
            other => Err(Error::InvalidSpec(format!(
                "unknown removal mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    /// `(α^S, α^D)` pairs for shock-magnitude sweeps.
    pub alphas: Vec<(f64, f64)>,
    /// Target densities for network-density sweeps.
    pub densities: Vec<f64>,
    pub removal: RemovalMode,
    pub repetitions: usize,
    /// Random-rationing draws per replicate.
    pub random_samples: usize,
    pub master_seed: u64,
    pub rationing: RationingOptions,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            methods: Method::ALL.to_vec(),
            alphas: vec![(1.0, 1.0)],
            densities: Vec::new(),
            removal: RemovalMode::Random,
            repetitions: 1,
            random_samples: 1,
            master_seed: 0,
            rationing: RationingOptions::default(),
            workers: None,
        }
    }
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidSpec("repetitions must be at least 1".into()));
        }
        if self.random_samples == 0 && self.methods.contains(&Method::Random) {
            return Err(Error::InvalidSpec(
                "random rationing needs at least one sample".into(),
            ));
        }
        if let Some(0) = self.workers {
            return Err(Error::InvalidSpec("worker count must be at least 1".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if let Some(&(s, d)) = self
            .alphas
            .iter()
            .find(|(s, d)| !in_unit(*s) || !in_unit(*d))
        {
            return Err(Error::OutOfRange {
                what: "alpha grid point".into(),
                value: if in_unit(s) { d } else { s },
            });
        }
        if let Some(&v) = self.densities.iter().find(|&&v| !in_unit(v)) {
            return Err(Error::OutOfRange {
                what: "density target".into(),
                value: v,
            });
        }
        Ok(())
    }

    fn install<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(work()),
            Some(k) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
                Ok(pool.install(work))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordStatus {
    Ok,
    NonConvergence,
    /// A MEEM solution that left `[0, x^max] x [0, f^max]`.
    Infeasible,
    /// The method failed on this unit; the message says why.
    Error(String),
    /// Link removal left an economy the methods cannot run on.
    Skipped(String),
}

impl RecordStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::NonConvergence => "non_convergence",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::Error(_) => "error",
            RecordStatus::Skipped(_) => "skipped",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            RecordStatus::Error(m) | RecordStatus::Skipped(m) => m,
            _ => "",
        }
    }

    /// Whether the record's numbers belong in aggregate statistics.
    pub fn is_usable(&self) -> bool {
        matches!(self, RecordStatus::Ok | RecordStatus::Infeasible)
    }
}

/// Structural state of a rebalanced economy in a density sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkMetrics {
    pub density: f64,
    pub avg_multiplier: f64,
    pub intermediate_share: f64,
    /// Total output after rebalancing over total output before any removal.
    pub output_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub grid_index: usize,
    pub alpha_supply: f64,
    pub alpha_demand: f64,
    pub density_target: Option<f64>,
    pub method: Method,
    pub replicate: usize,
    pub sample: usize,
    /// Total output over pre-shock total output.
    pub output: f64,
    /// Total consumption over pre-shock total consumption.
    pub consumption: f64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub status: RecordStatus,
    pub meem_flags: Option<FlagCounts>,
    pub network: Option<NetworkMetrics>,
}

/// One method evaluated on one set of constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub sample: usize,
    pub allocation: Option<Allocation>,
    pub converged: bool,
    pub status: RecordStatus,
    /// Per-industry feasibility flags, MEEM only.
    pub meem_diagnostics: Option<Vec<IndustryFlags>>,
}

impl MethodRun {
    fn failed(method: Method, sample: usize, err: Error) -> MethodRun {
        MethodRun {
            method,
            sample,
            allocation: None,
            converged: false,
            status: RecordStatus::Error(err.to_string()),
            meem_diagnostics: None,
        }
    }

    fn skipped(method: Method, reason: &str) -> MethodRun {
        MethodRun {
            status: RecordStatus::Skipped(reason.to_string()),
            ..MethodRun::failed(method, 0, Error::InvalidSpec(String::new()))
        }
    }
}

/// Evaluates every requested method on identical constraints.
///
/// Random rationing runs `random_samples` times with seeds derived from
/// `seed`; all other methods run once.
#[allow(clippy::too_many_arguments)]
pub fn run_methods(
    e: &Economy,
    op: &LeontiefOperator,
    c: &Constraints,
    s: &ShockScenario,
    methods: &[Method],
    seed: u64,
    random_samples: usize,
    opts: &RationingOptions,
) -> Vec<MethodRun> {
    let mut runs = Vec::new();
    for &method in methods {
        let rationed = |rule: Rule, sample: usize| match ration(e, op, c, rule, opts) {
            Ok(r) => MethodRun {
                method,
                sample,
                converged: r.converged,
                status: if r.converged {
                    RecordStatus::Ok
                } else {
                    RecordStatus::NonConvergence
                },
                allocation: Some(r.allocation),
                meem_diagnostics: None,
            },
            Err(err) => MethodRun::failed(method, sample, err),
        };
        let settled = |result: Result<Allocation>| match result {
            Ok(a) => MethodRun {
                method,
                sample: 0,
                allocation: Some(a),
                converged: true,
                status: RecordStatus::Ok,
                meem_diagnostics: None,
            },
            Err(err) => MethodRun::failed(method, 0, err),
        };
        match method {
            Method::Direct => runs.push(settled(Ok(direct_allocation(op, c)))),
            Method::LpOutput => runs.push(settled(optimal_allocation(op, c, Objective::Output))),
            Method::LpConsumption => {
                runs.push(settled(optimal_allocation(op, c, Objective::Consumption)))
            }
            Method::Proportional => runs.push(rationed(Rule::Proportional, 0)),
            Method::Mixed => runs.push(rationed(Rule::Mixed, 0)),
            Method::LargestFirst => runs.push(rationed(Rule::LargestFirst, 0)),
            Method::Random => {
                for k in 0..random_samples {
                    let rule = Rule::Random {
                        seed: derive_seed(seed, k as u64),
                    };
                    runs.push(rationed(rule, k));
                }
            }
            Method::Meem => {
                let solved = classify(e, s).and_then(|p| solve_meem(op, c, &p));
                runs.push(match solved {
                    Ok(sol) => MethodRun {
                        method,
                        sample: 0,
                        converged: true,
                        status: if sol.feasible {
                            RecordStatus::Ok
                        } else {
                            RecordStatus::Infeasible
                        },
                        meem_diagnostics: Some(sol.diagnostics.clone()),
                        allocation: Some(sol.to_allocation()),
                    },
                    Err(err) => MethodRun::failed(method, 0, err),
                });
            }
        }
    }
    runs
}

/// Seed of one work unit; random-rationing sample `k` uses
/// `derive_seed(unit_seed(..), k)`.
pub fn unit_seed(master: u64, grid_index: usize, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, grid_index as u64), replicate as u64)
}

struct Baseline {
    output: f64,
    consumption: f64,
}

impl Baseline {
    fn of(e: &Economy) -> Result<Baseline> {
        let output = e.total_output();
        let consumption = e.total_consumption();
        if !(output > 0.0) {
            return Err(Error::ZeroAggregate("gross output"));
        }
        if !(consumption > 0.0) {
            return Err(Error::ZeroAggregate("final consumption"));
        }
        Ok(Baseline {
            output,
            consumption,
        })
    }
}

struct UnitContext {
    grid_index: usize,
    alpha_supply: f64,
    alpha_demand: f64,
    density_target: Option<f64>,
    replicate: usize,
    network: Option<NetworkMetrics>,
}

impl UnitContext {
    fn record(&self, base: &Baseline, run: MethodRun) -> SweepRecord {
        let (output, consumption, feasible, iterations) = match &run.allocation {
            Some(a) => (
                a.total_output() / base.output,
                a.total_consumption() / base.consumption,
                a.feasible,
                a.iterations,
            ),
            None => (f64::NAN, f64::NAN, false, 0),
        };
        SweepRecord {
            grid_index: self.grid_index,
            alpha_supply: self.alpha_supply,
            alpha_demand: self.alpha_demand,
            density_target: self.density_target,
            method: run.method,
            replicate: self.replicate,
            sample: run.sample,
            output,
            consumption,
            feasible,
            converged: run.converged,
            iterations,
            status: run.status,
            meem_flags: run.meem_diagnostics.as_deref().map(FlagCounts::tally),
            network: self.network,
        }
    }
}

fn method_rank(methods: &[Method], m: Method) -> usize {
    methods.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

fn sort_records(records: &mut [SweepRecord], methods: &[Method]) {
    records.sort_by_key(|r| {
        (
            r.grid_index,
            method_rank(methods, r.method),
            r.replicate,
            r.sample,
        )
    });
}

/// Methods evaluated on a single scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub constraints: Constraints,
    pub runs: Vec<MethodRun>,
    pub records: Vec<SweepRecord>,
}

/// Runs every method once on `s` as given, seeded like the first grid point
/// and replicate of a sweep. The grids in `spec` are ignored.
pub fn run_scenario(e: &Economy, s: &ShockScenario, spec: &SweepSpec) -> Result<ScenarioRun> {
    spec.validate()?;
    let base = Baseline::of(e)?;
    let op = coefficients(e)?;
    let c = make_constraints(e, s)?;
    let runs = run_methods(
        e,
        &op,
        &c,
        s,
        &spec.methods,
        unit_seed(spec.master_seed, 0, 0),
        spec.random_samples,
        &spec.rationing,
    );
    let ctx = UnitContext {
        grid_index: 0,
        alpha_supply: s.alpha_supply(),
        alpha_demand: s.alpha_demand(),
        density_target: None,
        replicate: 0,
        network: None,
    };
    let records = runs
        .iter()
        .map(|run| ctx.record(&base, run.clone()))
        .collect();
    Ok(ScenarioRun {
        constraints: c,
        runs,
        records,
    })
}

/// Evaluates all methods over a grid of shock scaling factors.
pub fn sweep_scale(e: &Economy, s: &ShockScenario, spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    if spec.alphas.is_empty() {
        return Err(Error::InvalidSpec("alpha grid is empty".into()));
    }
    let base = Baseline::of(e)?;
    let op = coefficients(e)?;
    let units: Vec<(usize, usize)> = (0..spec.alphas.len())
        .flat_map(|g| (0..spec.repetitions).map(move |r| (g, r)))
        .collect();

    let per_unit = spec.install(|| {
        units
            .par_iter()
            .map(|&(g, rep)| {
                let (a_s, a_d) = spec.alphas[g];
                let scaled = s.scaled(a_s, a_d)?;
                let c = make_constraints(e, &scaled)?;
                let ctx = UnitContext {
                    grid_index: g,
                    alpha_supply: a_s,
                    alpha_demand: a_d,
                    density_target: None,
                    replicate: rep,
                    network: None,
                };
                let runs = run_methods(
                    e,
                    &op,
                    &c,
                    &scaled,
                    &spec.methods,
                    unit_seed(spec.master_seed, g, rep),
                    spec.random_samples,
                    &spec.rationing,
                );
                Ok(runs
                    .into_iter()
                    .map(|run| ctx.record(&base, run))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<Vec<SweepRecord>>>>()
    })??;

    let mut records: Vec<SweepRecord> = per_unit.into_iter().flatten().collect();
    sort_records(&mut records, &spec.methods);
    Ok(records)
}

/// Number of links to delete to move from `current` density to `target`.
pub fn links_to_remove(current: f64, target: f64, n: usize) -> usize {
    ((current - target) * (n * n) as f64).round().max(0.0) as usize
}

/// Evaluates all methods on economies thinned to each target density.
///
/// Per target and replicate: delete links, rebalance, rebuild `A`, `L` and
/// the ceilings from the rebalanced output, then run every method. Random
/// removal draws a fresh link set per replicate; smallest-first removal is
/// deterministic and runs a single replicate.
pub fn sweep_density(e: &Economy, s: &ShockScenario, spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    if spec.densities.is_empty() {
        return Err(Error::InvalidSpec("density grid is empty".into()));
    }
    let current = e.density();
    if let Some(&t) = spec.densities.iter().find(|&&t| t > current + 1e-12) {
        return Err(Error::InvalidSpec(format!(
            "density target {t} exceeds current density {current}"
        )));
    }
    let base = Baseline::of(e)?;
    let replicates = match spec.removal {
        RemovalMode::Random => spec.repetitions,
        RemovalMode::SmallestFirst => 1,
    };
    let n = e.n();
    let links = e.positive_links();
    let units: Vec<(usize, usize)> = (0..spec.densities.len())
        .flat_map(|g| (0..replicates).map(move |r| (g, r)))
        .collect();

    let per_unit = spec.install(|| {
        units
            .par_iter()
            .map(|&(g, rep)| {
                let target = spec.densities[g];
                let seed = unit_seed(spec.master_seed, g, rep);
                let k = links_to_remove(current, target, n).min(links.len());
                let thinned = if k == 0 {
                    e.clone()
                } else {
                    let chosen = match spec.removal {
                        RemovalMode::Random => {
                            let mut rng =
                                ChaCha8Rng::seed_from_u64(derive_seed(seed, REMOVAL_STREAM));
                            let mut picked: Vec<(usize, usize)> =
                                rand::seq::index::sample(&mut rng, links.len(), k)
                                    .into_iter()
                                    .map(|idx| links[idx])
                                    .collect();
                            picked.sort_unstable();
                            picked
                        }
                        RemovalMode::SmallestFirst => e.smallest_links(k)?,
                    };
                    e.remove_links(&chosen)
                };
                let mut ctx = UnitContext {
                    grid_index: g,
                    alpha_supply: s.alpha_supply(),
                    alpha_demand: s.alpha_demand(),
                    density_target: Some(target),
                    replicate: rep,
                    network: None,
                };
                let op = match coefficients(&thinned) {
                    Ok(op) => op,
                    Err(err) => {
                        let reason = err.to_string();
                        return Ok(spec
                            .methods
                            .iter()
                            .map(|&method| ctx.record(&base, MethodRun::skipped(method, &reason)))
                            .collect());
                    }
                };
                let m = metrics(&thinned, &op);
                ctx.network = Some(NetworkMetrics {
                    density: m.density,
                    avg_multiplier: m.avg_multiplier,
                    intermediate_share: m.intermediate_share,
                    output_ratio: m.total_output / base.output,
                });
                let c = make_constraints(&thinned, s)?;
                let runs = run_methods(
                    &thinned,
                    &op,
                    &c,
                    s,
                    &spec.methods,
                    seed,
                    spec.random_samples,
                    &spec.rationing,
                );
                Ok(runs
                    .into_iter()
                    .map(|run| ctx.record(&base, run))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<Vec<SweepRecord>>>>()
    })??;

    let mut records: Vec<SweepRecord> = per_unit.into_iter().flatten().collect();
    sort_records(&mut records, &spec.methods);
    Ok(records)
}

/// Aggregates for one (grid point, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub grid_index: usize,
    pub alpha_supply: f64,
    pub alpha_demand: f64,
    pub density_target: Option<f64>,
    pub method: Method,
    /// Records entering the statistics.
    pub count: usize,
    /// Records left out: non-converged, failed or skipped.
    pub failures: usize,
    /// Records included in the statistics but flagged infeasible.
    pub infeasible: usize,
    pub output: Option<Quantiles>,
    pub consumption: Option<Quantiles>,
}

/// Mean and quartiles per grid point and method, pooling replicates and
/// random-rationing samples.
pub fn summarize(table: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(usize, Method)> = Vec::new();
    let mut groups: BTreeMap<(usize, Method), Vec<&SweepRecord>> = BTreeMap::new();
    for r in table {
        let key = (r.grid_index, r.method);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order.sort_by_key(|&(g, _)| g);
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let first = rows[0];
            let usable: Vec<&&SweepRecord> = rows.iter().filter(|r| r.status.is_usable()).collect();
            let outputs: Vec<f64> = usable.iter().map(|r| r.output).collect();
            let consumptions: Vec<f64> = usable.iter().map(|r| r.consumption).collect();
            SummaryRow {
                grid_index: key.0,
                alpha_supply: first.alpha_supply,
                alpha_demand: first.alpha_demand,
                density_target: first.density_target,
                method: key.1,
                count: usable.len(),
                failures: rows.len() - usable.len(),
                infeasible: usable.iter().filter(|r| !r.feasible).count(),
                output: Quantiles::of(&outputs),
                consumption: Quantiles::of(&consumptions),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use approx::assert_abs_diff_eq;

    fn spec(methods: &[Method]) -> SweepSpec {
        SweepSpec {
            methods: methods.to_vec(),
            random_samples: 4,
            master_seed: 99,
            ..SweepSpec::default()
        }
    }

    fn value(table: &[SweepRecord], g: usize, m: Method) -> f64 {
        table
            .iter()
            .find(|r| r.grid_index == g && r.method == m)
            .unwrap()
            .output
    }

    #[test]
    fn zero_shock_recovers_baseline_for_all_methods() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(0.0, 0.0)];
        let table = sweep_scale(&chain3(), &chain3_scenario(), &sp).unwrap();
        assert_eq!(table.len(), 7 + 4);
        for r in &table {
            assert_abs_diff_eq!(r.output, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.consumption, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chain3_full_supply_shock() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(1.0, 0.0)];
        let t = sweep_scale(&chain3(), &chain3_scenario(), &sp).unwrap();
        assert_abs_diff_eq!(value(&t, 0, Method::Proportional), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(value(&t, 0, Method::LargestFirst), 0.625, epsilon = 1e-8);
        assert_abs_diff_eq!(
            value(&t, 0, Method::Mixed),
            50.0 / 3.0 / 24.0,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(value(&t, 0, Method::LpOutput), 17.5 / 24.0, epsilon = 1e-8);
        let meem = t.iter().find(|r| r.method == Method::Meem).unwrap();
        assert_eq!(meem.status, RecordStatus::Infeasible);
        assert_eq!(meem.meem_flags.unwrap().negative_consumption, 1);
    }

    #[test]
    fn demand_only_line_is_affine_and_shared() {
        let mut sp = spec(&[
            Method::LpOutput,
            Method::Proportional,
            Method::Mixed,
            Method::LargestFirst,
            Method::Random,
        ]);
        sp.alphas = (0..=4).map(|k| (0.0, k as f64 / 4.0)).collect();
        let s = ShockScenario::new(
            ndarray::array![0.5, 0.0, 0.0],
            ndarray::array![0.2, 0.4, 0.1],
        )
        .unwrap();
        let t = sweep_scale(&chain3(), &s, &sp).unwrap();
        let lp: Vec<f64> = (0..5).map(|g| value(&t, g, Method::LpOutput)).collect();
        for r in &t {
            assert_abs_diff_eq!(r.output, lp[r.grid_index], epsilon = 1e-8);
        }
        let slope = lp[1] - lp[0];
        for (g, v) in lp.iter().enumerate() {
            assert_abs_diff_eq!(*v, lp[0] + slope * g as f64, epsilon = 1e-8);
        }
    }

    #[test]
    fn means_do_not_rise_with_supply_shock() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)];
        sp.random_samples = 16;
        let summary = summarize(&sweep_scale(&chain3(), &chain3_scenario(), &sp).unwrap());
        for m in Method::ALL {
            let means: Vec<f64> = summary
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.output.unwrap().mean)
                .collect();
            assert_eq!(means.len(), 3);
            assert!(
                means.windows(2).all(|w| w[1] <= w[0] + 1e-12),
                "{m}: {means:?}"
            );
        }
    }

    #[test]
    fn density_target_equal_to_current_matches_scale_sweep() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(1.0, 1.0)];
        sp.densities = vec![chain3().density()];
        let e = chain3();
        let s = chain3_scenario();
        let scale = sweep_scale(&e, &s, &sp).unwrap();
        let density = sweep_density(&e, &s, &sp).unwrap();
        assert_eq!(scale.len(), density.len());
        for (a, b) in scale.iter().zip(&density) {
            assert_eq!(a.method, b.method);
            assert_eq!(a.output.to_bits(), b.output.to_bits());
            assert_eq!(a.consumption.to_bits(), b.consumption.to_bits());
        }
    }

    #[test]
    fn density_zero_collapses_to_direct_minimum() {
        let mut sp = spec(&Method::ALL);
        sp.densities = vec![0.0];
        sp.repetitions = 3;
        let e = chain3();
        let t = sweep_density(&e, &ShockScenario::zero(3), &sp).unwrap();
        for r in &t {
            assert_abs_diff_eq!(r.output, 18.0 / 24.0, epsilon = 1e-9);
            assert_eq!(r.network.unwrap().density, 0.0);
        }
        // with the upstream supplier halved, its rebalanced capacity is 2
        let t = sweep_density(&e, &chain3_scenario(), &sp).unwrap();
        for r in &t {
            assert_abs_diff_eq!(r.output, 16.0 / 24.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn smallest_first_removal_on_pair2() {
        let mut sp = spec(&[Method::Direct]);
        sp.densities = vec![0.25];
        sp.removal = RemovalMode::SmallestFirst;
        sp.repetitions = 5;
        let e = pair2();
        let t = sweep_density(&e, &ShockScenario::zero(2), &sp).unwrap();
        assert_eq!(t.len(), 1);
        let net = t[0].network.unwrap();
        assert_eq!(net.density, 0.25);
        assert_abs_diff_eq!(net.output_ratio, 16.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(net.intermediate_share, 3.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn single_scenario_matches_first_grid_point() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(0.8, 0.4)];
        let e = chain3();
        let s = chain3_scenario();
        let single = run_scenario(&e, &s.scaled(0.8, 0.4).unwrap(), &sp).unwrap();
        let swept = sweep_scale(&e, &s, &sp).unwrap();
        assert_eq!(single.records, swept);
        assert_eq!(single.runs.len(), swept.len());
    }

    #[test]
    fn density_above_current_is_rejected() {
        let mut sp = spec(&[Method::Direct]);
        sp.densities = vec![0.9];
        assert!(matches!(
            sweep_density(&pair2(), &ShockScenario::zero(2), &sp),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let e = pair2();
        let s = ShockScenario::zero(2);
        let mut sp = spec(&[Method::Direct]);
        sp.alphas = vec![];
        assert!(sweep_scale(&e, &s, &sp).is_err());
        sp.alphas = vec![(1.5, 0.0)];
        assert!(matches!(
            sweep_scale(&e, &s, &sp),
            Err(Error::OutOfRange { .. })
        ));
        sp.alphas = vec![(0.5, 0.0)];
        sp.repetitions = 0;
        assert!(sweep_scale(&e, &s, &sp).is_err());
    }

    #[test]
    fn worker_count_does_not_change_table() {
        let mut sp = spec(&Method::ALL);
        sp.alphas = vec![(0.3, 0.1), (0.7, 0.2), (1.0, 1.0)];
        sp.repetitions = 3;
        sp.workers = Some(1);
        let e = chain3();
        let s = chain3_scenario();
        let one = sweep_scale(&e, &s, &sp).unwrap();
        sp.workers = Some(8);
        let eight = sweep_scale(&e, &s, &sp).unwrap();
        assert_eq!(format!("{one:?}"), format!("{eight:?}"));
    }

    #[test]
    fn summary_of_simple_tables() {
        let mut sp = spec(&[Method::Proportional]);
        sp.alphas = vec![(1.0, 0.0)];
        let mut table = sweep_scale(&chain3(), &chain3_scenario(), &sp).unwrap();
        let one = summarize(&table);
        assert_eq!(one.len(), 1);
        let q = one[0].output.unwrap();
        assert_eq!((q.mean, q.q25, q.q50, q.q75), (0.5, 0.5, 0.5, 0.5));

        let mut second = table[0].clone();
        second.replicate = 1;
        table[0].output = 0.4;
        second.output = 0.6;
        table.push(second);
        let q = summarize(&table)[0].output.unwrap();
        assert_abs_diff_eq!(q.mean, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.q50, 0.5, epsilon = 1e-15);
        assert!(summarize(&[]).is_empty());
    }

    #[test]
    fn non_converged_records_are_counted_not_averaged() {
        let mut sp = spec(&[Method::LargestFirst]);
        sp.alphas = vec![(1.0, 0.0)];
        sp.rationing.max_iter = 3;
        let table = sweep_scale(&chain3(), &chain3_scenario(), &sp).unwrap();
        assert_eq!(table[0].status, RecordStatus::NonConvergence);
        let row = &summarize(&table)[0];
        assert_eq!(row.failures, 1);
        assert_eq!(row.count, 0);
        assert!(row.output.is_none());
    }

    #[test]
    fn links_to_remove_rounds() {
        assert_eq!(links_to_remove(0.5, 0.25, 2), 1);
        assert_eq!(links_to_remove(2.0 / 9.0, 0.0, 3), 2);
        assert_eq!(links_to_remove(0.3, 0.3, 10), 0);
    }
}
