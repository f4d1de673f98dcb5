//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or validation errors, 2 when a
//! computation fails.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::economy::{coefficients, metrics, Economy};
use crate::error::Error;
use crate::experiments::{
    run_scenario, summarize, sweep_density, sweep_scale, unit_seed, RemovalMode, SummaryRow,
    SweepSpec,
};
use crate::io::{
    parse_economy_reader, parse_shocks_reader, write_constraints, write_results, AllocationTable,
    Provenance, ShockOptions, ECONOMY_SCHEMA, SHOCKS_SCHEMA,
};
use crate::lp::{build_max_consumption_lp, build_max_output_lp};
use crate::rationing::{derive_seed, ration, write_trajectory, RationingOptions, Rule};
use crate::shocks::{aggregate_shocks, make_constraints, Method, ShockScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "shockprop",
    version,
    about = "Propagate supply and demand shocks through an input-output economy",
    after_help = format!("{ECONOMY_SCHEMA}\n{SHOCKS_SCHEMA}")
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the inputs and report on the economy's invariants.
    Validate(ValidateArgs),
    /// Write per-industry shocks and production/consumption ceilings.
    Shock(ShockArgs),
    /// Evaluate the methods on one scenario.
    Run(RunArgs),
    /// Evaluate the methods over a grid of shock scaling factors.
    SweepScale(SweepScaleArgs),
    /// Evaluate the methods on economies thinned to target densities.
    SweepDensity(SweepDensityArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Economy CSV.
    #[arg(long)]
    economy: PathBuf,
    /// Shock CSV; without it every industry is unshocked.
    #[arg(long)]
    shocks: Option<PathBuf>,
    /// Shock values are percentages.
    #[arg(long)]
    percent: bool,
    /// Leave industries missing from the shock file unshocked.
    #[arg(long)]
    allow_missing: bool,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// `all`, or a comma-separated list of direct, lp_output, lp_consumption,
    /// proportional, mixed, largest_first, random, meem.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Master seed for random rankings and link removal.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random-rationing draws per scenario.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Relative convergence tolerance of the rationing loop.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap of the rationing loop.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Worker threads for sweeps (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct ShockArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha_supply: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_demand: f64,
    /// Directory for constraints.csv; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    methods: MethodArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha_supply: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_demand: f64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write both linear programs in plain text.
    #[arg(long)]
    dump_lp: bool,
    /// Also write the iteration history of each rationing rule.
    #[arg(long)]
    trajectory: bool,
}

#[derive(Debug, Args)]
struct SweepScaleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    methods: MethodArgs,
    /// Supply scaling grid: `a,b,c` or `start:stop:step`.
    #[arg(long, default_value = "1", conflicts_with = "alpha")]
    alpha_supply: String,
    /// Demand scaling grid: `a,b,c` or `start:stop:step`.
    #[arg(long, default_value = "1", conflicts_with = "alpha")]
    alpha_demand: String,
    /// Common grid scaling supply and demand shocks equally.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepDensityArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    methods: MethodArgs,
    /// Target densities: `a,b,c` or `start:stop:step`.
    #[arg(long)]
    densities: String,
    /// `random` or `smallest_first`.
    #[arg(long, default_value = "random")]
    removal: String,
    /// Removal draws per density level (random removal only).
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha_supply: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_demand: f64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

/// Parses `a,b,c` or `start:stop:step`. The step must divide the range.
pub fn parse_grid(text: &str) -> crate::Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidSpec(format!("grid {text:?}: {msg}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{s:?} is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need start <= stop and a positive step".into()));
            }
            let steps = ((stop - start) / step).round();
            if (steps * step - (stop - start)).abs() > 1e-9 * step.max(stop - start) {
                return Err(bad("step does not divide the range".into()));
            }
            let k = steps as usize;
            if k == 0 {
                return Ok(vec![start]);
            }
            Ok((0..=k)
                .map(|i| start + (stop - start) * i as f64 / k as f64)
                .collect())
        }
        [_] => text.split(',').map(number).collect(),
        _ => Err(bad("expected a list or start:stop:step".into())),
    }
}

/// `all` or a comma-separated list; an empty string selects no method.
pub fn parse_methods(text: &str) -> crate::Result<Vec<Method>> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut out: Vec<Method> = Vec::new();
    for part in text.split(',') {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Unreadable inputs count as validation failures.
fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path)
        .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())).into())
}

struct Inputs {
    economy: Economy,
    scenario: ShockScenario,
    provenance: Provenance,
}

fn load(input: &InputArgs, command: &str) -> Result<Inputs> {
    let bytes = read(&input.economy)?;
    let economy = parse_economy_reader(bytes.as_slice())
        .with_context(|| format!("in economy file {}", input.economy.display()))?;
    let mut provenance = Provenance::new(command).with_digest("economy", &bytes);
    let scenario = match &input.shocks {
        None => ShockScenario::zero(economy.n()),
        Some(path) => {
            let bytes = read(path)?;
            let opts = ShockOptions {
                percent: input.percent,
                allow_missing: input.allow_missing,
            };
            let file = parse_shocks_reader(bytes.as_slice(), economy.labels(), opts)
                .with_context(|| format!("in shock file {}", path.display()))?;
            for w in &file.warnings {
                eprintln!("warning: {w}");
            }
            provenance = provenance
                .with_digest("shocks", &bytes)
                .with("percent", input.percent)
                .with("allow_missing", input.allow_missing);
            file.scenario
        }
    };
    Ok(Inputs {
        economy,
        scenario,
        provenance,
    })
}

impl MethodArgs {
    fn spec(&self) -> Result<SweepSpec> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec("--tol must be positive".into()).into());
        }
        Ok(SweepSpec {
            methods: parse_methods(&self.methods)?,
            random_samples: self.samples,
            master_seed: self.seed,
            rationing: RationingOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                record_trajectory: false,
            },
            workers: self.workers,
            ..SweepSpec::default()
        })
    }

    fn stamp(&self, spec: &SweepSpec, p: Provenance) -> Provenance {
        let names: Vec<&str> = spec.methods.iter().map(|m| m.as_str()).collect();
        p.with("methods", names.join(","))
            .with("seed", spec.master_seed)
            .with("samples", spec.random_samples)
            .with("tol", spec.rationing.tol)
            .with("max_iter", spec.rationing.max_iter)
    }
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:>5} {:>7} {:>7} {:>15} {:>9} {:>9} {:>6}",
        "grid", "alpha_s", "alpha_d", "method", "output", "consump", "fail"
    );
    for r in rows {
        let mean = |q: Option<crate::stats::Quantiles>| q.map_or(f64::NAN, |q| q.mean);
        println!(
            "{:>5} {:>7.3} {:>7.3} {:>15} {:>9.4} {:>9.4} {:>6}",
            r.grid_index,
            r.alpha_supply,
            r.alpha_demand,
            r.method.as_str(),
            mean(r.output),
            mean(r.consumption),
            r.failures
        );
    }
}

fn validate(args: &ValidateArgs) -> Result<i32> {
    let inputs = load(&args.input, "validate")?;
    let e = &inputs.economy;
    println!("industries          {}", e.n());
    println!("links               {}", e.link_count());
    println!("density             {}", e.density());
    println!("total output        {}", e.total_output());
    println!("total consumption   {}", e.total_consumption());
    let negative_va: Vec<&str> = e
        .labels()
        .iter()
        .zip(e.value_added())
        .filter(|(_, &v)| v < 0.0)
        .map(|(l, _)| l.as_str())
        .collect();
    if !negative_va.is_empty() {
        println!("negative value added in {}", negative_va.join(", "));
    }
    let op = match coefficients(e) {
        Ok(op) => op,
        Err(err) => {
            println!("leontief inverse    unavailable: {err}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let m = metrics(e, &op);
    println!("avg multiplier      {}", m.avg_multiplier);
    println!("intermediate share  {}", m.intermediate_share);
    if args.input.shocks.is_some() {
        let c = make_constraints(e, &inputs.scenario)?;
        let (s, d) = aggregate_shocks(e, &c)?;
        println!("aggregate supply shock  {s}");
        println!("aggregate demand shock  {d}");
    }
    println!("ok");
    Ok(EXIT_OK)
}

fn shock(args: &ShockArgs) -> Result<i32> {
    let inputs = load(&args.input, "shock")?;
    let e = &inputs.economy;
    let s = inputs
        .scenario
        .scaled(args.alpha_supply, args.alpha_demand)?;
    let c = make_constraints(e, &s)?;
    let (agg_s, agg_d) = aggregate_shocks(e, &c)?;
    let prov = inputs
        .provenance
        .with("alpha_supply", args.alpha_supply)
        .with("alpha_demand", args.alpha_demand);
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("constraints.csv");
            let mut out = io::BufWriter::new(
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            );
            write_constraints(&mut out, &prov, e, &s, &c)?;
            out.flush()?;
            println!("aggregate supply shock  {agg_s}");
            println!("aggregate demand shock  {agg_d}");
            println!("wrote {}", path.display());
        }
        None => {
            write_constraints(io::stdout().lock(), &prov, e, &s, &c)?;
            eprintln!("aggregate supply shock  {agg_s}");
            eprintln!("aggregate demand shock  {agg_d}");
        }
    }
    Ok(EXIT_OK)
}

fn create_file(path: &Path) -> Result<io::BufWriter<fs::File>> {
    Ok(io::BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(args: &RunArgs) -> Result<i32> {
    let inputs = load(&args.input, "run")?;
    let e = &inputs.economy;
    let spec = args.methods.spec()?;
    let s = inputs
        .scenario
        .scaled(args.alpha_supply, args.alpha_demand)?;
    let result = run_scenario(e, &s, &spec)?;
    let prov = args
        .methods
        .stamp(&spec, inputs.provenance)
        .with("alpha_supply", args.alpha_supply)
        .with("alpha_demand", args.alpha_demand);
    let table = AllocationTable {
        labels: e.labels(),
        constraints: &result.constraints,
        runs: &result.runs,
    };
    let written = write_results(&args.out, &prov, Some(table), &result.records)
        .with_context(|| format!("writing results to {}", args.out.display()))?;

    if args.dump_lp {
        let op = coefficients(e)?;
        let c = &result.constraints;
        for (name, lp) in [
            ("lp_output.txt", build_max_output_lp(&op, c)?),
            ("lp_consumption.txt", build_max_consumption_lp(&op, c)?),
        ] {
            let path = args.out.join(name);
            fs::write(&path, lp.to_string())
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if args.trajectory {
        let op = coefficients(e)?;
        let opts = RationingOptions {
            record_trajectory: true,
            ..spec.rationing
        };
        let seed = derive_seed(unit_seed(spec.master_seed, 0, 0), 0);
        for &m in spec.methods.iter().filter(|m| m.is_rationing()) {
            let rule = match m {
                Method::Proportional => Rule::Proportional,
                Method::Mixed => Rule::Mixed,
                Method::LargestFirst => Rule::LargestFirst,
                _ => Rule::Random { seed },
            };
            let r = ration(e, &op, &result.constraints, rule, &opts)?;
            let path = args.out.join(format!("trajectory_{m}.csv"));
            let mut out = create_file(&path)?;
            write_trajectory(&mut out, e.labels(), r.trajectory.as_deref().unwrap_or(&[]))?;
            out.flush()?;
        }
    }

    for run in &result.runs {
        if let crate::experiments::RecordStatus::Error(msg) = &run.status {
            eprintln!("warning: {} failed: {msg}", run.method);
        }
    }
    print_summary(&summarize(&result.records));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn sweep_scale_cmd(args: &SweepScaleArgs) -> Result<i32> {
    let inputs = load(&args.input, "sweep-scale")?;
    let mut spec = args.methods.spec()?;
    let alphas: Vec<(f64, f64)> = match &args.alpha {
        Some(grid) => parse_grid(grid)?.into_iter().map(|a| (a, a)).collect(),
        None => {
            let supply = parse_grid(&args.alpha_supply)?;
            let demand = parse_grid(&args.alpha_demand)?;
            supply
                .iter()
                .flat_map(|&s| demand.iter().map(move |&d| (s, d)))
                .collect()
        }
    };
    spec.alphas = alphas;
    spec.repetitions = args.repetitions;
    let records = sweep_scale(&inputs.economy, &inputs.scenario, &spec)?;
    let grid = match &args.alpha {
        Some(g) => format!("alpha={g}"),
        None => format!(
            "alpha_supply={} alpha_demand={}",
            args.alpha_supply, args.alpha_demand
        ),
    };
    let prov = args
        .methods
        .stamp(&spec, inputs.provenance)
        .with("grid", grid)
        .with("repetitions", spec.repetitions);
    let written = write_results(&args.out, &prov, None, &records)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    print_summary(&summarize(&records));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn sweep_density_cmd(args: &SweepDensityArgs) -> Result<i32> {
    let inputs = load(&args.input, "sweep-density")?;
    let mut spec = args.methods.spec()?;
    spec.densities = parse_grid(&args.densities)?;
    spec.removal = args.removal.parse::<RemovalMode>()?;
    spec.repetitions = args.repetitions;
    let s = inputs
        .scenario
        .scaled(args.alpha_supply, args.alpha_demand)?;
    let records = sweep_density(&inputs.economy, &s, &spec)?;
    let prov = args
        .methods
        .stamp(&spec, inputs.provenance)
        .with("alpha_supply", args.alpha_supply)
        .with("alpha_demand", args.alpha_demand)
        .with("densities", &args.densities)
        .with(
            "removal",
            args.removal.trim().to_ascii_lowercase().replace('-', "_"),
        )
        .with("repetitions", spec.repetitions);
    let written = write_results(&args.out, &prov, None, &records)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    let skipped = records
        .iter()
        .filter(|r| matches!(r.status, crate::experiments::RecordStatus::Skipped(_)))
        .count();
    if skipped > 0 {
        eprintln!("warning: {skipped} records skipped after link removal");
    }
    print_summary(&summarize(&records));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        _ => EXIT_COMPUTATION,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => {
                    eprintln!("\n{ECONOMY_SCHEMA}\n{SHOCKS_SCHEMA}");
                    EXIT_VALIDATION
                }
            };
        }
    };
    let outcome = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Shock(a) => shock(a),
        Command::Run(a) => run(a),
        Command::SweepScale(a) => sweep_scale_cmd(a),
        Command::SweepDensity(a) => sweep_density_cmd(a),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if matches!(err.downcast_ref::<Error>(), Some(Error::Parse { .. })) {
                eprintln!("\n{ECONOMY_SCHEMA}\n{SHOCKS_SCHEMA}");
            }
            match cli.command {
                // any failure to load or check the inputs is a validation failure
                Command::Validate(_) => EXIT_VALIDATION,
                _ => exit_code(&err),
            }
        }
    }
}
