//! CSV formats for economies, shock files and result tables.
//!
//! Inputs are UTF-8, comma separated, `.` decimal, with `#` comment lines.
//! Every output file opens with one `#` provenance line; stripping it leaves
//! strict CSV.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim};
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::economy::Economy;
use crate::error::{Error, Result};
use crate::experiments::{summarize, MethodRun, SummaryRow, SweepRecord};
use crate::meem::IndustryFlags;
use crate::rationing::RNG_NAME;
use crate::shocks::{supply_shock, Constraints, ShockInputs, ShockScenario};
use crate::stats::Quantiles;

/// Relative tolerance for a declared `gross_output` column.
pub const GROSS_OUTPUT_TOL: f64 = 1e-6;

pub const ECONOMY_SCHEMA: &str = "\
economy file: header `industry,<label_1>,...,<label_n>,final_demand[,gross_output]`,
  then one row per supplying industry i, in header order: `label_i,z_i1,...,z_in,f_i[,x_i]`";

pub const SHOCKS_SCHEMA: &str = "\
shock file: header `industry,rli,essential_share,demand_shock` (raw indicators)
  or `industry,supply_shock,demand_shock` (precomputed), one row per industry;
  values are fractions in [0, 1], or percentages with --percent";

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_number(cell: &str, line: u64, column: usize) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(
            line,
            column,
            format!("expected a finite number, found {cell:?}"),
        )),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn parse_economy_csv(path: &Path) -> Result<Economy> {
    parse_economy_reader(open(path)?)
}

pub fn parse_economy_reader<R: Read>(r: R) -> Result<Economy> {
    let mut rows = csv_reader(r).into_records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, 1, "empty file, expected a header row")),
    };
    let hline = line_of(&header);
    let cells: Vec<&str> = header.iter().collect();
    if !cells[0].eq_ignore_ascii_case("industry") {
        return Err(parse_err(
            hline,
            1,
            format!("expected `industry`, found {:?}", cells[0]),
        ));
    }
    let has_gross = cells
        .last()
        .is_some_and(|c| c.eq_ignore_ascii_case("gross_output"));
    let fd_col = cells.len() - 1 - has_gross as usize;
    if fd_col < 2 || !cells[fd_col].eq_ignore_ascii_case("final_demand") {
        return Err(parse_err(
            hline,
            fd_col + 1,
            "expected industry labels followed by `final_demand`",
        ));
    }
    let labels: Vec<String> = cells[1..fd_col].iter().map(|s| s.to_string()).collect();
    let n = labels.len();
    let mut seen = HashMap::new();
    for (j, label) in labels.iter().enumerate() {
        if label.is_empty() {
            return Err(parse_err(hline, j + 2, "empty industry label"));
        }
        if seen.insert(label.as_str(), j).is_some() {
            return Err(parse_err(
                hline,
                j + 2,
                format!("duplicate industry label {label:?}"),
            ));
        }
    }

    let width = cells.len();
    let mut z = Array2::zeros((n, n));
    let mut f = Array1::zeros(n);
    let mut declared = Array1::zeros(n);
    let mut last_line = hline;
    let mut count = 0;
    for row in rows {
        let row = row?;
        let line = line_of(&row);
        last_line = line;
        if count == n {
            return Err(parse_err(line, 1, format!("more than {n} industry rows")));
        }
        if row.len() != width {
            return Err(parse_err(
                line,
                row.len().min(width) + 1,
                format!("expected {width} fields, found {}", row.len()),
            ));
        }
        if row[0] != labels[count] {
            return Err(parse_err(
                line,
                1,
                format!(
                    "row label {:?} does not match column label {:?}",
                    &row[0], labels[count]
                ),
            ));
        }
        for j in 0..n {
            z[[count, j]] = parse_number(&row[j + 1], line, j + 2)?;
        }
        f[count] = parse_number(&row[fd_col], line, fd_col + 1)?;
        if has_gross {
            declared[count] = parse_number(&row[fd_col + 1], line, fd_col + 2)?;
        }
        count += 1;
    }
    if count < n {
        return Err(parse_err(
            last_line,
            1,
            format!("expected {n} industry rows, found {count}"),
        ));
    }

    let e = Economy::with_labels(labels, z, f)?;
    if has_gross {
        for (i, (&d, &x)) in declared.iter().zip(e.gross_output()).enumerate() {
            if (d - x).abs() > GROSS_OUTPUT_TOL * d.abs().max(x.abs()) {
                return Err(Error::IdentityViolation {
                    industry: e.labels()[i].clone(),
                    declared: d,
                    derived: x,
                });
            }
        }
    }
    Ok(e)
}

/// Writes an economy in the input format. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_economy_csv<W: Write>(out: W, e: &Economy, with_gross_output: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["industry".to_string()];
    header.extend(e.labels().iter().cloned());
    header.push("final_demand".into());
    if with_gross_output {
        header.push("gross_output".into());
    }
    w.write_record(&header)?;
    for (i, label) in e.labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(e.flows().row(i).iter().map(f64::to_string));
        row.push(e.final_demand()[i].to_string());
        if with_gross_output {
            row.push(e.gross_output()[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShockOptions {
    /// Values are percentages rather than fractions.
    pub percent: bool,
    /// Industries absent from the file are left unshocked.
    pub allow_missing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockFile {
    pub scenario: ShockScenario,
    /// Raw indicators, when the file carries them.
    pub inputs: Option<ShockInputs>,
    pub warnings: Vec<String>,
}

pub fn parse_shocks_csv(path: &Path, labels: &[String], opts: ShockOptions) -> Result<ShockFile> {
    parse_shocks_reader(open(path)?, labels, opts)
}

pub fn parse_shocks_reader<R: Read>(
    r: R,
    labels: &[String],
    opts: ShockOptions,
) -> Result<ShockFile> {
    const KNOWN: [&str; 5] = [
        "industry",
        "rli",
        "essential_share",
        "supply_shock",
        "demand_shock",
    ];
    let mut rows = csv_reader(r).into_records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, 1, "empty file, expected a header row")),
    };
    let hline = line_of(&header);
    let mut col: HashMap<&str, usize> = HashMap::new();
    for (j, name) in header.iter().enumerate() {
        let key = KNOWN
            .iter()
            .find(|k| k.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(hline, j + 1, format!("unknown column {name:?}")))?;
        if col.insert(key, j).is_some() {
            return Err(parse_err(
                hline,
                j + 1,
                format!("duplicate column {name:?}"),
            ));
        }
    }
    let require = |name: &str| {
        col.get(name)
            .copied()
            .ok_or_else(|| parse_err(hline, 1, format!("missing column `{name}`")))
    };
    let industry_col = require("industry")?;
    let demand_col = require("demand_shock")?;
    let direct_col = col.get("supply_shock").copied();
    let raw_cols = match (col.get("rli"), col.get("essential_share")) {
        (Some(&r), Some(&e)) => Some((r, e)),
        (None, None) => None,
        _ => {
            return Err(parse_err(
                hline,
                1,
                "`rli` and `essential_share` must appear together",
            ))
        }
    };
    if direct_col.is_none() && raw_cols.is_none() {
        return Err(parse_err(
            hline,
            1,
            "need `supply_shock` or both `rli` and `essential_share`",
        ));
    }
    let mut warnings = Vec::new();
    if direct_col.is_some() && raw_cols.is_some() {
        warnings.push(
            "both `supply_shock` and `rli`/`essential_share` given; using `supply_shock`".into(),
        );
    }

    let n = labels.len();
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let scale = if opts.percent { 0.01 } else { 1.0 };
    let mut seen: Vec<Option<u64>> = vec![None; n];
    // unshocked defaults for industries absent from the file
    let mut rli = Array1::from_elem(n, 1.0);
    let mut essential = Array1::zeros(n);
    let mut eps_s = Array1::zeros(n);
    let mut eps_d = Array1::zeros(n);

    for row in rows {
        let row = row?;
        let line = line_of(&row);
        if row.len() != header.len() {
            return Err(parse_err(
                line,
                row.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), row.len()),
            ));
        }
        let label = &row[industry_col];
        let i = *index
            .get(label)
            .ok_or_else(|| Error::UnknownIndustry(label.to_string()))?;
        if let Some(prev) = seen[i] {
            return Err(parse_err(
                line,
                industry_col + 1,
                format!("industry {label:?} already listed on line {prev}"),
            ));
        }
        seen[i] = Some(line);
        let value = |c: usize, what: &str| -> Result<f64> {
            let v = parse_number(&row[c], line, c + 1)? * scale;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::OutOfRange {
                    what: format!("{what} of {label}"),
                    value: v,
                })
            }
        };
        eps_d[i] = value(demand_col, "demand shock")?;
        if let Some((rc, ec)) = raw_cols {
            rli[i] = value(rc, "remote labor index")?;
            essential[i] = value(ec, "essential share")?;
            eps_s[i] = supply_shock(rli[i], essential[i])?;
        }
        if let Some(dc) = direct_col {
            eps_s[i] = value(dc, "supply shock")?;
        }
    }

    let missing: Vec<&String> = labels
        .iter()
        .zip(&seen)
        .filter(|(_, s)| s.is_none())
        .map(|(l, _)| l)
        .collect();
    if let Some(first) = missing.first() {
        if !opts.allow_missing {
            return Err(Error::MissingIndustry(first.to_string()));
        }
        warnings.push(format!(
            "{} industries missing, left unshocked",
            missing.len()
        ));
    }

    let inputs = raw_cols.map(|_| ShockInputs {
        rli,
        essential,
        demand_shock: eps_d.clone(),
    });
    Ok(ShockFile {
        scenario: ShockScenario::new(eps_s, eps_d)?,
        inputs,
        warnings,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Key-value record of how an output file was produced. Holds no clock
/// time, so reruns with the same inputs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str) -> Provenance {
        Provenance {
            entries: vec![
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
                ("command".into(), command.into()),
                ("rng".into(), RNG_NAME.into()),
            ],
        }
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Provenance {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn with_digest(self, key: &str, bytes: &[u8]) -> Provenance {
        let digest = format!("sha256:{}", sha256_hex(bytes));
        self.with(key, digest)
    }

    pub fn line(&self) -> String {
        let body: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("# shockprop {}", body.join(" "))
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn with_header<W: Write>(mut out: W, prov: &Provenance) -> Result<csv::Writer<W>> {
    writeln!(out, "{}", prov.line())?;
    Ok(csv::Writer::from_writer(out))
}

const FLAG_COLUMNS: [&str; 4] = [
    "negative_consumption",
    "consumption_above_max",
    "output_above_max",
    "negative_output",
];

fn flag_cells(flags: Option<&IndustryFlags>) -> [String; 4] {
    match flags {
        Some(d) => [
            d.negative_consumption,
            d.consumption_above_max,
            d.output_above_max,
            d.negative_output,
        ]
        .map(|b| b.to_string()),
        None => Default::default(),
    }
}

/// One row per industry and successful method run. Failed runs appear only
/// in the sweep table.
pub fn write_allocations<W: Write>(
    out: W,
    prov: &Provenance,
    labels: &[String],
    c: &Constraints,
    runs: &[MethodRun],
) -> Result<()> {
    let mut w = with_header(out, prov)?;
    let mut header = vec![
        "industry",
        "method",
        "sample",
        "x",
        "f",
        "x_max",
        "f_max",
        "feasible",
        "iterations",
    ];
    header.extend(FLAG_COLUMNS);
    w.write_record(&header)?;
    for run in runs {
        let Some(a) = &run.allocation else { continue };
        for (i, label) in labels.iter().enumerate() {
            let mut row = vec![
                label.clone(),
                run.method.to_string(),
                run.sample.to_string(),
                num(a.x[i]),
                num(a.f[i]),
                num(c.x_max[i]),
                num(c.f_max[i]),
                a.feasible.to_string(),
                a.iterations.to_string(),
            ];
            row.extend(flag_cells(run.meem_diagnostics.as_ref().map(|d| &d[i])));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, prov: &Provenance, records: &[SweepRecord]) -> Result<()> {
    let mut w = with_header(out, prov)?;
    let mut header = vec![
        "grid_index",
        "alpha_supply",
        "alpha_demand",
        "density_target",
        "method",
        "replicate",
        "sample",
        "output",
        "consumption",
        "feasible",
        "converged",
        "iterations",
        "status",
    ];
    header.extend(FLAG_COLUMNS);
    header.extend([
        "density",
        "avg_multiplier",
        "intermediate_share",
        "output_ratio",
        "detail",
    ]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.grid_index.to_string(),
            num(r.alpha_supply),
            num(r.alpha_demand),
            opt_num(r.density_target),
            r.method.to_string(),
            r.replicate.to_string(),
            r.sample.to_string(),
            num(r.output),
            num(r.consumption),
            r.feasible.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.status.label().to_string(),
        ];
        row.extend(match r.meem_flags {
            Some(c) => [
                c.negative_consumption,
                c.consumption_above_max,
                c.output_above_max,
                c.negative_output,
            ]
            .map(|k| k.to_string()),
            None => Default::default(),
        });
        let net = r.network;
        row.extend([
            opt_num(net.map(|m| m.density)),
            opt_num(net.map(|m| m.avg_multiplier)),
            opt_num(net.map(|m| m.intermediate_share)),
            opt_num(net.map(|m| m.output_ratio)),
            r.status.detail().to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn quantile_cells(q: Option<Quantiles>) -> [String; 4] {
    match q {
        Some(q) => [q.mean, q.q25, q.q50, q.q75].map(num),
        None => Default::default(),
    }
}

pub fn write_summary<W: Write>(out: W, prov: &Provenance, rows: &[SummaryRow]) -> Result<()> {
    let mut w = with_header(out, prov)?;
    w.write_record([
        "grid_index",
        "alpha_supply",
        "alpha_demand",
        "density_target",
        "method",
        "count",
        "failures",
        "infeasible",
        "output_mean",
        "output_q25",
        "output_q50",
        "output_q75",
        "consumption_mean",
        "consumption_q25",
        "consumption_q50",
        "consumption_q75",
    ])?;
    for r in rows {
        let mut row = vec![
            r.grid_index.to_string(),
            num(r.alpha_supply),
            num(r.alpha_demand),
            opt_num(r.density_target),
            r.method.to_string(),
            r.count.to_string(),
            r.failures.to_string(),
            r.infeasible.to_string(),
        ];
        row.extend(quantile_cells(r.output));
        row.extend(quantile_cells(r.consumption));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-industry shocks and ceilings.
pub fn write_constraints<W: Write>(
    out: W,
    prov: &Provenance,
    e: &Economy,
    s: &ShockScenario,
    c: &Constraints,
) -> Result<()> {
    let mut w = with_header(out, prov)?;
    w.write_record([
        "industry",
        "supply_shock",
        "demand_shock",
        "x0",
        "f0",
        "x_max",
        "f_max",
    ])?;
    for (i, label) in e.labels().iter().enumerate() {
        w.write_record([
            label.clone(),
            num(s.effective_supply(i)),
            num(s.effective_demand(i)),
            num(e.gross_output()[i]),
            num(e.final_demand()[i]),
            num(c.x_max[i]),
            num(c.f_max[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Allocations of a single-scenario run.
pub struct AllocationTable<'a> {
    pub labels: &'a [String],
    pub constraints: &'a Constraints,
    pub runs: &'a [MethodRun],
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(BufWriter::new(file))
}

/// Writes `sweep.csv`, `summary.csv` and, when given, `allocations.csv`
/// into `dir`, creating it if needed. Returns the paths written.
pub fn write_results(
    dir: &Path,
    prov: &Provenance,
    allocations: Option<AllocationTable<'_>>,
    records: &[SweepRecord],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Some(t) = allocations {
        let path = dir.join("allocations.csv");
        let mut out = create(&path)?;
        write_allocations(&mut out, prov, t.labels, t.constraints, t.runs)?;
        out.flush()?;
        written.push(path);
    }
    let path = dir.join("sweep.csv");
    let mut out = create(&path)?;
    write_sweep(&mut out, prov, records)?;
    out.flush()?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut out = create(&path)?;
    write_summary(&mut out, prov, &summarize(records))?;
    out.flush()?;
    written.push(path);
    Ok(written)
}
