//! Batch command-line front end.
//!
//! Every command produces one or more named tables plus a `meta` block.
//! CSV output writes each table with a header row, tables separated by a blank
//! line; the meta block is JSON-only. JSON output is an object with one entry
//! per table (column name to value array) and `meta`. Floats use the shortest
//! representation that round-trips.
//!
//! Exit codes: 0 success, 1 failed check or numerical error, 2 usage error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::conditional::{
    cond_expectation_l1, holder_bound_check, verify_duality, ConjugateExponents, FiniteMeasureSpace, Partition,
    RandomVariable,
};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{self, BasisKind, DiscreteHValuedLaw, OrthonormalBasis};
use crate::stieltjes::{CdfLike, EmpiricalOracle, ExpectationOracle, LawOracle, RecoveredCdf, RecoveryConfig};
use crate::wiener::{self, CylinderSet, CylindricalFunctional, Interval, WienerParams};

#[derive(Debug, Parser)]
#[command(name = "riesz", version, about = "Representation-theorem numerics: Bochner expectations, CDF recovery, conditional expectation, pinned Wiener integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Numerical tolerance (command-specific default).
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for Monte Carlo streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BasisArg {
    Legendre,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FunctionalArg {
    Const,
    Monomial,
    Indicator,
    Product,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected norm and Bochner expectation of χ(ω) = 1_(0,ω).
    ///
    /// Tables: `reconstruction` (t, reconstructed, exact) and
    /// `coefficients` (index, coefficient).
    Bochner {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = BasisArg::Legendre)]
        basis: BasisArg,
        /// Basis order N.
        #[arg(long, default_value_t = hilbert::DEFAULT_ORDER)]
        nodes: usize,
        /// Gauss–Legendre nodes for the ω-integral.
        #[arg(long, default_value_t = hilbert::DEFAULT_OMEGA_NODES)]
        omega_nodes: usize,
        /// Reconstruction grid `lo:hi:n`.
        #[arg(long, default_value = "0:1:101")]
        grid: String,
    },
    /// Distribution function recovered from an expectation functional.
    ///
    /// Table `cdf`: x, F, j, m, converged.
    RecoverCdf {
        #[command(flatten)]
        common: Common,
        /// `uniform:a,b`, `triangular:a,c,b`, `atoms:x@p,...`, `exponential:rate`.
        #[arg(long, conflicts_with = "samples")]
        law: Option<String>,
        /// CSV file whose first column holds samples (empirical-mean oracle).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value = "-1:2:31")]
        grid: String,
        #[arg(long, default_value_t = crate::stieltjes::DEFAULT_J_MAX)]
        j_max: usize,
        #[arg(long, default_value_t = crate::stieltjes::DEFAULT_M_MAX)]
        m_max: usize,
    },
    /// Conditional expectation on a finite space, with its duality report.
    ///
    /// Tables: `xi` (label, probability, x, xi) and `duality` (block, residual).
    Condexp {
        #[command(flatten)]
        common: Common,
        /// CSV rows `label,probability,value`; a header row is skipped.
        #[arg(long)]
        input: PathBuf,
        /// Blocks separated by `|`, members by `,` (labels or 1-based positions).
        #[arg(long)]
        partition: String,
        /// Hölder exponent for the bound check.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 64)]
        j_max: usize,
    },
    /// Chapman–Kolmogorov residuals for several node counts.
    ///
    /// Table `compat`: nodes, residual.
    CompatCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        u: f64,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "D", default_value_t = wiener::DEFAULT_D)]
        d: f64,
        #[arg(long, default_value = "8,16,32,64")]
        nodes: String,
    },
    /// Pinned Wiener integral of a built-in cylindrical functional.
    ///
    /// Table `integral`: method, size, value, error. Quadrature rows report the
    /// change from the previous node count, the Monte Carlo row its standard
    /// error, the cylinder row (indicator only) the recursion tolerance.
    WienerIntegrate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "F", value_enum, default_value_t = FunctionalArg::Const)]
        functional: FunctionalArg,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "D", default_value_t = wiener::DEFAULT_D)]
        d: f64,
        /// Comma-separated times in (0, t); defaults to t/2.
        #[arg(long)]
        times: Option<String>,
        /// Exponent for `monomial` (applied at the first time).
        #[arg(long, default_value_t = 2)]
        power: u32,
        /// Comma-separated exponents for `product`, one per time.
        #[arg(long)]
        powers: Option<String>,
        /// Boxes for `indicator`: `lo:hi` per time, separated by `;`. `inf` allowed.
        #[arg(long, allow_hyphen_values = true)]
        boxes: Option<String>,
        #[arg(long, default_value = "8,16,32,64")]
        nodes: String,
        /// Monte Carlo paths; 0 skips the Monte Carlo row.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Brownian-bridge paths on a time grid.
    ///
    /// Table `paths`: path, t, position (endpoints included).
    BridgeSample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "D", default_value_t = wiener::DEFAULT_D)]
        d: f64,
        /// Comma-separated interior times; defaults to a uniform grid.
        #[arg(long)]
        times: Option<String>,
        /// Interior points of the uniform grid.
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
    },
    /// Reference-value suite.
    ///
    /// Table `selftest`: name, value, expected, tolerance, pass.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

/// A column-major table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything a command emits.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub meta: Map<String, Value>,
    /// False when a check inside the command failed.
    pub ok: bool,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        for (i, table) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push(b'\n');
            }
            let mut w = csv::Writer::from_writer(&mut out);
            let io = |e: csv::Error| invalid(format!("csv: {e}"));
            w.write_record(&table.columns).map_err(io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell)).map_err(io)?;
            }
            w.flush().map_err(|e| invalid(format!("csv: {e}")))?;
        }
        String::from_utf8(out).map_err(|e| invalid(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        for table in &self.tables {
            let mut cols = Map::new();
            for (k, name) in table.columns.iter().enumerate() {
                cols.insert(name.clone(), Value::Array(table.rows.iter().map(|r| r[k].clone()).collect()));
            }
            obj.insert(table.name.clone(), Value::Object(cols));
        }
        obj.insert("meta".into(), Value::Object(self.meta.clone()));
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

fn num(v: f64) -> Value {
    // Non-finite values have no JSON form; keep their text.
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(v.to_string()), Value::Number)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| invalid(format!("cannot parse {what} entry '{tok}'")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || invalid(format!("grid must be lo:hi:n, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || !(lo < hi) {
        return Err(bad());
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| if k + 1 == n { hi } else { lo + h * k as f64 }).collect())
}

fn parse_bound(tok: &str) -> Result<f64> {
    match tok.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| invalid(format!("cannot parse box bound '{t}'"))),
    }
}

/// Built-in laws: `uniform:a,b`, `triangular:a,c,b`, `atoms:x@p,...`,
/// `exponential:rate`.
pub fn parse_law(spec: &str) -> Result<CdfLike> {
    let (name, args) = spec
        .split_once(':')
        .ok_or_else(|| invalid(format!("law must look like name:params, got '{spec}'")))?;
    match name {
        "uniform" => match parse_list::<f64>(args, "uniform")?.as_slice() {
            [a, b] => CdfLike::uniform(*a, *b),
            _ => Err(invalid("uniform takes a,b")),
        },
        "triangular" => match parse_list::<f64>(args, "triangular")?.as_slice() {
            [a, c, b] => CdfLike::triangular(*a, *c, *b),
            _ => Err(invalid("triangular takes a,c,b")),
        },
        "exponential" => match parse_list::<f64>(args, "exponential")?.as_slice() {
            [rate] => CdfLike::exponential(*rate),
            _ => Err(invalid("exponential takes a rate")),
        },
        "atoms" => {
            let atoms = args
                .split(',')
                .map(|tok| {
                    let (x, p) = tok
                        .split_once('@')
                        .ok_or_else(|| invalid(format!("atom must be x@p, got '{tok}'")))?;
                    let x: f64 = x.trim().parse().map_err(|_| invalid(format!("bad atom location '{x}'")))?;
                    let p: f64 = p.trim().parse().map_err(|_| invalid(format!("bad atom mass '{p}'")))?;
                    Ok((x, p))
                })
                .collect::<Result<Vec<_>>>()?;
            CdfLike::discrete(&atoms)
        }
        other => Err(invalid(format!("unknown law '{other}'"))),
    }
}

fn read_file(path: &Path) -> std::result::Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_samples(path: &Path) -> std::result::Result<Vec<f64>, CliError> {
    let text = read_file(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let first = rec.get(0).unwrap_or("").trim();
        match first.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(invalid(format!("{}: row {} is not a number", path.display(), i + 1)).into()),
        }
    }
    Ok(out)
}

fn read_space(path: &Path) -> std::result::Result<(FiniteMeasureSpace, RandomVariable), CliError> {
    let text = read_file(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let (mut labels, mut probs, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if rec.len() != 3 {
            return Err(invalid(format!("{}: row {} needs label,probability,value", path.display(), i + 1)).into());
        }
        let (p, v) = (rec[1].parse::<f64>(), rec[2].parse::<f64>());
        match (p, v) {
            (Ok(p), Ok(v)) => {
                labels.push(rec[0].to_string());
                probs.push(p);
                values.push(v);
            }
            _ if i == 0 => continue,
            _ => return Err(invalid(format!("{}: row {} has non-numeric entries", path.display(), i + 1)).into()),
        }
    }
    Ok((FiniteMeasureSpace::new(labels, probs)?, RandomVariable::new(values)?))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Failed(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Failed(other),
        }
    }
}

fn tol_or(common: &Common, default: f64) -> std::result::Result<f64, CliError> {
    let tol = common.tol.unwrap_or(default);
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    Ok(tol)
}

fn base_meta(command: &str, common: &Common, tol: f64) -> Map<String, Value> {
    let mut meta = Map::new();
    meta.insert("command".into(), json!(command));
    meta.insert("seed".into(), json!(common.seed));
    meta.insert("tol".into(), num(tol));
    meta
}

fn bochner(basis: BasisArg, order: usize, omega_nodes: usize, grid: &str, common: &Common) -> std::result::Result<Report, CliError> {
    let tol = tol_or(common, 1e-3)?;
    let kind = match basis {
        BasisArg::Legendre => BasisKind::ShiftedLegendre,
        BasisArg::Sine => BasisKind::FourierSine,
    };
    let basis = OrthonormalBasis::new(kind, order)?;
    let law = DiscreteHValuedLaw::indicator_example(omega_nodes)?;
    let norm = hilbert::expected_norm(&law, &basis)?;
    let mean = hilbert::bochner_expectation(&law, &basis)?;
    let target = hilbert::project(|t| 1.0 - t, &basis)?;
    let distance = mean.distance(&target)?;

    let mut recon = Table::new("reconstruction", &["t", "reconstructed", "exact"]);
    for t in parse_grid(grid)? {
        recon.push(vec![num(t), num(mean.reconstruct(t)), num(1.0 - t)]);
    }
    let mut coeffs = Table::new("coefficients", &["index", "coefficient"]);
    for (i, c) in mean.coeffs().iter().enumerate() {
        coeffs.push(vec![json!(i), num(*c)]);
    }
    let mut meta = base_meta("bochner", common, tol);
    meta.insert("basis".into(), json!(format!("{kind:?}")));
    meta.insert("order".into(), json!(order));
    meta.insert("omega_nodes".into(), json!(omega_nodes));
    meta.insert("expected_norm".into(), num(norm));
    meta.insert("distance_to_projection".into(), num(distance));
    Ok(Report {
        tables: vec![recon, coeffs],
        meta,
        ok: distance < tol,
    })
}

fn recover(
    law: Option<&str>,
    samples: Option<&Path>,
    grid: &str,
    j_max: usize,
    m_max: usize,
    common: &Common,
) -> std::result::Result<Report, CliError> {
    let tol = tol_or(common, crate::stieltjes::DEFAULT_TOL)?;
    let xs = parse_grid(grid)?;
    let config = RecoveryConfig {
        j_max,
        m_max,
        tol,
        ..RecoveryConfig::default()
    };
    let mut meta = base_meta("recover-cdf", common, tol);
    meta.insert("j_max".into(), json!(j_max));
    meta.insert("m_max".into(), json!(m_max));
    let oracle: Box<dyn ExpectationOracle> = match (law, samples) {
        (Some(spec), None) => {
            meta.insert("law".into(), json!(spec));
            Box::new(LawOracle::new(parse_law(spec)?))
        }
        (None, Some(path)) => {
            meta.insert("samples".into(), json!(path.display().to_string()));
            Box::new(EmpiricalOracle::new(read_samples(path)?)?)
        }
        _ => return Err(CliError::Usage("give exactly one of --law or --samples".into())),
    };
    let rec = RecoveredCdf::new(oracle.as_ref(), config)?;
    rec.eval_grid(&xs)?;
    let mut table = Table::new("cdf", &["x", "F", "j", "m", "converged"]);
    let mut all_converged = true;
    for &x in &xs {
        let e = rec.at(x)?;
        all_converged &= e.converged;
        table.push(vec![num(x), num(e.value), json!(e.j), json!(e.m), json!(e.converged)]);
    }
    meta.insert("total_mass".into(), num(rec.total_mass()));
    meta.insert("all_converged".into(), json!(all_converged));
    Ok(Report {
        tables: vec![table],
        meta,
        ok: true,
    })
}

fn condexp(input: &Path, partition: &str, p: f64, j_max: usize, common: &Common) -> std::result::Result<Report, CliError> {
    let tol = tol_or(common, 1e-14)?;
    let (space, x) = read_space(input)?;
    let part = Partition::parse(partition, &space)?;
    let ladder = cond_expectation_l1(&x, &part, &space, j_max)?;
    let duality = verify_duality(&x, &ladder.xi, &part, &space, tol)?;
    let holder = holder_bound_check(&x, &ladder.xi, ConjugateExponents::new(p)?, &space)?;

    let mut xi = Table::new("xi", &["label", "probability", "x", "xi"]);
    for k in 0..space.len() {
        xi.push(vec![
            json!(space.labels()[k]),
            num(space.probs()[k]),
            num(x.values()[k]),
            num(ladder.xi.values()[k]),
        ]);
    }
    let mut dual = Table::new("duality", &["block", "residual"]);
    for (b, r) in duality.residuals.iter().enumerate() {
        dual.push(vec![json!(b), num(*r)]);
    }
    let mut meta = base_meta("condexp", common, tol);
    meta.insert("partition".into(), json!(partition));
    meta.insert("duality_pass".into(), json!(duality.pass));
    meta.insert("max_residual".into(), num(duality.max_residual()));
    meta.insert("truncation_level".into(), json!(ladder.level));
    meta.insert("ladder_converged".into(), json!(ladder.converged));
    meta.insert("null_blocks".into(), json!(ladder.null_blocks));
    meta.insert("p".into(), num(p));
    meta.insert("holder_lhs".into(), num(holder.lhs));
    meta.insert("holder_rhs".into(), num(holder.rhs));
    Ok(Report {
        tables: vec![xi, dual],
        meta,
        ok: duality.pass && holder.holds && ladder.converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn compat(x: f64, z: f64, u: f64, s: f64, t: f64, d: f64, nodes: &str, common: &Common) -> std::result::Result<Report, CliError> {
    let tol = tol_or(common, 1e-8)?;
    let counts: Vec<usize> = parse_list(nodes, "--nodes")?;
    let mut table = Table::new("compat", &["nodes", "residual"]);
    let mut last = f64::NAN;
    for &n in &counts {
        last = wiener::check_compatibility(x, z, u, s, t, d, n)?;
        table.push(vec![json!(n), num(last)]);
    }
    let mut meta = base_meta("compat-check", common, tol);
    for (k, v) in [("x", x), ("z", z), ("u", u), ("s", s), ("t", t), ("D", d)] {
        meta.insert(k.into(), num(v));
    }
    Ok(Report {
        tables: vec![table],
        meta,
        ok: last < tol,
    })
}

fn parse_times(times: Option<&str>, fallback: Vec<f64>) -> Result<Vec<f64>> {
    times.map_or(Ok(fallback), |s| parse_list(s, "--times"))
}

struct WienerArgs<'a> {
    functional: FunctionalArg,
    params: WienerParams,
    times: Option<&'a str>,
    power: u32,
    powers: Option<&'a str>,
    boxes: Option<&'a str>,
    nodes: &'a str,
    paths: usize,
}

fn wiener_integrate(a: WienerArgs<'_>, common: &Common) -> std::result::Result<Report, CliError> {
    let tol = tol_or(common, wiener::DEFAULT_CYLINDER_TOL)?;
    let p = a.params;
    let times = parse_times(a.times, vec![p.t / 2.0])?;
    let mut cylinder = None;
    let functional = match a.functional {
        FunctionalArg::Const => CylindricalFunctional::new(times.clone(), |_| 1.0, Some(1.0))?,
        FunctionalArg::Monomial => CylindricalFunctional::monomial(times.clone(), 0, a.power)?,
        FunctionalArg::Product => {
            let powers = match a.powers {
                Some(s) => parse_list(s, "--powers")?,
                None => vec![1; times.len()],
            };
            CylindricalFunctional::product(times.clone(), powers)?
        }
        FunctionalArg::Indicator => {
            let spec = a.boxes.ok_or_else(|| CliError::Usage("--F indicator needs --boxes".into()))?;
            let boxes = spec
                .split(';')
                .map(|b| {
                    let (lo, hi) = b
                        .split_once(':')
                        .ok_or_else(|| invalid(format!("box must be lo:hi, got '{b}'")))?;
                    Ok(Interval::new(parse_bound(lo)?, parse_bound(hi)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let set = CylinderSet::new(times.clone(), boxes)?;
            let f = CylindricalFunctional::indicator(&set)?;
            cylinder = Some(set);
            f
        }
    };

    let mut table = Table::new("integral", &["method", "size", "value", "error"]);
    let counts: Vec<usize> = parse_list(a.nodes, "--nodes")?;
    let rows = wiener::quadrature_refinement(&functional, &p, &counts)?;
    for r in &rows {
        table.push(vec![json!("quadrature"), json!(r.n_nodes), num(r.value), r.delta.map_or(Value::Null, num)]);
    }
    if let Some(set) = &cylinder {
        let v = wiener::cylinder_probability(set, &p, tol)?;
        table.push(vec![json!("cylinder"), json!(set.times().len()), num(v), num(tol)]);
    }
    if a.paths > 0 {
        let mc = wiener::wiener_integral_mc(&functional, &p, a.paths, common.seed)?;
        table.push(vec![json!("monte-carlo"), json!(a.paths), num(mc.estimate), num(mc.stderr)]);
    }
    let mut meta = base_meta("wiener-integrate", common, tol);
    for (k, v) in [("x", p.x), ("y", p.y), ("t", p.t), ("D", p.d), ("mass", p.mass())] {
        meta.insert(k.into(), num(v));
    }
    meta.insert("times".into(), json!(times));
    meta.insert("functional".into(), json!(format!("{:?}", a.functional).to_lowercase()));
    if let Some(last) = rows.last() {
        meta.insert("estimate".into(), num(last.value));
    }
    Ok(Report {
        tables: vec![table],
        meta,
        ok: true,
    })
}

fn bridge(params: WienerParams, times: Option<&str>, steps: usize, paths: usize, common: &Common) -> std::result::Result<Report, CliError> {
    let uniform = (1..=steps).map(|k| params.t * k as f64 / (steps + 1) as f64).collect();
    let times = parse_times(times, uniform)?;
    let mut table = Table::new("paths", &["path", "t", "position"]);
    for i in 0..paths {
        let path = wiener::sample_bridge(&params, &times, &mut wiener::path_rng(common.seed, i as u64))?;
        table.push(vec![json!(i), num(0.0), num(params.x)]);
        for (s, v) in path.times.iter().zip(&path.positions) {
            table.push(vec![json!(i), num(*s), num(*v)]);
        }
        table.push(vec![json!(i), num(params.t), num(params.y)]);
    }
    let mut meta = base_meta("bridge-sample", common, 0.0);
    meta.remove("tol");
    for (k, v) in [("x", params.x), ("y", params.y), ("t", params.t), ("D", params.d)] {
        meta.insert(k.into(), num(v));
    }
    meta.insert("paths".into(), json!(paths));
    Ok(Report {
        tables: vec![table],
        meta,
        ok: true,
    })
}

/// One row of the reference suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

/// Reference values: E‖χ‖ = 2/3, E χ = 1 − t, CDF recovery, conditional
/// duality, heat-kernel mass and compatibility.
pub fn selftest_checks(seed: u64) -> Result<Vec<Check>> {
    let basis = OrthonormalBasis::shifted_legendre(hilbert::DEFAULT_ORDER)?;
    let chi = DiscreteHValuedLaw::indicator_example(hilbert::DEFAULT_OMEGA_NODES)?;
    let mean = hilbert::bochner_expectation(&chi, &basis)?;
    let target = hilbert::project(|t| 1.0 - t, &basis)?;

    let uniform = LawOracle::new(CdfLike::uniform(0.0, 1.0)?);
    let rec = RecoveredCdf::new(&uniform, RecoveryConfig::default())?;

    let space = FiniteMeasureSpace::from_probs(vec![0.1, 0.2, 0.3, 0.4])?;
    let x = RandomVariable::new(vec![1.0, -2.0, 3.5, 0.25])?;
    let part = Partition::new(vec![vec![0, 1], vec![2, 3]], 4)?;
    let ladder = cond_expectation_l1(&x, &part, &space, 64)?;
    let duality = verify_duality(&x, &ladder.xi, &part, &space, 1e-14)?;

    let p = WienerParams::new(0.0, 0.0, 1.0, wiener::DEFAULT_D)?;
    let one = CylindricalFunctional::new(vec![0.25, 0.5, 0.75], |_| 1.0, Some(1.0))?;
    let all = CylinderSet::new(vec![0.3, 0.6], vec![Interval::real_line(); 2])?;
    let half = CylinderSet::new(vec![0.5], vec![Interval::new(0.0, f64::INFINITY)])?;
    let sq = CylindricalFunctional::monomial(vec![0.5], 0, 2)?;
    let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();

    Ok(vec![
        Check { name: "expected_norm_chi", value: hilbert::expected_norm(&chi, &basis)?, expected: 2.0 / 3.0, tolerance: 1e-4 },
        Check { name: "bochner_mean_distance", value: mean.distance(&target)?, expected: 0.0, tolerance: 1e-3 },
        Check { name: "bochner_mean_at_0.5", value: mean.reconstruct(0.5), expected: 0.5, tolerance: 5e-3 },
        Check { name: "uniform_total_mass", value: rec.total_mass(), expected: 1.0, tolerance: 1e-6 },
        Check { name: "uniform_cdf_at_0.25", value: rec.at(0.25)?.value, expected: 0.25, tolerance: 5e-3 },
        Check { name: "condexp_duality_residual", value: duality.max_residual(), expected: 0.0, tolerance: 1e-14 },
        Check { name: "heat_kernel_1_1", value: wiener::heat_kernel(1.0, 1.0, 0.5)?, expected: (-0.5f64).exp() * phi0, tolerance: 1e-15 },
        Check { name: "compatibility_residual", value: wiener::check_compatibility(1.0, -1.0, 0.0, 0.3, 1.0, 0.5, 64)?, expected: 0.0, tolerance: 1e-10 },
        Check { name: "wiener_mass_quadrature", value: wiener::wiener_integral_quadrature(&one, &p, 16)?.value, expected: phi0, tolerance: 1e-8 },
        Check { name: "wiener_mass_cylinder", value: wiener::cylinder_probability(&all, &p, wiener::DEFAULT_CYLINDER_TOL)?, expected: phi0, tolerance: 1e-8 },
        Check { name: "half_line_cylinder", value: wiener::cylinder_probability(&half, &p, wiener::DEFAULT_CYLINDER_TOL)?, expected: phi0 / 2.0, tolerance: 1e-10 },
        Check { name: "bridge_second_moment", value: wiener::wiener_integral_quadrature(&sq, &p, 16)?.value, expected: phi0 * 0.25, tolerance: 1e-12 },
        Check { name: "mc_mass", value: wiener::wiener_integral_mc(&one, &p, 1000, seed)?.estimate, expected: phi0, tolerance: 1e-15 },
    ])
}

fn selftest(common: &Common) -> std::result::Result<Report, CliError> {
    let checks = selftest_checks(common.seed)?;
    let mut table = Table::new("selftest", &["name", "value", "expected", "tolerance", "pass"]);
    let mut ok = true;
    for c in &checks {
        ok &= c.pass();
        table.push(vec![json!(c.name), num(c.value), num(c.expected), num(c.tolerance), json!(c.pass())]);
    }
    let mut meta = base_meta("selftest", common, 0.0);
    meta.remove("tol");
    meta.insert("all_pass".into(), json!(ok));
    Ok(Report {
        tables: vec![table],
        meta,
        ok,
    })
}

fn dispatch(command: &Command) -> std::result::Result<(Report, Common), CliError> {
    let params = |x, y, t, d| WienerParams::new(x, y, t, d).map_err(CliError::from);
    Ok(match command {
        Command::Bochner { common, basis, nodes, omega_nodes, grid } => {
            (bochner(*basis, *nodes, *omega_nodes, grid, common)?, common.clone())
        }
        Command::RecoverCdf { common, law, samples, grid, j_max, m_max } => (
            recover(law.as_deref(), samples.as_deref(), grid, *j_max, *m_max, common)?,
            common.clone(),
        ),
        Command::Condexp { common, input, partition, p, j_max } => {
            (condexp(input, partition, *p, *j_max, common)?, common.clone())
        }
        Command::CompatCheck { common, x, z, u, s, t, d, nodes } => {
            (compat(*x, *z, *u, *s, *t, *d, nodes, common)?, common.clone())
        }
        Command::WienerIntegrate { common, functional, x, y, t, d, times, power, powers, boxes, nodes, paths } => {
            let args = WienerArgs {
                functional: *functional,
                params: params(*x, *y, *t, *d)?,
                times: times.as_deref(),
                power: *power,
                powers: powers.as_deref(),
                boxes: boxes.as_deref(),
                nodes,
                paths: *paths,
            };
            (wiener_integrate(args, common)?, common.clone())
        }
        Command::BridgeSample { common, x, y, t, d, times, steps, paths } => {
            (bridge(params(*x, *y, *t, *d)?, times.as_deref(), *steps, *paths, common)?, common.clone())
        }
        Command::Selftest { common } => (selftest(common)?, common.clone()),
    })
}

/// Parses `argv` (program name first) and runs the command, writing to
/// stdout or `--out`. Returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (report, common) = match dispatch(&cli.command) {
        Ok(r) => r,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: cannot read {msg}");
            return 2;
        }
        Err(CliError::Failed(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let text = match report.render(common.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let written = match &common.out {
        Some(path) => fs::write(path, text.as_bytes()).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        eprintln!("error: cannot write {msg}");
        return 1;
    }
    if report.ok {
        0
    } else {
        eprintln!("error: a check in the output failed");
        1
    }
}
