//! Command-line front end.
//!
//! Exit codes: 0 success, 1 bad input, 2 solver failure, 3 certificate
//! rejected.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::certify::{verify_identity, verify_identity_with_tol};
use crate::conic::SolverOptions;
use crate::error::Error;
use crate::io::{read_matrix, Pop};
use crate::pmsv::{
    bench_generate, make_instance, oracle_projected_gradient, oracle_support_enum, putinar_bound, upper_bound, BenchParams,
    PmsvBound, SUPPORT_ENUM_MAX_N,
};
use crate::relax::{build_polya, solve_bound, extract_certificate, Certificate, DegreeMode, RelaxationSpec, Strategy};
use crate::report::{parse_jsonl, render_table, to_jsonl, BenchRecord, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "snomial", version, about = "Certified upper bounds for even polynomial programs")]
pub struct RunConfig {
    /// Progress on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Upper bound and certificate for an even POP given as JSON.
    Bound(BoundArgs),
    /// Upper bound on the positive maximal singular value of a matrix.
    Pmsv(PmsvArgs),
    /// Sweep benchmark matrices over a grid of relaxations.
    Bench(BenchArgs),
    /// Verify a certificate file.
    Certify(CertifyArgs),
    /// Lower bounds from the support-enumeration and projected-gradient oracles.
    Oracle(OracleArgs),
}

/// Nomial width: an integer or `full`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Width {
    Full,
    S(usize),
}

impl FromStr for Width {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Width::Full);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `full`, got `{s}`")),
            Ok(v) => Ok(Width::S(v)),
        }
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_degree_mode(s: &str) -> Result<DegreeMode, String> {
    match s {
        "theorem" => Ok(DegreeMode::Theorem),
        "tight" => Ok(DegreeMode::Tight),
        _ => s
            .parse::<u32>()
            .map(DegreeMode::Explicit)
            .map_err(|_| format!("expected `theorem`, `tight` or an integer degree, got `{s}`")),
    }
}

/// Solver settings shared by every command that solves.
#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// theorem | tight | an explicit total degree.
    #[arg(long, value_parser = parse_degree_mode)]
    pub degree_mode: Option<DegreeMode>,
    /// Solver feasibility and gap tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Per-solve wall-clock limit in seconds.
    #[arg(long)]
    pub timeout_s: Option<f64>,
}

impl SolverArgs {
    pub fn solver(&self) -> Result<SolverOptions, Error> {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidSpec(format!("--tol must be positive, got {t}")));
            }
            opts.feas_tol = t;
            opts.gap_tol = t;
        }
        if let Some(t) = self.timeout_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidSpec(format!("--timeout-s must be positive, got {t}")));
            }
            opts.time_limit = Some(Duration::from_secs_f64(t));
        }
        Ok(opts)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    /// Pólya order.
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    /// Nomial width (integer or `full`).
    #[arg(long, default_value = "full")]
    pub s: Width,
    /// diagonal | all-pairs | windows | full; defaults from `--s`.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    #[command(flatten)]
    pub solve: SolverArgs,
}

impl SpecArgs {
    pub fn solver(&self) -> Result<SolverOptions, Error> {
        self.solve.solver()
    }

    pub fn spec(&self) -> Result<RelaxationSpec, Error> {
        let mut spec = match self.s {
            Width::Full => RelaxationSpec::full(self.k),
            Width::S(s) => RelaxationSpec::new(self.k, s),
        };
        if let Some(st) = self.strategy {
            spec = spec.with_strategy(st);
        }
        if let Some(m) = self.solve.degree_mode {
            spec = spec.with_degree_mode(m);
        }
        spec = spec.with_solver(self.solver()?);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    /// POP JSON `{"n", "objective", "constraints"}`.
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Write the result here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Polya,
    Putinar,
}

#[derive(Args, Debug)]
pub struct PmsvArgs {
    /// Square matrix, CSV or `.json`.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Polya)]
    pub method: MethodArg,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Write the record here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write the certificate.
    #[arg(long)]
    pub cert: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Block sizes; each gives an `r^2 x r^2` matrix.
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,7")]
    pub r: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated cells such as `polya:k0:full,polya:k1:s2,putinar:k1`.
    #[arg(long, default_value = "polya:k0:full,putinar:k1")]
    pub grid: String,
    /// Cells solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Solver options shared by all cells; orders and widths come from `--grid`.
    #[command(flatten)]
    pub solve: SolverArgs,
    /// JSON-lines output; the table then goes to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Text table output.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Re-render the table of an existing JSON-lines file instead of solving.
    #[arg(long, conflicts_with_all = ["out"])]
    pub from: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    pub certificate: PathBuf,
    /// Absolute acceptance tolerance; default `1e-8 (1 + max|coefficient|)`.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A command outcome other than success.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Solver(String),
    Rejected(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Rejected(_) => EXIT_REJECTED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Solver(m) | Failure::Rejected(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LinearAlgebra(_) | Error::MalformedProgram(_) | Error::MissingSolution => Failure::Solver(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn input_err(path: &Path, e: Error) -> Failure {
    match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(config) => run(config),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            }
        }
    }
}

pub fn run(config: RunConfig) -> i32 {
    let verbose = config.verbose;
    let result = match &config.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Pmsv(a) => cmd_pmsv(a),
        Command::Bench(a) => cmd_bench(a, verbose),
        Command::Certify(a) => cmd_certify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Failure::Input(e.to_string()))
}

fn cmd_bound(a: &BoundArgs) -> Result<(), Failure> {
    let pop = Pop::load(&a.problem).map_err(|e| input_err(&a.problem, e))?;
    let spec = a.spec.spec()?;
    let (program, layout) = build_polya(&pop.objective, &pop.constraints, &spec)?;
    let report = solve_bound(&program, &spec.solver);
    let (cert, verification) = if report.status.has_solution() {
        let cert = extract_certificate(&layout, &report)?;
        let v = verify_identity(&pop.objective, &pop.constraints, spec.k, &cert);
        (Some(cert), Some(v))
    } else {
        (None, None)
    };
    let doc = json!({
        "bound": cert.as_ref().map(|c| c.lambda),
        "status": report.status,
        "spec": spec,
        "stats": program.stats(),
        "time_s": report.wall_time,
        "iterations": report.iterations,
        "verification": verification,
        "certificate": cert,
    });
    emit(a.out.as_deref(), &to_json(&doc)?)?;
    match verification {
        None => Err(Failure::Solver(format!("solver status {}", report.status))),
        Some(v) if !v.accepted => Err(Failure::Rejected(format!("certificate residual {:e} above {:e}", v.residual, v.tol))),
        Some(_) => Ok(()),
    }
}

fn bound_outcome(b: &PmsvBound) -> Result<(), Failure> {
    if !b.status.has_solution() {
        return Err(Failure::Solver(format!(
            "solver status {}{}",
            b.status,
            b.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
        )));
    }
    if !b.certified() {
        let r = b.verification.as_ref().map_or(f64::NAN, |v| v.residual);
        return Err(Failure::Rejected(format!("certificate rejected, residual {r:e}")));
    }
    Ok(())
}

fn cmd_pmsv(a: &PmsvArgs) -> Result<(), Failure> {
    let m = read_matrix(&a.matrix).map_err(|e| input_err(&a.matrix, e))?;
    let n = m.nrows();
    let spec = a.spec.spec()?;
    let (b, rec) = match a.method {
        MethodArg::Polya => {
            let b = upper_bound(m.as_ref(), &spec)?;
            let rec = BenchRecord::from_bound(1, Method::Polya, n, spec.k, Some(spec.effective_width()), Some(spec.strategy), &b);
            (b, rec)
        }
        MethodArg::Putinar => {
            let b = putinar_bound(m.as_ref(), spec.k, &spec.solver)?;
            let rec = BenchRecord::from_bound(1, Method::Putinar, n, spec.k, None, None, &b);
            (b, rec)
        }
    };
    if let (Some(path), Some(cert)) = (&a.cert, &b.certificate) {
        let text = cert.to_json()?;
        fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    emit(a.out.as_deref(), &(rec.to_json_line()? + "\n"))?;
    bound_outcome(&b)
}

/// One cell of a bench grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridCell {
    Polya { k: u32, width: Width, strategy: Option<Strategy> },
    Putinar { k: u32 },
}

impl FromStr for GridCell {
    type Err = Error;

    /// `polya:k<K>[:full|:s<S>|:<S>][:<strategy>]` or `putinar:k<K>`.
    fn from_str(text: &str) -> Result<Self, Error> {
        let bad = |why: &str| Error::Parse(format!("grid cell `{text}`: {why}"));
        let mut parts = text.trim().split(':');
        let method = parts.next().unwrap_or_default();
        let k = parts
            .next()
            .and_then(|t| t.strip_prefix('k'))
            .ok_or_else(|| bad("expected `k<order>` after the method"))?
            .parse::<u32>()
            .map_err(|_| bad("order is not an integer"))?;
        let rest: Vec<&str> = parts.collect();
        match method {
            "putinar" if rest.is_empty() => Ok(GridCell::Putinar { k }),
            "putinar" => Err(bad("putinar cells take no width")),
            "polya" => {
                let mut width = Width::Full;
                let mut strategy = None;
                for tok in rest {
                    if let Ok(st) = tok.parse::<Strategy>() {
                        if st == Strategy::Full {
                            width = Width::Full;
                        }
                        strategy = Some(st);
                    } else {
                        width = tok.strip_prefix('s').unwrap_or(tok).parse().map_err(|e: String| bad(&e))?;
                    }
                }
                Ok(GridCell::Polya { k, width, strategy })
            }
            _ => Err(bad("method must be `polya` or `putinar`")),
        }
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<GridCell>, Error> {
    let cells: Vec<GridCell> = text.split(',').filter(|c| !c.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    if cells.is_empty() {
        return Err(Error::Parse("empty grid".into()));
    }
    Ok(cells)
}

impl GridCell {
    fn spec(&self, solver: &SolverOptions, degree_mode: Option<DegreeMode>) -> Result<RelaxationSpec, Error> {
        let GridCell::Polya { k, width, strategy } = *self else {
            return Err(Error::InvalidSpec("putinar cells have no Pólya spec".into()));
        };
        let args = SpecArgs {
            k,
            s: width,
            strategy,
            solve: SolverArgs {
                degree_mode,
                ..SolverArgs::default()
            },
        };
        Ok(args.spec()?.with_solver(solver.clone()))
    }
}

/// Solves every `(r, cell)` pair in `r`-major order and returns one record per
/// pair, numbered from 1. Records carry everything but timing deterministically.
pub fn run_bench(
    rs: &[usize],
    seed: u64,
    grid: &[GridCell],
    solver: &SolverOptions,
    degree_mode: Option<DegreeMode>,
    jobs: usize,
    verbose: u8,
) -> Result<Vec<BenchRecord>, Error> {
    let mut specs = Vec::with_capacity(grid.len());
    for cell in grid {
        specs.push(match cell {
            GridCell::Polya { .. } => Some(cell.spec(solver, degree_mode)?),
            GridCell::Putinar { .. } => None,
        });
    }
    let mats: Vec<_> = rs.iter().map(|&r| bench_generate(BenchParams { r, seed }).m).collect();
    let tasks: Vec<(usize, usize, usize)> = (0..rs.len())
        .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
        .enumerate()
        .map(|(id, (i, j))| (id + 1, i, j))
        .collect();
    let solve_one = |&(id, i, j): &(usize, usize, usize)| -> Result<BenchRecord, Error> {
        let m = mats[i].as_ref();
        let n = m.nrows();
        let mut rec = match (&grid[j], &specs[j]) {
            (GridCell::Polya { k, .. }, Some(spec)) => {
                let b = upper_bound(m, spec)?;
                BenchRecord::from_bound(id, Method::Polya, n, *k, Some(spec.effective_width()), Some(spec.strategy), &b)
            }
            (GridCell::Putinar { k }, _) => {
                let b = putinar_bound(m, *k, solver)?;
                BenchRecord::from_bound(id, Method::Putinar, n, *k, None, None, &b)
            }
            _ => unreachable!("polya cells always carry a spec"),
        };
        rec.r = Some(rs[i]);
        rec.seed = Some(seed);
        if verbose > 0 {
            eprintln!(
                "[{id}/{}] r={} {:?}: {} in {:.3}s",
                tasks.len(),
                rs[i],
                grid[j],
                rec.bound.map_or("-".into(), |b| format!("{b:.6}")),
                rec.time_s
            );
        }
        Ok(rec)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(solve_one).collect())
}

fn cmd_bench(a: &BenchArgs, verbose: u8) -> Result<(), Failure> {
    if let Some(from) = &a.from {
        let text = fs::read_to_string(from).map_err(|e| Failure::Input(format!("{}: {e}", from.display())))?;
        let records = parse_jsonl(&text).map_err(|e| input_err(from, e))?;
        let table = render_table(&records);
        return match &a.table {
            Some(p) => emit(Some(p), &table),
            None => emit(None, &table),
        };
    }
    if a.r.is_empty() || a.r.contains(&0) {
        return Err(Failure::Input("--r needs positive block sizes".into()));
    }
    let grid = parse_grid(&a.grid)?;
    let solver = a.solve.solver()?;
    let records = run_bench(&a.r, a.seed, &grid, &solver, a.solve.degree_mode, a.jobs, verbose)?;
    let jsonl = to_jsonl(&records)?;
    let table = render_table(&records);
    match &a.out {
        Some(p) => {
            emit(Some(p), &jsonl)?;
            if a.table.is_none() {
                emit(None, &table)?;
            }
        }
        None => {
            emit(None, &jsonl)?;
            if a.table.is_none() {
                eprint!("{table}");
            }
        }
    }
    if let Some(p) = &a.table {
        emit(Some(p), &table)?;
    }
    if let Some(r) = records.iter().find(|r| !r.status.has_solution()) {
        return Err(Failure::Solver(format!("record {} ended with status {}", r.id, r.status)));
    }
    if let Some(r) = records.iter().find(|r| !r.certified) {
        return Err(Failure::Rejected(format!("record {} has no accepted certificate", r.id)));
    }
    Ok(())
}

fn cmd_certify(a: &CertifyArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.certificate).map_err(|e| Failure::Input(format!("{}: {e}", a.certificate.display())))?;
    let cert = Certificate::from_json(&text).map_err(|e| input_err(&a.certificate, e))?;
    if let Some(t) = a.tol {
        if !(t >= 0.0) {
            return Err(Failure::Input(format!("--tol must be nonnegative, got {t}")));
        }
    }
    let report = verify_identity_with_tol(&cert.objective, &cert.constraints(), cert.k, &cert, a.tol);
    emit(None, &to_json(&report)?)?;
    if report.accepted {
        Ok(())
    } else {
        Err(Failure::Rejected(format!(
            "residual {:e} (tolerance {:e}), psd margin {:e}",
            report.residual, report.tol, report.psd_margin
        )))
    }
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), Failure> {
    let m = read_matrix(&a.matrix).map_err(|e| input_err(&a.matrix, e))?;
    let inst = make_instance(m.as_ref())?;
    let n = inst.q.nrows();
    let support = if n <= SUPPORT_ENUM_MAX_N {
        Some(oracle_support_enum(inst.q.as_ref())?)
    } else {
        None
    };
    let pg = oracle_projected_gradient(inst.q.as_ref(), a.restarts.max(1), a.seed);
    let doc = json!({
        "n": n,
        "support_enum": support.map(|rho| json!({"rho": rho, "sigma": rho.max(0.0).sqrt()})),
        "projected_gradient": {"rho": pg, "sigma": pg.max(0.0).sqrt(), "restarts": a.restarts.max(1), "seed": a.seed},
    });
    emit(None, &to_json(&doc)?)
}
