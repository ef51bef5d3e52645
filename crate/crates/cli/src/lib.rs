//! Command-line front end: `cover`, `cover-scan`, `cost`, `verdict` and
//! `estimate`, each emitting a self-describing JSON [`RunReport`] and, with
//! `--emit`, a plot-ready CSV.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use multcover::empirical::{
    box_dimension_estimate, count_hits, lebesgue_tail_estimate, DEFAULT_BOX_BUDGET, TRUNCATED_PROXY,
};
use multcover::finecover::{doubly_metric_cost_truncated, finecover_cost_truncated, CostLedger, InhomogeneousShift};
use multcover::functions::{parse_dimension_function, parse_psi};
use multcover::hyperbola_cover::{
    cost_scaling_report, cover_cost, exponent_set_len, materialize_cover, total_cube_count, HyperbolaRegion,
    SideCost, DEFAULT_MATERIALIZE_CAP,
};
use multcover::series::{dimension_from_tau, verdict, DimensionMode, Gauge, Mode};
use multcover::{ApproximatingFunction, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INTERNAL: i32 = 1;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "MULTCOVER_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments that reproduce `results` (output placement flags removed).
    pub argv: Vec<String>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub provenance: Vec<String>,
    pub results: Value,
}

#[derive(Parser, Debug)]
#[command(name = "multcover", version, about = "Covers, cost ledgers, series verdicts and empirical probes for multiplicative Diophantine approximation")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dyadic cover of the hyperbolic region M(2^-N)
    #[command(after_help = "CSV (--emit): with --materialize one row per cube: index,vector,center,side; \
otherwise one row per k_max group: k_max,vectors,cubes_per_vector_log2,side,contribution")]
    Cover(CoverArgs),
    /// Cost of the cover against N with the normalised ratio
    #[command(name = "cover-scan", after_help = "CSV (--emit): N,cost,ratio,slope_so_far")]
    CoverScan(ScanArgs),
    /// Truncated fine-cover cost ledger
    #[command(after_help = "CSV (--emit): q,term,running_total,comparison_term")]
    Cost(CostArgs),
    /// Measure statement for (psi, gauge, d, mode)
    #[command(after_help = "Without --s or --dimfn the Lebesgue statement is given. \
--emit writes the JSON report to the given path")]
    Verdict(VerdictArgs),
    /// Hit counts, Monte Carlo tail measure or box-counting dimension
    #[command(after_help = "CSV (--emit): hits: q,product; tail: estimate,ci_low,ci_high,hits,samples; \
boxdim: j,resolution,count")]
    Estimate(EstimateArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Write CSV to PATH and the JSON report to PATH.json
    #[arg(long, value_name = "PATH")]
    emit: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverArgs {
    #[arg(long)]
    d: u32,
    /// Dyadic exponent N of the radius 2^-N
    #[arg(long = "N", conflicts_with = "r")]
    n: Option<u32>,
    /// Radius r; N is the largest integer with r <= 2^-N
    #[arg(long)]
    r: Option<f64>,
    /// Cost with f(x) = x^s
    #[arg(long, conflicts_with = "dimfn")]
    s: Option<f64>,
    /// Cost with a dimension function
    #[arg(long)]
    dimfn: Option<String>,
    /// List every cube
    #[arg(long)]
    materialize: bool,
    #[arg(long, default_value_t = DEFAULT_MATERIALIZE_CAP)]
    cap: u128,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    s: f64,
    #[arg(long = "n-min", default_value_t = 10)]
    n_min: u32,
    #[arg(long = "n-max", default_value_t = 40)]
    n_max: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum CostMode {
    Single,
    Double,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[arg(long, value_enum, default_value = "single")]
    mode: CostMode,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    psi: String,
    #[arg(long)]
    dimfn: String,
    #[arg(long = "Q")]
    q: u64,
    /// Comma separated shift, e.g. 0.5,0.3
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum VerdictMode {
    Homogeneous,
    Inhomogeneous,
    Doubly,
    Multivariable,
}

#[derive(Args, Debug)]
struct VerdictArgs {
    #[arg(long)]
    d: u32,
    #[arg(long, conflicts_with = "dimfn")]
    s: Option<f64>,
    #[arg(long)]
    dimfn: Option<String>,
    #[arg(long)]
    psi: String,
    #[arg(long, value_enum, default_value = "homogeneous")]
    mode: VerdictMode,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Number of variables in multivariable mode
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Accepted for compatibility; reports are always JSON
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum What {
    Hits,
    Tail,
    Boxdim,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    what: What,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    psi: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Point for --what hits
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Truncation for --what hits
    #[arg(long = "Q")]
    q: Option<u64>,
    #[arg(long = "Q1")]
    q1: Option<u64>,
    #[arg(long = "Q2")]
    q2: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long = "j-min", default_value_t = 6)]
    j_min: u32,
    #[arg(long = "j-max", default_value_t = 12)]
    j_max: u32,
    /// Memory budget for box counting, in bytes
    #[arg(long, default_value_t = DEFAULT_BOX_BUDGET)]
    budget: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(String),
    Domain(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

/// A finished subcommand: report plus an optional CSV table.
struct Run {
    report: RunReport,
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
}

/// Runs one command line (without the program name) and returns the exit
/// status. Reports go to `out` unless `--emit` is given; diagnostics to `err`.
pub fn dispatch<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once("multcover".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    let emit = emit_path(&cli.command).cloned();
    let echo = strip_emit(&argv);
    let result = run(cli.command, echo).and_then(|run| deliver(run, emit.as_deref(), out));
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(err, "internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}

/// Re-runs a report's echoed arguments and returns the fresh report.
pub fn rerun(report: &RunReport) -> Result<RunReport, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dispatch(report.argv.clone(), &mut out, &mut err);
    if code != 0 {
        return Err(String::from_utf8_lossy(&err).into_owned());
    }
    serde_json::from_slice(&out).map_err(|e| e.to_string())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be a positive integer, got 0"));
    }
    // the global pool can only be built once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Cover(a) => a.output.emit.as_ref(),
        Command::CoverScan(a) => a.output.emit.as_ref(),
        Command::Cost(a) => a.output.emit.as_ref(),
        Command::Verdict(a) => a.output.emit.as_ref(),
        Command::Estimate(a) => a.output.emit.as_ref(),
    }
}

fn strip_emit(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
            continue;
        }
        if a == "--emit" {
            skip = true;
            continue;
        }
        if a.starts_with("--emit=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn deliver(run: Run, emit: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(&run.report)?;
    match emit {
        None => {
            writeln!(out, "{json}")?;
        }
        Some(path) => match run.table {
            Some((header, rows)) => {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(&header)?;
                for r in rows {
                    w.write_record(&r)?;
                }
                w.flush()?;
                let mut side = path.as_os_str().to_owned();
                side.push(".json");
                let mut f = File::create(PathBuf::from(side))?;
                writeln!(f, "{json}")?;
            }
            None => {
                let mut f = File::create(path)?;
                writeln!(f, "{json}")?;
            }
        },
    }
    Ok(())
}

fn report(subcommand: &str, argv: Vec<String>, parameters: Value, seed: Option<u64>, provenance: Vec<String>, results: Value) -> RunReport {
    RunReport {
        schema_version: SCHEMA_VERSION,
        tool: "multcover".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        argv,
        parameters,
        seed,
        provenance,
        results,
    }
}

fn run(cmd: Command, argv: Vec<String>) -> Result<Run, Failure> {
    match cmd {
        Command::Cover(a) => run_cover(a, argv),
        Command::CoverScan(a) => run_scan(a, argv),
        Command::Cost(a) => run_cost(a, argv),
        Command::Verdict(a) => run_verdict(a, argv),
        Command::Estimate(a) => run_estimate(a, argv),
    }
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

fn run_cover(a: CoverArgs, argv: Vec<String>) -> Result<Run, Failure> {
    let region = match (a.n, a.r) {
        (Some(n), None) => HyperbolaRegion::dyadic(a.d, n)?,
        (None, Some(r)) => HyperbolaRegion::from_radius(a.d, r)?,
        _ => return Err(Failure::Usage("cover needs exactly one of --N or --r".into())),
    };
    let (n, d) = (region.n(), region.d());
    let f = a.dimfn.as_deref().map(parse_dimension_function).transpose()?;
    let side_cost = match (a.s, &f) {
        (Some(s), _) => Some(SideCost::Power(s)),
        (None, Some(f)) => Some(SideCost::Dimension(f)),
        _ => None,
    };
    let cost = side_cost.as_ref().map(|c| cover_cost(n, d, c)).transpose()?;
    let mut results = json!({
        "d": d,
        "N": n,
        "radius": region.radius(),
        "vectors": exponent_set_len(n, d)?,
        "cubes": total_cube_count(n, d)?,
    });
    if let Some(c) = &cost {
        results["cost"] = json!(c.value());
        results["groups"] = serde_json::to_value(&c.groups)?;
    }
    let mut table = None;
    if a.materialize {
        let cover = materialize_cover(n, d, a.cap)?;
        let mut rows = Vec::with_capacity(cover.len());
        let mut listed = Vec::with_capacity(cover.len());
        let mut at = 0;
        for v in &cover.vectors {
            let count = v.cube_count().unwrap_or(0) as usize;
            for cube in &cover.cubes[at..at + count] {
                let vector: Vec<String> = v.parts().iter().map(u32::to_string).collect();
                rows.push(vec![rows.len().to_string(), vector.join(" "), cube.center_strings().join(" "), cube.side_string()]);
                listed.push(json!({ "vector": v.parts(), "center": cube.center_strings(), "side": cube.side_string() }));
            }
            at += count;
        }
        results["cube_list"] = Value::Array(listed);
        table = Some((vec!["index", "vector", "center", "side"].into_iter().map(String::from).collect(), rows));
    } else if let Some(c) = &cost {
        let rows = c
            .groups
            .iter()
            .map(|g| vec![g.k_max.to_string(), g.vectors.to_string(), g.cubes_per_vector_log2.to_string(), fmt(g.side), fmt(g.contribution)])
            .collect();
        table = Some((
            ["k_max", "vectors", "cubes_per_vector_log2", "side", "contribution"].into_iter().map(String::from).collect(),
            rows,
        ));
    }
    let params = json!({ "d": d, "N": n, "s": a.s, "dimfn": f, "materialize": a.materialize, "cap": a.cap });
    Ok(Run {
        report: report("cover", argv, params, None, vec!["dyadic hyperbola cover with closed-form cube counts".into()], results),
        table,
    })
}

fn run_scan(a: ScanArgs, argv: Vec<String>) -> Result<Run, Failure> {
    let r = cost_scaling_report(a.d, a.s, a.n_min, a.n_max)?;
    let rows = r.rows.iter().map(|row| vec![row.n.to_string(), fmt(row.cost), fmt(row.ratio), fmt(row.slope_so_far)]).collect();
    let mut results = serde_json::to_value(&r)?;
    results["expected_slope"] = json!(r.expected_slope());
    let params = json!({ "d": a.d, "s": a.s, "n_min": a.n_min, "n_max": a.n_max });
    Ok(Run {
        report: report("cover-scan", argv, params, None, vec!["cover cost against r^(s-d+1)".into()], results),
        table: Some((["N", "cost", "ratio", "slope_so_far"].into_iter().map(String::from).collect(), rows)),
    })
}

fn gap_context(d: u32, s: Option<f64>) -> Option<(u32, f64)> {
    s.map(|s| (d, s))
}

fn shift(theta: Option<Vec<f64>>, d: u32) -> Result<InhomogeneousShift, Failure> {
    match theta {
        Some(t) => Ok(InhomogeneousShift::new(&t)?),
        None => Ok(InhomogeneousShift::zero(d)),
    }
}

fn ledger_results(ledger: &CostLedger) -> Result<Value, Failure> {
    let mut v = serde_json::to_value(ledger)?;
    v["total"] = json!(ledger.total_value());
    v["comparison_total"] = json!(ledger.comparison_value());
    v["ratio"] = json!(ledger.ratio());
    Ok(v)
}

fn run_cost(a: CostArgs, argv: Vec<String>) -> Result<Run, Failure> {
    let f = parse_dimension_function(&a.dimfn)?;
    let psi = parse_psi(&a.psi, gap_context(a.d, Some(f.s())))?;
    let theta = shift(a.theta, a.d)?;
    let (ledger, prov) = match a.mode {
        CostMode::Single => (
            finecover_cost_truncated(&psi, &f, a.d, &theta, a.q)?,
            "fine cover from translated and scaled hyperbola covers",
        ),
        CostMode::Double => (doubly_metric_cost_truncated(&psi, &f, a.d, a.q)?, "doubly metric product cover, F(x) = x^d f(x)"),
    };
    let rows = ledger
        .rows
        .iter()
        .map(|r| vec![r.q.to_string(), fmt(r.term), fmt(r.running_total), fmt(r.comparison_term)])
        .collect();
    let params = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "d": a.d,
        "psi": psi,
        "dimfn": f,
        "Q": a.q,
        "theta": theta.components(),
    });
    Ok(Run {
        report: report("cost", argv, params, None, vec![prov.into(), TRUNCATED_PROXY.into()], ledger_results(&ledger)?),
        table: Some((["q", "term", "running_total", "comparison_term"].into_iter().map(String::from).collect(), rows)),
    })
}

fn run_verdict(a: VerdictArgs, argv: Vec<String>) -> Result<Run, Failure> {
    let f = a.dimfn.as_deref().map(parse_dimension_function).transpose()?;
    let s_context = a.s.or(f.map(|f| f.s()));
    let psi = parse_psi(&a.psi, gap_context(a.d, s_context))?;
    let gauge = match (a.s, f) {
        (Some(s), _) => Gauge::Power(s),
        (None, Some(f)) => Gauge::Function(f),
        (None, None) => Gauge::Lebesgue,
    };
    let mode = match a.mode {
        VerdictMode::Homogeneous => Mode::Homogeneous,
        VerdictMode::Inhomogeneous => Mode::Inhomogeneous(shift(a.theta.clone(), a.d)?),
        VerdictMode::Doubly => Mode::Doubly,
        VerdictMode::Multivariable => Mode::Multivariable(a.m),
    };
    let v = verdict(&psi, &gauge, a.d, &mode)?;
    let params = json!({
        "d": a.d,
        "s": a.s,
        "dimfn": f,
        "psi": psi,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "theta": a.theta,
        "m": a.m,
    });
    let prov = vec![v.provenance.statement.clone()];
    Ok(Run { report: report("verdict", argv, params, None, prov, serde_json::to_value(&v)?), table: None })
}

fn need<T>(v: Option<T>, flag: &str, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--what {what} needs {flag}")))
}

fn run_estimate(a: EstimateArgs, argv: Vec<String>) -> Result<Run, Failure> {
    let psi: ApproximatingFunction = parse_psi(&a.psi, None)?;
    let theta = a.theta.clone().unwrap_or_else(|| vec![0.0; a.d as usize]);
    if theta.len() != a.d as usize {
        return Err(Failure::Domain(Error::Domain(format!("theta has {} components, d = {}", theta.len(), a.d))));
    }
    let mut params = json!({ "what": format!("{:?}", a.what).to_lowercase(), "d": a.d, "psi": psi, "theta": theta });
    let prov = vec![TRUNCATED_PROXY.to_string()];
    match a.what {
        What::Hits => {
            let x = need(a.x, "--x", "hits")?;
            let q = need(a.q, "--Q", "hits")?;
            if x.len() != a.d as usize {
                return Err(Failure::Domain(Error::Domain(format!("x has {} components, d = {}", x.len(), a.d))));
            }
            let rec = count_hits(&x, &theta, &psi, q)?;
            params["x"] = json!(x);
            params["Q"] = json!(q);
            let rows = rec.hits.iter().zip(&rec.products).map(|(q, p)| vec![q.to_string(), fmt(*p)]).collect();
            Ok(Run {
                report: report("estimate", argv, params, None, prov, serde_json::to_value(&rec)?),
                table: Some((vec!["q".into(), "product".into()], rows)),
            })
        }
        What::Tail => {
            let seed = need(a.seed, "--seed", "tail")?;
            let (q1, q2) = (need(a.q1, "--Q1", "tail")?, need(a.q2, "--Q2", "tail")?);
            let t = lebesgue_tail_estimate(&psi, &theta, a.d, q1, q2, a.samples, seed)?;
            params["Q1"] = json!(q1);
            params["Q2"] = json!(q2);
            params["samples"] = json!(a.samples);
            let row = vec![fmt(t.estimate), fmt(t.ci_low), fmt(t.ci_high), t.hits.to_string(), t.samples.to_string()];
            Ok(Run {
                report: report("estimate", argv, params, Some(seed), prov, serde_json::to_value(&t)?),
                table: Some((["estimate", "ci_low", "ci_high", "hits", "samples"].into_iter().map(String::from).collect(), vec![row])),
            })
        }
        What::Boxdim => {
            let (q1, q2) = (need(a.q1, "--Q1", "boxdim")?, need(a.q2, "--Q2", "boxdim")?);
            let b = box_dimension_estimate(&psi, &theta, a.d, q1, q2, a.j_min, a.j_max, a.budget)?;
            params["Q1"] = json!(q1);
            params["Q2"] = json!(q2);
            params["j_min"] = json!(a.j_min);
            params["j_max"] = json!(a.j_max);
            let mut results = serde_json::to_value(&b)?;
            if let Some((_, tau, _)) = psi.exponents() {
                results["dimension_from_tau"] = json!(dimension_from_tau(tau, a.d, DimensionMode::Single));
            }
            let rows = b
                .js
                .iter()
                .zip(&b.resolutions)
                .zip(&b.counts)
                .map(|((j, r), c)| vec![j.to_string(), fmt(*r), c.to_string()])
                .collect();
            Ok(Run {
                report: report("estimate", argv, params, a.seed, prov, results),
                table: Some((["j", "resolution", "count"].into_iter().map(String::from).collect(), rows)),
            })
        }
    }
}
