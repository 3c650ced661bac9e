//! Command-line front end: argument parsing, dispatch, report emission.
//!
//! Exit codes: 0 every assertion passed, 1 an assertion failed (a
//! reproduction bundle is written next to the output), 2 inconclusive,
//! 3 usage or input error.

pub mod manifest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::boolean::{BooleanFunction, Normalization};
use crate::bounds::{self, AnnealSchedule, Inequality, PairBoundReport, ScanMode, ScanParams, WorstCaseReport};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianFunctional};
use crate::gronwall::{self, GronwallReport, SweepGrid};
use crate::level::suite::{run_suite, LevelSuite, LevelSuiteReport};
use crate::monotone;
use crate::process::{self, CheckConfig, ProcessReport, TimeGrid, Verdict};

pub use manifest::{RunManifest, Sink, VerdictCounts};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub const SEED_ENV: &str = "CORRBENCH_SEED";
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "corrbench", version, about = "Correlation-inequality workbench for monotone Boolean and Gaussian functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Plotdata,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed; falls back to $CORRBENCH_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; stdout when absent. The manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the `--out` extension when absent.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every bound quantity for one pair of Boolean functions.
    Analyze(AnalyzeArgs),
    /// Lists or counts monotone functions.
    Enumerate(EnumerateArgs),
    /// Pair scan with per-inequality minima.
    Scan(ScanArgs),
    /// Simulated-annealing search for small ratios.
    Search(SearchArgs),
    /// Gaussian moments, correlation and bounds, or the Boolean bridge.
    Gaussian(GaussianArgs),
    /// Monte Carlo process suite with moment curves.
    Simulate(SimulateArgs),
    /// Randomized checks of the level inequalities.
    Levelcheck(LevelArgs),
    /// Extremal ODE sweep with perturbations.
    Gronwall(GronwallArgs),
    /// Validates reports and summarizes their verdicts.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long)]
    pub g: PathBuf,
    #[arg(long, default_value = "std")]
    pub normalization: Normalization,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Print only the number of functions.
    #[arg(long)]
    pub count_only: bool,
    /// Restrict to antipodal monotone functions.
    #[arg(long)]
    pub antipodal: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "exhaustive")]
    pub mode: ScanMode,
    #[arg(long, default_value = "std")]
    pub normalization: Normalization,
    /// Pair budget (exhaustive, sampled) or iterations per objective (annealed).
    #[arg(long)]
    pub budget: Option<u64>,
    /// Row-per-pair CSV for `n ≤ 3`.
    #[arg(long)]
    pub dump_pairs: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "chvatal")]
    #[serde(serialize_with = "ser_inequality")]
    pub objective: Inequality,
    #[arg(long, default_value_t = 20_000)]
    pub iterations: u64,
    #[arg(long, default_value_t = 0.05)]
    pub t0: f64,
    #[arg(long, default_value_t = 0.9995)]
    pub cooling: f64,
    #[arg(long, default_value = "std")]
    pub normalization: Normalization,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GaussianArgs {
    /// Functional file, or `sign:<function file>`.
    #[arg(long, required_unless_present = "bridge")]
    pub f: Option<String>,
    /// Second functional; defaults to `--f`.
    #[arg(long)]
    pub g: Option<String>,
    /// Applies the Ornstein–Uhlenbeck semigroup at time `t` to both functionals.
    #[arg(long)]
    pub t: Option<f64>,
    /// Order of the quadrature cross-check.
    #[arg(long, default_value_t = 40)]
    pub quad_order: usize,
    /// Agreement tolerance between closed forms and quadrature.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Runs the Boolean bridge over all monotone pairs at this `n` instead.
    #[arg(long, conflicts_with_all = ["f", "g", "t"])]
    pub bridge: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub g: String,
    /// `start:end:step` or a comma-separated list of times.
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    /// Acceptance band in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LevelArgs {
    #[arg(long)]
    pub suite: String,
    /// Random cases; the suite default when absent.
    #[arg(long)]
    pub cases: Option<u64>,
    #[arg(long, default_value_t = crate::level::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GronwallArgs {
    /// `default` (10×10×10 tuples) or `corners`.
    #[arg(long, default_value = "default")]
    pub sweep: String,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub perturbations: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Report files written by other subcommands.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

fn ser_inequality<S: serde::Serializer>(v: &Inequality, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.name())
}

/// What a subcommand produced.
struct Outcome {
    body: Vec<u8>,
    verdict: Verdict,
    counts: VerdictCounts,
    /// Items to put in the reproduction bundle on failure.
    failures: Value,
    extra_outputs: Vec<PathBuf>,
}

impl Outcome {
    fn new(body: Vec<u8>, verdict: Verdict) -> Self {
        let mut counts = VerdictCounts::default();
        tally(&mut counts, verdict);
        Self { body, verdict, counts, failures: Value::Null, extra_outputs: Vec::new() }
    }
}

fn tally(c: &mut VerdictCounts, v: Verdict) {
    match v {
        Verdict::Pass => c.pass += 1,
        Verdict::Inconclusive => c.inconclusive += 1,
        Verdict::Fail => c.fail += 1,
    }
}

fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
        Verdict::Fail => EXIT_FAIL,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => EXIT_FAIL,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::field(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn format_for(common: &Common, default: Format) -> Format {
    common.format.unwrap_or_else(|| {
        match common.out.as_deref().and_then(Path::extension).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            Some("dat" | "txt") => Format::Plotdata,
            _ => default,
        }
    })
}

fn unsupported_format(f: Format, sub: &str) -> Error {
    Error::field("format", format!("`{}` is not available for {sub}", ser_name(f)))
}

fn ser_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Plotdata => "plotdata",
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    let (name, common, params) = match &cmd {
        Command::Analyze(a) => ("analyze", a.common.clone(), serde_json::to_value(a)?),
        Command::Enumerate(a) => ("enumerate", a.common.clone(), serde_json::to_value(a)?),
        Command::Scan(a) => ("scan", a.common.clone(), serde_json::to_value(a)?),
        Command::Search(a) => ("search", a.common.clone(), serde_json::to_value(a)?),
        Command::Gaussian(a) => ("gaussian", a.common.clone(), serde_json::to_value(a)?),
        Command::Simulate(a) => ("simulate", a.common.clone(), serde_json::to_value(a)?),
        Command::Levelcheck(a) => ("levelcheck", a.common.clone(), serde_json::to_value(a)?),
        Command::Gronwall(a) => ("gronwall", a.common.clone(), serde_json::to_value(a)?),
        Command::Report(a) => ("report", a.common.clone(), serde_json::to_value(a)?),
    };
    let seed = resolve_seed(common.seed)?;
    let mut params = params;
    if let Value::Object(m) = &mut params {
        m.insert("format".into(), serde_json::to_value(common.format)?);
        m.insert("workers".into(), serde_json::to_value(common.workers)?);
    }
    let mut manifest = RunManifest::new(name, params, seed);

    let work = || -> Result<Outcome> {
        match &cmd {
            Command::Analyze(a) => analyze(a),
            Command::Enumerate(a) => enumerate(a),
            Command::Scan(a) => scan(a, seed),
            Command::Search(a) => search(a, seed),
            Command::Gaussian(a) => gaussian_cmd(a),
            Command::Simulate(a) => simulate(a, seed),
            Command::Levelcheck(a) => levelcheck(a, seed),
            Command::Gronwall(a) => gronwall_cmd(a, seed),
            Command::Report(a) => report(a),
        }
    };
    let outcome = match common.workers {
        Some(0) => return Err(Error::field("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let sink = Sink { path: common.out.clone() };
    if let Some(d) = sink.write(&outcome.body)? {
        manifest.outputs.push(d);
    }
    for p in &outcome.extra_outputs {
        let bytes = std::fs::read(p)?;
        manifest.outputs.push(manifest::OutputDigest { path: p.display().to_string(), sha256: manifest::sha256_hex(&bytes) });
    }
    let code = exit_code(outcome.verdict);
    manifest.counts = outcome.counts;
    manifest.exit_code = code;
    manifest.finished_at = manifest::unix_now();
    if code == EXIT_FAIL {
        let path = sink.sibling(name, "repro.json");
        manifest::write_repro(&path, &manifest, outcome.failures)?;
        eprintln!("assertion failed; reproduction bundle written to {}", path.display());
    }
    if common.out.is_some() {
        std::fs::write(sink.sibling(name, "manifest.json"), manifest::to_json_bytes(&manifest)?)?;
    }
    Ok(code)
}

fn load_boolean(path: &Path) -> Result<BooleanFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::field(path.display().to_string(), format!("cannot read: {e}")))?;
    BooleanFunction::from_json(&text)
}

fn analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let f = load_boolean(&a.f)?;
    let g = load_boolean(&a.g)?;
    let r = bounds::analyze_pair(&f, &g, a.normalization)?;
    let mut counts = VerdictCounts::default();
    let mut failures = Vec::new();
    if r.supported_by_theorem {
        let harris = *r.cor.numer() >= 0;
        tally(&mut counts, if harris { Verdict::Pass } else { Verdict::Fail });
        if !harris {
            failures.push(json!({ "assertion": "harris", "cor": r.cor.to_string() }));
        }
        if let Some(c) = &r.chvatal {
            tally(&mut counts, if c.holds { Verdict::Pass } else { Verdict::Fail });
            if !c.holds {
                failures.push(json!({ "assertion": "chvatal", "cor": c.cor.to_string(), "rhs": c.rhs.to_string() }));
            }
        }
    }
    let verdict = if counts.fail > 0 { Verdict::Fail } else { Verdict::Pass };
    let body = match format_for(&a.common, Format::Json) {
        Format::Json => manifest::to_json_bytes(&r)?,
        Format::Csv => analyze_csv(&r),
        f => return Err(unsupported_format(f, "analyze")),
    };
    Ok(Outcome { body, verdict, counts, failures: json!({ "report": r, "assertions": failures }), extra_outputs: Vec::new() })
}

fn analyze_csv(r: &PairBoundReport) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut s = String::from("inequality,cor,rhs,ratio\n");
    let cor = crate::scalar::rational_to_f64(&r.cor);
    for which in [
        Inequality::Talagrand,
        Inequality::Kms,
        Inequality::MainTal,
        Inequality::MainCoord,
        Inequality::Symm,
        Inequality::Chvatal,
    ] {
        if let Some(e) = r.entry(which) {
            let _ = writeln!(s, "{},{},{},{}", which.name(), cor, opt(e.rhs), opt(e.ratio));
        }
    }
    s.into_bytes()
}

fn enumerate(a: &EnumerateArgs) -> Result<Outcome> {
    let mut cursor =
        if a.antipodal { monotone::enumerate_antipodal_monotone(a.n)? } else { monotone::enumerate_monotone(a.n)? };
    let mut count = 0u64;
    let mut body = Vec::new();
    while let Some(t) = cursor.next_table() {
        count += 1;
        if !a.count_only {
            body.extend_from_slice(serde_json::to_string(&BooleanFunction::from_u64(a.n, t)?.to_file())?.as_bytes());
            body.push(b'\n');
        }
    }
    if a.count_only {
        body = format!("{count}\n").into_bytes();
    }
    let verdict = if a.antipodal || count == monotone::DEDEKIND[a.n] { Verdict::Pass } else { Verdict::Fail };
    let mut o = Outcome::new(body, verdict);
    o.failures = json!({ "n": a.n, "count": count, "expected": monotone::DEDEKIND[a.n] });
    Ok(o)
}

fn scan_verdict(r: &WorstCaseReport) -> Verdict {
    if r.counterexamples.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn worst_case_body(r: &WorstCaseReport, fmt: Format, sub: &str) -> Result<Vec<u8>> {
    match fmt {
        Format::Json => {
            let mut v = Vec::new();
            bounds::scan::write_report(r, &mut v)?;
            Ok(v)
        }
        Format::Csv => {
            let mut s = String::from("inequality,ratio,f_hex,g_hex\n");
            for (k, m) in &r.minima {
                let _ = writeln!(s, "{k},{},{},{}", m.ratio, m.f_hex, m.g_hex);
            }
            Ok(s.into_bytes())
        }
        f => Err(unsupported_format(f, sub)),
    }
}

fn scan(a: &ScanArgs, seed: u64) -> Result<Outcome> {
    let params = ScanParams { n: a.n, mode: a.mode, normalization: a.normalization, budget: a.budget, seed };
    let fmt = format_for(&a.common, Format::Json);
    if matches!(fmt, Format::Plotdata) {
        return Err(unsupported_format(fmt, "scan"));
    }
    let r = bounds::scan_pairs(&params)?;
    let mut o = Outcome::new(worst_case_body(&r, fmt, "scan")?, scan_verdict(&r));
    if let Some(p) = &a.dump_pairs {
        bounds::dump_pairs_csv(a.n, a.normalization, p)?;
        o.extra_outputs.push(p.clone());
    }
    o.failures = serde_json::to_value(&r.counterexamples)?;
    Ok(o)
}

fn search(a: &SearchArgs, seed: u64) -> Result<Outcome> {
    let schedule = AnnealSchedule { t0: a.t0, cooling: a.cooling, iterations: a.iterations };
    let r = bounds::anneal_search(a.n, a.objective, &schedule, seed, a.normalization)?;
    let mut o = Outcome::new(worst_case_body(&r, format_for(&a.common, Format::Json), "search")?, scan_verdict(&r));
    o.failures = serde_json::to_value(&r.counterexamples)?;
    Ok(o)
}

/// Closed-form and quadrature moments of one functional for `k ≤ 3`.
fn moment_table(f: &GaussianFunctional<f64>, order: usize) -> Result<(Vec<Value>, f64)> {
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    for k in 0..=3 {
        let closed = gaussian::moment(f, k)?;
        let quad = gaussian::moment_quadrature(f, k, order)?;
        let diff = closed.values.iter().zip(&quad.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
        rows.push(json!({ "k": k, "values": closed.values, "quadrature_diff": diff }));
    }
    Ok((rows, worst))
}

fn gaussian_cmd(a: &GaussianArgs) -> Result<Outcome> {
    if let Some(n) = a.bridge {
        return bridge_cmd(n, a);
    }
    let fspec = a.f.as_deref().ok_or_else(|| Error::field("f", "required"))?;
    let mut f = gaussian::load_functional(fspec)?;
    let mut g = match &a.g {
        Some(s) => gaussian::load_functional(s)?,
        None => f.clone(),
    };
    if let Some(t) = a.t {
        if !(t >= 0.0) {
            return Err(Error::field("t", "must be nonnegative"));
        }
        f = gaussian::ou_apply(&f, t)?;
        g = gaussian::ou_apply(&g, t)?;
    }
    let (mf, wf) = moment_table(&f, a.quad_order)?;
    let (mg, wg) = moment_table(&g, a.quad_order)?;
    let bounds = gaussian::gaussian_bounds(&f, &g)?;
    let monotone = f.is_monotone() == Some(true) && g.is_monotone() == Some(true);
    let agree = wf.max(wg) <= a.tol;
    let harris = !monotone || bounds.cor >= -a.tol;
    let mut counts = VerdictCounts::default();
    tally(&mut counts, if agree { Verdict::Pass } else { Verdict::Fail });
    if monotone {
        tally(&mut counts, if harris { Verdict::Pass } else { Verdict::Fail });
    }
    let verdict = if agree && harris { Verdict::Pass } else { Verdict::Fail };
    let report = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "kind": "gaussian",
        "f": gaussian::FunctionalFile::from_functional(&f),
        "g": gaussian::FunctionalFile::from_functional(&g),
        "moments_f": mf,
        "moments_g": mg,
        "bounds": bounds,
        "quadrature_order": a.quad_order,
        "quadrature_max_diff": wf.max(wg),
        "tol": a.tol,
        "verdict": verdict,
    });
    let body = match format_for(&a.common, Format::Json) {
        Format::Json => manifest::to_json_bytes(&report)?,
        f => return Err(unsupported_format(f, "gaussian")),
    };
    Ok(Outcome { body, verdict, counts, failures: report, extra_outputs: Vec::new() })
}

fn bridge_cmd(n: usize, a: &GaussianArgs) -> Result<Outcome> {
    if n == 0 || n > gaussian::bridge::MAX_BRIDGE_N {
        return Err(Error::TooLarge { what: "bridge", n, limit: gaussian::bridge::MAX_BRIDGE_N });
    }
    let mut fs = Vec::new();
    let mut cur = monotone::enumerate_monotone(n)?;
    while let Some(t) = cur.next_table() {
        fs.push(BooleanFunction::from_u64(n, t)?);
    }
    let mut reports = Vec::with_capacity(fs.len() * fs.len());
    for f in &fs {
        for g in &fs {
            reports.push(gaussian::bridge(f, g)?);
        }
    }
    let c = gaussian::bridge_constants(&reports);
    let mut counts = VerdictCounts::default();
    let checks = [("cor", c.cor.uniform_within(a.tol)), ("m1", c.m1.uniform_within(a.tol)), ("m2", c.m2.uniform_within(a.tol))];
    for (_, ok) in checks {
        tally(&mut counts, if ok { Verdict::Pass } else { Verdict::Fail });
    }
    let verdict = if counts.fail == 0 { Verdict::Pass } else { Verdict::Fail };
    let report = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "kind": "bridge",
        "n": n,
        "functions": fs.len(),
        "tol": a.tol,
        "constants": c,
        "uniform": checks.iter().map(|(k, ok)| (k.to_string(), Value::Bool(*ok))).collect::<serde_json::Map<_, _>>(),
        "verdict": verdict,
    });
    let body = match format_for(&a.common, Format::Json) {
        Format::Json => manifest::to_json_bytes(&report)?,
        f => return Err(unsupported_format(f, "gaussian --bridge")),
    };
    Ok(Outcome { body, verdict, counts, failures: report, extra_outputs: Vec::new() })
}

/// `t,k,estimate,se` rows for every curve.
pub fn curves_csv(r: &ProcessReport) -> Vec<u8> {
    let mut s = String::from("t,k,estimate,se\n");
    for c in &r.curves {
        for ((t, e), se) in c.grid.iter().zip(&c.estimates).zip(&c.se) {
            let _ = writeln!(s, "{t},{},{e},{se}", c.k);
        }
    }
    s.into_bytes()
}

/// One block per curve of whitespace-separated `x y yerr` triples.
pub fn curves_plotdata(r: &ProcessReport) -> Vec<u8> {
    let mut s = String::new();
    for c in &r.curves {
        let _ = writeln!(s, "# p{} x y yerr", c.k);
        for ((t, e), se) in c.grid.iter().zip(&c.estimates).zip(&c.se) {
            let _ = writeln!(s, "{t} {e} {se}");
        }
        s.push('\n');
    }
    s.into_bytes()
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<Outcome> {
    let f = gaussian::load_functional(&a.f)?;
    let g = gaussian::load_functional(&a.g)?;
    let grid: TimeGrid = a.grid.parse()?;
    if a.paths < 2 {
        return Err(Error::field("paths", "need at least 2 paths"));
    }
    if !(a.sigmas > 0.0) {
        return Err(Error::field("sigmas", "must be positive"));
    }
    let cfg = CheckConfig { sigmas: a.sigmas, ..CheckConfig::default() };
    let cor = gaussian::gaussian_correlation(&f, &g)?;
    let r = process::process_suite(&f, &g, &grid, a.paths, seed, &cfg, cor)?;
    let mut counts = VerdictCounts::default();
    for c in &r.checks {
        tally(&mut counts, c.verdict);
    }
    let body = match format_for(&a.common, Format::Csv) {
        Format::Csv => curves_csv(&r),
        Format::Json => manifest::to_json_bytes(&r)?,
        Format::Plotdata => curves_plotdata(&r),
    };
    let failing: Vec<_> = r.checks.iter().filter(|c| c.verdict == Verdict::Fail).cloned().collect();
    Ok(Outcome { body, verdict: r.verdict, counts, failures: serde_json::to_value(failing)?, extra_outputs: Vec::new() })
}

fn level_csv(r: &LevelSuiteReport) -> Vec<u8> {
    let mut s = String::from("suite,cases,checked,degenerate,violations,worst_relative_margin,verdict\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{}",
        r.suite.name(),
        r.cases,
        r.checked,
        r.degenerate,
        r.violations,
        r.worst_relative_margin,
        ser_verdict(r.verdict)
    );
    s.into_bytes()
}

fn ser_verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Fail => "fail",
    }
}

fn levelcheck(a: &LevelArgs, seed: u64) -> Result<Outcome> {
    let suite: LevelSuite = a.suite.parse()?;
    if !(a.tol >= 0.0) {
        return Err(Error::field("tol", "must be nonnegative"));
    }
    let r = run_suite(suite, a.cases.unwrap_or_else(|| suite.default_cases()), seed, a.tol)?;
    let counts = VerdictCounts { pass: r.checked - r.violations, fail: r.violations, inconclusive: 0 };
    let body = match format_for(&a.common, Format::Json) {
        Format::Json => manifest::to_json_bytes(&r)?,
        Format::Csv => level_csv(&r),
        f => return Err(unsupported_format(f, "levelcheck")),
    };
    Ok(Outcome { body, verdict: r.verdict, counts, failures: serde_json::to_value(&r.violating_cases)?, extra_outputs: Vec::new() })
}

fn gronwall_cmd(a: &GronwallArgs, seed: u64) -> Result<Outcome> {
    let grid: SweepGrid = a.sweep.parse()?;
    if !(a.dt > 0.0 && a.dt <= 0.1) {
        return Err(Error::field("dt", "need 0 < dt ≤ 0.1"));
    }
    let r = gronwall::sweep(&grid, a.dt, a.perturbations, seed)?;
    let counts = VerdictCounts {
        pass: r.extremal.total + r.perturbed.total - r.extremal.violations - r.perturbed.violations,
        fail: r.extremal.violations + r.perturbed.violations,
        inconclusive: 0,
    };
    let body = match format_for(&a.common, Format::Json) {
        Format::Json => manifest::to_json_bytes(&r)?,
        Format::Csv => {
            let mut v = Vec::new();
            gronwall::write_rows(&r.rows, &mut v)?;
            v
        }
        f => return Err(unsupported_format(f, "gronwall")),
    };
    let failing: Vec<_> = r.rows.iter().filter(|row| !row.conclusion.holds).collect();
    let failures = json!({ "rows": failing, "convergence": if r.convergence_ok { Value::Null } else { serde_json::to_value(&r.convergence)? } });
    Ok(Outcome { body, verdict: r.verdict, counts, failures, extra_outputs: Vec::new() })
}

/// Report kinds recognised by `report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Manifest,
    Repro,
    Scan,
    Pair,
    Process,
    Level,
    Gronwall,
    Summary,
}

/// Identifies a report by its fields, checks that it parses into the typed
/// schema and re-serializes to the same JSON, and extracts its verdict.
pub fn validate_report(v: &Value) -> Result<(ReportKind, Verdict, bool)> {
    fn rt<T: serde::de::DeserializeOwned + Serialize>(v: &Value) -> Result<(T, bool)> {
        let t: T = serde_json::from_value(v.clone())?;
        let back = serde_json::to_value(&t)?;
        Ok((t, &back == v))
    }
    let has = |k: &str| v.get(k).is_some();
    let verdict_field = || -> Result<Verdict> {
        v.get("verdict")
            .map(|x| serde_json::from_value(x.clone()).map_err(Error::from))
            .unwrap_or(Err(Error::field("verdict", "missing")))
    };
    if has("manifest") && has("failures") {
        let (m, ok) = rt::<RunManifest>(&v["manifest"])?;
        return Ok((ReportKind::Repro, code_verdict(m.exit_code), ok));
    }
    if has("subcommand") && has("exit_code") {
        let (m, ok) = rt::<RunManifest>(v)?;
        return Ok((ReportKind::Manifest, code_verdict(m.exit_code), ok));
    }
    if has("minima") {
        let (r, ok) = rt::<WorstCaseReport>(v)?;
        return Ok((ReportKind::Scan, scan_verdict(&r), ok));
    }
    if has("curves") {
        let (r, ok) = rt::<ProcessReport>(v)?;
        return Ok((ReportKind::Process, r.verdict, ok));
    }
    if has("suite") && has("violations") {
        let (r, ok) = rt::<LevelSuiteReport>(v)?;
        return Ok((ReportKind::Level, r.verdict, ok));
    }
    if has("extremal") && has("perturbed") {
        let (r, ok) = rt::<GronwallReport>(v)?;
        return Ok((ReportKind::Gronwall, r.verdict, ok));
    }
    if has("f_hex") && has("cor") {
        let (r, ok) = rt::<PairBoundReport>(v)?;
        let harris = !r.supported_by_theorem || *r.cor.numer() >= 0;
        let chv = r.chvatal.as_ref().is_none_or(|c| c.holds || !r.supported_by_theorem);
        return Ok((ReportKind::Pair, if harris && chv { Verdict::Pass } else { Verdict::Fail }, ok));
    }
    if has("kind") && has("verdict") {
        return Ok((ReportKind::Summary, verdict_field()?, true));
    }
    Err(Error::field("kind", "unrecognised report layout"))
}

fn code_verdict(code: i32) -> Verdict {
    match code {
        EXIT_PASS => Verdict::Pass,
        EXIT_INCONCLUSIVE => Verdict::Inconclusive,
        _ => Verdict::Fail,
    }
}

fn report(a: &ReportArgs) -> Result<Outcome> {
    let fmt = format_for(&a.common, Format::Json);
    let mut entries = Vec::new();
    let mut counts = VerdictCounts::default();
    let mut worst = Verdict::Pass;
    let mut plot = Vec::new();
    for p in &a.inputs {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::field(p.display().to_string(), format!("cannot read: {e}")))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::field(p.display().to_string(), format!("not a JSON report: {e}")))?;
        let (kind, verdict, round_trip) = validate_report(&v)
            .map_err(|e| Error::field(p.display().to_string(), e.to_string()))?;
        // a report that does not round-trip is malformed, not failing
        if !round_trip {
            return Err(Error::field(p.display().to_string(), "does not round-trip through its schema"));
        }
        tally(&mut counts, verdict);
        worst = worst.combine(verdict);
        if fmt == Format::Plotdata && kind == ReportKind::Process {
            let r: ProcessReport = serde_json::from_value(v)?;
            plot.extend(curves_plotdata(&r));
        }
        entries.push(json!({ "path": p.display().to_string(), "kind": kind, "verdict": verdict, "round_trip": round_trip }));
    }
    let body = match fmt {
        Format::Json => manifest::to_json_bytes(&json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "kind": "summary",
            "entries": entries,
            "counts": counts,
            "verdict": worst,
        }))?,
        Format::Csv => {
            let mut s = String::from("path,kind,verdict,round_trip\n");
            for e in &entries {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    e["path"].as_str().unwrap_or_default(),
                    e["kind"].as_str().unwrap_or_default(),
                    e["verdict"].as_str().unwrap_or_default(),
                    e["round_trip"]
                );
            }
            s.into_bytes()
        }
        Format::Plotdata => plot,
    };
    Ok(Outcome { body, verdict: worst, counts, failures: Value::Array(entries), extra_outputs: Vec::new() })
}
