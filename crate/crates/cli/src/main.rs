use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sparselab::acceptance::run_all;
use sparselab::corpus::{band_limited, bump};
use sparselab::exponents::{
    check_critical_identity, parse_exponent, serialize_exponent, ExponentProfile,
};
use sparselab::heatlp::{offdiag_audit, SquareEngine, SquareFunctionKind, TimeGrid};
use sparselab::lattice::{DyadicInterval, Interval};
use sparselab::sharpness::{log_eps, sweep, CharacteristicMode, SharpnessCase, SharpnessSetup};
use sparselab::sparse::{build_sparse, domination_check, MStarVariant, SparseBuildConfig};
use sparselab::weights::{ap_characteristic, rh_characteristic, ScanFamily, Weight};
use sparselab::{Error, SampledFunction};

#[derive(Parser, Debug)]
#[command(
    name = "sparselab",
    version,
    about = "Sparse bounds for square functions: numerical experiments"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derived exponents of a (p0, q0, p) triple.
    Exponents(ExponentArgs),
    /// A_p or RH_q characteristic of a power weight.
    WeightChar(WeightArgs),
    /// Square function samples of a seeded band-limited input.
    Square(SquareArgs),
    /// Build a sparse family for a seeded input.
    SparseBuild(SparseArgs),
    /// Build a family and compare the square-function form with the sparse form.
    SparseCheck(SparseArgs),
    /// Sweep ε for the sharpness examples and fit log-log slopes.
    SharpnessSweep(SweepArgs),
    /// Off-diagonal audit of the heat kernel between two balls.
    OffdiagCheck(OffDiagArgs),
    /// Run the acceptance suite.
    Acceptance(AcceptanceArgs),
}

fn exponent(text: &str) -> Result<f64, String> {
    parse_exponent(text).map_err(|e| e.to_string())
}

#[derive(Args, Debug, Serialize)]
struct ExponentArgs {
    #[arg(long, value_parser = exponent)]
    p0: f64,
    #[arg(long, value_parser = exponent)]
    #[serde(serialize_with = "serialize_exponent")]
    q0: f64,
    #[arg(long, value_parser = exponent)]
    p: f64,
    /// Source exponent for the extrapolation exponent β.
    #[arg(long, value_parser = exponent)]
    q: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum WeightClass {
    Ap,
    Rh,
}

#[derive(Args, Debug, Serialize)]
struct WeightArgs {
    /// Power `a` of the weight `x^a`.
    #[arg(long, allow_hyphen_values = true)]
    exponent: f64,
    #[arg(long, value_enum, default_value_t = WeightClass::Ap)]
    class: WeightClass,
    #[arg(long, value_parser = exponent)]
    p: f64,
    /// Deepest level of the standard dyadic scan.
    #[arg(long, default_value_t = 12)]
    depth: u32,
    /// Deepest anchored interval [0, 2^-n].
    #[arg(long, default_value_t = 48)]
    anchored_depth: u32,
    /// Skip the shifted lattice.
    #[arg(long)]
    no_shifted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Vertical,
    Gradient,
    General,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long, default_value_t = 1e-8)]
    t_min: f64,
    #[arg(long, default_value_t = 1e2)]
    t_max: f64,
    /// Number of time nodes.
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Vertical)]
    kind: KindArg,
    /// α of the general family.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<TimeGrid, Error> {
        TimeGrid::new(self.t_min, self.t_max, self.m)
    }

    fn kind(&self) -> SquareFunctionKind {
        match self.kind {
            KindArg::Vertical => SquareFunctionKind::Vertical,
            KindArg::Gradient => SquareFunctionKind::Gradient,
            KindArg::General => SquareFunctionKind::General(self.alpha),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid size (power of two).
    #[arg(long = "N", alias = "n", default_value_t = 1024)]
    n: usize,
    /// Highest frequency of the band-limited input.
    #[arg(long, default_value_t = 16)]
    kmax: usize,
}

impl InputArgs {
    fn f(&self) -> Result<SampledFunction, Error> {
        band_limited(self.seed, self.n, self.kmax)
    }
}

#[derive(Args, Debug, Serialize)]
struct SquareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// Lower end of the t-window.
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Upper end of the t-window.
    #[arg(long, value_parser = exponent, default_value = "inf")]
    #[serde(serialize_with = "serialize_exponent")]
    b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MStarArg {
    Inf,
    Sup,
}

#[derive(Args, Debug, Serialize)]
struct SparseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = exponent, default_value = "1")]
    p0: f64,
    #[arg(long, value_parser = exponent, default_value = "4")]
    #[serde(serialize_with = "serialize_exponent")]
    q0: f64,
    #[arg(long, default_value_t = 10)]
    depth: u32,
    /// Fixed threshold; omitted means per-node calibration.
    #[arg(long)]
    eta: Option<f64>,
    /// Dilation of the averaging intervals (1 or 5).
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = MStarArg::Inf)]
    m_star: MStarArg,
    /// Width of the bump used as g.
    #[arg(long, default_value_t = 0.1)]
    g_width: f64,
    /// Include the per-cube split of the left side.
    #[arg(long)]
    diagnostics: bool,
}

impl SparseArgs {
    fn config(&self) -> Result<SparseBuildConfig, Error> {
        let mut cfg = SparseBuildConfig::new(self.p0, self.q0);
        cfg.kind = self.grid.kind();
        cfg.eta = self.eta;
        cfg.max_depth = self.depth;
        cfg.dilation = self.lambda;
        cfg.time_grid = self.grid.grid()?;
        cfg.m_star = match self.m_star {
            MStarArg::Inf => MStarVariant::Inf,
            MStarArg::Sup => MStarVariant::Sup,
        };
        cfg.diagnostics = self.diagnostics;
        cfg.validate()?;
        Ok(cfg)
    }

    fn g(&self) -> Result<SampledFunction, Error> {
        // center drawn from the seed so that f and g move together
        let center = (self.input.seed as f64 * 0.618_033_988_749_894_9).fract();
        bump(self.input.n, center, self.g_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CaseArg {
    Low,
    High,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long = "case", value_enum)]
    case: CaseArg,
    #[arg(long, value_parser = exponent)]
    p0: f64,
    #[arg(long, value_parser = exponent)]
    #[serde(serialize_with = "serialize_exponent")]
    q0: f64,
    #[arg(long, value_parser = exponent)]
    p: f64,
    #[arg(long, default_value_t = 1.0 / 16384.0)]
    eps_min: f64,
    #[arg(long, default_value_t = 1.0 / 64.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 9)]
    points: usize,
    /// Use the interval scan for the weight characteristics.
    #[arg(long)]
    scan: bool,
}

#[derive(Args, Debug, Serialize)]
struct OffDiagArgs {
    #[arg(long)]
    t: f64,
    /// Separation of the balls in units of sqrt(t).
    #[arg(long, default_value_t = 8.0)]
    sep: f64,
    /// Center of the first ball.
    #[arg(long, default_value_t = 0.25)]
    center: f64,
    #[arg(long, value_parser = exponent, default_value = "1")]
    p0: f64,
    #[arg(long, value_parser = exponent, default_value = "inf")]
    #[serde(serialize_with = "serialize_exponent")]
    q0: f64,
}

#[derive(Args, Debug, Serialize)]
struct AcceptanceArgs {
    /// Check the critical-index identity at this value before running
    /// (mutation check).
    #[arg(long, hide = true)]
    inject_critical: Option<f64>,
}

/// A finished report: JSON value plus an optional CSV rendering.
struct Report {
    json: Value,
    csv: Option<String>,
    ok: bool,
}

impl Report {
    fn json(json: Value) -> Self {
        Self {
            json,
            csv: None,
            ok: true,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))
}

fn envelope<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
) -> Result<Value, Error> {
    Ok(json!({
        "command": command,
        "config": to_value(config)?,
        "result": to_value(result)?,
    }))
}

fn csv_header(command: &str, config: &Value) -> String {
    format!("# {command} {}\n", config)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn run_exponents(args: &ExponentArgs) -> Result<Report, Error> {
    let mut profile = ExponentProfile::new(args.p0, args.q0, args.p)?;
    if let Some(q) = args.q {
        profile = profile.with_source(q)?;
    }
    let json = envelope("exponents", args, &profile)?;
    let mut csv = csv_header("exponents", &json["config"]);
    csv.push_str("name,value\n");
    if let Value::Object(map) = &json["result"] {
        for (k, v) in map {
            let text = match v {
                Value::Number(n) => num(n.as_f64().unwrap_or(f64::NAN)),
                Value::Null => String::new(),
                other => other.to_string().trim_matches('"').to_string(),
            };
            csv.push_str(&format!("{k},{text}\n"));
        }
    }
    Ok(Report {
        json,
        csv: Some(csv),
        ok: true,
    })
}

fn run_weight(args: &WeightArgs) -> Result<Report, Error> {
    let w = Weight::power(args.exponent)?;
    let scan = ScanFamily {
        max_depth: args.depth,
        anchored_depth: args.anchored_depth,
        shifted: !args.no_shifted,
    };
    let c = match args.class {
        WeightClass::Ap => ap_characteristic(&w, args.p, &scan)?,
        WeightClass::Rh => rh_characteristic(&w, args.p, &scan)?,
    };
    let result = json!({
        "weight": format!("x^{}", args.exponent),
        "class": args.class,
        "p": args.p,
        "value": c.value,
        "argmax_interval": [c.argmax.lo, c.argmax.hi],
    });
    Ok(Report::json(envelope("weight-char", args, &result)?))
}

fn run_square(args: &SquareArgs) -> Result<Report, Error> {
    let f = args.input.f()?;
    let engine = SquareEngine::new(f.len(), args.grid.kind(), args.grid.grid()?)?;
    let out = engine.truncated(&f, args.a, args.b)?;
    let ratio = out.values.l2_norm() / f.l2_norm();
    let result = json!({
        "band_warning": out.band_warning,
        "l2_ratio": ratio,
        "x": (0..f.len()).map(|j| f.point(j)).collect::<Vec<_>>(),
        "f": f.samples(),
        "s": out.values.samples(),
    });
    let json = envelope("square", args, &result)?;
    let mut csv = csv_header("square", &json["config"]);
    csv.push_str(&format!(
        "# band_warning {} l2_ratio {}\n",
        out.band_warning,
        num(ratio)
    ));
    csv.push_str("x,f,s\n");
    for j in 0..f.len() {
        csv.push_str(&format!(
            "{},{},{}\n",
            num(f.point(j)),
            num(f[j]),
            num(out.values[j])
        ));
    }
    Ok(Report {
        json,
        csv: Some(csv),
        ok: true,
    })
}

fn run_sparse_build(args: &SparseArgs) -> Result<Report, Error> {
    let cfg = args.config()?;
    let f = args.input.f()?;
    let build = build_sparse(&f, &DyadicInterval::ROOT, &cfg)?;
    let sparsity = build.family.verify_sparsity()?;
    let result = json!({
        "family": build.family.to_json()?,
        "truncated": build.truncated,
        "sparsity": to_value(&sparsity)?,
        "nodes": to_value(&build.nodes)?,
    });
    Ok(Report::json(envelope("sparse-build", args, &result)?))
}

fn run_sparse_check(args: &SparseArgs) -> Result<Report, Error> {
    let cfg = args.config()?;
    let f = args.input.f()?;
    let g = args.g()?;
    let report = domination_check(&f, &g, &DyadicInterval::ROOT, &cfg)?;
    let json = envelope("sparse-check", args, &report)?;
    let mut csv = csv_header("sparse-check", &json["config"]);
    csv.push_str("level,index,f_factor,g_factor,term\n");
    for t in &report.terms {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            t.cube.level,
            t.cube.index,
            num(t.f_factor),
            num(t.g_factor),
            num(t.term)
        ));
    }
    csv.push_str(&format!(
        "# lhs {} form {} ratio {} sparsity_ok {}\n",
        num(report.lhs),
        num(report.form_value),
        num(report.ratio),
        report.sparsity.ok
    ));
    Ok(Report {
        json,
        csv: Some(csv),
        ok: true,
    })
}

fn run_sweep(args: &SweepArgs) -> Result<Report, Error> {
    let case = match args.case {
        CaseArg::Low => SharpnessCase::Low,
        CaseArg::High => SharpnessCase::High,
    };
    let setup = SharpnessSetup::new(case, args.p0, args.q0, args.p)?;
    let eps = log_eps(args.eps_min, args.eps_max, args.points)?;
    let mode = if args.scan {
        CharacteristicMode::Scan(ScanFamily::default())
    } else {
        CharacteristicMode::Anchored
    };
    let report = sweep(&setup, &eps, &mode)?;
    let json = envelope("sharpness-sweep", args, &report)?;
    let mut csv = csv_header("sharpness-sweep", &json["config"]);
    csv.push_str("eps,lhs,rhs,ratio\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            num(r.eps),
            num(r.lhs),
            num(r.rhs),
            num(r.ratio)
        ));
    }
    csv.push_str(&format!(
        "# slopes lhs {} rhs {} target {}\n",
        num(report.lhs_fit.slope),
        num(report.rhs_fit.slope),
        num(report.target_slope)
    ));
    Ok(Report {
        json,
        csv: Some(csv),
        ok: true,
    })
}

fn run_offdiag(args: &OffDiagArgs) -> Result<Report, Error> {
    let s = args.t.sqrt();
    let c2 = args.center + 2.0 * s + args.sep * s;
    let i1 = Interval::new(args.center - s, args.center + s);
    let i2 = Interval::new(c2 - s, c2 + s);
    let report = offdiag_audit(args.t, &i1, &i2, args.p0, args.q0)?;
    Ok(Report::json(envelope("offdiag-check", args, &report)?))
}

fn run_acceptance(args: &AcceptanceArgs) -> Result<Report, Error> {
    if let Some(candidate) = args.inject_critical {
        check_critical_identity(1.0, 4.0, candidate)?;
    }
    let results = run_all();
    let ok = results.iter().all(|r| r.passed);
    let json = envelope("acceptance", args, &results)?;
    let mut text = String::new();
    for r in &results {
        text.push_str(&format!("{r}\n"));
    }
    text.push_str(if ok {
        "all criteria passed\n"
    } else {
        "some criteria FAILED\n"
    });
    Ok(Report {
        json,
        csv: Some(text),
        ok,
    })
}

fn dispatch(cli: &Cli) -> Result<Report, Error> {
    match &cli.command {
        Command::Exponents(a) => run_exponents(a),
        Command::WeightChar(a) => run_weight(a),
        Command::Square(a) => run_square(a),
        Command::SparseBuild(a) => run_sparse_build(a),
        Command::SparseCheck(a) => run_sparse_check(a),
        Command::SharpnessSweep(a) => run_sweep(a),
        Command::OffdiagCheck(a) => run_offdiag(a),
        Command::Acceptance(a) => run_acceptance(a),
    }
}

fn init_threads() -> Result<(), String> {
    if let Ok(text) = std::env::var("SPARSELAB_THREADS") {
        let n: usize = text
            .trim()
            .parse()
            .map_err(|_| format!("SPARSELAB_THREADS must be a positive integer, got {text:?}"))?;
        if n == 0 {
            return Err("SPARSELAB_THREADS must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn write_out(cli: &Cli, report: &Report) -> io::Result<()> {
    let body = match (cli.format, &report.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        (Format::Json, _) if matches!(cli.command, Command::Acceptance(_)) => {
            // the acceptance table always goes to stderr for humans
            eprint!("{}", report.csv.as_deref().unwrap_or_default());
            format!(
                "{}\n",
                serde_json::to_string_pretty(&report.json).expect("valid json")
            )
        }
        _ => format!(
            "{}\n",
            serde_json::to_string_pretty(&report.json).expect("valid json")
        ),
    };
    match &cli.output {
        Some(path) => File::create(path)?.write_all(body.as_bytes()),
        None => io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match dispatch(&cli) {
        Ok(report) => {
            if let Err(e) = write_out(&cli, &report) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant() { 3 } else { 2 })
        }
    }
}
