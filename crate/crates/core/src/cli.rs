//! Command-line front end.
//!
//! Every command prints one JSON report on stdout:
//! `{schema, command, inputs, results, status}`. Floats are written with 17
//! significant digits, so identical invocations give byte-identical output.
//! Exit codes: 0 Pass, 1 Fail, 2 Error (usage, parse or numeric fault).

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cmcheck::{
    assess_cm, default_scan_range, find_sign_change, find_sign_change_with, log_grid,
    negativity_threshold, CmError, Verdict, DEFAULT_SCAN_POINTS, DEFAULT_X_GRID,
};
use crate::format::sig17;
use crate::laplace::{integral_abs_kernel, laplace_moment, QuadError, MAX_ORDER};
use crate::moments::{
    exp_moments, first_differing_moment, integrate_indicator, is_totally_monotone,
    power_moments, pushforward, reconstruct_cdf, DiscreteSignedMeasure, IndicatorProfile,
    MomentSequence, MomentsError,
};
use crate::specfun::{
    closed_form, kernel_eval, kernel_sign_fn, Kernel, KernelKind, SpecFunError,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Directory that relative output paths resolve against.
pub const OUTPUT_DIR_ENV: &str = "CMONO_OUTPUT_DIR";

pub const DEFAULT_QUAD_TOL: f64 = 1e-9;
pub const DEFAULT_SIGN_TOL: f64 = 1e-12;

/// Points at which `reproduce` compares transforms with closed forms.
pub const REPRODUCE_X_GRID: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];
/// Upper end of the Phi4 nonnegativity scan in `reproduce`.
pub const REPRODUCE_PHI4_T_MAX: f64 = 200.0;
/// Certified error allowed for `∫|φ₃|`, relative to `max(1, value)`.
pub const REPRODUCE_INTEGRABILITY_TOL: f64 = 1e-8;
pub const REPRODUCE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "cmono", version, about = "Complete-monotonicity checks for Laplace transforms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a kernel and its sign function, and look for a sign change.
    Kernel(KernelArgs),
    /// Decide complete monotonicity of a kernel's Laplace transform.
    Cm(CmArgs),
    /// Moment experiments on discrete measures read from files.
    Moments {
        #[command(subcommand)]
        command: MomentsCommand,
    },
    /// Run every proposition check for each given m.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Phi3,
    Phi4,
}

impl From<KindArg> for KernelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Phi3 => KernelKind::Phi3,
            KindArg::Phi4 => KernelKind::Phi4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    /// Atoms at `t ∈ [0, ∞)`, exponential moments.
    T,
    /// Atoms at `s ∈ (0, 1]`, power moments.
    S,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, allow_negative_numbers = true)]
    pub m: f64,
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    pub t_min: f64,
    /// Defaults to the kernel's scan range.
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SCAN_POINTS)]
    pub points: usize,
    #[arg(long, default_value_t = DEFAULT_SIGN_TOL)]
    pub sign_tol: f64,
    /// CSV destination; defaults to `kernel_<kind>_m<m>.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CmArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, allow_negative_numbers = true)]
    pub m: f64,
    #[arg(long, default_value_t = 12)]
    pub max_order: u32,
    /// Repeatable; defaults to 0.25, 0.5, 1, 2, 5, 10.
    #[arg(long = "x", allow_negative_numbers = true)]
    pub x_grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum MomentsCommand {
    /// Moments c_0..c_N, written as CSV.
    Moments(MomentsArgs),
    /// First moment index at which two t-domain measures differ.
    Diff(DiffArgs),
    /// Total-monotonicity test of the moment sequence.
    Tm(TmArgs),
    /// Reconstruct the distribution function in s from moments.
    Cdf(CdfArgs),
    /// Integrate the piecewise-linear indicator I_delta in s.
    Indicator(IndicatorArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    pub measure: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = DomainArg::T)]
    pub domain: DomainArg,
    /// CSV destination; defaults to `<stem>_moments.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TmArgs {
    pub measure: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = DomainArg::T)]
    pub domain: DomainArg,
}

#[derive(Debug, Args, Serialize)]
pub struct CdfArgs {
    pub measure: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = DomainArg::T)]
    pub domain: DomainArg,
}

#[derive(Debug, Args, Serialize)]
pub struct IndicatorArgs {
    pub measure: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = DomainArg::S)]
    pub domain: DomainArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(long = "m", required = true, allow_negative_numbers = true)]
    pub m_list: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    pub max_order: u32,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }

    fn from_check(passed: bool) -> Self {
        if passed {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub status: Status,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Function(#[from] SpecFunError),
    #[error(transparent)]
    Check(#[from] CmError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

struct Outcome {
    results: Value,
    status: Status,
}

/// Pretty JSON with every float at 17 significant digits.
struct Sig17Formatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes a report in the fixed output format, with a trailing newline.
pub fn render_report(report: &RunReport) -> String {
    let mut buf = Vec::new();
    let formatter = Sig17Formatter {
        inner: PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    report
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses `args`, runs the command, writes the report to `out` and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = e.print();
                return Status::Error.exit_code();
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let report = execute(&cli.command);
    let _ = out.write_all(render_report(&report).as_bytes());
    let _ = out.flush();
    report.status.exit_code()
}

/// Runs a parsed command and assembles its report.
pub fn execute(command: &Command) -> RunReport {
    let (name, inputs, outcome) = match command {
        Command::Kernel(a) => ("kernel", to_value(a), cmd_kernel(a)),
        Command::Cm(a) => ("cm", to_value(a), cmd_cm(a)),
        Command::Moments { command } => match command {
            MomentsCommand::Moments(a) => ("moments moments", to_value(a), cmd_moments_list(a)),
            MomentsCommand::Diff(a) => ("moments diff", to_value(a), cmd_moments_diff(a)),
            MomentsCommand::Tm(a) => ("moments tm", to_value(a), cmd_moments_tm(a)),
            MomentsCommand::Cdf(a) => ("moments cdf", to_value(a), cmd_moments_cdf(a)),
            MomentsCommand::Indicator(a) => {
                ("moments indicator", to_value(a), cmd_moments_indicator(a))
            }
        },
        Command::Reproduce(a) => ("reproduce", to_value(a), cmd_reproduce(a)),
    };
    let (results, status) = match outcome {
        Ok(o) => (o.results, o.status),
        Err(e) => (json!({ "error": e.to_string() }), Status::Error),
    };
    RunReport {
        schema: SCHEMA_VERSION,
        command: name.to_string(),
        inputs,
        results,
        status,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn make_kernel(kind: KernelKind, m: f64) -> Result<Kernel, CliError> {
    Kernel::new(kind, m).map_err(|e| usage(e.to_string()))
}

/// Relative paths resolve against `$CMONO_OUTPUT_DIR`, else the working directory.
fn output_path(given: Option<&Path>, default_name: &str) -> PathBuf {
    let dir = std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    match given {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => dir.join(p),
        None => dir.join(default_name),
    }
}

fn write_csv(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_kernel(a: &KernelArgs) -> Result<Outcome, CliError> {
    let k = make_kernel(a.kind.into(), a.m)?;
    let t_max = a.t_max.unwrap_or_else(|| default_scan_range(&k).1);
    let limit = k.sign_fn_limit();
    if !(a.t_min > 0.0 && t_max > a.t_min && t_max.is_finite()) {
        return Err(usage(format!("need 0 < t-min < t-max, got [{}, {t_max}]", a.t_min)));
    }
    if t_max > limit {
        return Err(usage(format!(
            "t-max {t_max} exceeds {limit}, beyond which the sign function overflows"
        )));
    }
    if a.points < 2 {
        return Err(usage("need at least two points"));
    }
    if !(a.sign_tol >= 0.0) {
        return Err(usage("sign-tol must be nonnegative"));
    }

    let grid = log_grid(a.t_min, t_max, a.points);
    let mut csv = String::from("t,phi,sign_fn\n");
    let mut min_sign = (f64::INFINITY, a.t_min);
    for &t in &grid {
        let phi = kernel_eval(&k, t).unwrap_or(f64::NAN);
        let s = kernel_sign_fn(&k, t)?;
        if s < min_sign.0 {
            min_sign = (s, t);
        }
        csv.push_str(&format!("{},{},{}\n", sig17(t), sig17(phi), sig17(s)));
    }
    let path = output_path(
        a.output.as_deref(),
        &format!("kernel_{}_m{}.csv", k.kind.name(), a.m),
    );
    write_csv(&path, &csv)?;

    let certificate = find_sign_change_with(&k, a.t_min, t_max, a.points)?;
    let (threshold, sign_at_threshold, passed) = match k.kind {
        KernelKind::Phi4 => (None, None, min_sign.0 >= -a.sign_tol),
        KernelKind::Phi3 => {
            let th = negativity_threshold(k.param());
            if th <= t_max {
                let s = kernel_sign_fn(&k, th)?;
                (Some(th), Some(s), s < 0.0)
            } else {
                (Some(th), None, true)
            }
        }
    };
    Ok(Outcome {
        results: json!({
            "kernel": k,
            "csv": path.display().to_string(),
            "points": grid.len(),
            "t_min": a.t_min,
            "t_max": t_max,
            "min_sign_fn": min_sign.0,
            "t_at_min_sign_fn": min_sign.1,
            "certificate": certificate,
            "analytic_threshold": threshold,
            "sign_fn_at_threshold": sign_at_threshold,
        }),
        status: Status::from_check(passed),
    })
}

fn validate_x_grid(grid: &[f64]) -> Result<(), CliError> {
    if grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(usage("every x must be positive and finite"));
    }
    Ok(())
}

fn cmd_cm(a: &CmArgs) -> Result<Outcome, CliError> {
    let k = make_kernel(a.kind.into(), a.m)?;
    if a.max_order > MAX_ORDER {
        return Err(usage(format!("max-order {} exceeds {MAX_ORDER}", a.max_order)));
    }
    let grid = if a.x_grid.is_empty() {
        DEFAULT_X_GRID.to_vec()
    } else {
        a.x_grid.clone()
    };
    validate_x_grid(&grid)?;
    let report = assess_cm(&k, a.max_order, &grid, a.tol)?;
    let expected = match k.kind {
        KernelKind::Phi3 => "Refuted",
        KernelKind::Phi4 => "ConsistentWithCM",
    };
    let passed = match k.kind {
        KernelKind::Phi3 => report.verdict.is_refuted(),
        KernelKind::Phi4 => report.verdict == Verdict::ConsistentWithCM,
    };
    Ok(Outcome {
        results: json!({ "expected": expected, "report": report }),
        status: Status::from_check(passed),
    })
}

fn load_measure(path: &Path, domain: DomainArg) -> Result<DiscreteSignedMeasure, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mu: DiscreteSignedMeasure = text.parse().map_err(|e: MomentsError| {
        usage(format!("{}: {e}", path.display()))
    })?;
    if domain == DomainArg::S {
        if let Some(a) = mu.atoms().iter().find(|a| !(a.location > 0.0 && a.location <= 1.0)) {
            return Err(usage(format!(
                "{}: s-domain location {} outside (0, 1]",
                path.display(),
                a.location
            )));
        }
    }
    Ok(mu)
}

fn moments_in(mu: &DiscreteSignedMeasure, domain: DomainArg, n: usize) -> MomentSequence {
    match domain {
        DomainArg::T => exp_moments(mu, n),
        DomainArg::S => power_moments(mu, n),
    }
}

fn in_s(mu: &DiscreteSignedMeasure, domain: DomainArg) -> DiscreteSignedMeasure {
    match domain {
        DomainArg::T => pushforward(mu),
        DomainArg::S => mu.clone(),
    }
}

fn cmd_moments_list(a: &MomentsArgs) -> Result<Outcome, CliError> {
    let mu = load_measure(&a.measure, a.domain)?;
    let c = moments_in(&mu, a.domain, a.n);
    let stem = a
        .measure
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "measure".into());
    let path = output_path(a.output.as_deref(), &format!("{stem}_moments.csv"));
    write_csv(&path, &c.to_csv())?;
    Ok(Outcome {
        results: json!({
            "domain": c.domain,
            "csv": path.display().to_string(),
            "values": c.values,
        }),
        status: Status::Pass,
    })
}

fn cmd_moments_diff(a: &DiffArgs) -> Result<Outcome, CliError> {
    let mu = load_measure(&a.first, DomainArg::T)?;
    let nu = load_measure(&a.second, DomainArg::T)?;
    let first = first_differing_moment(&mu, &nu, a.n).map_err(|e| usage(e.to_string()))?;
    let identical = mu == nu;
    // Uniqueness: the moments separate exactly the distinct measures.
    let passed = identical == first.is_none();
    let shown = match first {
        Some(n) => json!(n),
        None => json!("identical"),
    };
    Ok(Outcome {
        results: json!({ "first_differing": shown, "identical_atoms": identical }),
        status: Status::from_check(passed),
    })
}

fn cmd_moments_tm(a: &TmArgs) -> Result<Outcome, CliError> {
    let mu = load_measure(&a.measure, a.domain)?;
    let c = moments_in(&mu, a.domain, a.n);
    let tm = is_totally_monotone(&c, a.n)?;
    let nonnegative = mu.is_nonnegative();
    // A nonnegative measure always has a totally monotone moment sequence.
    let passed = tm.holds || !nonnegative;
    Ok(Outcome {
        results: json!({
            "totally_monotone": tm.holds,
            "witness": tm.witness,
            "nonnegative_measure": nonnegative,
        }),
        status: Status::from_check(passed),
    })
}

fn cmd_moments_cdf(a: &CdfArgs) -> Result<Outcome, CliError> {
    let mu = load_measure(&a.measure, a.domain)?;
    let c = moments_in(&mu, a.domain, a.n);
    let value = reconstruct_cdf(&c, a.n, a.x).map_err(|e| usage(e.to_string()))?;
    Ok(Outcome {
        results: json!({
            "reconstruction": value,
            "measure_cdf": in_s(&mu, a.domain).cdf(a.x),
        }),
        status: Status::Pass,
    })
}

fn cmd_moments_indicator(a: &IndicatorArgs) -> Result<Outcome, CliError> {
    let mu = load_measure(&a.measure, a.domain)?;
    let profile = IndicatorProfile::new(a.a, a.b, a.delta).map_err(|e| usage(e.to_string()))?;
    let mu_s = in_s(&mu, a.domain);
    Ok(Outcome {
        results: json!({
            "integral": integrate_indicator(&mu_s, &profile),
            "interval_mass": mu_s.mass_in(a.a, a.b),
        }),
        status: Status::Pass,
    })
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: Value,
}

fn check_phi4_nonnegative(k: &Kernel) -> Result<Check, CliError> {
    let hi = REPRODUCE_PHI4_T_MAX.min(k.sign_fn_limit());
    let mut min = (f64::INFINITY, 0.0);
    for t in log_grid(1e-6, hi, DEFAULT_SCAN_POINTS) {
        let s = kernel_sign_fn(k, t)?;
        if s < min.0 {
            min = (s, t);
        }
    }
    Ok(Check {
        name: "phi4_nonnegative",
        passed: min.0 >= -DEFAULT_SIGN_TOL,
        detail: json!({ "t_max": hi, "min_sign_fn": min.0, "t_at_min": min.1 }),
    })
}

fn check_phi4_cm(k: &Kernel, max_order: u32, tol: f64) -> Result<Check, CliError> {
    let report = assess_cm(k, max_order, &REPRODUCE_X_GRID, tol)?;
    let min_margin = report
        .margins
        .iter()
        .map(|m| m.min_margin)
        .fold(f64::INFINITY, f64::min);
    Ok(Check {
        name: "phi4_cm_verdict",
        passed: report.verdict == Verdict::ConsistentWithCM,
        detail: json!({
            "verdict": report.verdict,
            "max_order": max_order,
            "min_margin": min_margin,
            "unconverged": report.unconverged,
        }),
    })
}

fn check_phi3_integrable(k: &Kernel) -> Result<Check, CliError> {
    let (passed, detail) = match integral_abs_kernel(k, REPRODUCE_INTEGRABILITY_TOL) {
        Ok(r) => (
            r.total_error() <= REPRODUCE_INTEGRABILITY_TOL * r.value.max(1.0),
            json!({ "value": r.value, "error": r.total_error() }),
        ),
        Err(e @ (QuadError::Divergent { .. } | QuadError::ToleranceNotMet { .. })) => {
            (false, json!({ "failure": e.to_string() }))
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Check {
        name: "phi3_integrable",
        passed,
        detail,
    })
}

fn check_phi3_negative(k: &Kernel) -> Result<Check, CliError> {
    let (lo, hi) = default_scan_range(k);
    let threshold = negativity_threshold(k.param());
    let certificate = find_sign_change(k, lo, hi)?;
    let sign_at_threshold = if threshold <= k.sign_fn_limit() {
        Some(kernel_sign_fn(k, threshold)?)
    } else {
        None
    };
    let passed = certificate
        .as_ref()
        .is_some_and(|c| c.root_estimate <= threshold)
        || sign_at_threshold.is_some_and(|s| s < 0.0);
    Ok(Check {
        name: "phi3_sign_change",
        passed,
        detail: json!({
            "certificate": certificate,
            "analytic_threshold": threshold,
            "sign_fn_at_threshold": sign_at_threshold,
        }),
    })
}

fn check_transforms(kernels: &[Kernel], tol: f64) -> Result<Check, CliError> {
    let mut rows = Vec::new();
    let mut passed = true;
    for k in kernels {
        for &x in &REPRODUCE_X_GRID {
            let cf = closed_form(k, x)?;
            let value = match laplace_moment(k, 0, x, tol) {
                Ok(r) => r.value,
                Err(QuadError::ToleranceNotMet { best }) => best.value,
                Err(e) => return Err(e.into()),
            };
            let residual = (value - cf).abs();
            let ok = residual <= REPRODUCE_RESIDUAL_TOL * cf.abs().max(1.0);
            passed &= ok;
            rows.push(json!({
                "kernel": k.kind.name(),
                "x": x,
                "transform": value,
                "closed_form": cf,
                "residual": residual,
                "passed": ok,
            }));
        }
    }
    Ok(Check {
        name: "transform_residuals",
        passed,
        detail: Value::Array(rows),
    })
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<Outcome, CliError> {
    if a.max_order > MAX_ORDER {
        return Err(usage(format!("max-order {} exceeds {MAX_ORDER}", a.max_order)));
    }
    let kernels: Vec<(Kernel, Kernel)> = a
        .m_list
        .iter()
        .map(|&m| Ok((make_kernel(KernelKind::Phi3, m)?, make_kernel(KernelKind::Phi4, m)?)))
        .collect::<Result<_, CliError>>()?;

    let mut per_m = Vec::new();
    let mut all_passed = true;
    for (&m, (phi3, phi4)) in a.m_list.iter().zip(&kernels) {
        let checks = vec![
            check_phi4_nonnegative(phi4)?,
            check_phi4_cm(phi4, a.max_order, a.tol)?,
            check_phi3_integrable(phi3)?,
            check_phi3_negative(phi3)?,
            check_transforms(&[*phi3, *phi4], a.tol)?,
        ];
        let passed = checks.iter().all(|c| c.passed);
        all_passed &= passed;
        per_m.push(json!({ "m": m, "passed": passed, "checks": checks }));
    }
    Ok(Outcome {
        results: json!({ "runs": per_m }),
        status: Status::from_check(all_passed),
    })
}
