//! Command-line front-end: subcommand parsing, JSON configs, report writing.

pub mod config;
pub mod selftest;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use phasemem::energy::energy_report;
use phasemem::flow::{self, FlowLog};
use phasemem::grid::{write_atomic, write_field, ScalarField};
use phasemem::profile::{OptimalProfile, Profile, TruncatedProfile};
use phasemem::recovery::{build_u, build_v, sweep_with, RecoveryConfig, SweepResult};
use phasemem::slicing::{self, builtin_test_functions};
use phasemem::{DoubleWell, ErrorKind, Geometry, Modulus, PhaseSplit, Surface, FIELD_FORMAT_VERSION};

use config::{FlowSpec, Globals, RecoverySpec};
use svg::Series;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<phasemem::Error> for CliError {
    fn from(e: phasemem::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Config => CliError::Config(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
            ErrorKind::Io => CliError::Io(msg),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn version_string() -> String {
    format!(
        "phasemem {} (field format {})",
        env!("CARGO_PKG_VERSION"),
        FIELD_FORMAT_VERSION
    )
}

#[derive(Debug, Parser)]
#[command(name = "phasemem", about = "Diffuse-interface membrane energies: limits, recovery sweeps, slicing and flows")]
#[command(disable_version_flag = true)]
struct Cli {
    /// Print the version and the field-format version
    #[arg(short = 'V', long)]
    version: bool,
    /// Worker threads; overrides the "threads" key of a config
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the sharp-interface limits of a geometry as JSON
    Limits(LimitsArgs),
    /// Dump the optimal or truncated profile as CSV
    Profile(ProfileArgs),
    /// Build the recovery fields for one ε and report their energies
    Recover(RecoverArgs),
    /// Run a recovery sweep over decreasing ε
    Sweep(SweepArgs),
    /// Level-set diagnostics on a recovery field
    Slice(SliceArgs),
    /// Gradient flow of M + λI
    Flow(FlowArgs),
    /// Measure-function-pair gaps along a recovery sweep
    Mfpair(ConfigArg),
    /// Run the built-in identity checks
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeometryKind {
    Plane,
    Disk2d,
    Sphere3d,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitKind {
    None,
    Arcs,
    Cap,
}

#[derive(Debug, Args)]
struct LimitsArgs {
    #[arg(long, value_enum)]
    geometry: GeometryKind,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    center: Vec<f64>,
    /// Plane: ambient dimension
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    position: f64,
    #[arg(long, default_value_t = 1.0)]
    cross_section: f64,
    #[arg(long, value_enum, default_value = "none")]
    split: SplitKind,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    #[arg(long, default_value_t = 1.0)]
    a2: f64,
    #[arg(long, default_value = "quartic")]
    potential: String,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long, default_value = "quartic")]
    potential: String,
    /// Dump the truncated profile for this ε (stretched variable)
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 6.0)]
    t_max: f64,
    #[arg(long, default_value_t = 601)]
    samples: usize,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    config: PathBuf,
    /// ε to build; defaults to the smallest in the config
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dump u and v per ε in the grid file format (u_eps0p1.json and so on)
    #[arg(long)]
    fields_out: Option<PathBuf>,
    /// Write a log-log error plot
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SliceArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Measures of K level sets of φ∘u
    #[arg(long)]
    levels: Option<usize>,
    /// Per-slice Modica–Mortola energy of v on {φ∘u = t}
    #[arg(long, allow_negative_numbers = true)]
    per_slice_mm: Option<f64>,
    #[arg(long)]
    coarea: bool,
    #[arg(long, default_value_t = 64)]
    coarea_samples: usize,
    #[arg(long)]
    mfpair: bool,
    /// Centre "x,y,z" and radius of a density probe
    #[arg(long, num_args = 2, value_names = ["X0", "R"], allow_negative_numbers = true)]
    density: Option<Vec<String>>,
    /// Write the level set {u = surface_level} with v as vertex scalar
    #[arg(long)]
    surface_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    surface_level: f64,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write u and v every N steps
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Verify the variations against finite differences before stepping
    #[arg(long)]
    check_gradients: bool,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    if cli.version {
        println!("{}", version_string());
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        eprintln!("{}", <Cli as clap::CommandFactory>::command().render_usage());
        return EXIT_CONFIG;
    };
    match run(command, cli.threads) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("phasemem: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command, threads: Option<usize>) -> Result<(), CliError> {
    match command {
        Command::Limits(a) => in_pool(threads, None, || cmd_limits(&a)),
        Command::Profile(a) => in_pool(threads, None, || cmd_profile(&a)),
        Command::Selftest => in_pool(threads, None, cmd_selftest),
        Command::Recover(a) => {
            let spec: RecoverySpec = config::load(&a.config)?;
            in_pool(threads, Some(&spec.globals()), || cmd_recover(&spec, &a))
        }
        Command::Sweep(a) => {
            let spec: RecoverySpec = config::load(&a.config)?;
            in_pool(threads, Some(&spec.globals()), || cmd_sweep(&spec, &a))
        }
        Command::Slice(a) => {
            let spec: RecoverySpec = config::load(&a.config)?;
            in_pool(threads, Some(&spec.globals()), || cmd_slice(&spec, &a))
        }
        Command::Mfpair(a) => {
            let spec: RecoverySpec = config::load(&a.config)?;
            in_pool(threads, Some(&spec.globals()), || cmd_mfpair(&spec))
        }
        Command::Flow(a) => {
            let spec: FlowSpec = config::load(&a.config)?;
            in_pool(threads, Some(&spec.globals()), || cmd_flow(&spec, &a))
        }
    }
}

/// Runs `f` on a pool sized by the command line, else the config, else rayon's default.
fn in_pool<F>(threads: Option<usize>, globals: Option<&Globals>, f: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    if let Some(g) = globals {
        g.validate()?;
    }
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let n = threads.or_else(|| globals.and_then(Globals::thread_count));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn meta() -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "field_format_version": FIELD_FORMAT_VERSION,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Numerical(format!("serialization: {e}")))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn print_json(value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn cmd_limits(a: &LimitsArgs) -> Result<(), CliError> {
    let surface = match a.geometry {
        GeometryKind::Plane => Surface::Plane {
            dim: a.dim,
            position: a.position,
            cross_section: a.cross_section,
        },
        GeometryKind::Disk2d => {
            let center = match a.center.as_slice() {
                [] => [0.0; 2],
                [x, y] => [*x, *y],
                _ => return Err(CliError::Config("--center: disk2d needs 2 coordinates".into())),
            };
            Surface::Disk {
                radius: a.radius,
                center,
            }
        }
        GeometryKind::Sphere3d => {
            let center = match a.center.as_slice() {
                [] => [0.0; 3],
                [x, y, z] => [*x, *y, *z],
                _ => return Err(CliError::Config("--center: sphere3d needs 3 coordinates".into())),
            };
            Surface::Sphere {
                radius: a.radius,
                center,
            }
        }
    };
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Config(format!("--{name} is required by this split")));
    let split = match a.split {
        SplitKind::None => PhaseSplit::None,
        SplitKind::Arcs => PhaseSplit::TwoArcs {
            alpha1: need(a.alpha1, "alpha1")?,
            alpha2: need(a.alpha2, "alpha2")?,
        },
        SplitKind::Cap => PhaseSplit::Cap {
            theta0: need(a.theta0, "theta0")?,
        },
    };
    let geometry = Geometry::new(surface, split)?;
    let well: DoubleWell = a.potential.parse()?;
    let limits = geometry.sharp_limits(&well, &Modulus::new(a.a1, a.a2)?)?;
    print_json(&to_json(&limits)?)
}

fn cmd_profile(a: &ProfileArgs) -> Result<(), CliError> {
    if a.samples < 2 || a.t_max.is_nan() || a.t_max <= 0.0 {
        return Err(CliError::Config("profile: need samples ≥ 2 and t_max > 0".into()));
    }
    let well: DoubleWell = a.potential.parse()?;
    let optimal = OptimalProfile::new(&well)?;
    let truncated = a.epsilon.map(|e| TruncatedProfile::new(&well, e)).transpose()?;
    let mut csv = String::from("t,w,w_prime,W\n");
    for k in 0..a.samples {
        let t = -a.t_max + 2.0 * a.t_max * k as f64 / (a.samples - 1) as f64;
        let (w, dw) = match &truncated {
            Some(tp) => {
                let [w, dw, _] = tp.eval_all(t);
                (w, dw)
            }
            None => (optimal.value(t), optimal.derivative(t)),
        };
        csv.push_str(&format!("{t},{w},{dw},{}\n", well.w(w)));
    }
    match &a.out {
        Some(p) => Ok(write_atomic(p, csv.as_bytes())?),
        None => std::io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn pick_epsilon(cfg: &RecoveryConfig, requested: Option<f64>) -> Result<f64, CliError> {
    match requested {
        Some(e) if e > 0.0 && e < 1.0 => Ok(e),
        Some(e) => Err(CliError::Config(format!("--epsilon must lie in (0, 1), got {e}"))),
        None => cfg
            .epsilons
            .last()
            .copied()
            .ok_or_else(|| CliError::Config("epsilons: empty list".into())),
    }
}

fn recovery_fields(cfg: &RecoveryConfig, epsilon: f64) -> Result<(ScalarField, ScalarField), CliError> {
    let u = build_u(cfg, epsilon)?;
    let v = match cfg.geometry.split {
        PhaseSplit::None => ScalarField::constant(u.spec().clone(), -1.0),
        _ => build_v(cfg, epsilon)?,
    };
    Ok((u, v))
}

fn cmd_recover(spec: &RecoverySpec, a: &RecoverArgs) -> Result<(), CliError> {
    let cfg = spec.build()?;
    let epsilon = pick_epsilon(&cfg, a.epsilon)?;
    let (u, v) = recovery_fields(&cfg, epsilon)?;
    let report = energy_report(&u, &v, &cfg.well, &cfg.modulus, epsilon)?;
    let dir = spec.globals().output_dir();
    ensure_dir(&dir)?;
    write_field(&u, &dir.join("u"))?;
    write_field(&v, &dir.join("v"))?;
    let out = json!({
        "meta": meta(),
        "epsilon": epsilon,
        "h": u.spec().spacing(),
        "dims": u.spec().dims(),
        "limits": to_json(&cfg.limits()?)?,
        "report": to_json(&report)?,
    });
    write_json(&dir.join("recover.json"), &out)?;
    print_json(&out["report"])
}

/// Absolute relative errors per energy, one series per energy that has a limit.
pub fn error_series(result: &SweepResult) -> Vec<Series> {
    type Getter = fn(&phasemem::recovery::RelativeErrors) -> Option<f64>;
    let pick: [(&str, Getter); 4] = [
        ("M", |e| e.m),
        ("I", |e| e.i),
        ("J", |e| e.j),
        ("F", |e| e.f),
    ];
    pick.iter()
        .filter_map(|(name, get)| {
            let points: Option<Vec<(f64, f64)>> = result
                .rows
                .iter()
                .map(|r| get(&r.errors).map(|e| (r.epsilon, e.abs())))
                .collect();
            match points {
                Some(p) if p.len() >= 2 => Some(Series {
                    name: (*name).into(),
                    points: p,
                }),
                _ => None,
            }
        })
        .collect()
}

fn cmd_sweep(spec: &RecoverySpec, a: &SweepArgs) -> Result<(), CliError> {
    let cfg = spec.build()?;
    let dir = spec.globals().output_dir();
    ensure_dir(&dir)?;
    if let Some(f) = &a.fields_out {
        ensure_dir(f)?;
    }
    let result = sweep_with(&cfg, |fields| {
        if let Some(f) = &a.fields_out {
            // the field writer treats a dot as an extension separator
            let tag = fields.epsilon.to_string().replace('.', "p");
            write_field(fields.u, &f.join(format!("u_eps{tag}")))?;
            write_field(fields.v, &f.join(format!("v_eps{tag}")))?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("sweep.csv"), result.to_csv().as_bytes())?;
    let mut out = to_json(&result)?;
    out["meta"] = meta();
    write_json(&dir.join("sweep.json"), &out)?;
    if let Some(p) = &a.svg {
        let series = error_series(&result);
        if series.is_empty() {
            eprintln!("phasemem: fewer than 2 rows with limits, no plot written");
        } else {
            svg::emit_svg(&series, p)?;
        }
    }
    match (&result.complete, &result.failure) {
        (false, Some(msg)) => Err(CliError::Numerical(format!("sweep stopped early: {msg}"))),
        _ => Ok(()),
    }
}

fn parse_point(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts.as_deref() {
        Ok([x, y, z]) => Ok([*x, *y, *z]),
        Ok([x, y]) => Ok([*x, *y, 0.0]),
        _ => Err(CliError::Config(format!("--density: bad point '{s}', expected x,y,z"))),
    }
}

fn cmd_slice(spec: &RecoverySpec, a: &SliceArgs) -> Result<(), CliError> {
    let cfg = spec.build()?;
    let epsilon = pick_epsilon(&cfg, a.epsilon)?;
    let (u, v) = recovery_fields(&cfg, epsilon)?;
    let well = &cfg.well;
    let sigma = well.sigma();
    let mut out = json!({ "meta": meta(), "epsilon": epsilon, "h": u.spec().spacing() });
    if let Some(k) = a.levels {
        if k == 0 {
            return Err(CliError::Config("--levels must be positive".into()));
        }
        let big_u = slicing::compose_phi(&u, well);
        let levels: Vec<f64> = (0..k).map(|j| sigma * (j as f64 + 0.5) / k as f64).collect();
        let measures = slicing::level_measures(&big_u, &levels)?;
        out["levels"] = json!(levels
            .iter()
            .zip(&measures)
            .map(|(t, m)| json!({"t": t, "measure": m}))
            .collect::<Vec<_>>());
    }
    if let Some(t) = a.per_slice_mm {
        out["per_slice_mm"] = json!({"t": t, "value": slicing::per_slice_mm(&u, &v, well, epsilon, t)?});
    }
    if a.coarea {
        let big_u = slicing::compose_phi(&u, well);
        out["coarea"] = to_json(&slicing::coarea_check(&big_u, a.coarea_samples)?)?;
    }
    if a.mfpair {
        let gaps = slicing::mf_pair_gaps(&u, &v, well, epsilon, &cfg.geometry, &builtin_test_functions())?;
        out["mfpair"] = to_json(&gaps)?;
    }
    if let Some(d) = &a.density {
        let x0 = parse_point(&d[0])?;
        let r: f64 = d[1]
            .parse()
            .map_err(|_| CliError::Config(format!("--density: bad radius '{}'", d[1])))?;
        out["density"] = json!({"x0": x0, "r": r, "ratio": slicing::density_ratio(&u, well, epsilon, x0, r)?});
    }
    if let Some(p) = &a.surface_out {
        let surf = slicing::extract_with(&u, a.surface_level, &[&v])?;
        out["surface"] = json!({"level": a.surface_level, "total_measure": surf.total_measure(), "simplices": surf.simplices.len()});
        write_json(p, &surf.to_json())?;
    }
    let dir = spec.globals().output_dir();
    ensure_dir(&dir)?;
    write_json(&dir.join("slice.json"), &out)?;
    print_json(&out)
}

fn cmd_mfpair(spec: &RecoverySpec) -> Result<(), CliError> {
    let cfg = spec.build()?;
    let tests = builtin_test_functions();
    let mut rows = Vec::new();
    let result = sweep_with(&cfg, |f| {
        let gaps = slicing::mf_pair_gaps(f.u, f.v, &cfg.well, f.epsilon, &cfg.geometry, &tests)?;
        rows.push(json!({"epsilon": f.epsilon, "gaps": serde_json::to_value(&gaps).unwrap_or(Value::Null)}));
        Ok(())
    })?;
    let dir = spec.globals().output_dir();
    ensure_dir(&dir)?;
    let out = json!({"meta": meta(), "rows": rows, "complete": result.complete, "failure": result.failure});
    write_json(&dir.join("mfpair.json"), &out)?;
    if let Some(msg) = result.failure {
        return Err(CliError::Numerical(format!("mfpair stopped early: {msg}")));
    }
    Ok(())
}

fn flow_summary(log: &FlowLog, check: Option<&flow::GradientCheck>) -> Result<Value, CliError> {
    Ok(json!({
        "meta": meta(),
        "accepted_steps": log.accepted_steps,
        "backtracks": log.backtracks,
        "worst_increase": log.worst_increase,
        "final": to_json(&log.rows.last())?,
        "gradient_check": to_json(&check)?,
    }))
}

fn cmd_flow(spec: &FlowSpec, a: &FlowArgs) -> Result<(), CliError> {
    let cfg = spec.build()?;
    let dir = spec.globals().output_dir();
    ensure_dir(&dir)?;
    let check = if a.check_gradients {
        let s = flow::initial_state(&cfg)?;
        let c = flow::check_gradients(&s.u, &s.v, &cfg.well, cfg.epsilon, 5, 1e-5, cfg.seed)?;
        if c.worst() > 1e-4 {
            return Err(CliError::Numerical(format!(
                "gradient check failed: worst relative error {:.3e}",
                c.worst()
            )));
        }
        Some(c)
    } else {
        None
    };
    let ckdir = dir.join("checkpoints");
    if let Some(n) = a.checkpoint_every {
        if n == 0 {
            return Err(CliError::Config("--checkpoint-every must be positive".into()));
        }
        ensure_dir(&ckdir)?;
    }
    let log = flow::run_with(&cfg, |s| {
        if let Some(n) = a.checkpoint_every {
            if s.step % n == 0 {
                write_field(&s.u, &ckdir.join(format!("u_{:06}", s.step)))?;
                write_field(&s.v, &ckdir.join(format!("v_{:06}", s.step)))?;
            }
        }
        Ok(())
    })?;
    log.write_csv(&dir.join("flow.csv"))?;
    write_json(&dir.join("flow.json"), &flow_summary(&log, check.as_ref())?)
}

fn cmd_selftest() -> Result<(), CliError> {
    let results = selftest::run_all();
    let mut failed = 0;
    for r in &results {
        println!("{} {}{}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default());
        failed += usize::from(!r.passed);
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} self-test checks failed")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let c: CliError = phasemem::Error::Config("x".into()).into();
        assert_eq!(c.exit_code(), EXIT_CONFIG);
        let n: CliError = phasemem::Error::DegenerateProfile.into();
        assert_eq!(n.exit_code(), EXIT_NUMERICAL);
        let i: CliError = phasemem::Error::Io {
            key: "dims".into(),
            message: "bad".into(),
        }
        .into();
        assert_eq!(i.exit_code(), EXIT_IO);
    }

    #[test]
    fn unknown_subcommand_is_a_config_error() {
        assert_eq!(dispatch(["phasemem", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(dispatch(["phasemem"]), EXIT_CONFIG);
    }

    #[test]
    fn version_mentions_field_format() {
        assert!(version_string().contains(&format!("field format {FIELD_FORMAT_VERSION}")));
        assert_eq!(dispatch(["phasemem", "--version"]), EXIT_OK);
    }

    #[test]
    fn parses_points() {
        assert_eq!(parse_point("1,0,-0.5").unwrap(), [1.0, 0.0, -0.5]);
        assert!(parse_point("1;2").is_err());
    }
}
