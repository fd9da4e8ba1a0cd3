//! Command-line interface to the flowcurv library.
//!
//! Every operation is a subcommand with machine-readable output (CSV with a
//! header row, or JSON). File outputs are written atomically (temp file +
//! rename). Exit codes: 0 success, 1 usage error, 2 numerical failure
//! (divergence, no fixed points).

use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use flowcurv::catalog;
use flowcurv::classify::{classify_system, ClassifyOptions};
use flowcurv::curvature::{crossings, CrossingEvent, Curvature, FieldSelector};
use flowcurv::dynamics::{
    find_fixed_points, integrate, wrapping_number, FixedPoint, IntegrateOptions, Role,
    SearchOptions, Trajectory,
};
use flowcurv::report::ClassifyReport;
use flowcurv::section_analysis::{
    build_return_map, section_crossings, transition_matrix, SectionDirection, SectionSpec,
};
use flowcurv::surface_mesh::{
    extract_mesh, padded_bounds, write_flags_csv, write_obj, MeshOptions,
};

#[derive(Parser)]
#[command(
    name = "flowcurv",
    version,
    about = "Flow curvature manifolds of 3D polynomial flows",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the system catalog
    Systems(SystemsCmd),
    /// Integrate a system and write the trajectory as CSV (t,x,y,z)
    Integrate(IntegrateArgs),
    /// Locate and classify the fixed points
    FixedPoints(FixedPointsArgs),
    /// Print the wrapping number W = (omega / lambda_3) * separation
    WrapNumber(WrapNumberArgs),
    /// Evaluate phi, phi_c, phi_t along a stored trajectory
    Curvature(CurvatureArgs),
    /// Scan a trajectory for sign changes of a curvature scalar
    Crossings(CrossingsArgs),
    /// Intersect a trajectory with a section plane (CSV t,x,y,z,rho)
    Poincare(PoincareArgs),
    /// Build the first-return map, branch partition, and transition matrix
    ReturnMap(ReturnMapArgs),
    /// Extract the implicit surface of a curvature scalar as an OBJ mesh
    Surface(SurfaceArgs),
    /// Run the full classification pipeline (verdict report as JSON)
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct SystemsCmd {
    #[command(subcommand)]
    action: SystemsAction,
}

#[derive(Subcommand)]
enum SystemsAction {
    /// List every catalog system
    List {
        /// Emit a JSON array instead of a text table
        #[arg(long)]
        json: bool,
    },
}

/// Flags shared by every command that names a catalog system.
#[derive(Args)]
struct SystemArgs {
    /// Catalog system name (see `systems list`)
    #[arg(long)]
    system: String,
    /// Parameter override, repeatable (`--param a=0.556`)
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

/// Flags shared by every command that integrates a trajectory.
#[derive(Args)]
struct RunArgs {
    /// Initial condition (defaults to the catalog value)
    #[arg(long, value_name = "X,Y,Z")]
    ic: Option<String>,
    /// Integration span after the transient
    #[arg(long = "t-end", default_value_t = 2000.0)]
    t_end: f64,
    /// Output sampling step
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Settling time discarded before sampling starts
    #[arg(long, default_value_t = 500.0)]
    transient: f64,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixedPointsArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Seed for the Newton search jitter
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WrapNumberArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CurvatureArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Input trajectory CSV with header t,x,y,z
    #[arg(long)]
    traj: PathBuf,
    /// Output CSV path (t,x,y,z,phi,phi_c,phi_t)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossingsArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Which scalar to scan: phi, phi_c, or phi_t
    #[arg(long, default_value = "phi_t")]
    which: String,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PoincareArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Section plane `p=PX,PY,PZ;n=NX,NY,NZ;dir=-` (default: the
    /// largest-variance axis plane through the inner fixed point)
    #[arg(long)]
    plane: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (t,x,y,z,rho)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReturnMapArgs {
    /// Input section CSV (needs a rho column)
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV of successive pairs (rho_k,rho_k1)
    #[arg(long)]
    out: PathBuf,
    /// Also write the branch partition and transition matrix as JSON
    #[arg(long)]
    gamma: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Which scalar to mesh: phi, phi_c, or phi_t
    #[arg(long, default_value = "phi_t")]
    field: String,
    /// `auto` (trajectory box + 10%) or `x0,x1,y0,y1,z0,z1`
    #[arg(long, default_value = "auto")]
    bounds: String,
    /// Grid resolution per axis
    #[arg(long, default_value_t = 64)]
    res: usize,
    /// Output OBJ path
    #[arg(long)]
    out: PathBuf,
    /// Optional per-vertex flag CSV (vertex,x,y,z,gradient_norm,flagged)
    #[arg(long)]
    flags: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Catalog system name (or use --all)
    #[arg(long, conflicts_with = "all")]
    system: Option<String>,
    /// Classify every catalog system
    #[arg(long)]
    all: bool,
    /// Parameter override. With --system: `a=0.556` or `rossler.a=0.556`;
    /// with --all: must be scoped, `rossler.a=0.556`
    #[arg(long = "param", value_name = "[SYSTEM.]K=V")]
    params: Vec<String>,
    /// Emit the full JSON report (single object, or array with --all)
    #[arg(long)]
    json: bool,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for --all (default: FLOWCURV_JOBS or 1)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long = "t-end", default_value_t = 20_000.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 500.0)]
    transient: f64,
    /// Mesh resolution for the surface diagnostics
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial condition override (single system only)
    #[arg(long, value_name = "X,Y,Z")]
    ic: Option<String>,
}

/// Failures split by exit code: usage errors (1) and numerical failures (2).
enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<flowcurv::Error> for CliError {
    fn from(e: flowcurv::Error) -> CliError {
        use flowcurv::Error::*;
        match e {
            NoFixedPoints | StepSizeUnderflow(_) | NotAFixedPoint(..) | ComplexFixedPoints(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Systems(cmd) => match cmd.action {
            SystemsAction::List { json } => systems_list(json),
        },
        Command::Integrate(args) => cmd_integrate(args),
        Command::FixedPoints(args) => cmd_fixed_points(args),
        Command::WrapNumber(args) => cmd_wrap_number(args),
        Command::Curvature(args) => cmd_curvature(args),
        Command::Crossings(args) => cmd_crossings(args),
        Command::Poincare(args) => cmd_poincare(args),
        Command::ReturnMap(args) => cmd_return_map(args),
        Command::Surface(args) => cmd_surface(args),
        Command::Classify(args) => cmd_classify(args),
    }
}

// ---------------------------------------------------------------- helpers

/// Writes `content` to `path` atomically: temp file in the same directory,
/// then rename.
fn write_atomic(path: &Path, content: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("`{}` has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| -> io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(CliError::from)
}

/// Prints to stdout, terminating quietly when the reader closed the pipe.
fn print_out(content: &str) -> Result<(), CliError> {
    match io::stdout().write_all(content.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => std::process::exit(0),
        other => other.map_err(CliError::from),
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => print_out(content),
    }
}

/// Parses `--param` values of the form `k=v` or `system.k=v` into
/// (scope, key, value) triples.
fn parse_params(raw: &[String]) -> Result<Vec<(Option<String>, String, f64)>, CliError> {
    raw.iter()
        .map(|s| {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("`--param {s}`: expected K=V")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("`--param {s}`: `{value}` is not a number")))?;
            let (scope, key) = match key.split_once('.') {
                Some((system, k)) => (Some(system.trim().to_string()), k.trim().to_string()),
                None => (None, key.trim().to_string()),
            };
            Ok((scope, key, value))
        })
        .collect()
}

/// Resolves `--param` triples against one system name.
fn overrides_for(
    system: &str,
    params: &[(Option<String>, String, f64)],
    require_scope: bool,
) -> Result<Vec<(String, f64)>, CliError> {
    let mut out = Vec::new();
    for (scope, key, value) in params {
        match scope {
            Some(s) if s == system => out.push((key.clone(), *value)),
            Some(_) => {}
            None if require_scope => {
                return Err(CliError::usage(format!(
                    "`--param {key}={value}` must be scoped as SYSTEM.{key}=... when --all is used"
                )));
            }
            None => out.push((key.clone(), *value)),
        }
    }
    Ok(out)
}

fn parse_triple(s: &str, what: &str) -> Result<Vector3<f64>, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!("{what} `{s}`: expected X,Y,Z")));
    }
    let mut v = Vector3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{what} `{s}`: `{p}` is not a number")))?;
    }
    Ok(v)
}

struct BuiltSystem {
    bound: flowcurv::field_dsl::BoundField,
    initial_condition: Vector3<f64>,
}

fn build_system(args: &SystemArgs, ic: Option<&String>) -> Result<BuiltSystem, CliError> {
    let def = catalog::find(&args.system)?;
    let params = parse_params(&args.params)?;
    let overrides = overrides_for(&args.system, &params, false)?;
    let (field, _) = catalog::build(&args.system, &overrides)?;
    let bound = field.bind(&[])?;
    let initial_condition = match ic {
        Some(s) => parse_triple(s, "--ic")?,
        None => def.initial_condition(),
    };
    Ok(BuiltSystem {
        bound,
        initial_condition,
    })
}

fn run_trajectory(sys: &BuiltSystem, run: &RunArgs) -> Result<Trajectory, CliError> {
    let traj = integrate(
        &sys.bound,
        &sys.initial_condition,
        &IntegrateOptions {
            t_end: run.t_end,
            dt_output: run.dt,
            transient: run.transient,
            ..IntegrateOptions::default()
        },
    )?;
    Ok(traj)
}

fn check_divergence(traj: &Trajectory) -> Result<(), CliError> {
    if traj.diverged() {
        Err(CliError::Numerical(
            "trajectory diverged before the end of the run".into(),
        ))
    } else {
        Ok(())
    }
}

fn parse_selector(s: &str) -> Result<FieldSelector, CliError> {
    s.parse::<FieldSelector>().map_err(CliError::from)
}

// ------------------------------------------------------------- systems

fn systems_list(json: bool) -> Result<(), CliError> {
    let infos = catalog::list_systems();
    if json {
        let entries: Vec<serde_json::Value> = infos
            .iter()
            .map(|info| {
                serde_json::json!({
                    "name": info.name,
                    "title": info.title,
                    "params": info.params.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
                    "defaults": { "initial_condition": info.default_ic },
                    "fixed_point_count_expected": info.expected_fixed_points,
                    "orientation": info.orientation.as_str(),
                    "notes": info.notes,
                })
            })
            .collect();
        print_out(&format!("{}\n", serde_json::to_string_pretty(&entries)?))
    } else {
        let mut text = format!("{:<14} {:<34} {:>6}  params\n", "name", "title", "fps");
        for info in &infos {
            let params = info
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                text,
                "{:<14} {:<34} {:>6}  {}",
                info.name, info.title, info.expected_fixed_points, params
            );
        }
        print_out(&text)
    }
}

// ----------------------------------------------------------- integrate

fn cmd_integrate(args: IntegrateArgs) -> Result<(), CliError> {
    let sys = build_system(&args.system, args.run.ic.as_ref())?;
    let traj = run_trajectory(&sys, &args.run)?;
    let mut csv = String::from("t,x,y,z\n");
    for (t, s) in traj.iter() {
        let _ = writeln!(csv, "{t},{},{},{}", s.x, s.y, s.z);
    }
    write_atomic(&args.out, csv.as_bytes())?;
    check_divergence(&traj)
}

// -------------------------------------------------------- fixed-points

fn fixed_points_of(
    bound: &flowcurv::field_dsl::BoundField,
    seed: u64,
) -> Result<Vec<FixedPoint>, CliError> {
    let fps = find_fixed_points(
        bound,
        &SearchOptions {
            seed,
            ..SearchOptions::default()
        },
    );
    if fps.is_empty() {
        return Err(flowcurv::Error::NoFixedPoints.into());
    }
    Ok(fps)
}

fn fixed_point_json(fp: &FixedPoint) -> serde_json::Value {
    serde_json::json!({
        "location": [fp.location.x, fp.location.y, fp.location.z],
        "eigenvalues": fp.eigenvalues.iter().map(|l| serde_json::json!({"re": l.re, "im": l.im})).collect::<Vec<_>>(),
        "class": fp.class.as_str(),
        "role": fp.role.as_str(),
        "shape": fp.shape.as_str(),
        "has_phi_t_component": fp.has_phi_t_component,
        "residual": fp.residual,
    })
}

fn cmd_fixed_points(args: FixedPointsArgs) -> Result<(), CliError> {
    let sys = build_system(&args.system, None)?;
    let fps = fixed_points_of(&sys.bound, args.seed)?;
    if args.json {
        let values: Vec<_> = fps.iter().map(fixed_point_json).collect();
        print_out(&format!("{}\n", serde_json::to_string_pretty(&values)?))
    } else {
        let mut text = String::new();
        for fp in &fps {
            let _ = writeln!(
                text,
                "({:+.6}, {:+.6}, {:+.6})  {}  {}  eigenvalues {}",
                fp.location.x,
                fp.location.y,
                fp.location.z,
                fp.class.as_str(),
                fp.role.as_str(),
                fp.eigenvalues
                    .iter()
                    .map(|l| format!("{:+.4}{:+.4}i", l.re, l.im))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        print_out(&text)
    }
}

// --------------------------------------------------------- wrap-number

fn cmd_wrap_number(args: WrapNumberArgs) -> Result<(), CliError> {
    let sys = build_system(&args.system, None)?;
    let fps = fixed_points_of(&sys.bound, args.seed)?;
    let w = wrapping_number(&fps);
    if args.json {
        print_out(&format!(
            "{}\n",
            serde_json::to_string_pretty(&serde_json::json!({
                "defined": w.is_defined(),
                "value": w.value,
                "omega": w.omega,
                "lambda_3": w.lambda_3,
                "separation": w.separation,
                "note": w.note,
            }))?
        ))
    } else {
        match w.value {
            Some(value) => print_out(&format!(
                "W = {value:.6} (omega {:.6}, lambda_3 {:.6}, separation {:.6})\n",
                w.omega.unwrap_or(f64::NAN),
                w.lambda_3.unwrap_or(f64::NAN),
                w.separation.unwrap_or(f64::NAN),
            )),
            None => print_out(&format!(
                "W undefined: {}\n",
                w.note.as_deref().unwrap_or("not available")
            )),
        }
    }
}

// ----------------------------------------------------------- curvature

/// Reads a trajectory CSV, returning (times, states). Requires columns
/// t, x, y, z (by header name).
fn read_trajectory_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vector3<f64>>), CliError> {
    let mut content = String::new();
    std::fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open `{}`: {e}", path.display())))?
        .read_to_string(&mut content)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("`{}` is empty", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let index_of = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::usage(format!("`{}` has no `{name}` column", path.display())))
    };
    let (ti, xi, yi, zi) = (index_of("t")?, index_of("x")?, index_of("y")?, index_of("z")?);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| -> Result<f64, CliError> {
            fields
                .get(i)
                .ok_or_else(|| {
                    CliError::usage(format!(
                        "`{}` line {}: expected {} columns",
                        path.display(),
                        lineno + 1,
                        columns.len()
                    ))
                })?
                .parse()
                .map_err(|_| {
                    CliError::usage(format!(
                        "`{}` line {}: malformed number",
                        path.display(),
                        lineno + 1
                    ))
                })
        };
        times.push(parse(ti)?);
        states.push(Vector3::new(parse(xi)?, parse(yi)?, parse(zi)?));
    }
    if states.is_empty() {
        return Err(CliError::usage(format!(
            "`{}` holds no data rows",
            path.display()
        )));
    }
    Ok((times, states))
}

fn cmd_curvature(args: CurvatureArgs) -> Result<(), CliError> {
    let sys = build_system(&args.system, None)?;
    let curv = Curvature::from_bound(sys.bound);
    let (times, states) = read_trajectory_csv(&args.traj)?;
    let mut csv = String::from("t,x,y,z,phi,phi_c,phi_t\n");
    for (t, s) in times.iter().zip(&states) {
        let (phi, phi_c, phi_t) = curv.det_values(s);
        let _ = writeln!(csv, "{t},{},{},{},{phi},{phi_c},{phi_t}", s.x, s.y, s.z);
    }
    write_atomic(&args.out, csv.as_bytes())
}

// ----------------------------------------------------------- crossings

fn cmd_crossings(args: CrossingsArgs) -> Result<(), CliError> {
    let which = parse_selector(&args.which)?;
    let sys = build_system(&args.system, args.run.ic.as_ref())?;
    let traj = run_trajectory(&sys, &args.run)?;
    check_divergence(&traj)?;
    let curv = Curvature::from_bound(sys.bound);
    let scan = crossings(&curv, &traj, which);

    let mut rows: Vec<(&CrossingEvent, &str)> = scan
        .events
        .iter()
        .map(|e| (e, "event"))
        .chain(scan.tangencies.iter().map(|e| (e, "tangency")))
        .collect();
    rows.sort_by(|a, b| a.0.t.partial_cmp(&b.0.t).expect("finite event times"));
    let mut csv = String::from("t,x,y,z,field,direction,value,kind\n");
    for (e, kind) in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{kind}",
            e.t,
            e.state.x,
            e.state.y,
            e.state.z,
            e.which.as_str(),
            e.direction.as_str(),
            e.value
        );
    }
    emit(args.out.as_deref(), &csv)
}

// ------------------------------------------------------------ poincare

/// Parses `p=PX,PY,PZ;n=NX,NY,NZ;dir=-` into a section through `p` with
/// normal `n`, accepting crossings in the given direction (`+`, `-`,
/// `both`; default `-`). The in-plane rho axis is the coordinate axis most
/// orthogonal to the normal, projected into the plane.
fn parse_plane(s: &str) -> Result<SectionSpec, CliError> {
    let mut point = None;
    let mut normal = None;
    let mut direction = SectionDirection::Down;
    for part in s.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--plane segment `{part}`: expected key=value")))?;
        match key.trim() {
            "p" => point = Some(parse_triple(value, "--plane p")?),
            "n" => normal = Some(parse_triple(value, "--plane n")?),
            "dir" => {
                direction = match value.trim() {
                    "+" => SectionDirection::Up,
                    "-" => SectionDirection::Down,
                    "both" => SectionDirection::Both,
                    other => {
                        return Err(CliError::usage(format!(
                            "--plane dir `{other}`: expected +, -, or both"
                        )))
                    }
                }
            }
            other => {
                return Err(CliError::usage(format!(
                    "--plane key `{other}`: expected p, n, or dir"
                )))
            }
        }
    }
    let point = point.ok_or_else(|| CliError::usage("--plane needs `p=PX,PY,PZ`"))?;
    let normal = normal.ok_or_else(|| CliError::usage("--plane needs `n=NX,NY,NZ`"))?;
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let rho_axis = axes
        .iter()
        .min_by(|a, b| {
            let (da, db) = (a.dot(&normal).abs(), b.dot(&normal).abs());
            da.partial_cmp(&db).expect("finite axis projections")
        })
        .copied()
        .expect("three candidate axes");
    SectionSpec::new(point, normal, rho_axis, direction, false).map_err(CliError::from)
}

fn cmd_poincare(args: PoincareArgs) -> Result<(), CliError> {
    let sys = build_system(&args.system, args.run.ic.as_ref())?;
    let traj = run_trajectory(&sys, &args.run)?;
    check_divergence(&traj)?;
    let spec = match &args.plane {
        Some(s) => parse_plane(s)?,
        None => {
            let fps = fixed_points_of(&sys.bound, args.seed)?;
            let inner = fps
                .iter()
                .find(|fp| fp.role == Role::Inner)
                .unwrap_or(&fps[0]);
            SectionSpec::default_for(&traj, &inner.location)?
        }
    };
    let scan = section_crossings(&sys.bound, &traj, &spec);
    let mut csv = String::from("t,x,y,z,rho\n");
    for c in &scan.crossings {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            c.t, c.state.x, c.state.y, c.state.z, c.rho
        );
    }
    write_atomic(&args.out, csv.as_bytes())
}

// ---------------------------------------------------------- return-map

fn cmd_return_map(args: ReturnMapArgs) -> Result<(), CliError> {
    let mut content = String::new();
    std::fs::File::open(&args.input)
        .map_err(|e| CliError::usage(format!("cannot open `{}`: {e}", args.input.display())))?
        .read_to_string(&mut content)?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("`{}` is empty", args.input.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let rho_index = columns
        .iter()
        .position(|c| *c == "rho")
        .ok_or_else(|| CliError::usage(format!("`{}` has no `rho` column", args.input.display())))?;
    let mut rho = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(rho_index)
            .ok_or_else(|| {
                CliError::usage(format!(
                    "`{}` line {}: missing rho column",
                    args.input.display(),
                    lineno + 2
                ))
            })?
            .trim();
        rho.push(field.parse::<f64>().map_err(|_| {
            CliError::usage(format!(
                "`{}` line {}: malformed number `{field}`",
                args.input.display(),
                lineno + 2
            ))
        })?);
    }

    let map = build_return_map(&rho);
    let mut csv = String::from("rho_k,rho_k1\n");
    for (a, b) in &map.pairs {
        let _ = writeln!(csv, "{a},{b}");
    }
    write_atomic(&args.out, csv.as_bytes())?;

    if let Some(gamma_path) = &args.gamma {
        let partition = map.partition.as_ref().ok_or_else(|| {
            CliError::Numerical(format!(
                "no branch partition: {}",
                map.warning
                    .as_deref()
                    .unwrap_or("too few section crossings")
            ))
        })?;
        let gamma = transition_matrix(&map)?;
        let json = serde_json::json!({
            "m": gamma.size(),
            "critical_points": partition.critical_points,
            "matrix": gamma.matrix,
        });
        write_atomic(gamma_path, format!("{}\n", serde_json::to_string_pretty(&json)?).as_bytes())?;
    }
    Ok(())
}

// ------------------------------------------------------------- surface

fn parse_bounds(s: &str) -> Result<Option<(Vector3<f64>, Vector3<f64>)>, CliError> {
    if s == "auto" {
        return Ok(None);
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 6 {
        return Err(CliError::usage(format!(
            "--bounds `{s}`: expected `auto` or x0,x1,y0,y1,z0,z1"
        )));
    }
    let mut v = [0.0; 6];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("--bounds `{s}`: `{p}` is not a number")))?;
    }
    let lo = Vector3::new(v[0], v[2], v[4]);
    let hi = Vector3::new(v[1], v[3], v[5]);
    if (0..3).any(|i| lo[i] >= hi[i]) {
        return Err(CliError::usage(format!(
            "--bounds `{s}`: each low bound must be below its high bound"
        )));
    }
    Ok(Some((lo, hi)))
}

fn cmd_surface(args: SurfaceArgs) -> Result<(), CliError> {
    let which = parse_selector(&args.field)?;
    let sys = build_system(&args.system, args.run.ic.as_ref())?;
    let bounds = match parse_bounds(&args.bounds)? {
        Some(b) => b,
        None => {
            let traj = run_trajectory(&sys, &args.run)?;
            check_divergence(&traj)?;
            padded_bounds(&traj)
                .ok_or_else(|| CliError::Numerical("empty trajectory".into()))?
        }
    };
    let curv = Curvature::from_bound(sys.bound);
    let mesh = extract_mesh(
        |p| curv.value(which, p),
        |p| curv.gradient(which, p),
        &MeshOptions {
            bounds,
            resolution: args.res,
            iso: 0.0,
        },
    )?;
    let mut obj = Vec::new();
    write_obj(&mesh, &mut obj)?;
    write_atomic(&args.out, &obj)?;
    if let Some(flags_path) = &args.flags {
        let mut flags = Vec::new();
        write_flags_csv(&mesh, &mut flags)?;
        write_atomic(flags_path, &flags)?;
    }
    eprintln!(
        "meshed {} vertices, {} triangles, {} components ({} spurious)",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.component_count(),
        mesh.spurious_component_indices().len()
    );
    Ok(())
}

// ------------------------------------------------------------ classify

fn classify_options(args: &ClassifyArgs) -> Result<ClassifyOptions, CliError> {
    let initial_condition = match &args.ic {
        Some(s) => Some(parse_triple(s, "--ic")?),
        None => None,
    };
    Ok(ClassifyOptions {
        t_end: args.t_end,
        dt: args.dt,
        transient: args.transient,
        mesh_resolution: args.res,
        seed: args.seed,
        initial_condition,
        ..ClassifyOptions::default()
    })
}

fn classify_summary(report: &ClassifyReport) -> String {
    let w = report
        .wrapping_number
        .value
        .map(|v| format!("{v:.4}"))
        .unwrap_or_else(|| "undefined".into());
    let m = report
        .return_map
        .as_ref()
        .and_then(|rm| rm.branch_count)
        .map(|m| m.to_string())
        .unwrap_or_else(|| "-".into());
    let spurious = report
        .mesh
        .as_ref()
        .map(|m| m.spurious_components.len())
        .unwrap_or(0);
    format!(
        "{:<12} {:<12} basis={:<16} events {:>5}/{:<5} m={:<3} W={:<10} spurious={}",
        report.system,
        report.verdict.verdict,
        report.verdict.basis,
        report.verdict.events_counted,
        report.verdict.events_total,
        m,
        w,
        spurious
    )
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let params = parse_params(&args.params)?;
    let opts = classify_options(&args)?;
    if args.all {
        let names: Vec<&'static str> = catalog::list_systems().iter().map(|i| i.name).collect();
        let jobs = args
            .jobs
            .or_else(|| {
                std::env::var("FLOWCURV_JOBS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(1)
            .clamp(1, names.len());
        let reports = classify_all(&names, &params, &opts, jobs)?;
        let rendered = if args.json {
            format!("{}\n", serde_json::to_string_pretty(&reports)?)
        } else {
            let mut text = String::new();
            for r in &reports {
                let _ = writeln!(text, "{}", classify_summary(r));
            }
            text
        };
        emit(args.out.as_deref(), &rendered)
    } else {
        let system = args
            .system
            .as_deref()
            .ok_or_else(|| CliError::usage("specify --system NAME or --all"))?;
        let overrides = overrides_for(system, &params, false)?;
        let report = classify_system(system, &overrides, &opts)?;
        let rendered = if args.json {
            format!("{}\n", serde_json::to_string_pretty(&report)?)
        } else {
            format!("{}\n", classify_summary(&report))
        };
        emit(args.out.as_deref(), &rendered)?;
        if report.diverged {
            return Err(CliError::Numerical(format!(
                "`{system}` diverged; verdict undetermined"
            )));
        }
        Ok(())
    }
}

/// Classifies `names` with up to `jobs` worker threads, preserving catalog
/// order in the output.
fn classify_all(
    names: &[&'static str],
    params: &[(Option<String>, String, f64)],
    opts: &ClassifyOptions,
    jobs: usize,
) -> Result<Vec<ClassifyReport>, CliError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ClassifyReport, flowcurv::Error>>>> =
        Mutex::new((0..names.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(name) = names.get(index) else {
                    break;
                };
                let overrides = match overrides_for(name, params, true) {
                    Ok(o) => o,
                    Err(_) => break, // surfaced by the pre-check below
                };
                let result = classify_system(name, &overrides, opts);
                slots.lock().expect("worker panicked").as_mut_slice()[index] = Some(result);
            });
        }
    });
    // Re-run the scope check sequentially so scoping errors surface with a
    // proper message (workers cannot return CliError directly).
    for name in names {
        overrides_for(name, params, true)?;
    }
    let slots = slots.into_inner().expect("worker panicked");
    let mut reports = Vec::with_capacity(names.len());
    for (name, slot) in names.iter().zip(slots) {
        let result = slot.ok_or_else(|| CliError::usage(format!("`{name}` was never run")))?;
        reports.push(result.map_err(CliError::from)?);
    }
    Ok(reports)
}
