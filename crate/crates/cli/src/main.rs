//! Command-line front end: adaptive and uniform runs, a refinement demo and the
//! invariant suite.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcurl_ocp::config::{parse_config, Mode, RunConfig};
use hcurl_ocp::driver::{format_real, record_slope, run_with, write_csv, ConvergenceRecord};
use hcurl_ocp::marking::MarkingStrategy;
use hcurl_ocp::mesh::io::{mesh_to_string, write_vtk, CellData};
use hcurl_ocp::mesh::{build_cube_mesh, build_lshape_mesh};
use hcurl_ocp::selfcheck::run_checks;
use hcurl_ocp::{Error, Mesh};

/// Only this variable is read from the environment.
const OUTPUT_ENV: &str = "HCURL_OCP_OUTPUT_DIR";
const LOCK_NAME: &str = ".hcurl-ocp.lock";

#[derive(Parser, Debug)]
#[command(name = "hcurl-ocp", version, about = "Adaptive edge elements for H(curl) optimal control with u ≥ 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve on a sequence of meshes and write convergence.csv
    Run(RunArgs),
    /// Refine towards the singular feature of a domain and report mesh statistics
    RefineDemo(DemoArgs),
    /// Run the invariant suite
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Adaptive,
    Uniform,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MarkingArg {
    Doerfler,
    Maximum,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file (flat key = value); command-line options take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// lshape, inclusion, or the path of a custom problem file
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_enum)]
    marking: Option<MarkingArg>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of refinements after the initial solve
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long = "max-dofs")]
    max_dofs: Option<usize>,
    /// Initial mesh resolution
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    /// Write one VTK file per level
    #[arg(long)]
    vtk: bool,
    /// Suppress the per-level progress lines
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoDomain {
    Lshape,
    Cube,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, value_enum, default_value = "lshape")]
    domain: DemoDomain,
    #[arg(long, default_value_t = 1)]
    resolution: usize,
    #[arg(long, default_value_t = 6)]
    steps: usize,
    /// Fraction of elements marked per step, closest to the feature first
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

/// Exit status 2 for usage and configuration errors, 1 for everything else.
#[derive(Debug)]
struct Failure {
    usage: bool,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { usage: true, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { usage: false, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let usage = matches!(e, Error::Config(_) | Error::Input(_) | Error::Parse { .. });
        Self { usage, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

/// Holds the output directory for one process, removed on drop.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Failure::runtime(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn output_dir(flag: Option<&PathBuf>, fallback: &Path) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| fallback.to_path_buf())
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Adaptive => Mode::Adaptive,
            ModeArg::Uniform => Mode::Uniform,
        };
    }
    if let Some(t) = args.theta {
        cfg.theta = t;
    }
    if let Some(m) = args.marking {
        cfg.marking = match m {
            MarkingArg::Doerfler => MarkingStrategy::Doerfler,
            MarkingArg::Maximum => MarkingStrategy::Maximum,
        };
    }
    if args.alpha.is_some() {
        cfg.alpha = args.alpha;
    }
    if let Some(n) = args.max_iters {
        cfg.max_iterations = n;
    }
    if let Some(n) = args.max_dofs {
        cfg.max_dofs = n;
    }
    if args.resolution.is_some() {
        cfg.initial_resolution = args.resolution;
    }
    cfg.vtk |= args.vtk;
    cfg.output_dir = output_dir(args.output_dir.as_ref(), &cfg.output_dir);
    cfg.validate()?;
    Ok(cfg)
}

fn progress_line(r: &ConvergenceRecord) -> String {
    format!(
        "iter {:3}  dofs {:8}  tets {:8}  eta {}  err {}  pg {:4}{}  marked {:7}  {:.2}s",
        r.iter,
        r.dofs_state,
        r.n_tets,
        format_real(r.eta_hat),
        format_real(r.err_total),
        r.pg_iters,
        if r.pg_converged { " " } else { "*" },
        r.marked,
        r.seconds
    )
}

fn print_slopes(records: &[ConvergenceRecord]) {
    let window = 6;
    let fits: [(&str, fn(&ConvergenceRecord) -> f64); 5] = [
        ("total error", |r| r.err_total),
        ("err_y", |r| r.err_y),
        ("err_p", |r| r.err_p),
        ("err_u", |r| r.err_u),
        ("eta_hat", |r| r.eta_hat),
    ];
    for (name, f) in fits {
        if let Some(s) = record_slope(records, window, f) {
            println!("slope of {name} over the last {} levels: {s:.4}", window.min(records.len()));
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(args)?;
    let problem = cfg.problem_spec()?;
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let quiet = args.quiet;
    let result = run_with(&problem, &cfg.adaptive_config(), |s| {
        if !quiet {
            eprintln!("{}", progress_line(s.record));
        }
    });
    let (records, failure) = match result {
        Ok(r) => (r, None),
        Err(partial) => (partial.records, Some(partial.error)),
    };
    let csv = cfg.output_dir.join("convergence.csv");
    write_csv(&records, BufWriter::new(File::create(&csv)?))?;
    if let Some(e) = failure {
        return Err(Failure::runtime(format!("{e} ({} levels written to {})", records.len(), csv.display())));
    }
    println!("{} levels written to {}", records.len(), csv.display());
    if records.iter().any(|r| !r.pg_converged) {
        println!("levels marked * stopped at the projected-gradient iteration limit");
    }
    print_slopes(&records);
    Ok(())
}

fn cmd_refine_demo(args: &DemoArgs) -> Result<(), Failure> {
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        return Err(Failure::usage(format!("--fraction must lie in (0, 1], got {}", args.fraction)));
    }
    let dir = output_dir(args.output_dir.as_ref(), Path::new("output"));
    let _lock = OutputLock::acquire(&dir)?;
    // distance of the centroid to the reentrant edge, or to the cube center
    let (mut mesh, dist): (Mesh, fn(hcurl_ocp::Point) -> f64) = match args.domain {
        DemoDomain::Lshape => (build_lshape_mesh(args.resolution)?, |c| (c.x * c.x + c.y * c.y).sqrt()),
        DemoDomain::Cube => (build_cube_mesh(args.resolution)?, |c| c.norm()),
    };
    let ratio0 = mesh.max_radius_ratio();
    println!("step        tets    vertices       edges  max_ratio  conforming");
    for step in 0..=args.steps {
        let conforming = mesh.check_conformity().is_ok();
        println!(
            "{step:4} {:11} {:11} {:11} {:>10} {:>11}",
            mesh.n_tets(),
            mesh.n_vertices(),
            mesh.edges().len(),
            format!("{:.3}", mesh.max_radius_ratio() / ratio0),
            conforming
        );
        if !conforming {
            return Err(Failure::runtime(format!("mesh lost conformity at step {step}")));
        }
        if step == args.steps {
            break;
        }
        let mut order: Vec<usize> = (0..mesh.n_tets()).collect();
        let d: Vec<f64> = mesh.geometries().iter().map(|g| dist(g.centroid())).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        let k = ((args.fraction * mesh.n_tets() as f64).ceil() as usize).max(1);
        mesh = mesh.refine(&order[..k])?;
    }
    let diam = mesh.tet_diameters();
    write_vtk(&mesh, &[CellData::Scalar("diameter", &diam)], BufWriter::new(File::create(dir.join("refine_demo.vtk"))?))?;
    fs::write(dir.join("refine_demo.mesh"), mesh_to_string(&mesh))?;
    println!("final mesh written to {}", dir.join("refine_demo.vtk").display());
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), Failure> {
    let out = run_checks(args.seed);
    let mut failed = 0;
    for o in &out {
        println!("{} {:<22} {:7.2}s  {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.seconds, o.detail);
        failed += usize::from(!o.passed);
    }
    let total: f64 = out.iter().map(|o| o.seconds).sum();
    println!("{} of {} checks passed in {total:.2}s", out.len() - failed, out.len());
    if failed > 0 {
        return Err(Failure::runtime(format!("{failed} checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::RefineDemo(a) => cmd_refine_demo(a),
        Command::Check(a) => cmd_check(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(if f.usage { 2 } else { 1 })
        }
    }
}
