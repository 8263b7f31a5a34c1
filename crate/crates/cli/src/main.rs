//! `nbp`: run explorers, render map snapshots and compare runs.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 run failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nbp_core::exploration::Method;
use nbp_core::runner::{self, RunConfig, RunRecord};
use nbp_core::{Bounds, Error, MapSnapshot, Pose2, QueryGrid};

#[derive(Parser)]
#[command(
    name = "nbp",
    version,
    about = "Information-driven exploration with continuous occupancy maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an explorer and write a run directory.
    Explore(ExploreArgs),
    /// Render occupancy, entropy and optionally MI rasters from a map snapshot.
    Render(RenderArgs),
    /// Aggregate finished run directories into compare.csv.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ExploreArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Environment PGM with a JSON sidecar of the same stem.
    #[arg(long)]
    env: Option<PathBuf>,
    /// functional, frontier or rrt-mi
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Start pose as x,y,heading; defaults to the sidecar's.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    start: Option<[f64; 3]>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Map snapshot JSON, such as a run directory's map_final.json.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Raster cell size in metres.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Raster extent as min_x,min_y,max_x,max_y; defaults to the map grid.
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<[f64; 4]>,
    /// Also write mi.pgm for the expected observations from x,y,heading.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pose: Option<[f64; 3]>,
    /// Run configuration supplying the sensor and objective parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories written by `nbp explore`.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{s:?}: {e}"))?;
    let arr: [f64; N] = v
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated numbers, got {s:?}"))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(format!("{s:?} contains a non-finite value"));
    }
    Ok(arr)
}

fn parse_pose(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_bounds(s: &str) -> Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

/// Failure with the exit code it maps to.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            // bad inputs detected once the run starts, such as a start pose in a wall
            Error::InvalidPose { .. } | Error::InvalidInput(_) | Error::Domain { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn explore(args: ExploreArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.env {
        cfg.env_path = Some(e);
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if args.start.is_some() {
        cfg.start = args.start;
    }
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    let env_path = cfg
        .env_path
        .clone()
        .ok_or_else(|| Failure::Usage("no environment: pass --env or set env_path".into()))?;
    if !env_path.is_file() {
        return Err(Failure::Usage(format!(
            "environment file {} does not exist",
            env_path.display()
        )));
    }
    let out = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set out_dir".into()))?;
    let (env, start) = runner::load_env(&cfg).map_err(usage)?;

    let report = runner::execute(&cfg, env, start, &out)?;
    println!(
        "{} seed {}: {} iterations, entropy {:.1} -> {:.1} bits (all-unknown {:.1}), {:.1} m, status {:?}",
        report.method,
        report.seed,
        report.iterations_completed,
        report.initial_entropy_bits,
        report.final_entropy_bits,
        report.baseline_entropy_bits,
        report.distance_traveled_m,
        report.status
    );
    if report.failed() {
        return Err(Failure::Run(format!(
            "run ended with status {:?}; see {}",
            report.status,
            out.join(runner::REPORT_FILE).display()
        )));
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::Run(format!("writing {}: {e}", path.display())))
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    if !args.snapshot.is_file() {
        return Err(Failure::Usage(format!(
            "snapshot {} does not exist",
            args.snapshot.display()
        )));
    }
    if !(args.resolution > 0.0) {
        return Err(Failure::Usage("--resolution must be positive".into()));
    }
    let snap = MapSnapshot::load(&args.snapshot).map_err(usage)?;
    let map = snap.to_map().map_err(usage)?;
    let bounds = match args.bounds {
        Some([a, b, c, d]) => Bounds::new(a, b, c, d),
        None => runner::snapshot_bounds(&snap)
            .ok_or_else(|| Failure::Usage("snapshot has no grid extent; pass --bounds".into()))?,
    };
    if bounds.is_empty() {
        return Err(Failure::Usage("raster bounds are empty".into()));
    }
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    let grid = QueryGrid::new(bounds, args.resolution);
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Run(format!("creating {}: {e}", args.out.display())))?;
    write(
        &args.out.join("occupancy.pgm"),
        &runner::occupancy_raster(&map, &grid),
    )?;
    write(
        &args.out.join("entropy.pgm"),
        &runner::entropy_raster(&map, &grid),
    )?;
    if let Some([x, y, h]) = args.pose {
        let e = &cfg.exploration;
        let bytes =
            runner::mi_raster(&map, &grid, &Pose2::new(x, y, h), &e.expected, &e.objective)?;
        write(&args.out.join("mi.pgm"), &bytes)?;
    }
    println!(
        "{} x {} rasters in {}",
        grid.cols,
        grid.rows,
        args.out.display()
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let loaded: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = args
            .runs
            .iter()
            .map(|d| s.spawn(move || RunRecord::load(d)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("loader thread panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(loaded.len());
    for (dir, r) in args.runs.iter().zip(loaded) {
        runs.push(r.map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?);
    }
    runner::check_same_env(&runs).map_err(usage)?;
    let rows = runner::write_comparison(&runs, &args.out)?;
    println!(
        "{:<11} {:>5} {:>9} {:>9} {:>12} {:>10} {:>10}",
        "method", "seed", "mean_occ", "max_occ", "median_plan", "mean_plan", "max_plan"
    );
    for r in rows {
        println!(
            "{:<11} {:>5} {:>9.2} {:>9.2} {:>12.3} {:>10.3} {:>10.3}",
            r.method.to_string(),
            r.seed,
            r.mean_occ,
            r.max_occ,
            r.median_plan_s,
            r.mean_plan_s,
            r.max_plan_s
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NBP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Explore(a) => explore(a),
        Command::Render(a) => render(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
