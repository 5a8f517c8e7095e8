use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lio_core::eval::{ate, AteOptions, Trajectory, DEFAULT_MAX_DT};
use lio_core::io::{write_imu_csv, write_points};
use lio_core::runner::{ablate, run, RunConfig};
use lio_core::sim::{derive_seed, simulate_imu, simulate_scan};
use lio_core::LioError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_REGISTRATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "lio", version, about = "Degeneracy-aware LiDAR-inertial odometry on simulated scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the odometry on one scenario and evaluate it against ground truth.
    Run(RunArgs),
    /// Run once per outlier-rejection strategy with identical seeds.
    Ablate(AblateArgs),
    /// Absolute trajectory error between two TUM files.
    Eval(EvalArgs),
    /// Write the simulated IMU stream and LiDAR scans of a scenario.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Rejection strategy: none, fixed[:m], scan_adaptive, point_adaptive.
    #[arg(long)]
    strategy: Option<String>,
    /// Weight of the degeneracy-aware prior term.
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Skip rigid alignment.
    #[arg(long)]
    no_align: bool,
    /// Similarity instead of rigid alignment.
    #[arg(long, conflicts_with = "no_align")]
    scale: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_DT)]
    max_dt: f64,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Number of scans to write (default: all).
    #[arg(long)]
    scans: Option<usize>,
    /// `ply` or `csv`.
    #[arg(long, default_value = "ply")]
    format: String,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, err: impl std::fmt::Display) -> Self {
        Self { code, msg: err.to_string() }
    }
}

/// Config problems exit 2, file problems 3, anything else 1.
impl From<LioError> for Failure {
    fn from(e: LioError) -> Self {
        let code = match e {
            LioError::Config(_) => EXIT_CONFIG,
            LioError::Io(_) | LioError::Parse { .. } => EXIT_IO,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e)
    }
}

fn load_config(args: &ConfigArgs, extra: &[(&str, String)]) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| match e {
        LioError::Io(io) => Failure::new(EXIT_CONFIG, format!("cannot read {}: {io}", args.config.display())),
        other => Failure::new(EXIT_CONFIG, other),
    })?;
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::new(EXIT_CONFIG, format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    }
    // flags win over the file
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for (k, v) in extra {
        cfg.set(k, v).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    }
    cfg.validate().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    Ok(cfg)
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_FAILURE, e))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut extra = Vec::new();
    if let Some(s) = &args.strategy {
        extra.push(("match.strategy", s.clone()));
    }
    if let Some(w) = args.w {
        extra.push(("reg.w", w.to_string()));
    }
    let cfg = load_config(&args.config, &extra)?;
    if args.config.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let report = run(&cfg, args.out.as_deref())?;
    println!("{}", to_json(&report.metrics_json(&cfg))?);
    for s in report.scans.iter().filter(|s| s.failed()) {
        let why = match (&s.error, s.status) {
            (Some(e), _) => e.clone(),
            (None, Some(status)) => format!("{status:?}").to_lowercase(),
            (None, None) => "unknown".into(),
        };
        eprintln!("scan {} (t = {:.3}): registration failed: {why}", s.scan, s.t);
    }
    if report.total_failure() {
        return Err(Failure::new(EXIT_REGISTRATION, format!("all {} registrations failed", report.failures)));
    }
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    if args.config.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let report = ablate(&cfg, args.out.as_deref())?;
    print!("{}", report.summary_csv());
    print!("{}", report.retention_csv());
    if report.runs.iter().all(|(_, r)| r.total_failure()) {
        return Err(Failure::new(EXIT_REGISTRATION, "every strategy failed to register"));
    }
    Ok(())
}

fn read_tum(path: &Path) -> Result<Trajectory, Failure> {
    Trajectory::read_tum(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let est = read_tum(&args.est)?;
    let gt = read_tum(&args.gt)?;
    let opts = AteOptions { align: !args.no_align, with_scale: args.scale, max_dt: args.max_dt };
    let result = ate(&est, &gt, &opts)?;
    let json = to_json(&result)?;
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{json}\n")).map_err(|e| Failure::new(EXIT_IO, e))?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    if args.config.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    if args.format != "ply" && args.format != "csv" {
        return Err(Failure::new(EXIT_CONFIG, format!("unknown point format `{}`", args.format)));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::new(EXIT_IO, e))?;
    let world = cfg.scene.build()?;
    let rig = cfg.rig();
    let imu = simulate_imu(&cfg.trajectory, &cfg.imu_noise, &cfg.imu_biases, &cfg.gravity, derive_seed(cfg.seed, u64::MAX))?;
    write_imu_csv(&args.out.join("imu.csv"), &imu)?;
    let available = ((cfg.trajectory.duration + 1e-9) / cfg.lidar.period).floor() as usize;
    let n = args.scans.unwrap_or(available).min(available);
    let mut gt = Trajectory::default();
    for k in 1..=n {
        let t = k as f64 * cfg.lidar.period;
        let scan = simulate_scan(&world, &cfg.trajectory, &cfg.lidar, &rig, t, derive_seed(cfg.seed, k as u64))?;
        write_points(&args.out.join(format!("scan_{k:05}.{}", args.format)), &scan.points)?;
        gt.push(t, &cfg.trajectory.pose_at(t)?)?;
    }
    gt.write_tum(&args.out.join("gt.tum"))?;
    println!("wrote {n} scans and {} IMU samples to {}", imu.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
