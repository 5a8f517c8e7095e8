//! End-to-end odometry over simulated scenarios: predict, de-skew,
//! downsample, register, update the submap, and log diagnostics.

mod config;

pub use config::{parse_settings, read_settings, PipelineConfig, RunConfig};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use serde::Serialize;

use crate::correspondence::{match_scan, MatchConfig, RejectionStrategy, RelativeMotion};
use crate::error::{LioError, Result};
use crate::eval::{ate_rmse, eigen_timeline, AteResult, EigenRecord, Trajectory};
use crate::lie::Pose;
use crate::pointmap::{deskew, voxel_downsample, VoxelSubmap};
use crate::propagation::{predict_pose, ImuSample, NavState, StateCovariance, POS, ROT, VEL};
use crate::registration::{estimate_pose, IterationLog, RegistrationStatus};
use crate::sim::{derive_seed, ground_truth_pairs, simulate_imu, simulate_scan, SurfaceTruth};

/// Seed stream reserved for the IMU; scans use their index.
const IMU_STREAM: u64 = u64::MAX;

/// Map point within this distance of the true tangent plane counts as a
/// correct correspondence.
pub const TRUE_PAIR_PLANE_TOL: f64 = 0.1;
/// ... and must lie this close to the true surface point.
pub const TRUE_PAIR_RADIUS: f64 = 2.0;

/// Range buckets (meters, sensor distance) for retention statistics.
pub const RANGE_BUCKETS: [(f64, f64); 4] = [(0.0, 10.0), (10.0, 20.0), (20.0, 40.0), (40.0, f64::INFINITY)];

pub fn bucket_label(i: usize) -> String {
    let (lo, hi) = RANGE_BUCKETS[i];
    if hi.is_finite() {
        format!("{lo}-{hi}")
    } else {
        format!("{lo}-inf")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BucketStats {
    pub total: usize,
    pub accepted: usize,
    pub true_total: usize,
    pub true_accepted: usize,
}

impl BucketStats {
    /// Share of true pairs that survived rejection.
    pub fn retention(&self) -> f64 {
        if self.true_total == 0 {
            f64::NAN
        } else {
            self.true_accepted as f64 / self.true_total as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RetentionStats {
    pub buckets: [BucketStats; 4],
}

impl RetentionStats {
    fn add(&mut self, other: &RetentionStats) {
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            a.total += b.total;
            a.accepted += b.accepted;
            a.true_total += b.true_total;
            a.true_accepted += b.true_accepted;
        }
    }
}

/// Whether `target` samples the same surface as the true return.
pub fn is_true_pair(target: &Vector3<f64>, truth: &SurfaceTruth) -> bool {
    truth.plane_distance(target).abs() <= TRUE_PAIR_PLANE_TOL && (target - truth.foot).norm() <= TRUE_PAIR_RADIUS
}

/// Per-scan diagnostic line.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRecord {
    pub scan: usize,
    pub t: f64,
    /// `None` for the first scan, which only seeds the map.
    pub status: Option<RegistrationStatus>,
    pub error: Option<String>,
    pub iterations: usize,
    pub accepted: usize,
    pub total: usize,
    pub raw_points: usize,
    pub lambda_min_rot_raw: Option<f64>,
    pub lambda_min_trans_raw: Option<f64>,
    pub lambda_min_rot_reg: Option<f64>,
    pub lambda_min_trans_reg: Option<f64>,
    pub floor_rot: Option<f64>,
    pub floor_trans: Option<f64>,
    pub clamped_rot: Option<bool>,
    pub clamped_trans: Option<bool>,
    pub wall_ms: f64,
}

impl ScanRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.status.is_some_and(|s| s.is_failure())
    }

    pub fn registered(&self) -> bool {
        self.status.is_some() || self.error.is_some()
    }

    pub fn eigen(&self) -> Option<EigenRecord> {
        Some(EigenRecord {
            t: self.t,
            lambda_min_rot_raw: self.lambda_min_rot_raw?,
            lambda_min_trans_raw: self.lambda_min_trans_raw?,
            lambda_min_rot_reg: self.lambda_min_rot_reg?,
            lambda_min_trans_reg: self.lambda_min_trans_reg?,
            clamped_rot: self.clamped_rot?,
            clamped_trans: self.clamped_trans?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Score first-pass correspondences against simulator ground truth.
    pub retention: bool,
    /// Keep every registration iteration log in the report.
    pub keep_iterations: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub ate: AteResult,
    pub ate_unaligned: AteResult,
    pub est: Trajectory,
    pub gt: Trajectory,
    pub scans: Vec<ScanRecord>,
    /// Per scan, when requested.
    pub iterations: Vec<Vec<IterationLog>>,
    pub retention: Option<RetentionStats>,
    pub failures: usize,
    pub diagnostics_path: Option<PathBuf>,
}

impl RunReport {
    pub fn registered_scans(&self) -> usize {
        self.scans.iter().filter(|s| s.registered()).count()
    }

    /// Every attempted registration failed.
    pub fn total_failure(&self) -> bool {
        let attempted = self.registered_scans();
        attempted > 0 && self.failures == attempted
    }

    pub fn scan_ms(&self) -> Vec<f64> {
        self.scans.iter().map(|s| s.wall_ms).collect()
    }

    pub fn mean_scan_ms(&self) -> f64 {
        self.scans.iter().map(|s| s.wall_ms).sum::<f64>() / self.scans.len().max(1) as f64
    }

    pub fn mean_iterations(&self) -> f64 {
        let reg: Vec<_> = self.scans.iter().filter(|s| s.status.is_some()).collect();
        reg.iter().map(|s| s.iterations as f64).sum::<f64>() / reg.len().max(1) as f64
    }

    /// Final position error `est − gt`, no alignment.
    pub fn final_drift(&self) -> Vector3<f64> {
        match (self.est.poses().last(), self.gt.poses().last()) {
            (Some(e), Some(g)) => e.translation - g.translation,
            _ => Vector3::zeros(),
        }
    }

    pub fn eigen_records(&self) -> Vec<EigenRecord> {
        self.scans.iter().filter_map(ScanRecord::eigen).collect()
    }

    pub fn metrics_json(&self, cfg: &RunConfig) -> serde_json::Value {
        let ms = self.scan_ms();
        let max_ms = ms.iter().cloned().fold(0.0, f64::max);
        serde_json::json!({
            "ate": self.ate,
            "ate_unaligned": self.ate_unaligned,
            "scans": self.scans.len(),
            "registered_scans": self.registered_scans(),
            "failures": self.failures,
            "mean_scan_ms": self.mean_scan_ms(),
            "max_scan_ms": max_ms,
            "mean_iterations": self.mean_iterations(),
            "final_drift": self.final_drift(),
            "strategy": cfg.strategy.to_string(),
            "w": cfg.registration.w,
            "seed": cfg.seed,
            "diagnostics": self.diagnostics_path.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn initial_covariance(cfg: &PipelineConfig) -> StateCovariance {
    let mut p = StateCovariance::zeros();
    reset_motion_blocks(&mut p, cfg);
    p
}

/// Overwrites the rotation, position and velocity blocks (and their
/// cross-terms) with the configured diagonal.
fn reset_motion_blocks(p: &mut StateCovariance, cfg: &PipelineConfig) {
    for i in ROT..VEL + 3 {
        for j in 0..p.ncols() {
            p[(i, j)] = 0.0;
            p[(j, i)] = 0.0;
        }
    }
    for (offset, sigma) in [(ROT, cfg.sigma_rot), (POS, cfg.sigma_trans), (VEL, cfg.sigma_vel)] {
        for k in 0..3 {
            p[(offset + k, offset + k)] = sigma * sigma;
        }
    }
}

/// Samples bracketing `[t0, t1]`.
fn imu_window(imu: &[ImuSample], t0: f64, t1: f64) -> &[ImuSample] {
    let lo = imu.partition_point(|s| s.t <= t0).saturating_sub(1);
    let hi = imu.partition_point(|s| s.t <= t1 + 1e-9).min(imu.len());
    &imu[lo..hi.max(lo + 1).min(imu.len())]
}

fn retention_for(
    raw: &[Vector3<f64>],
    truth: &[Option<SurfaceTruth>],
    map: &VoxelSubmap,
    prior: &Pose,
    motion: &RelativeMotion,
    match_cfg: &MatchConfig,
) -> Result<RetentionStats> {
    let corrs = match_scan(raw, map, prior, motion, match_cfg)?;
    let mut stats = RetentionStats::default();
    for (c, gt) in corrs.items.iter().zip(truth) {
        let range = c.source.norm();
        let Some(b) = RANGE_BUCKETS.iter().position(|(lo, hi)| range >= *lo && range < *hi) else {
            continue;
        };
        let bucket = &mut stats.buckets[b];
        bucket.total += 1;
        bucket.accepted += usize::from(c.accepted);
        if gt.is_some_and(|g| is_true_pair(&c.target, &g)) {
            bucket.true_total += 1;
            bucket.true_accepted += usize::from(c.accepted);
        }
    }
    Ok(stats)
}

/// Runs the odometry on the configured scenario, writing outputs to
/// `out_dir` when given.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    run_with(cfg, out_dir, RunOptions::default())
}

pub fn run_with(cfg: &RunConfig, out_dir: Option<&Path>, opts: RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let world = cfg.scene.build()?;
    let rig = cfg.rig();
    let traj = &cfg.trajectory;
    let lidar = &cfg.lidar;
    let match_cfg = cfg.match_config();
    let pipe = &cfg.pipeline;
    let imu = simulate_imu(traj, &cfg.imu_noise, &cfg.imu_biases, &cfg.gravity, derive_seed(cfg.seed, IMU_STREAM))?;

    let available = ((traj.duration + 1e-9) / lidar.period).floor() as usize;
    let n_scans = if pipe.scans > 0 { pipe.scans.min(available) } else { available };

    let start = traj.sample(0.0)?;
    let mut state = NavState {
        rotation: start.pose.rotation,
        position: start.pose.translation,
        velocity: start.velocity,
        gyro_bias: cfg.est_gyro_bias,
        accel_bias: cfg.est_accel_bias,
        gravity: cfg.gravity,
    };
    let mut cov = initial_covariance(pipe);
    let mut map = VoxelSubmap::new(cfg.submap);
    let mut t_prev = 0.0;
    let mut pose_prev = state.pose();

    let mut est = Trajectory::default();
    let mut gt = Trajectory::default();
    let mut scans = Vec::with_capacity(n_scans);
    let mut iterations = Vec::new();
    let mut retention = opts.retention.then(RetentionStats::default);

    for k in 1..=n_scans {
        let t_k = k as f64 * lidar.period;
        let scan = simulate_scan(&world, traj, lidar, &rig, t_k, derive_seed(cfg.seed, k as u64))?;

        let clock = Instant::now();
        let pred = predict_pose(&state, &cov, t_prev, t_k, imu_window(&imu, t_prev, t_k), &cfg.imu_noise, &cfg.propagation)?;
        let deskewed = deskew(&scan, &rig, &pred.trace)?;
        let points = voxel_downsample(&deskewed, pipe.downsample)?;
        let motion = RelativeMotion::between(&pose_prev, &pred.prior.pose);
        let mut elapsed = clock.elapsed();

        if let Some(total) = retention.as_mut() {
            if !map.is_empty() {
                let stride = pipe.retention_stride;
                let sampled: Vec<_> = scan.points.iter().step_by(stride).copied().collect();
                let raw: Vec<_> = deskewed.iter().step_by(stride).copied().collect();
                let sub = crate::pointmap::Scan { points: sampled, t_start: scan.t_start, t_end: scan.t_end };
                let truth = ground_truth_pairs(&sub, &world, traj, &rig)?;
                total.add(&retention_for(&raw, &truth, &map, &pred.prior.pose, &motion, &match_cfg)?);
            }
        }

        let clock = Instant::now();
        let mut record = ScanRecord {
            scan: k,
            t: t_k,
            status: None,
            error: None,
            iterations: 0,
            accepted: 0,
            total: 0,
            raw_points: scan.points.len(),
            lambda_min_rot_raw: None,
            lambda_min_trans_raw: None,
            lambda_min_rot_reg: None,
            lambda_min_trans_reg: None,
            floor_rot: None,
            floor_trans: None,
            clamped_rot: None,
            clamped_trans: None,
            wall_ms: 0.0,
        };
        let mut pose = pred.prior.pose;
        let mut map_points: Vec<Vector3<f64>> = points.iter().map(|p| pose.transform_point(p)).collect();
        state = pred.state;
        cov = pred.covariance;
        let mut logs = Vec::new();
        if !map.is_empty() {
            match estimate_pose(&points, &map, &pred.prior, &motion, &match_cfg, &cfg.registration) {
                Ok(outcome) => {
                    record.status = Some(outcome.status);
                    record.iterations = outcome.iterations.len();
                    record.accepted = outcome.accepted();
                    record.total = outcome.total();
                    if let Some(r) = outcome.last_report() {
                        record.lambda_min_rot_raw = Some(r.lambda_min_rot());
                        record.lambda_min_trans_raw = Some(r.lambda_min_trans());
                        record.lambda_min_rot_reg = Some(r.lambda_min_rot_reg);
                        record.lambda_min_trans_reg = Some(r.lambda_min_trans_reg);
                        record.floor_rot = Some(r.rot.floor);
                        record.floor_trans = Some(r.trans.floor);
                        record.clamped_rot = Some(r.rot.any_clamped());
                        record.clamped_trans = Some(r.trans.any_clamped());
                    }
                    if !outcome.status.is_failure() {
                        let dt = t_k - t_prev;
                        state.velocity += (outcome.pose.translation - pred.state.position) * (pipe.velocity_gain / dt);
                        state.rotation = outcome.pose.rotation;
                        state.position = outcome.pose.translation;
                        reset_motion_blocks(&mut cov, pipe);
                        pose = outcome.pose;
                        map_points = outcome.points_global;
                    }
                    logs = outcome.iterations;
                }
                Err(e) => record.error = Some(e.to_string()),
            }
        }
        map.insert(&map_points, &pose.translation);
        elapsed += clock.elapsed();
        record.wall_ms = elapsed.as_secs_f64() * 1e3;

        est.push(t_k, &pose)?;
        gt.push(t_k, &traj.pose_at(t_k)?)?;
        scans.push(record);
        if opts.keep_iterations {
            iterations.push(logs);
        }
        t_prev = t_k;
        pose_prev = pose;
    }

    if est.len() < 3 {
        return Err(LioError::Config("scenario yields fewer than three scans".into()));
    }
    let failures = scans.iter().filter(|s| s.failed()).count();
    let ate = ate_rmse(&est, &gt, true).or_else(|_| ate_rmse(&est, &gt, false))?;
    let ate_unaligned = ate_rmse(&est, &gt, false)?;
    let mut report = RunReport { ate, ate_unaligned, est, gt, scans, iterations, retention, failures, diagnostics_path: None };
    if let Some(dir) = out_dir {
        write_outputs(&mut report, cfg, dir)?;
    }
    Ok(report)
}

fn write_outputs(report: &mut RunReport, cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report.est.write_tum(&dir.join("est.tum"))?;
    report.gt.write_tum(&dir.join("gt.tum"))?;
    std::fs::write(dir.join("eigen_timeline.csv"), eigen_timeline(&report.eigen_records()))?;
    let mut lines = String::new();
    for s in &report.scans {
        lines.push_str(&serde_json::to_string(s).map_err(|e| LioError::InvalidInput(e.to_string()))?);
        lines.push('\n');
    }
    let diag = dir.join("diagnostics.jsonl");
    std::fs::write(&diag, lines)?;
    report.diagnostics_path = Some(diag);
    let metrics = serde_json::to_string_pretty(&report.metrics_json(cfg)).map_err(|e| LioError::InvalidInput(e.to_string()))?;
    std::fs::write(dir.join("metrics.json"), metrics + "\n")?;
    std::fs::write(dir.join("config.cfg"), cfg.dump())?;
    Ok(())
}

/// The four rejection strategies compared by [`ablate`].
pub fn ablation_strategies(fixed_tau: f64) -> [RejectionStrategy; 4] {
    [
        RejectionStrategy::None,
        RejectionStrategy::Fixed { tau: fixed_tau },
        RejectionStrategy::ScanAdaptive,
        RejectionStrategy::PointAdaptive,
    ]
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub runs: Vec<(RejectionStrategy, RunReport)>,
}

impl AblationReport {
    pub fn get(&self, name: &str) -> Option<&RunReport> {
        self.runs.iter().find(|(s, _)| s.name() == name).map(|(_, r)| r)
    }

    /// `strategy,range_bucket,total,accepted,true_retained` where the last
    /// column is the share of ground-truth pairs kept.
    pub fn retention_csv(&self) -> String {
        let mut out = String::from("strategy,range_bucket,total,accepted,true_retained\n");
        for (strategy, report) in &self.runs {
            let stats = report.retention.unwrap_or_default();
            for (i, b) in stats.buckets.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", strategy.name(), bucket_label(i), b.total, b.accepted, b.retention());
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("strategy,ate_rmse,mean_iterations,failures\n");
        for (strategy, r) in &self.runs {
            let _ = writeln!(out, "{},{},{},{}", strategy.name(), r.ate.rmse, r.mean_iterations(), r.failures);
        }
        out
    }
}

/// Runs the scenario once per rejection strategy with identical seeds.
/// Per-strategy outputs go to `<out_dir>/<strategy>/`.
pub fn ablate(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<AblationReport> {
    let mut runs = Vec::with_capacity(4);
    for strategy in ablation_strategies(cfg.fixed_tau) {
        let mut c = cfg.clone();
        c.strategy = strategy;
        let dir = out_dir.map(|d| d.join(strategy.name()));
        let report = run_with(&c, dir.as_deref(), RunOptions { retention: true, keep_iterations: false })?;
        runs.push((strategy, report));
    }
    let report = AblationReport { runs };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ablation.csv"), report.retention_csv())?;
        std::fs::write(dir.join("ablation_summary.csv"), report.summary_csv())?;
    }
    Ok(report)
}
