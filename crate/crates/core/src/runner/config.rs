use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;

use crate::correspondence::{MatchConfig, RejectionStrategy};
use crate::error::{LioError, Result};
use crate::lie::{exp_so3, log_so3, Pose};
use crate::pointmap::{SensorRig, SubmapConfig};
use crate::propagation::{ImuNoiseParams, PropagationConfig};
use crate::registration::{RegistrationConfig, ResidualMode};
use crate::sim::{ImuBiases, LidarModel, SceneModel, TrajectorySpec};

/// Knobs of the odometry loop that are not owned by a single module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Voxel size of the per-scan downsampling filter.
    pub downsample: f64,
    /// Fraction of the registration correction fed back into velocity.
    pub velocity_gain: f64,
    /// Standard deviations the pose and velocity covariance blocks are
    /// reset to after each registered scan (and start from).
    pub sigma_rot: f64,
    pub sigma_trans: f64,
    pub sigma_vel: f64,
    /// Scans to process; 0 means as many as the trajectory allows.
    pub scans: usize,
    /// Stride of raw points scored against ground truth for retention.
    pub retention_stride: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { downsample: 0.5, velocity_gain: 0.5, sigma_rot: 0.005, sigma_trans: 0.02, sigma_vel: 0.05, scans: 0, retention_stride: 4 }
    }
}

/// Everything needed to simulate a scenario and run the odometry on it.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Scenario file the configuration was loaded from, if any.
    pub scenario: Option<PathBuf>,
    pub seed: u64,
    pub scene: SceneModel,
    pub trajectory: TrajectorySpec,
    pub lidar: LidarModel,
    pub lidar_to_imu: Pose,
    pub imu_noise: ImuNoiseParams,
    /// True biases of the simulated IMU.
    pub imu_biases: ImuBiases,
    /// Bias values the estimator assumes (held constant).
    pub est_gyro_bias: Vector3<f64>,
    pub est_accel_bias: Vector3<f64>,
    pub gravity: Vector3<f64>,
    pub registration: RegistrationConfig,
    pub strategy: RejectionStrategy,
    /// Threshold of the `fixed` entry when ablating strategies.
    pub fixed_tau: f64,
    pub noise_floor: f64,
    pub submap: SubmapConfig,
    pub propagation: PropagationConfig,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            scene: SceneModel::room(),
            trajectory: TrajectorySpec::default(),
            lidar: LidarModel::default(),
            lidar_to_imu: SensorRig::default().lidar_to_imu,
            imu_noise: ImuNoiseParams::default(),
            imu_biases: ImuBiases::default(),
            est_gyro_bias: Vector3::zeros(),
            est_accel_bias: Vector3::zeros(),
            gravity: Vector3::new(0.0, 0.0, -9.81),
            registration: RegistrationConfig::default(),
            strategy: RejectionStrategy::PointAdaptive,
            fixed_tau: RejectionStrategy::DEFAULT_FIXED_TAU,
            noise_floor: MatchConfig::default().noise_floor,
            submap: SubmapConfig::default(),
            propagation: PropagationConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e| LioError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_vec3(key: &str, value: &str) -> Result<Vector3<f64>> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(LioError::Config(format!("{key}: expected `x,y,z`, got `{value}`")));
    }
    Ok(Vector3::new(parse(key, parts[0])?, parse(key, parts[1])?, parse(key, parts[2])?))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(LioError::Config(format!("{key}: expected a boolean, got `{other}`"))),
    }
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

impl RunConfig {
    pub fn match_config(&self) -> MatchConfig {
        MatchConfig { strategy: self.strategy, noise_floor: self.noise_floor, r_max: self.lidar.r_max }
    }

    pub fn rig(&self) -> SensorRig {
        self.lidar.rig(self.lidar_to_imu)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "scene.kind" => {
                // switching kind resets the geometry to that kind's defaults
                let kind = parse(key, v)?;
                if kind != self.scene.kind {
                    self.scene = SceneModel::of_kind(kind);
                }
            }
            "scene.width" => self.scene.width = parse(key, v)?,
            "scene.height" => self.scene.height = parse(key, v)?,
            "scene.length" => self.scene.length = parse(key, v)?,
            "scene.radius" => self.scene.radius = parse(key, v)?,
            "scene.floor_z" => self.scene.floor_z = parse(key, v)?,
            "scene.density" => self.scene.density = parse(key, v)?,
            "scene.seed" => self.scene.seed = parse(key, v)?,
            "traj.kind" => self.trajectory.kind = parse(key, v)?,
            "traj.duration" => self.trajectory.duration = parse(key, v)?,
            "traj.rate" => self.trajectory.rate = parse(key, v)?,
            "traj.origin" => self.trajectory.origin = parse_vec3(key, v)?,
            "traj.yaw0" => self.trajectory.yaw0 = parse(key, v)?,
            "traj.velocity" => self.trajectory.velocity = parse_vec3(key, v)?,
            "traj.yaw_rate" => self.trajectory.yaw_rate = parse(key, v)?,
            "traj.amplitude" => self.trajectory.amplitude = parse(key, v)?,
            "traj.period" => self.trajectory.period = parse(key, v)?,
            "traj.yaw_amplitude" => self.trajectory.yaw_amplitude = parse(key, v)?,
            "lidar.channels" => self.lidar.channels = parse(key, v)?,
            "lidar.azimuth_steps" => self.lidar.azimuth_steps = parse(key, v)?,
            "lidar.period" => self.lidar.period = parse(key, v)?,
            "lidar.range_noise" => self.lidar.range_noise = parse(key, v)?,
            "lidar.r_min" => self.lidar.r_min = parse(key, v)?,
            "lidar.r_max" => self.lidar.r_max = parse(key, v)?,
            "lidar.fov_down" => self.lidar.fov_down = parse(key, v)?,
            "lidar.fov_up" => self.lidar.fov_up = parse(key, v)?,
            "lidar.extrinsic_t" => self.lidar_to_imu.translation = parse_vec3(key, v)?,
            "lidar.extrinsic_r" => self.lidar_to_imu.rotation = exp_so3(&parse_vec3(key, v)?),
            "imu.gyro_noise" => self.imu_noise.gyro_noise = parse(key, v)?,
            "imu.accel_noise" => self.imu_noise.accel_noise = parse(key, v)?,
            "imu.gyro_bias_walk" => self.imu_noise.gyro_bias_walk = parse(key, v)?,
            "imu.accel_bias_walk" => self.imu_noise.accel_bias_walk = parse(key, v)?,
            "imu.gyro_bias" => self.imu_biases.gyro = parse_vec3(key, v)?,
            "imu.accel_bias" => self.imu_biases.accel = parse_vec3(key, v)?,
            "imu.random_walk" => self.imu_biases.random_walk = parse_bool(key, v)?,
            "imu.est_gyro_bias" => self.est_gyro_bias = parse_vec3(key, v)?,
            "imu.est_accel_bias" => self.est_accel_bias = parse_vec3(key, v)?,
            "imu.gravity" => self.gravity = parse_vec3(key, v)?,
            "reg.max_iterations" => self.registration.max_iterations = parse(key, v)?,
            "reg.epsilon" => self.registration.epsilon = parse(key, v)?,
            "reg.w" => self.registration.w = parse(key, v)?,
            "reg.kernel" => self.registration.kernel = parse(key, v)?,
            "reg.eigen_floor_ratio" => self.registration.eigen_floor_ratio = parse(key, v)?,
            "reg.max_halvings" => self.registration.max_halvings = parse(key, v)?,
            "reg.residual" => {
                let modes = [ResidualMode::PointToPlane, ResidualMode::PointToPlaneFallback, ResidualMode::PointToPoint];
                self.registration.residual_mode = modes
                    .into_iter()
                    .find(|m| m.name() == v)
                    .ok_or_else(|| LioError::Config(format!("{key}: unknown residual `{v}`")))?;
            }
            "match.strategy" => self.strategy = parse(key, v)?,
            "match.fixed_tau" => self.fixed_tau = parse(key, v)?,
            "match.noise_floor" => self.noise_floor = parse(key, v)?,
            "map.voxel_size" => self.submap.voxel_size = parse(key, v)?,
            "map.max_points_per_voxel" => self.submap.max_points_per_voxel = parse(key, v)?,
            "map.prune_radius" => self.submap.prune_radius = parse(key, v)?,
            "map.normal_neighbors" => self.submap.normal_neighbors = parse(key, v)?,
            "map.normal_radius" => self.submap.normal_radius = parse(key, v)?,
            "map.planarity_floor" => self.submap.planarity_floor = parse(key, v)?,
            "prop.max_step" => self.propagation.max_step = parse(key, v)?,
            "prop.max_gap" => self.propagation.max_gap = parse(key, v)?,
            "pipeline.downsample" => self.pipeline.downsample = parse(key, v)?,
            "pipeline.velocity_gain" => self.pipeline.velocity_gain = parse(key, v)?,
            "pipeline.sigma_rot" => self.pipeline.sigma_rot = parse(key, v)?,
            "pipeline.sigma_trans" => self.pipeline.sigma_trans = parse(key, v)?,
            "pipeline.sigma_vel" => self.pipeline.sigma_vel = parse(key, v)?,
            "pipeline.scans" => self.pipeline.scans = parse(key, v)?,
            "pipeline.retention_stride" => self.pipeline.retention_stride = parse(key, v)?,
            other => return Err(LioError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Effective configuration as ordered `(key, value)` pairs; feeding them
    /// back through [`RunConfig::set`] reproduces `self`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.scene;
        let t = &self.trajectory;
        let l = &self.lidar;
        let r = &self.registration;
        let m = &self.submap;
        let p = &self.pipeline;
        vec![
            ("seed", self.seed.to_string()),
            ("scene.kind", s.kind.to_string()),
            ("scene.width", s.width.to_string()),
            ("scene.height", s.height.to_string()),
            ("scene.length", s.length.to_string()),
            ("scene.radius", s.radius.to_string()),
            ("scene.floor_z", s.floor_z.to_string()),
            ("scene.density", s.density.to_string()),
            ("scene.seed", s.seed.to_string()),
            ("traj.kind", t.kind.to_string()),
            ("traj.duration", t.duration.to_string()),
            ("traj.rate", t.rate.to_string()),
            ("traj.origin", vec3(&t.origin)),
            ("traj.yaw0", t.yaw0.to_string()),
            ("traj.velocity", vec3(&t.velocity)),
            ("traj.yaw_rate", t.yaw_rate.to_string()),
            ("traj.amplitude", t.amplitude.to_string()),
            ("traj.period", t.period.to_string()),
            ("traj.yaw_amplitude", t.yaw_amplitude.to_string()),
            ("lidar.channels", l.channels.to_string()),
            ("lidar.azimuth_steps", l.azimuth_steps.to_string()),
            ("lidar.period", l.period.to_string()),
            ("lidar.range_noise", l.range_noise.to_string()),
            ("lidar.r_min", l.r_min.to_string()),
            ("lidar.r_max", l.r_max.to_string()),
            ("lidar.fov_down", l.fov_down.to_string()),
            ("lidar.fov_up", l.fov_up.to_string()),
            ("lidar.extrinsic_t", vec3(&self.lidar_to_imu.translation)),
            ("lidar.extrinsic_r", vec3(&log_so3(&self.lidar_to_imu.rotation))),
            ("imu.gyro_noise", self.imu_noise.gyro_noise.to_string()),
            ("imu.accel_noise", self.imu_noise.accel_noise.to_string()),
            ("imu.gyro_bias_walk", self.imu_noise.gyro_bias_walk.to_string()),
            ("imu.accel_bias_walk", self.imu_noise.accel_bias_walk.to_string()),
            ("imu.gyro_bias", vec3(&self.imu_biases.gyro)),
            ("imu.accel_bias", vec3(&self.imu_biases.accel)),
            ("imu.random_walk", self.imu_biases.random_walk.to_string()),
            ("imu.est_gyro_bias", vec3(&self.est_gyro_bias)),
            ("imu.est_accel_bias", vec3(&self.est_accel_bias)),
            ("imu.gravity", vec3(&self.gravity)),
            ("reg.max_iterations", r.max_iterations.to_string()),
            ("reg.epsilon", r.epsilon.to_string()),
            ("reg.w", r.w.to_string()),
            ("reg.kernel", r.kernel.to_string()),
            ("reg.eigen_floor_ratio", r.eigen_floor_ratio.to_string()),
            ("reg.max_halvings", r.max_halvings.to_string()),
            ("reg.residual", r.residual_mode.name().to_string()),
            ("match.strategy", self.strategy.to_string()),
            ("match.fixed_tau", self.fixed_tau.to_string()),
            ("match.noise_floor", self.noise_floor.to_string()),
            ("map.voxel_size", m.voxel_size.to_string()),
            ("map.max_points_per_voxel", m.max_points_per_voxel.to_string()),
            ("map.prune_radius", m.prune_radius.to_string()),
            ("map.normal_neighbors", m.normal_neighbors.to_string()),
            ("map.normal_radius", m.normal_radius.to_string()),
            ("map.planarity_floor", m.planarity_floor.to_string()),
            ("prop.max_step", self.propagation.max_step.to_string()),
            ("prop.max_gap", self.propagation.max_gap.to_string()),
            ("pipeline.downsample", p.downsample.to_string()),
            ("pipeline.velocity_gain", p.velocity_gain.to_string()),
            ("pipeline.sigma_rot", p.sigma_rot.to_string()),
            ("pipeline.sigma_trans", p.sigma_trans.to_string()),
            ("pipeline.sigma_vel", p.sigma_vel.to_string()),
            ("pipeline.scans", p.scans.to_string()),
            ("pipeline.retention_stride", p.retention_stride.to_string()),
        ]
    }

    /// Canonical `key = value` listing of the effective configuration.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(path) = &self.scenario {
            out.push_str(&format!("# loaded from {}\n", path.display()));
        }
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.trajectory.validate()?;
        self.lidar.validate()?;
        self.rig().validate().map_err(|e| LioError::Config(e.to_string()))?;
        self.registration.validate().map_err(|e| LioError::Config(e.to_string()))?;
        self.strategy.validate()?;
        RejectionStrategy::Fixed { tau: self.fixed_tau }.validate()?;
        if !(self.noise_floor >= 0.0) {
            return Err(LioError::Config("match.noise_floor must be non-negative".into()));
        }
        let p = &self.pipeline;
        if !(p.downsample > 0.0) || !(p.sigma_rot > 0.0) || !(p.sigma_trans > 0.0) || !(p.sigma_vel > 0.0) {
            return Err(LioError::Config("pipeline downsample and sigmas must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p.velocity_gain) {
            return Err(LioError::Config("pipeline.velocity_gain must lie in [0, 1]".into()));
        }
        if p.retention_stride == 0 {
            return Err(LioError::Config("pipeline.retention_stride must be positive".into()));
        }
        if self.trajectory.duration < 2.0 * self.lidar.period {
            return Err(LioError::Config("trajectory must span at least two scans".into()));
        }
        let m = &self.submap;
        if !(m.voxel_size > 0.0) || m.max_points_per_voxel == 0 || m.normal_neighbors < 3 || !(m.prune_radius > 0.0) {
            return Err(LioError::Config("invalid submap settings".into()));
        }
        Ok(())
    }

    /// Builds a configuration from settings applied in order over defaults.
    pub fn from_settings<'a>(settings: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in settings {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Loads a key-value file. A `scenario = <path>` line (resolved relative
    /// to the including file) is loaded first; the file's own keys win.
    pub fn load(path: &Path) -> Result<Self> {
        let settings = read_settings(path, 0)?;
        let mut cfg = Self::from_settings(settings.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        cfg.scenario = Some(path.to_path_buf());
        Ok(cfg)
    }
}

const MAX_INCLUDE_DEPTH: usize = 8;

/// Ordered settings of a config file with includes expanded in place.
pub fn read_settings(path: &Path, depth: usize) -> Result<Vec<(String, String)>> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(LioError::Config(format!("scenario includes nested too deeply at {}", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    let parsed = parse_settings(&text).map_err(|e| match e {
        LioError::Parse { line, msg } => LioError::Config(format!("{}:{line}: {msg}", path.display())),
        other => other,
    })?;
    let mut includes = Vec::new();
    let mut own = BTreeMap::new();
    let mut order = Vec::new();
    for (k, v) in parsed {
        if k == "scenario" {
            let base = path.parent().unwrap_or(Path::new("."));
            includes.extend(read_settings(&base.join(&v), depth + 1)?);
        } else {
            if own.insert(k.clone(), v).is_none() {
                order.push(k);
            }
        }
    }
    let mut out = includes;
    out.extend(order.into_iter().map(|k| {
        let v = own.remove(&k).unwrap_or_default();
        (k, v)
    }));
    Ok(out)
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(LioError::Parse { line: idx + 1, msg: format!("expected `key = value`, got `{content}`") });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(LioError::Parse { line: idx + 1, msg: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
