use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scene::{Surface, World};
use super::trajectory::TrajectorySpec;
use crate::error::{LioError, Result};
use crate::lie::Pose;
use crate::pointmap::{Scan, SensorRig, TimedPoint};
use crate::propagation::{ImuNoiseParams, ImuSample};

/// Mixes a base seed with a stream index (scan number, sensor id).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImuBiases {
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
    /// Let the biases drift with the configured random-walk densities.
    pub random_walk: bool,
}

/// Body-frame gyro and accelerometer stream sampled at `spec.rate` over the
/// whole trajectory: `ω̂ = ω + b_g + n_g`, `â = Rᵀ(a − g) + b_a + n_a`.
/// White noise of density σ appears with per-sample deviation `σ·√rate`.
pub fn simulate_imu(
    spec: &TrajectorySpec,
    noise: &ImuNoiseParams,
    biases: &ImuBiases,
    gravity: &Vector3<f64>,
    seed: u64,
) -> Result<Vec<ImuSample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.rate;
    let count = (spec.duration * spec.rate + 1e-9).floor() as usize + 1;
    let (sg, sa) = (noise.gyro_noise * spec.rate.sqrt(), noise.accel_noise * spec.rate.sqrt());
    let (bg_step, ba_step) = (noise.gyro_bias_walk * dt.sqrt(), noise.accel_bias_walk * dt.sqrt());
    let (mut bg, mut ba) = (biases.gyro, biases.accel);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = (i as f64 * dt).min(spec.duration);
        let k = spec.sample(t)?;
        let gyro = k.angular_velocity + bg + gaussian3(&mut rng) * sg;
        let accel = k.pose.rotation.inverse() * (k.acceleration - gravity) + ba + gaussian3(&mut rng) * sa;
        out.push(ImuSample::new(t, gyro, accel));
        if biases.random_walk {
            bg += gaussian3(&mut rng) * bg_step;
            ba += gaussian3(&mut rng) * ba_step;
        }
    }
    Ok(out)
}

/// Spinning multi-beam LiDAR. Beams are evenly spaced in elevation over
/// `[fov_down, fov_up]`; one column of all beams fires per azimuth step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarModel {
    pub channels: usize,
    pub azimuth_steps: usize,
    /// Revolution period, seconds.
    pub period: f64,
    /// Range noise standard deviation, meters.
    pub range_noise: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Degrees.
    pub fov_down: f64,
    pub fov_up: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            channels: 16,
            azimuth_steps: 1024,
            period: 0.1,
            range_noise: 0.01,
            r_min: 0.5,
            r_max: 60.0,
            fov_down: -15.0,
            fov_up: 15.0,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.azimuth_steps == 0 {
            return Err(LioError::Config("lidar channel and azimuth counts must be positive".into()));
        }
        if !(self.period > 0.0) || !(self.range_noise >= 0.0) {
            return Err(LioError::Config("lidar period must be positive and range noise non-negative".into()));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(LioError::Config(format!("lidar needs 0 < r_min < r_max, got {} / {}", self.r_min, self.r_max)));
        }
        if !(self.fov_down <= self.fov_up) || self.fov_down < -90.0 || self.fov_up > 90.0 {
            return Err(LioError::Config("lidar vertical field of view is invalid".into()));
        }
        Ok(())
    }

    fn elevation(&self, channel: usize) -> f64 {
        let frac = if self.channels == 1 { 0.5 } else { channel as f64 / (self.channels - 1) as f64 };
        (self.fov_down + frac * (self.fov_up - self.fov_down)).to_radians()
    }

    /// Unit beam direction in the sensor frame.
    pub fn direction(&self, channel: usize, step: usize) -> Vector3<f64> {
        let az = 2.0 * std::f64::consts::PI * step as f64 / self.azimuth_steps as f64;
        let el = self.elevation(channel);
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Offset from scan end of the firing of azimuth column `step`; the last
    /// column fires exactly at scan end.
    pub fn firing_offset(&self, step: usize) -> f64 {
        -self.period * (self.azimuth_steps - 1 - step) as f64 / self.azimuth_steps as f64
    }

    pub fn rig(&self, lidar_to_imu: Pose) -> SensorRig {
        SensorRig { lidar_to_imu, r_min: self.r_min, r_max: self.r_max, scan_period: self.period }
    }
}

fn sensor_pose(spec: &TrajectorySpec, rig: &SensorRig, t: f64) -> Result<Pose> {
    Ok(spec.pose_at(t)?.compose(&rig.lidar_to_imu))
}

/// Surfaces that can be hit from anywhere along a segment of the path.
fn cull(world: &World, center: &Vector3<f64>, reach: f64) -> World {
    let surfaces = world
        .surfaces
        .iter()
        .filter(|s| match **s {
            Surface::Solid { min, max } => {
                let closest = center.sup(&min).inf(&max);
                (closest - center).norm() <= reach
            }
            Surface::Pole { x, y, radius, .. } => ((center.x - x).powi(2) + (center.y - y).powi(2)).sqrt() - radius <= reach,
            _ => true,
        })
        .copied()
        .collect();
    World { surfaces }
}

/// One revolution ending at `t_k`. Each column is cast from the sensor pose
/// at its firing time and recorded in that sensor frame.
pub fn simulate_scan(
    world: &World,
    spec: &TrajectorySpec,
    lidar: &LidarModel,
    rig: &SensorRig,
    t_k: f64,
    seed: u64,
) -> Result<Scan> {
    lidar.validate()?;
    let t_start = t_k - lidar.period;
    if t_start < -1e-9 || t_k > spec.duration + 1e-9 {
        return Err(LioError::OutOfRange { t: t_k, start: lidar.period, end: spec.duration });
    }
    let center = spec.pose_at(t_k)?.translation;
    let travel = (spec.pose_at(t_start.max(0.0))?.translation - center).norm();
    let local = cull(world, &center, lidar.r_max + travel + rig.lidar_to_imu.translation.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(lidar.channels * lidar.azimuth_steps);
    for step in 0..lidar.azimuth_steps {
        let tau = lidar.firing_offset(step);
        let pose = sensor_pose(spec, rig, t_k + tau)?;
        for channel in 0..lidar.channels {
            let d = lidar.direction(channel, step);
            // noise is drawn for every firing so the stream does not depend on hits
            let n = gaussian(&mut rng) * lidar.range_noise;
            let Some(hit) = local.cast(&pose.translation, &(pose.rotation * d)) else {
                continue;
            };
            if hit.range < lidar.r_min || hit.range > lidar.r_max {
                continue;
            }
            points.push(TimedPoint::new(d * (hit.range + n), tau));
        }
    }
    Ok(Scan { points, t_start, t_end: t_k })
}

/// Noise-free surface point and normal behind a measured return, world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceTruth {
    pub foot: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl SurfaceTruth {
    /// Signed distance of `q` from the tangent plane at the foot point.
    pub fn plane_distance(&self, q: &Vector3<f64>) -> f64 {
        self.normal.dot(&(q - self.foot))
    }
}

/// Re-casts each return's beam (range noise acts only along the beam) to
/// recover its exact surface point.
pub fn ground_truth_pairs(scan: &Scan, world: &World, spec: &TrajectorySpec, rig: &SensorRig) -> Result<Vec<Option<SurfaceTruth>>> {
    scan.points
        .iter()
        .map(|tp| {
            let pose = sensor_pose(spec, rig, scan.t_end + tp.tau)?;
            let norm = tp.p.norm();
            if norm == 0.0 {
                return Ok(None);
            }
            let d = pose.rotation * (tp.p / norm);
            Ok(world.cast(&pose.translation, &d).map(|hit| SurfaceTruth { foot: hit.point, normal: hit.normal }))
        })
        .collect()
}
