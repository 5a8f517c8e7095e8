//! Scan preprocessing (de-skew, voxel downsampling) and the voxel-hashed
//! scan-to-submap point store.

mod submap;

pub use submap::{SubmapConfig, VoxelKey, VoxelSubmap};

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};
use crate::lie::Pose;
use crate::propagation::MotionTrace;

/// A LiDAR return in the sensor frame at its emission time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub p: Vector3<f64>,
    /// Offset from scan end, seconds, `≤ 0`.
    pub tau: f64,
}

impl TimedPoint {
    pub fn new(p: Vector3<f64>, tau: f64) -> Self {
        Self { p, tau }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub points: Vec<TimedPoint>,
    pub t_start: f64,
    pub t_end: f64,
}

impl Scan {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(LioError::InvalidInput("scan end must follow scan start".into()));
        }
        let lo = self.t_start - self.t_end - 1e-9;
        if let Some(bad) = self.points.iter().find(|p| !(p.tau >= lo && p.tau <= 1e-9)) {
            return Err(LioError::InvalidInput(format!("point time offset {} outside scan", bad.tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    /// LiDAR-to-IMU extrinsic.
    pub lidar_to_imu: Pose,
    pub r_min: f64,
    pub r_max: f64,
    pub scan_period: f64,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self {
            lidar_to_imu: Pose::from_translation(Vector3::new(0.0, 0.0, 0.1)),
            r_min: 0.5,
            r_max: 60.0,
            scan_period: 0.1,
        }
    }
}

impl SensorRig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(LioError::InvalidInput(format!("need 0 < r_min < r_max, got {} / {}", self.r_min, self.r_max)));
        }
        if !(self.scan_period > 0.0) || !self.lidar_to_imu.is_finite() {
            return Err(LioError::InvalidInput("invalid scan period or extrinsic".into()));
        }
        Ok(())
    }
}

/// Maps every point into the IMU frame at scan end:
/// `p_k = T_{I_j}^{I_k} · T_L^I · p_j`.
pub fn deskew(scan: &Scan, rig: &SensorRig, motion: &MotionTrace) -> Result<Vec<Vector3<f64>>> {
    scan.points
        .iter()
        .map(|tp| {
            let rel = motion.relative_pose(scan.t_end + tp.tau)?;
            Ok(rel.transform_point(&rig.lidar_to_imu.transform_point(&tp.p)))
        })
        .collect()
}

pub(crate) fn voxel_of(p: &Vector3<f64>, voxel: f64) -> VoxelKey {
    VoxelKey::new((p.x / voxel).floor() as i32, (p.y / voxel).floor() as i32, (p.z / voxel).floor() as i32)
}

/// Voxel-grid filter: one centroid per occupied voxel, in first-occupied order.
pub fn voxel_downsample(points: &[Vector3<f64>], voxel: f64) -> Result<Vec<Vector3<f64>>> {
    if !(voxel > 0.0) {
        return Err(LioError::InvalidInput(format!("voxel size must be positive, got {voxel}")));
    }
    let mut slots: HashMap<VoxelKey, usize> = HashMap::with_capacity(points.len());
    let mut sums: Vec<(Vector3<f64>, usize)> = Vec::new();
    for p in points {
        let key = voxel_of(p, voxel);
        let idx = *slots.entry(key).or_insert_with(|| {
            sums.push((Vector3::zeros(), 0));
            sums.len() - 1
        });
        sums[idx].0 += p;
        sums[idx].1 += 1;
    }
    Ok(sums.into_iter().map(|(s, n)| s / n as f64).collect())
}
