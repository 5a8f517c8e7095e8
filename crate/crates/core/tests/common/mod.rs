//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use lio_core::lie::Pose;
use lio_core::pointmap::{deskew, voxel_downsample, SensorRig, SubmapConfig, VoxelSubmap};
use lio_core::propagation::MotionTrace;
use lio_core::runner::RunConfig;
use lio_core::sim::{ground_truth_pairs, simulate_scan, LidarModel, SurfaceTruth, TrajectoryKind, TrajectorySpec, World};
use nalgebra::{Rotation3, Vector3};

pub fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"))
}

pub fn load(name: &str, overrides: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::load(&scenario(name)).unwrap();
    for (k, v) in overrides {
        cfg.set(k, v).unwrap();
    }
    cfg
}

/// Planar pose with yaw about z.
pub fn planar(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
    Pose::new(Rotation3::from_axis_angle(&Vector3::z_axis(), yaw), Vector3::new(x, y, z))
}

fn still(pose: &Pose) -> TrajectorySpec {
    let yaw = pose.rotation.scaled_axis().z;
    TrajectorySpec { kind: TrajectoryKind::Static, origin: pose.translation, yaw0: yaw, duration: 1.0, ..TrajectorySpec::default() }
}

/// One scan taken at rest at a planar `pose`: IMU-frame points with their
/// true surface points and normals (world frame).
pub fn still_scan(world: &World, lidar: &LidarModel, rig: &SensorRig, pose: &Pose, seed: u64) -> Vec<(Vector3<f64>, SurfaceTruth)> {
    let spec = still(pose);
    let scan = simulate_scan(world, &spec, lidar, rig, 0.5, seed).unwrap();
    let trace = MotionTrace::new(vec![(scan.t_start - 1e-3, *pose), (scan.t_end, *pose)]).unwrap();
    let points = deskew(&scan, rig, &trace).unwrap();
    let truth = ground_truth_pairs(&scan, world, &spec, rig).unwrap();
    points.into_iter().zip(truth).filter_map(|(p, t)| t.map(|t| (p, t))).collect()
}

/// Submap built from noiseless scans at `poses`.
pub fn map_from(world: &World, lidar: &LidarModel, rig: &SensorRig, poses: &[Pose], downsample: f64) -> VoxelSubmap {
    let mut map = VoxelSubmap::new(SubmapConfig::default());
    for (i, pose) in poses.iter().enumerate() {
        let pts: Vec<_> = still_scan(world, lidar, rig, pose, 1000 + i as u64).into_iter().map(|(p, _)| p).collect();
        let global: Vec<_> = voxel_downsample(&pts, downsample).unwrap().iter().map(|p| pose.transform_point(p)).collect();
        map.insert(&global, &pose.translation);
    }
    map
}

pub fn noiseless_lidar() -> LidarModel {
    LidarModel { range_noise: 0.0, ..LidarModel::default() }
}
