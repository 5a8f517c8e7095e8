//! Deterministic synthetic worlds, trajectories and sensor streams.

mod scene;
mod sensors;
mod trajectory;

pub use scene::{RayHit, SceneKind, SceneModel, Surface, World};
pub use sensors::{derive_seed, ground_truth_pairs, simulate_imu, simulate_scan, ImuBiases, LidarModel, SurfaceTruth};
pub use trajectory::{sample_trajectory, Kinematics, TrajectoryKind, TrajectorySpec};
