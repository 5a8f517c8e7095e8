use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{LioError, Result};
use crate::lie::Pose;

/// One timestamped pose, stored as written in TUM files so that reading and
/// re-writing is lossless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub t: f64,
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl StampedPose {
    pub fn from_pose(t: f64, pose: &Pose) -> Self {
        Self { t, translation: pose.translation, rotation: UnitQuaternion::from_rotation_matrix(&pose.rotation) }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation.to_rotation_matrix(), self.translation)
    }
}

/// Poses with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    poses: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new(poses: Vec<StampedPose>) -> Result<Self> {
        if let Some(i) = poses.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(LioError::InvalidInput(format!("timestamps not increasing at index {}", i + 1)));
        }
        if poses.iter().any(|p| !p.t.is_finite() || !p.translation.iter().chain(p.rotation.coords.iter()).all(|v| v.is_finite())) {
            return Err(LioError::InvalidInput("trajectory contains non-finite values".into()));
        }
        Ok(Self { poses })
    }

    pub fn from_poses(poses: impl IntoIterator<Item = (f64, Pose)>) -> Result<Self> {
        Self::new(poses.into_iter().map(|(t, p)| StampedPose::from_pose(t, &p)).collect())
    }

    pub fn poses(&self) -> &[StampedPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn push(&mut self, t: f64, pose: &Pose) -> Result<()> {
        if self.poses.last().is_some_and(|last| !(t > last.t)) {
            return Err(LioError::InvalidInput(format!("timestamp {t} does not follow the last pose")));
        }
        self.poses.push(StampedPose::from_pose(t, pose));
        Ok(())
    }

    /// `timestamp tx ty tz qx qy qz qw` per line; `#` starts a comment.
    pub fn parse_tum(text: &str) -> Result<Self> {
        let mut poses = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(LioError::Parse { line, msg: format!("expected 8 fields, found {}", fields.len()) });
            }
            let mut v = [0.0f64; 8];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| LioError::Parse { line, msg: format!("invalid number `{field}`") })?;
                if !slot.is_finite() {
                    return Err(LioError::Parse { line, msg: format!("non-finite value `{field}`") });
                }
            }
            let q = Quaternion::new(v[7], v[4], v[5], v[6]);
            let norm = q.norm();
            if !(norm > 1e-12) {
                return Err(LioError::Parse { line, msg: "zero quaternion".into() });
            }
            // keep already-unit quaternions bit-for-bit
            let rotation = if (norm - 1.0).abs() < 1e-9 { UnitQuaternion::new_unchecked(q) } else { UnitQuaternion::new_normalize(q) };
            if poses.last().is_some_and(|p: &StampedPose| !(v[0] > p.t)) {
                return Err(LioError::Parse { line, msg: format!("timestamp {} does not increase", fields[0]) });
            }
            poses.push(StampedPose { t: v[0], translation: Vector3::new(v[1], v[2], v[3]), rotation });
        }
        Ok(Self { poses })
    }

    pub fn read_tum(path: &Path) -> Result<Self> {
        Self::parse_tum(&std::fs::read_to_string(path)?)
    }

    /// Shortest round-trip decimal representation of every value.
    pub fn to_tum_string(&self) -> String {
        let mut out = String::with_capacity(self.poses.len() * 120);
        for p in &self.poses {
            let q = p.rotation.quaternion();
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                p.t, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w
            );
        }
        out
    }

    pub fn write_tum(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tum_string())?;
        Ok(())
    }
}
