//! Correspondence search with the four outlier-rejection strategies:
//! no rejection, a fixed distance cutoff, a per-scan motion-adaptive
//! threshold and a per-point motion- and range-adaptive threshold.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};
use crate::lie::{log_so3, Pose, Rotation};
use crate::pointmap::VoxelSubmap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectionStrategy {
    None,
    Fixed { tau: f64 },
    ScanAdaptive,
    PointAdaptive,
}

impl RejectionStrategy {
    pub const DEFAULT_FIXED_TAU: f64 = 2.0;

    pub fn name(&self) -> &'static str {
        match self {
            RejectionStrategy::None => "none",
            RejectionStrategy::Fixed { .. } => "fixed",
            RejectionStrategy::ScanAdaptive => "scan_adaptive",
            RejectionStrategy::PointAdaptive => "point_adaptive",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RejectionStrategy::Fixed { tau } if !(*tau > 0.0) => {
                Err(LioError::InvalidInput(format!("fixed threshold must be positive, got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RejectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionStrategy::Fixed { tau } => write!(f, "fixed:{tau}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for RejectionStrategy {
    type Err = LioError;

    /// Accepts `none`, `fixed`, `fixed:<meters>`, `scan_adaptive`, `point_adaptive`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = match s {
            "none" => RejectionStrategy::None,
            "fixed" => RejectionStrategy::Fixed { tau: Self::DEFAULT_FIXED_TAU },
            "scan_adaptive" => RejectionStrategy::ScanAdaptive,
            "point_adaptive" => RejectionStrategy::PointAdaptive,
            _ => match s.strip_prefix("fixed:") {
                Some(v) => RejectionStrategy::Fixed {
                    tau: v.parse().map_err(|_| LioError::Config(format!("bad fixed threshold `{v}`")))?,
                },
                None => return Err(LioError::Config(format!("unknown rejection strategy `{s}`"))),
            },
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// Predicted inter-scan motion of the IMU frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeMotion {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl RelativeMotion {
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), translation: Vector3::zeros() }
    }

    /// Motion of `current` expressed in the frame of `previous`.
    pub fn between(previous: &Pose, current: &Pose) -> Self {
        let rel = previous.inverse().compose(current);
        Self { rotation: rel.rotation, translation: rel.translation }
    }

    pub fn angle(&self) -> f64 {
        log_so3(&self.rotation).norm()
    }
}

/// `‖t̂‖ + 2‖p‖·sin(½‖Log(R̂)‖)`: the largest displacement the relative
/// motion can induce on a point at `p`.
pub fn point_threshold(motion: &RelativeMotion, p: &Vector3<f64>) -> f64 {
    range_threshold(motion, p.norm())
}

fn range_threshold(motion: &RelativeMotion, range: f64) -> f64 {
    motion.translation.norm() + 2.0 * range * (0.5 * motion.angle()).sin()
}

/// Per-scan threshold: the point threshold at maximum sensor range.
pub fn scan_threshold(motion: &RelativeMotion, r_max: f64) -> f64 {
    range_threshold(motion, r_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// De-skewed point in the IMU frame at scan end.
    pub source: Vector3<f64>,
    /// Matched submap point, global frame.
    pub target: Vector3<f64>,
    pub normal: Option<Vector3<f64>>,
    /// Acceptance threshold that was applied, meters.
    pub threshold: f64,
    pub distance: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    /// One entry per input point, in input order.
    pub items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn accepted(&self) -> impl Iterator<Item = &Correspondence> {
        self.items.iter().filter(|c| c.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.items.iter().map(|c| c.accepted).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub strategy: RejectionStrategy,
    /// Added to every strategy's threshold to tolerate sensor noise.
    pub noise_floor: f64,
    pub r_max: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { strategy: RejectionStrategy::PointAdaptive, noise_floor: 0.05, r_max: 60.0 }
    }
}

impl MatchConfig {
    pub fn threshold_for(&self, motion: &RelativeMotion, p: &Vector3<f64>) -> f64 {
        match self.strategy {
            RejectionStrategy::None => f64::INFINITY,
            RejectionStrategy::Fixed { tau } => tau + self.noise_floor,
            RejectionStrategy::ScanAdaptive => scan_threshold(motion, self.r_max) + self.noise_floor,
            RejectionStrategy::PointAdaptive => point_threshold(motion, p) + self.noise_floor,
        }
    }
}

/// Matches a single source point against the map at `pose`, with a surface
/// normal at the target when one is available.
pub fn match_point(map: &VoxelSubmap, pose: &Pose, source: &Vector3<f64>) -> Option<(Vector3<f64>, f64, Option<Vector3<f64>>)> {
    let query = pose.transform_point(source);
    map.nearest(&query).map(|(target, d)| (target, d, map.default_normal(&target)))
}

/// Nearest-neighbour matching of `points` transformed by `pose`, filtered by
/// the configured strategy. Output order follows input order.
pub fn match_scan(
    points: &[Vector3<f64>],
    map: &VoxelSubmap,
    pose: &Pose,
    motion: &RelativeMotion,
    cfg: &MatchConfig,
) -> Result<CorrespondenceSet> {
    if map.is_empty() {
        return Err(LioError::EmptyMap);
    }
    cfg.strategy.validate()?;
    let items = points
        .par_iter()
        .map(|p| {
            let (target, distance, normal) = match_point(map, pose, p).expect("non-empty map always has a nearest point");
            let threshold = cfg.threshold_for(motion, p);
            Correspondence { source: *p, target, normal, threshold, distance, accepted: distance <= threshold }
        })
        .collect();
    Ok(CorrespondenceSet { items })
}
