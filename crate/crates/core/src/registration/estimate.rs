use nalgebra::{Matrix6, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{analyze_degeneracy, build_system, robust_cost, solve_iteration, DegeneracyReport, RegistrationConfig};
use crate::correspondence::{match_point, match_scan, CorrespondenceSet, MatchConfig, RelativeMotion};
use crate::error::{LioError, Result};
use crate::lie::{boxminus, boxplus_pose, Pose};
use crate::pointmap::VoxelSubmap;
use crate::propagation::PosePrior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationStatus {
    Converged,
    MaxIterations,
    /// No correspondence passed the rejection step; the prior is returned.
    Skipped,
    /// Steps kept growing; the prior is returned.
    Diverged,
}

impl RegistrationStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, RegistrationStatus::Skipped | RegistrationStatus::Diverged)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub accepted: usize,
    pub step_norm: f64,
    pub halvings: usize,
    pub cost_before: f64,
    pub cost_after: f64,
    pub report: DegeneracyReport,
}

#[derive(Clone, Debug)]
pub struct RegistrationOutcome {
    pub pose: Pose,
    pub status: RegistrationStatus,
    pub iterations: Vec<IterationLog>,
    /// Correspondences of the first iteration, which fix the acceptance mask.
    pub initial_matches: CorrespondenceSet,
    /// Input points mapped into the global frame by the final pose.
    pub points_global: Vec<Vector3<f64>>,
}

impl RegistrationOutcome {
    pub fn accepted(&self) -> usize {
        self.initial_matches.accepted_count()
    }

    pub fn total(&self) -> usize {
        self.initial_matches.len()
    }

    pub fn last_report(&self) -> Option<&DegeneracyReport> {
        self.iterations.last().map(|it| &it.report)
    }
}

fn objective(corrs: &CorrespondenceSet, pose: &Pose, prior: &Pose, weight: &Matrix6<f64>, cfg: &RegistrationConfig) -> f64 {
    let offset = boxminus(pose, prior).to_vector();
    robust_cost(&corrs.items, pose, &cfg.kernel, cfg.residual_mode) + cfg.w * (offset.transpose() * weight * offset)[0]
}

/// Re-finds nearest targets for the accepted sources at `pose`, keeping the
/// acceptance mask.
fn refresh(corrs: &CorrespondenceSet, map: &VoxelSubmap, pose: &Pose) -> CorrespondenceSet {
    let items = corrs
        .items
        .par_iter()
        .map(|c| {
            if !c.accepted {
                return *c;
            }
            let mut next = *c;
            if let Some((target, distance, normal)) = match_point(map, pose, &c.source) {
                next.target = target;
                next.distance = distance;
                next.normal = normal;
            }
            next
        })
        .collect();
    CorrespondenceSet { items }
}

/// Iterative regularized registration of de-skewed `points` (IMU frame at
/// scan end) against `map`, starting from and regularized towards the
/// prior pose.
pub fn estimate_pose(
    points: &[Vector3<f64>],
    map: &VoxelSubmap,
    prior: &PosePrior,
    motion: &RelativeMotion,
    match_cfg: &MatchConfig,
    cfg: &RegistrationConfig,
) -> Result<RegistrationOutcome> {
    cfg.validate()?;
    let prior_pose = prior.pose;
    let initial = match_scan(points, map, &prior_pose, motion, match_cfg)?;
    let fallback = |status, iterations, initial_matches| RegistrationOutcome {
        pose: prior_pose,
        status,
        iterations,
        initial_matches,
        points_global: points.iter().map(|p| prior_pose.transform_point(p)).collect(),
    };
    if initial.accepted_count() == 0 {
        return Ok(fallback(RegistrationStatus::Skipped, Vec::new(), initial));
    }

    let mut pose = prior_pose;
    let mut corrs = initial.clone();
    let mut logs = Vec::with_capacity(cfg.max_iterations);
    let mut status = RegistrationStatus::MaxIterations;
    let mut growth = 0;
    let mut last_step = f64::INFINITY;

    for iteration in 0..cfg.max_iterations {
        if iteration > 0 {
            corrs = refresh(&corrs, map, &pose);
        }
        let sys = match build_system(&corrs.items, &pose, &cfg.kernel, cfg.residual_mode) {
            Ok(sys) => sys,
            Err(LioError::NoCorrespondences) => return Ok(fallback(RegistrationStatus::Skipped, logs, initial)),
            Err(e) => return Err(e),
        };
        let report = analyze_degeneracy(&sys, prior, cfg);
        let weight = report.weight();
        let full = solve_iteration(&sys, &pose, &prior_pose, &report, cfg)?;

        let cost_before = objective(&corrs, &pose, &prior_pose, &weight, cfg);
        let mut step = full;
        let mut candidate = boxplus_pose(&pose, &step);
        let mut cost_after = objective(&corrs, &candidate, &prior_pose, &weight, cfg);
        let mut halvings = 0;
        while cost_after > cost_before && halvings < cfg.max_halvings {
            halvings += 1;
            step = step.scale(0.5);
            candidate = boxplus_pose(&pose, &step);
            cost_after = objective(&corrs, &candidate, &prior_pose, &weight, cfg);
        }

        let step_norm = boxminus(&candidate, &pose).norm();
        logs.push(IterationLog {
            iteration,
            accepted: corrs.accepted_count(),
            step_norm,
            halvings,
            cost_before,
            cost_after,
            report,
        });

        growth = if step_norm > last_step { growth + 1 } else { 0 };
        last_step = step_norm;
        if growth >= 3 {
            return Ok(fallback(RegistrationStatus::Diverged, logs, initial));
        }

        pose = candidate;
        if step_norm < cfg.epsilon {
            status = RegistrationStatus::Converged;
            break;
        }
    }

    let points_global = points.iter().map(|p| pose.transform_point(p)).collect();
    Ok(RegistrationOutcome { pose, status, iterations: logs, initial_matches: initial, points_global })
}
