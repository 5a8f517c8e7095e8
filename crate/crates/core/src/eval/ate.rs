use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{LioError, Result};
use crate::lie::Pose;

pub const DEFAULT_MAX_DT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosePair {
    pub t: f64,
    pub est: Pose,
    pub gt: Pose,
}

/// Pairs every estimated pose with the ground-truth pose nearest in time,
/// dropping those farther than `max_dt`.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<Vec<PosePair>> {
    if est.is_empty() || gt.is_empty() {
        return Err(LioError::InvalidInput("cannot associate an empty trajectory".into()));
    }
    let gts = gt.poses();
    let pairs: Vec<PosePair> = est
        .poses()
        .iter()
        .filter_map(|e| {
            let idx = gts.partition_point(|g| g.t < e.t);
            // candidates either side of the insertion point; earlier wins ties
            let best = [idx.checked_sub(1), (idx < gts.len()).then_some(idx)]
                .into_iter()
                .flatten()
                .min_by(|&a, &b| (gts[a].t - e.t).abs().total_cmp(&(gts[b].t - e.t).abs()))?;
            ((gts[best].t - e.t).abs() <= max_dt).then(|| PosePair { t: e.t, est: e.pose(), gt: gts[best].pose() })
        })
        .collect();
    if pairs.is_empty() {
        return Err(LioError::InvalidInput(format!("no poses associate within {max_dt} s")));
    }
    Ok(pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Maps estimated positions onto ground truth: `gt ≈ s·R·est + t`.
    pub pose: Pose,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self { pose: Pose::identity(), scale: 1.0 }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pose.rotation * p * self.scale + self.pose.translation
    }
}

/// Closed-form least-squares alignment of the estimated positions onto the
/// ground-truth positions; rigid unless `with_scale`.
pub fn align_umeyama(pairs: &[PosePair], with_scale: bool) -> Result<Alignment> {
    if pairs.len() < 3 {
        return Err(LioError::Degenerate(format!("alignment needs at least 3 pairs, got {}", pairs.len())));
    }
    let n = pairs.len() as f64;
    let mu_e = pairs.iter().map(|p| p.est.translation).sum::<Vector3<f64>>() / n;
    let mu_g = pairs.iter().map(|p| p.gt.translation).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for p in pairs {
        let de = p.est.translation - mu_e;
        cov += (p.gt.translation - mu_g) * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= n;
    var_e /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = svd.singular_values;
    if !(s[order[1]] > 1e-10 * s[order[0]].max(f64::MIN_POSITIVE)) {
        return Err(LioError::Degenerate("positions are collinear or coincident".into()));
    }
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // flip the direction of the smallest singular value
        d[(order[2], order[2])] = -1.0;
    }
    let r = u * d * v_t;
    let scale = if with_scale { (s.component_mul(&d.diagonal())).sum() / var_e } else { 1.0 };
    let rotation = crate::lie::orthonormalize(&nalgebra::Rotation3::from_matrix_unchecked(r));
    let translation = mu_g - rotation * mu_e * scale;
    Ok(Alignment { pose: Pose::new(rotation, translation), scale })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub axis_rmse: Vector3<f64>,
    pub pairs: usize,
    pub alignment: Alignment,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AteOptions {
    pub align: bool,
    pub with_scale: bool,
    pub max_dt: f64,
}

impl Default for AteOptions {
    fn default() -> Self {
        Self { align: true, with_scale: false, max_dt: DEFAULT_MAX_DT }
    }
}

pub fn ate(est: &Trajectory, gt: &Trajectory, opts: &AteOptions) -> Result<AteResult> {
    let pairs = associate(est, gt, opts.max_dt)?;
    let alignment = if opts.align { align_umeyama(&pairs, opts.with_scale)? } else { Alignment::identity() };
    let residuals: Vec<Vector3<f64>> = pairs.iter().map(|p| p.gt.translation - alignment.apply(&p.est.translation)).collect();
    let n = residuals.len() as f64;
    let mut norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
    let axis_rmse = (residuals.iter().map(|r| r.component_mul(r)).sum::<Vector3<f64>>() / n).map(f64::sqrt);
    let rmse = (norms.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mean = norms.iter().sum::<f64>() / n;
    norms.sort_by(f64::total_cmp);
    let mid = norms.len() / 2;
    let median = if norms.len() % 2 == 1 { norms[mid] } else { 0.5 * (norms[mid - 1] + norms[mid]) };
    Ok(AteResult { rmse, mean, median, max: *norms.last().unwrap(), axis_rmse, pairs: pairs.len(), alignment })
}

/// ATE with default association and rigid alignment toggled by `align`.
pub fn ate_rmse(est: &Trajectory, gt: &Trajectory, align: bool) -> Result<AteResult> {
    ate(est, gt, &AteOptions { align, ..AteOptions::default() })
}
