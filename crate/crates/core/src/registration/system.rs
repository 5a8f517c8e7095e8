use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix6, RowVector6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::RobustKernel;
use crate::correspondence::Correspondence;
use crate::error::{LioError, Result};
use crate::lie::{skew, Pose};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// Point-to-plane; correspondences without a normal are left out.
    #[default]
    PointToPlane,
    /// Point-to-plane, with point-to-point rows where no normal is available.
    PointToPlaneFallback,
    PointToPoint,
}

impl ResidualMode {
    pub fn name(&self) -> &'static str {
        match self {
            ResidualMode::PointToPlane => "point_to_plane",
            ResidualMode::PointToPlaneFallback => "point_to_plane_fallback",
            ResidualMode::PointToPoint => "point_to_point",
        }
    }

    /// Whether an accepted correspondence contributes rows in this mode.
    pub fn admits(&self, c: &Correspondence) -> bool {
        c.accepted && (*self != ResidualMode::PointToPlane || c.normal.is_some())
    }
}

/// Residual of one correspondence and its Jacobian with respect to the
/// pose increment `[δθ | δt]` applied as `(R·Exp(δθ), t + δt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Residual {
    Plane { e: f64, j: RowVector6<f64> },
    Point { e: Vector3<f64>, j: Matrix3x6<f64> },
}

impl Residual {
    pub fn squared_norm(&self) -> f64 {
        match self {
            Residual::Plane { e, .. } => e * e,
            Residual::Point { e, .. } => e.norm_squared(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Residual::Plane { .. } => 1,
            Residual::Point { .. } => 3,
        }
    }
}

/// Point-to-plane where the correspondence carries a normal and the mode
/// asks for it; point-to-point otherwise.
pub fn residual(c: &Correspondence, pose: &Pose, mode: ResidualMode) -> Residual {
    let r = pose.rotation.matrix();
    let moved = pose.transform_point(&c.source);
    let d_rot: Matrix3<f64> = -r * skew(&c.source);
    match (mode, c.normal) {
        (ResidualMode::PointToPlane | ResidualMode::PointToPlaneFallback, Some(n)) => {
            let mut j = RowVector6::zeros();
            j.fixed_columns_mut::<3>(0).copy_from(&(n.transpose() * d_rot));
            j.fixed_columns_mut::<3>(3).copy_from(&n.transpose());
            Residual::Plane { e: n.dot(&(moved - c.target)), j }
        }
        _ => {
            let mut j = Matrix3x6::zeros();
            j.fixed_columns_mut::<3>(0).copy_from(&d_rot);
            j.fixed_columns_mut::<3>(3).copy_from(&Matrix3::identity());
            Residual::Point { e: moved - c.target, j }
        }
    }
}

/// Robust cost `Σ ρ(‖e_j‖²)` over the accepted correspondences.
pub fn robust_cost<'a>(
    corrs: impl IntoIterator<Item = &'a Correspondence>,
    pose: &Pose,
    kernel: &RobustKernel,
    mode: ResidualMode,
) -> f64 {
    corrs
        .into_iter()
        .filter(|c| mode.admits(c))
        .map(|c| kernel.rho(residual(c, pose, mode).squared_norm()))
        .sum()
}

/// Stacked, IRLS-weighted linearization `A·δ ≈ b` with `b = −√ω·e`.
/// Columns are ordered `[rotation | translation]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearSystem {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a_rot(&self) -> DMatrix<f64> {
        self.a.columns(0, 3).into_owned()
    }

    pub fn a_trans(&self) -> DMatrix<f64> {
        self.a.columns(3, 3).into_owned()
    }

    pub fn hessian(&self) -> Matrix6<f64> {
        let mut h = Matrix6::zeros();
        h.gemm_tr(1.0, &self.a, &self.a, 0.0);
        h
    }

    pub fn gradient(&self) -> Vector6<f64> {
        let mut g = Vector6::zeros();
        g.gemv_tr(1.0, &self.a, &self.b, 0.0);
        g
    }

    pub fn hessian_rot(&self) -> Matrix3<f64> {
        self.hessian().fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn hessian_trans(&self) -> Matrix3<f64> {
        self.hessian().fixed_view::<3, 3>(3, 3).into_owned()
    }

    /// `‖A·δ − b‖²`.
    pub fn model_cost(&self, delta: &Vector6<f64>) -> f64 {
        (&self.a * delta - &self.b).norm_squared()
    }
}

pub fn build_system<'a>(
    corrs: impl IntoIterator<Item = &'a Correspondence>,
    pose: &Pose,
    kernel: &RobustKernel,
    mode: ResidualMode,
) -> Result<LinearSystem> {
    let residuals: Vec<Residual> = corrs
        .into_iter()
        .filter(|c| mode.admits(c))
        .map(|c| residual(c, pose, mode))
        .collect();
    if residuals.is_empty() {
        return Err(LioError::NoCorrespondences);
    }
    let m: usize = residuals.iter().map(Residual::rows).sum();
    let mut a = DMatrix::zeros(m, 6);
    let mut b = DVector::zeros(m);
    let mut row = 0;
    for r in &residuals {
        let w = kernel.weight(r.squared_norm()).sqrt();
        match r {
            Residual::Plane { e, j } => {
                a.row_mut(row).copy_from(&(j * w));
                b[row] = -w * e;
            }
            Residual::Point { e, j } => {
                a.rows_mut(row, 3).copy_from(&(j * w));
                b.rows_mut(row, 3).copy_from(&(-w * e));
            }
        }
        row += r.rows();
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(LioError::NonFiniteSolve("non-finite residual or Jacobian".into()));
    }
    Ok(LinearSystem { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{boxplus_pose, exp_so3, Tangent6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(source: Vector3<f64>, target: Vector3<f64>, normal: Option<Vector3<f64>>) -> Correspondence {
        Correspondence { source, target, normal, threshold: f64::INFINITY, distance: 0.0, accepted: true }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    #[test]
    fn exact_alignment_has_zero_residual() {
        let pose = Pose::new(exp_so3(&Vector3::new(0.1, 0.2, -0.3)), Vector3::new(1.0, 2.0, 3.0));
        let p = Vector3::new(4.0, -1.0, 2.0);
        let c = corr(p, pose.transform_point(&p), Some(Vector3::new(0.0, 0.6, 0.8)));
        for mode in [ResidualMode::PointToPlane, ResidualMode::PointToPoint] {
            assert!(residual(&c, &pose, mode).squared_norm() < 1e-24);
        }
    }

    #[test]
    fn plane_offset() {
        let c = corr(Vector3::zeros(), Vector3::zeros(), Some(Vector3::new(0.0, 0.0, 1.0)));
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 0.7));
        match residual(&c, &pose, ResidualMode::PointToPlane) {
            Residual::Plane { e, .. } => assert!((e - 0.7).abs() < 1e-15),
            other => panic!("expected plane residual, got {other:?}"),
        }
        // no normal: falls back to point-to-point
        let c = corr(Vector3::zeros(), Vector3::zeros(), None);
        assert!(matches!(residual(&c, &pose, ResidualMode::PointToPlaneFallback), Residual::Point { .. }));
    }

    #[test]
    fn normal_less_rows_follow_the_mode() {
        let with = corr(Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.1), Some(Vector3::z()));
        let without = corr(Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 1.1, 0.0), None);
        let pose = Pose::identity();
        let rows = |mode| build_system([&with, &without], &pose, &RobustKernel::None, mode).unwrap().rows();
        assert_eq!(rows(ResidualMode::PointToPlane), 1);
        assert_eq!(rows(ResidualMode::PointToPlaneFallback), 4);
        assert_eq!(rows(ResidualMode::PointToPoint), 6);
        assert!(matches!(
            build_system([&without], &pose, &RobustKernel::None, ResidualMode::PointToPlane),
            Err(LioError::NoCorrespondences)
        ));
        let cost = robust_cost([&with, &without], &pose, &RobustKernel::None, ResidualMode::PointToPlane);
        assert!((cost - 0.01).abs() < 1e-15);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 1e-6;
        for _ in 0..100 {
            let pose = Pose::new(exp_so3(&rand_vec(&mut rng, 1.0)), rand_vec(&mut rng, 5.0));
            let c = corr(rand_vec(&mut rng, 20.0), rand_vec(&mut rng, 20.0), Some(rand_vec(&mut rng, 1.0).normalize()));
            for mode in [ResidualMode::PointToPlane, ResidualMode::PointToPoint] {
                let analytic = residual(&c, &pose, mode);
                for k in 0..6 {
                    let mut d = Vector6::zeros();
                    d[k] = h;
                    let plus = residual(&c, &boxplus_pose(&pose, &Tangent6::from_vector(&d)), mode);
                    let minus = residual(&c, &boxplus_pose(&pose, &Tangent6::from_vector(&-d)), mode);
                    match (analytic, plus, minus) {
                        (Residual::Plane { j, .. }, Residual::Plane { e: ep, .. }, Residual::Plane { e: em, .. }) => {
                            assert!(((ep - em) / (2.0 * h) - j[k]).abs() < 1e-6);
                        }
                        (Residual::Point { j, .. }, Residual::Point { e: ep, .. }, Residual::Point { e: em, .. }) => {
                            assert!(((ep - em) / (2.0 * h) - j.column(k)).norm() < 1e-6);
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    #[test]
    fn quadratic_region_matches_unweighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let corrs: Vec<_> = (0..20)
            .map(|_| {
                let p = rand_vec(&mut rng, 5.0);
                corr(p, p + rand_vec(&mut rng, 0.01), Some(rand_vec(&mut rng, 1.0).normalize()))
            })
            .collect();
        let pose = Pose::identity();
        let plain = build_system(&corrs, &pose, &RobustKernel::None, ResidualMode::PointToPlane).unwrap();
        let huber = build_system(&corrs, &pose, &RobustKernel::Huber { delta: 1.0 }, ResidualMode::PointToPlane).unwrap();
        assert_eq!(plain, huber);
        assert_eq!(plain.rows(), 20);
        let p2p = build_system(&corrs, &pose, &RobustKernel::None, ResidualMode::PointToPoint).unwrap();
        assert_eq!(p2p.rows(), 60);
    }

    #[test]
    fn rejects_empty_input() {
        let mut c = corr(Vector3::zeros(), Vector3::zeros(), None);
        c.accepted = false;
        assert!(matches!(
            build_system([&c], &Pose::identity(), &RobustKernel::None, ResidualMode::PointToPoint),
            Err(LioError::NoCorrespondences)
        ));
    }
}
