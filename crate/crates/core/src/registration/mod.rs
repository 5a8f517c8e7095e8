//! Robust scan-to-submap registration with degeneracy-aware regularization.
//!
//! Each iteration linearizes the robust point-to-plane cost, analyses the
//! rotation and translation blocks of `AᵀA` separately, turns the clamped
//! spectra and the IMU prior covariance into weights `W_r`, `W_t`, and
//! solves
//!
//! ```text
//! (AᵀA + w·diag(W_r, W_t))·δ = Aᵀb − w·diag(W_r, W_t)·(T ⊟ T̂)
//! ```
//!
//! so poorly constrained directions are pulled towards the prediction `T̂`.

mod degeneracy;
mod estimate;
mod kernel;
mod system;

pub use degeneracy::{analyze_degeneracy, BlockAnalysis, DegeneracyReport};
pub use estimate::{estimate_pose, IterationLog, RegistrationOutcome, RegistrationStatus};
pub use kernel::RobustKernel;
pub use system::{build_system, residual, robust_cost, LinearSystem, Residual, ResidualMode};

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};
use crate::lie::{boxminus, Pose, Tangent6};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub max_iterations: usize,
    /// Convergence threshold on `‖T^{κ+1} ⊟ T^κ‖`.
    pub epsilon: f64,
    /// Weight of the prior term.
    pub w: f64,
    pub kernel: RobustKernel,
    /// Eigenvalues below `ratio·λ_max` are raised to that floor.
    pub eigen_floor_ratio: f64,
    pub residual_mode: ResidualMode,
    pub max_halvings: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            max_iterations: 8,
            epsilon: 1e-4,
            w: 1.0,
            kernel: RobustKernel::default(),
            eigen_floor_ratio: 1e-6,
            residual_mode: ResidualMode::PointToPlane,
            max_halvings: 4,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(LioError::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(LioError::InvalidInput("epsilon must be positive".into()));
        }
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(LioError::InvalidInput("w must be finite and non-negative".into()));
        }
        if !(self.eigen_floor_ratio > 0.0 && self.eigen_floor_ratio < 1.0) {
            return Err(LioError::InvalidInput("eigen_floor_ratio must lie in (0, 1)".into()));
        }
        self.kernel.validate()
    }
}

/// Value of the quadratic model `‖Aδ − b‖² + w·‖(T ⊟ T̂) + δ‖²_W`.
pub fn local_model(sys: &LinearSystem, offset: &Vector6<f64>, weight: &Matrix6<f64>, w: f64, delta: &Vector6<f64>) -> f64 {
    let shifted = offset + delta;
    sys.model_cost(delta) + w * (shifted.transpose() * weight * shifted)[0]
}

/// One regularized Gauss-Newton step from `pose` towards the optimum of the
/// combined geometric and prior objective.
pub fn solve_iteration(
    sys: &LinearSystem,
    pose: &Pose,
    prior_pose: &Pose,
    report: &DegeneracyReport,
    cfg: &RegistrationConfig,
) -> Result<Tangent6> {
    let weight = report.weight();
    let offset = boxminus(pose, prior_pose).to_vector();
    let lhs = sys.hessian() + weight * cfg.w;
    let rhs = sys.gradient() - weight * offset * cfg.w;
    let delta = lhs
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| lhs.lu().solve(&rhs))
        .ok_or_else(|| LioError::NonFiniteSolve(format!("singular normal matrix, λ_min(trans) = {:e}", report.lambda_min_trans())))?;
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(LioError::NonFiniteSolve(format!(
            "step is not finite (λ_min rot {:e}, trans {:e})",
            report.lambda_min_rot(),
            report.lambda_min_trans()
        )));
    }
    Ok(Tangent6::from_vector(&delta))
}
