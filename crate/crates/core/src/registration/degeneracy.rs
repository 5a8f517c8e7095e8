use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use super::{LinearSystem, RegistrationConfig};
use crate::lie::{sym_eig3, SymEigen3};
use crate::propagation::PosePrior;

/// Smallest eigenvalue floor used when a Hessian block is identically zero.
const ABSOLUTE_FLOOR: f64 = 1e-12;

/// Spectral analysis of one 3×3 Hessian block and its prior weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockAnalysis {
    pub hessian: Matrix3<f64>,
    /// Raw spectrum, ascending.
    pub eigen: SymEigen3,
    /// Spectrum after raising small eigenvalues to the floor.
    pub clamped_values: Vector3<f64>,
    pub floor: f64,
    pub clamped: [bool; 3],
    /// Symmetric PSD weight `(H·P)⁻¹` built from the clamped spectrum.
    pub weight: Matrix3<f64>,
}

impl BlockAnalysis {
    pub fn lambda_min(&self) -> f64 {
        self.eigen.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigen.max()
    }

    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|c| *c)
    }

    /// Smallest eigenvalue of `H + w·W`.
    pub fn regularized_lambda_min(&self, w: f64) -> f64 {
        sym_eig3(&(self.hessian + self.weight * w)).min()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub rot: BlockAnalysis,
    pub trans: BlockAnalysis,
    pub lambda_min_rot_reg: f64,
    pub lambda_min_trans_reg: f64,
}

impl DegeneracyReport {
    pub fn lambda_min_rot(&self) -> f64 {
        self.rot.lambda_min()
    }

    pub fn lambda_min_trans(&self) -> f64 {
        self.trans.lambda_min()
    }

    /// `blockdiag(W_r, W_t)`.
    pub fn weight(&self) -> Matrix6<f64> {
        let mut w = Matrix6::zeros();
        w.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot.weight);
        w.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.trans.weight);
        w
    }
}

fn condition_covariance(p: &Matrix3<f64>) -> Matrix3<f64> {
    let sym = (p + p.transpose()) * 0.5;
    let trace = sym.trace().abs();
    let jitter = if trace > 0.0 { 1e-12 * trace } else { 1e-12 };
    if sym_eig3(&sym).min() <= jitter {
        sym + Matrix3::identity() * jitter
    } else {
        sym
    }
}

fn analyze_block(hessian: Matrix3<f64>, prior_cov: &Matrix3<f64>, floor_ratio: f64) -> BlockAnalysis {
    let eigen = sym_eig3(&hessian);
    let floor = (floor_ratio * eigen.max()).max(ABSOLUTE_FLOOR);
    let mut clamped = [false; 3];
    let mut values = eigen.values;
    for i in 0..3 {
        if values[i] < floor {
            values[i] = floor;
            clamped[i] = true;
        }
    }
    let hessian_inv = eigen.compose(&values.map(|v| 1.0 / v));
    let cov = condition_covariance(prior_cov);
    let cov_inv = cov.try_inverse().unwrap_or_else(|| Matrix3::identity() / cov.trace().max(ABSOLUTE_FLOOR));
    // (H·P)⁻¹ = P⁻¹·H⁻¹
    let raw = cov_inv * hessian_inv;
    let sym = (raw + raw.transpose()) * 0.5;
    let w_eig = sym_eig3(&sym);
    let w_floor = (floor_ratio * w_eig.max()).max(0.0);
    let weight = w_eig.compose(&w_eig.values.map(|v| v.max(w_floor)));
    BlockAnalysis { hessian, eigen, clamped_values: values, floor, clamped, weight: (weight + weight.transpose()) * 0.5 }
}

/// Separate rotation/translation eigen-analysis of the registration
/// Hessian, fused with the IMU prior covariance into `W_r` and `W_t`.
pub fn analyze_degeneracy(sys: &LinearSystem, prior: &PosePrior, cfg: &RegistrationConfig) -> DegeneracyReport {
    let h = sys.hessian();
    let rot = analyze_block(h.fixed_view::<3, 3>(0, 0).into_owned(), &prior.rot_cov, cfg.eigen_floor_ratio);
    let trans = analyze_block(h.fixed_view::<3, 3>(3, 3).into_owned(), &prior.trans_cov, cfg.eigen_floor_ratio);
    DegeneracyReport {
        lambda_min_rot_reg: rot.regularized_lambda_min(cfg.w),
        lambda_min_trans_reg: trans.regularized_lambda_min(cfg.w),
        rot,
        trans,
    }
}
