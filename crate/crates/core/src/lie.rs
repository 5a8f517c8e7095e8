//! Rotation and pose algebra: SO(3) exponential/logarithm, the decoupled
//! pose `⊞`/`⊟` operators and a symmetric 3×3 eigen-solver.
//!
//! Poses live on the product manifold SO(3) × R³. Perturbations are applied
//! on the right for rotation (`R·Exp(δθ)`) and additively for translation,
//! which is the convention used by the state model and the registration
//! Jacobians.

use nalgebra::{Matrix3, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Element of SO(3), stored as an orthonormal matrix.
pub type Rotation = Rotation3<f64>;

const SMALL_ANGLE: f64 = 1e-8;

/// Skew-symmetric matrix `[v]×` such that `[v]× w = v × w`.
#[rustfmt::skip]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y,
        v.z, 0.0, -v.x,
        -v.y, v.x, 0.0,
    )
}

/// Exponential map from an axis-angle vector to a rotation.
pub fn exp_so3(omega: &Vector3<f64>) -> Rotation {
    let theta = omega.norm();
    let k = skew(omega);
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k * k
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Matrix3::identity() + a * k + b * k * k
    };
    Rotation::from_matrix_unchecked(m)
}

/// Logarithm map, returning an axis-angle vector with norm in `[0, π]`.
///
/// At exactly `θ = π` the axis sign is ambiguous; the returned axis has its
/// largest-magnitude component positive.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let skew_part = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_theta = skew_part.norm();
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // first-order: R ≈ I + [ω]×
        return skew_part;
    }
    if cos_theta > -0.5 {
        return skew_part * (theta / sin_theta);
    }

    // Near π: recover the axis from the symmetric part, nnᵀ = (S − cosθ·I)/(1 − cosθ).
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * cos_theta) / (1.0 - cos_theta);
    let i = (0..3)
        .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = outer.column(i) / outer[(i, i)].max(0.0).sqrt();
    axis.normalize_mut();
    if sin_theta > 1e-12 {
        if axis.dot(&skew_part) < 0.0 {
            axis = -axis;
        }
    } else {
        let j = axis.iamax();
        if axis[j] < 0.0 {
            axis = -axis;
        }
    }
    axis * theta
}

/// Right Jacobian of SO(3): `Exp(φ + δ) ≈ Exp(φ)·Exp(Jr(φ)·δ)`.
pub fn right_jacobian_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-5 {
        return Matrix3::identity() - 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let t2 = theta * theta;
    Matrix3::identity() - ((1.0 - theta.cos()) / t2) * k + ((theta - theta.sin()) / (t2 * theta)) * k * k
}

/// Re-orthonormalize a rotation that accumulated round-off.
pub fn orthonormalize(r: &Rotation) -> Rotation {
    let m = r.matrix();
    let x = m.column(0).normalize();
    let y = (m.column(1) - x * x.dot(&m.column(1))).normalize();
    let z = x.cross(&y);
    Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
}

/// Rigid transform; maps points from the body frame into the parent frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose::new(r_inv, -(r_inv * self.translation))
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite()) && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Tangent-space increment of a pose: rotational part (axis-angle, rad)
/// and translational part (m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tangent6 {
    pub rot: Vector3<f64>,
    pub trans: Vector3<f64>,
}

impl Tangent6 {
    pub fn new(rot: Vector3<f64>, trans: Vector3<f64>) -> Self {
        Self { rot, trans }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    /// Stacked `[rot | trans]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.rot);
        v.fixed_rows_mut::<3>(3).copy_from(&self.trans);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.rot * s, self.trans * s)
    }

    pub fn is_finite(&self) -> bool {
        self.rot.iter().chain(self.trans.iter()).all(|v| v.is_finite())
    }
}

/// `a ⊟ b = (Log(b.Rᵀ·a.R), a.t − b.t)`.
pub fn boxminus(a: &Pose, b: &Pose) -> Tangent6 {
    let rel = b.rotation.inverse() * a.rotation;
    Tangent6::new(log_so3(&rel), a.translation - b.translation)
}

/// `a ⊞ d = (a.R·Exp(d.rot), a.t + d.trans)`.
pub fn boxplus_pose(a: &Pose, d: &Tangent6) -> Pose {
    Pose::new(orthonormalize(&(a.rotation * exp_so3(&d.rot))), a.translation + d.trans)
}

/// Eigen-decomposition of a symmetric 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymEigen3 {
    /// Ascending.
    pub values: Vector3<f64>,
    /// Unit eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix3<f64>,
}

impl SymEigen3 {
    pub fn vector(&self, i: usize) -> Vector3<f64> {
        self.vectors.column(i).into_owned()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[2]
    }

    /// `V·diag(values)·Vᵀ`.
    pub fn compose(&self, values: &Vector3<f64>) -> Matrix3<f64> {
        self.vectors * Matrix3::from_diagonal(values) * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigen-solver for symmetric 3×3 matrices.
///
/// The input is symmetrized first. Eigenvalues are returned in ascending
/// order; each eigenvector is flipped so that its largest-magnitude
/// component is positive.
pub fn sym_eig3(m: &Matrix3<f64>) -> SymEigen3 {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix3::<f64>::identity();
    let scale = a.norm();

    if scale > 0.0 && scale.is_finite() {
        for _sweep in 0..64 {
            let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
            if off <= (f64::EPSILON * scale).powi(2) * 1e-4 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = Matrix3::identity();
                rot[(p, p)] = c;
                rot[(q, q)] = c;
                rot[(p, q)] = s;
                rot[(q, p)] = -s;
                a = rot.transpose() * a * rot;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                v *= rot;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let mut values = Vector3::zeros();
    let mut vectors = Matrix3::zeros();
    for (k, &i) in order.iter().enumerate() {
        values[k] = a[(i, i)];
        let mut col: Vector3<f64> = v.column(i).into_owned();
        let j = col.iamax();
        if col[j] < 0.0 {
            col = -col;
        }
        vectors.set_column(k, &col);
    }
    SymEigen3 { values, vectors }
}
