//! Discrete IMU state and covariance propagation.
//!
//! The 18-dimensional error state is ordered `(R, t, v, b_g, b_a, g)`, three
//! components each. Rotation errors are right perturbations `R·Exp(δθ)`;
//! every other block is additive. The process noise vector is ordered
//! `(n_g, n_a, n_bg, n_ba)`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};
use crate::lie::{exp_so3, log_so3, orthonormalize, right_jacobian_so3, skew, Pose, Rotation};

pub const STATE_DIM: usize = 18;
pub const NOISE_DIM: usize = 12;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type NoiseVector = SVector<f64, NOISE_DIM>;
pub type TransitionJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type NoiseJacobian = SMatrix<f64, STATE_DIM, NOISE_DIM>;

pub const ROT: usize = 0;
pub const POS: usize = 3;
pub const VEL: usize = 6;
pub const BG: usize = 9;
pub const BA: usize = 12;
pub const GRAV: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub rotation: Rotation,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    pub gravity: Vector3<f64>,
}

impl Default for NavState {
    fn default() -> Self {
        Self {
            rotation: Rotation::identity(),
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            gravity: Vector3::new(0.0, 0.0, -9.81),
        }
    }
}

impl NavState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation, self.position)
    }

    pub fn is_finite(&self) -> bool {
        self.pose().is_finite()
            && [self.velocity, self.gyro_bias, self.accel_bias, self.gravity]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Checks finiteness and the gravity-magnitude bounds.
    pub fn validate(&self, cfg: &PropagationConfig) -> Result<()> {
        if !self.is_finite() {
            return Err(LioError::InvalidInput("non-finite navigation state".into()));
        }
        let g = self.gravity.norm();
        if g < cfg.gravity_bounds.0 || g > cfg.gravity_bounds.1 {
            return Err(LioError::InvalidInput(format!(
                "gravity magnitude {g:.3} outside [{}, {}]",
                cfg.gravity_bounds.0, cfg.gravity_bounds.1
            )));
        }
        Ok(())
    }

    pub fn boxplus(&self, dx: &StateVector) -> NavState {
        let block = |i: usize| -> Vector3<f64> { dx.fixed_rows::<3>(i).into_owned() };
        NavState {
            rotation: orthonormalize(&(self.rotation * exp_so3(&block(ROT)))),
            position: self.position + block(POS),
            velocity: self.velocity + block(VEL),
            gyro_bias: self.gyro_bias + block(BG),
            accel_bias: self.accel_bias + block(BA),
            gravity: self.gravity + block(GRAV),
        }
    }

    /// `self ⊟ other`.
    pub fn boxminus(&self, other: &NavState) -> StateVector {
        let mut dx = StateVector::zeros();
        dx.fixed_rows_mut::<3>(ROT)
            .copy_from(&log_so3(&(other.rotation.inverse() * self.rotation)));
        dx.fixed_rows_mut::<3>(POS).copy_from(&(self.position - other.position));
        dx.fixed_rows_mut::<3>(VEL).copy_from(&(self.velocity - other.velocity));
        dx.fixed_rows_mut::<3>(BG).copy_from(&(self.gyro_bias - other.gyro_bias));
        dx.fixed_rows_mut::<3>(BA).copy_from(&(self.accel_bias - other.accel_bias));
        dx.fixed_rows_mut::<3>(GRAV).copy_from(&(self.gravity - other.gravity));
        dx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    /// Angular rate, rad/s, body frame.
    pub gyro: Vector3<f64>,
    /// Specific force, m/s², body frame.
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { t, gyro, accel }
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite() && self.gyro.iter().chain(self.accel.iter()).all(|v| v.is_finite())
    }

    fn midpoint(&self, other: &ImuSample) -> ImuSample {
        ImuSample::new(0.5 * (self.t + other.t), 0.5 * (self.gyro + other.gyro), 0.5 * (self.accel + other.accel))
    }
}

/// Continuous-time noise densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuNoiseParams {
    /// rad/s/√Hz
    pub gyro_noise: f64,
    /// m/s²/√Hz
    pub accel_noise: f64,
    /// rad/s²/√Hz
    pub gyro_bias_walk: f64,
    /// m/s³/√Hz
    pub accel_bias_walk: f64,
}

impl Default for ImuNoiseParams {
    fn default() -> Self {
        Self { gyro_noise: 1.7e-4, accel_noise: 2.0e-3, gyro_bias_walk: 2.0e-5, accel_bias_walk: 3.0e-4 }
    }
}

impl ImuNoiseParams {
    pub fn zero() -> Self {
        Self { gyro_noise: 0.0, accel_noise: 0.0, gyro_bias_walk: 0.0, accel_bias_walk: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.gyro_noise, self.accel_noise, self.gyro_bias_walk, self.accel_bias_walk];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(LioError::InvalidInput("noise densities must be finite and non-negative".into()))
        }
    }

    /// Diagonal covariance of the per-step white-noise vector: a density σ
    /// sampled over `dt` has variance σ²/dt.
    pub fn discrete_covariance(&self, dt: f64) -> SMatrix<f64, NOISE_DIM, NOISE_DIM> {
        let mut q = SMatrix::<f64, NOISE_DIM, NOISE_DIM>::zeros();
        for (block, density) in [self.gyro_noise, self.accel_noise, self.gyro_bias_walk, self.accel_bias_walk]
            .into_iter()
            .enumerate()
        {
            for k in 0..3 {
                q[(3 * block + k, 3 * block + k)] = density * density / dt;
            }
        }
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub max_step: f64,
    pub max_gap: f64,
    pub gravity_bounds: (f64, f64),
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { max_step: 0.02, max_gap: 0.1, gravity_bounds: (9.0, 10.5) }
    }
}

/// Pose prediction with its rotation and translation covariance blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosePrior {
    pub pose: Pose,
    pub rot_cov: Matrix3<f64>,
    pub trans_cov: Matrix3<f64>,
}

impl PosePrior {
    pub fn from_state(x: &NavState, p: &StateCovariance) -> Self {
        Self {
            pose: x.pose(),
            rot_cov: p.fixed_view::<3, 3>(ROT, ROT).into_owned(),
            trans_cov: p.fixed_view::<3, 3>(POS, POS).into_owned(),
        }
    }
}

/// One transition step with explicit noise; `dt` may be negative.
pub fn transition(x: &NavState, u: &ImuSample, dt: f64, w: &NoiseVector) -> NavState {
    let block = |i: usize| -> Vector3<f64> { w.fixed_rows::<3>(i).into_owned() };
    let omega = u.gyro - x.gyro_bias - block(0);
    let acc = u.accel - x.accel_bias - block(3);
    let acc_world = x.rotation * acc + x.gravity;
    NavState {
        rotation: orthonormalize(&(x.rotation * exp_so3(&(omega * dt)))),
        position: x.position + x.velocity * dt + 0.5 * acc_world * dt * dt,
        velocity: x.velocity + acc_world * dt,
        gyro_bias: x.gyro_bias + block(6) * dt,
        accel_bias: x.accel_bias + block(9) * dt,
        gravity: x.gravity,
    }
}

/// Noise-free forward-Euler step of the discrete kinematic model.
pub fn propagate_state(x: &NavState, u: &ImuSample, dt: f64) -> Result<NavState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(LioError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if !x.is_finite() || !u.is_finite() {
        return Err(LioError::InvalidInput("non-finite state or IMU sample".into()));
    }
    Ok(transition(x, u, dt, &NoiseVector::zeros()))
}

/// First-order Jacobians `(F_x, F_w)` of [`propagate_state`] with respect to
/// the error state and the noise vector.
pub fn transition_jacobians(x: &NavState, u: &ImuSample, dt: f64) -> (TransitionJacobian, NoiseJacobian) {
    let phi = (u.gyro - x.gyro_bias) * dt;
    let acc = u.accel - x.accel_bias;
    let r = *x.rotation.matrix();
    let jr = right_jacobian_so3(&phi);
    let r_acc_skew = r * skew(&acc);
    let eye = Matrix3::<f64>::identity();
    let dt2 = 0.5 * dt * dt;

    let mut fx = TransitionJacobian::identity();
    let set = |m: &mut TransitionJacobian, row: usize, col: usize, blk: Matrix3<f64>| {
        m.fixed_view_mut::<3, 3>(row, col).copy_from(&blk);
    };
    set(&mut fx, ROT, ROT, exp_so3(&phi).inverse().into_inner());
    set(&mut fx, ROT, BG, -jr * dt);
    set(&mut fx, POS, ROT, -r_acc_skew * dt2);
    set(&mut fx, POS, VEL, eye * dt);
    set(&mut fx, POS, BA, -r * dt2);
    set(&mut fx, POS, GRAV, eye * dt2);
    set(&mut fx, VEL, ROT, -r_acc_skew * dt);
    set(&mut fx, VEL, BA, -r * dt);
    set(&mut fx, VEL, GRAV, eye * dt);

    let mut fw = NoiseJacobian::zeros();
    fw.fixed_view_mut::<3, 3>(ROT, 0).copy_from(&(-jr * dt));
    fw.fixed_view_mut::<3, 3>(POS, 3).copy_from(&(-r * dt2));
    fw.fixed_view_mut::<3, 3>(VEL, 3).copy_from(&(-r * dt));
    fw.fixed_view_mut::<3, 3>(BG, 6).copy_from(&(eye * dt));
    fw.fixed_view_mut::<3, 3>(BA, 9).copy_from(&(eye * dt));
    (fx, fw)
}

/// `F_x·P·F_xᵀ + F_w·Q·F_wᵀ`, re-symmetrized.
pub fn propagate_covariance(
    p: &StateCovariance,
    x: &NavState,
    u: &ImuSample,
    dt: f64,
    noise: &ImuNoiseParams,
) -> Result<StateCovariance> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(LioError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if !x.is_finite() || !u.is_finite() || p.iter().any(|v| !v.is_finite()) {
        return Err(LioError::InvalidInput("non-finite covariance propagation input".into()));
    }
    noise.validate()?;
    let (fx, fw) = transition_jacobians(x, u, dt);
    let q = noise.discrete_covariance(dt);
    let next = fx * p * fx.transpose() + fw * q * fw.transpose();
    Ok((next + next.transpose()) * 0.5)
}

/// Time-stamped poses produced while propagating over one scan window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionTrace {
    samples: Vec<(f64, Pose)>,
}

impl MotionTrace {
    /// Samples must be in strictly increasing time order.
    pub fn new(samples: Vec<(f64, Pose)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(LioError::InvalidInput("motion trace needs at least one pose".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(LioError::InvalidInput("motion trace times must increase".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose)] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn end_pose(&self) -> Pose {
        self.samples[self.samples.len() - 1].1
    }

    /// Interpolated world pose at `t`: linear in translation, geodesic in rotation.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        const SLACK: f64 = 1e-9;
        let (start, end) = (self.start(), self.end());
        if !(t >= start - SLACK && t <= end + SLACK) {
            return Err(LioError::OutOfRange { t, start, end });
        }
        let t = t.clamp(start, end);
        let hi = self.samples.partition_point(|(s, _)| *s < t);
        if hi == 0 {
            return Ok(self.samples[0].1);
        }
        let (t1, p1) = self.samples[hi];
        if t1 == t {
            return Ok(p1);
        }
        let (t0, p0) = self.samples[hi - 1];
        let alpha = (t - t0) / (t1 - t0);
        let delta = log_so3(&(p0.rotation.inverse() * p1.rotation));
        Ok(Pose::new(
            p0.rotation * exp_so3(&(delta * alpha)),
            p0.translation + (p1.translation - p0.translation) * alpha,
        ))
    }

    /// Pose of the IMU at time `t` expressed in the IMU frame at the end of
    /// the trace.
    pub fn relative_pose(&self, t: f64) -> Result<Pose> {
        let at = self.pose_at(t)?;
        Ok(self.end_pose().inverse().compose(&at))
    }
}

/// Result of propagating across one inter-scan IMU window.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub state: NavState,
    pub covariance: StateCovariance,
    pub prior: PosePrior,
    pub trace: MotionTrace,
}

/// Propagates `(x, p)` from `t_start` to `t_end` through `window`.
///
/// Each interval between consecutive knots is integrated with the mean of
/// the two bracketing measurements; a sample at or before `t_start` supplies
/// the opening measurement, and the last sample is held constant up to
/// `t_end`. Intervals longer than `cfg.max_step` are subdivided.
pub fn predict_pose(
    x: &NavState,
    p: &StateCovariance,
    t_start: f64,
    t_end: f64,
    window: &[ImuSample],
    noise: &ImuNoiseParams,
    cfg: &PropagationConfig,
) -> Result<Prediction> {
    const SLACK: f64 = 1e-9;
    if window.is_empty() {
        return Err(LioError::EmptyImuWindow);
    }
    if !(t_end > t_start) {
        return Err(LioError::InvalidInput(format!("window end {t_end} must follow start {t_start}")));
    }
    if window.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(LioError::InvalidInput("IMU timestamps must be strictly increasing".into()));
    }
    x.validate(cfg)?;

    let mut knots: Vec<(f64, ImuSample)> = Vec::with_capacity(window.len() + 2);
    let opening = window.iter().rev().find(|s| s.t <= t_start + SLACK).unwrap_or(&window[0]);
    knots.push((t_start, *opening));
    for s in window.iter().filter(|s| s.t > t_start + SLACK && s.t <= t_end + SLACK) {
        knots.push((s.t.min(t_end), *s));
    }
    if knots.last().map(|k| k.0 < t_end - SLACK).unwrap_or(true) {
        let held = *window.iter().rev().find(|s| s.t <= t_end + SLACK).unwrap_or(&window[0]);
        knots.push((t_end, held));
    }
    // snap the final knot so the trace ends exactly at t_end
    if let Some(last) = knots.last_mut() {
        last.0 = t_end;
    }

    for pair in knots.windows(2) {
        let gap = pair[1].0 - pair[0].0;
        if gap > cfg.max_gap {
            return Err(LioError::ImuDropout { at: pair[0].0, gap, max: cfg.max_gap });
        }
    }

    let mut state = *x;
    let mut cov = *p;
    let mut trace = vec![(t_start, state.pose())];
    for pair in knots.windows(2) {
        let (t0, s0) = pair[0];
        let (t1, s1) = pair[1];
        let span = t1 - t0;
        if span <= 0.0 {
            continue;
        }
        let input = s0.midpoint(&s1);
        let substeps = (span / cfg.max_step).ceil().max(1.0) as usize;
        let dt = span / substeps as f64;
        for k in 0..substeps {
            cov = propagate_covariance(&cov, &state, &input, dt, noise)?;
            state = propagate_state(&state, &input, dt)?;
            let t = if k + 1 == substeps { t1 } else { t0 + dt * (k + 1) as f64 };
            trace.push((t, state.pose()));
        }
    }

    let prior = PosePrior::from_state(&state, &cov);
    Ok(Prediction { state, covariance: cov, prior, trace: MotionTrace::new(trace)? })
}
