use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};
use crate::lie::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Static,
    ConstantVelocity,
    LineWithYaw,
    FigureEight,
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Static => "static",
            TrajectoryKind::ConstantVelocity => "constant_velocity",
            TrajectoryKind::LineWithYaw => "line_with_yaw",
            TrajectoryKind::FigureEight => "figure_eight",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrajectoryKind {
    type Err = LioError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "static" => TrajectoryKind::Static,
            "constant_velocity" => TrajectoryKind::ConstantVelocity,
            "line_with_yaw" => TrajectoryKind::LineWithYaw,
            "figure_eight" => TrajectoryKind::FigureEight,
            other => return Err(LioError::Config(format!("unknown trajectory kind `{other}`"))),
        })
    }
}

/// Continuous-time body (IMU) trajectory. All motion is planar with yaw
/// about world z; the start pose is `(Rz(yaw0), origin)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub duration: f64,
    /// IMU sample rate in Hz.
    pub rate: f64,
    pub origin: Vector3<f64>,
    pub yaw0: f64,
    /// World-frame velocity for the linear kinds.
    pub velocity: Vector3<f64>,
    /// rad/s for `line_with_yaw`.
    pub yaw_rate: f64,
    /// Figure-eight half-width in meters.
    pub amplitude: f64,
    /// Figure-eight loop period in seconds.
    pub period: f64,
    /// Figure-eight yaw swing in radians.
    pub yaw_amplitude: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Static,
            duration: 10.0,
            rate: 200.0,
            origin: Vector3::zeros(),
            yaw0: 0.0,
            velocity: Vector3::zeros(),
            yaw_rate: 0.0,
            amplitude: 3.0,
            period: 20.0,
            yaw_amplitude: 0.5,
        }
    }
}

/// Exact kinematics at one instant. `angular_velocity` is in the body
/// frame, `velocity` and `acceleration` in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub pose: Pose,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl TrajectorySpec {
    pub fn with_kind(kind: TrajectoryKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(LioError::Config(format!("trajectory duration must be positive, got {}", self.duration)));
        }
        if !(self.rate >= 100.0) || !self.rate.is_finite() {
            return Err(LioError::Config(format!("trajectory rate must be at least 100 Hz, got {}", self.rate)));
        }
        if self.kind == TrajectoryKind::FigureEight && !(self.period > 0.0) {
            return Err(LioError::Config("figure-eight period must be positive".into()));
        }
        let finite = [self.yaw0, self.yaw_rate, self.amplitude, self.yaw_amplitude]
            .iter()
            .chain(self.origin.iter())
            .chain(self.velocity.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(LioError::Config("trajectory parameters must be finite".into()));
        }
        Ok(())
    }

    /// Analytic pose, velocity, body rate and acceleration at `t`.
    pub fn sample(&self, t: f64) -> Result<Kinematics> {
        const SLACK: f64 = 1e-9;
        if !(t >= -SLACK && t <= self.duration + SLACK) {
            return Err(LioError::OutOfRange { t, start: 0.0, end: self.duration });
        }
        let (offset, velocity, acceleration, yaw, yaw_rate) = match self.kind {
            TrajectoryKind::Static => (Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), 0.0, 0.0),
            TrajectoryKind::ConstantVelocity => (self.velocity * t, self.velocity, Vector3::zeros(), 0.0, 0.0),
            TrajectoryKind::LineWithYaw => (self.velocity * t, self.velocity, Vector3::zeros(), self.yaw_rate * t, self.yaw_rate),
            TrajectoryKind::FigureEight => {
                let w = 2.0 * std::f64::consts::PI / self.period;
                let a = self.amplitude;
                let (s1, c1) = (w * t).sin_cos();
                let (s2, c2) = (2.0 * w * t).sin_cos();
                (
                    Vector3::new(a * s1, 0.5 * a * s2, 0.0),
                    Vector3::new(a * w * c1, a * w * c2, 0.0),
                    Vector3::new(-a * w * w * s1, -2.0 * a * w * w * s2, 0.0),
                    self.yaw_amplitude * s1,
                    self.yaw_amplitude * w * c1,
                )
            }
        };
        let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw0 + yaw);
        Ok(Kinematics {
            pose: Pose::new(rotation, self.origin + offset),
            velocity,
            angular_velocity: Vector3::new(0.0, 0.0, yaw_rate),
            acceleration,
        })
    }

    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        self.sample(t).map(|k| k.pose)
    }
}

pub fn sample_trajectory(spec: &TrajectorySpec, t: f64) -> Result<Kinematics> {
    spec.sample(t)
}
