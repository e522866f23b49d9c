//! Quadrotor rigid-body model and the geometric tracking controller on SE(3).

mod control;
mod dynamics;
mod tracking;

pub use control::{geometric_control, ControlOutput};
pub use dynamics::{orthonormalize, step_dynamics};
pub use tracking::{follow_exact, track, TickRecord, TrackResult, Tracker, YawMode};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("commanded thrust vector vanishes (free fall requested)")]
    DegenerateThrust,
    #[error("desired heading is parallel to the thrust direction")]
    DegenerateHeading,
    #[error("integration step {0} s outside (0, 0.01]")]
    InvalidTimestep(f64),
    #[error("control rate {0} Hz below 100 Hz")]
    InvalidControlRate(f64),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

/// Position, velocity, body-to-world rotation and body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub omega: Vector3<f64>,
}

impl VehicleState {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            rotation: yaw_rotation(yaw),
            omega: Vector3::zeros(),
        }
    }

    /// Heading of the body x axis projected onto the horizontal plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// `‖RᵀR − I‖_F`.
    pub fn rotation_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }
}

pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Mass, inertia and controller gains.
///
/// Defaults describe a 1.5 kg, 550-class airframe. Translational gains are
/// 16 and 5.6 per kilogram. The attitude gains put the roll/pitch loop near
/// 100 rad/s, fast enough that the 200 Hz loop follows aggressive 0.5 s
/// segments without angular-velocity feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia: Matrix3<f64>,
    pub k_p: f64,
    pub k_v: f64,
    pub k_r: f64,
    pub k_omega: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            gravity: 9.81,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.029, 0.029, 0.055)),
            k_p: 24.0,
            k_v: 8.4,
            k_r: 300.0,
            k_omega: 6.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |m: &str| Err(VehicleError::InvalidParams(m.into()));
        if !(self.mass > 0.0 && self.gravity > 0.0) {
            return bad("mass and gravity must be positive");
        }
        if !(self.k_p > 0.0 && self.k_v > 0.0 && self.k_r > 0.0 && self.k_omega > 0.0) {
            return bad("gains must be positive");
        }
        let j = &self.inertia;
        if (j - j.transpose()).norm() > 1e-12 {
            return bad("inertia must be symmetric");
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        Ok(())
    }
}

/// Collective thrust along body z and body moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub thrust: f64,
    pub moment: Vector3<f64>,
}

impl ControlInput {
    pub fn hover(params: &VehicleParams) -> Self {
        Self {
            thrust: params.mass * params.gravity,
            moment: Vector3::zeros(),
        }
    }
}

/// Desired position, velocity, acceleration and yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTarget {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub yaw: f64,
}

impl FlatTarget {
    pub fn hold(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            yaw,
        }
    }
}

pub(crate) fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub(crate) fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}
