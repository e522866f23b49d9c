use nalgebra::{Matrix3, Vector3};

use super::{vee, ControlInput, FlatTarget, VehicleError, VehicleParams, VehicleState};

/// Controller output with the intermediate thrust vector kept for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub input: ControlInput,
    /// `m a_d + k_p e_p + k_v e_v + m g e3` before normalization.
    pub thrust_vector: Vector3<f64>,
    /// Unit desired body z axis.
    pub thrust_direction: Vector3<f64>,
    pub desired_rotation: Matrix3<f64>,
}

/// Geometric tracking law with zero attitude feedforward (`ω_d = 0`).
///
/// Errors are desired minus current: `e_p = p_d − p`, `e_v = v_d − v`.
pub fn geometric_control(
    state: &VehicleState,
    target: &FlatTarget,
    params: &VehicleParams,
) -> Result<ControlOutput, VehicleError> {
    let e3 = Vector3::z();
    let m = params.mass;
    let e_p = target.position - state.position;
    let e_v = target.velocity - state.velocity;
    let thrust_vector = target.acceleration * m + e_p * params.k_p + e_v * params.k_v + e3 * (m * params.gravity);
    let norm = thrust_vector.norm();
    if !(norm >= 1e-9) {
        return Err(VehicleError::DegenerateThrust);
    }
    let b3 = thrust_vector / norm;

    let heading = Vector3::new(target.yaw.cos(), target.yaw.sin(), 0.0);
    let b2 = b3.cross(&heading);
    let b2_norm = b2.norm();
    if b2_norm < 1e-9 {
        return Err(VehicleError::DegenerateHeading);
    }
    let b2 = b2 / b2_norm;
    let b1 = b2.cross(&b3);
    let r_d = Matrix3::from_columns(&[b1, b2, b3]);

    let r = &state.rotation;
    let e_r = vee(&(r_d.transpose() * r - r.transpose() * r_d)) * 0.5;
    let e_omega = state.omega;
    let moment = -e_r * params.k_r - e_omega * params.k_omega + state.omega.cross(&(params.inertia * state.omega));
    let thrust = thrust_vector.dot(&(r * e3)).max(0.0);

    Ok(ControlOutput {
        input: ControlInput { thrust, moment },
        thrust_vector,
        thrust_direction: b3,
        desired_rotation: r_d,
    })
}
