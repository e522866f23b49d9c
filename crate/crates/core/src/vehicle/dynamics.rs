use nalgebra::{Matrix3, Vector3};

use super::{hat, ControlInput, VehicleError, VehicleParams, VehicleState};

#[derive(Clone, Copy)]
struct Derivative {
    dp: Vector3<f64>,
    dv: Vector3<f64>,
    dr: Matrix3<f64>,
    dw: Vector3<f64>,
}

fn derivative(s: &VehicleState, input: &ControlInput, params: &VehicleParams, j_inv: &Matrix3<f64>) -> Derivative {
    let e3 = Vector3::z();
    let m = params.mass;
    let force = s.rotation * e3 * input.thrust - e3 * (m * params.gravity);
    let jw = params.inertia * s.omega;
    Derivative {
        dp: s.velocity,
        dv: force / m,
        dr: s.rotation * hat(&s.omega),
        dw: j_inv * (input.moment - s.omega.cross(&jw)),
    }
}

fn offset(s: &VehicleState, d: &Derivative, h: f64) -> VehicleState {
    VehicleState {
        position: s.position + d.dp * h,
        velocity: s.velocity + d.dv * h,
        rotation: s.rotation + d.dr * h,
        omega: s.omega + d.dw * h,
    }
}

/// Pulls `r` back onto SO(3) with Newton–Schulz polar iterations. An exactly
/// orthonormal input is returned unchanged.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let mut r = *r;
    for _ in 0..2 {
        let rtr = r.transpose() * r;
        if rtr == Matrix3::identity() {
            break;
        }
        r = r * (Matrix3::identity() * 3.0 - rtr) * 0.5;
    }
    r
}

/// One classical Runge–Kutta step of the rigid-body equations
/// `ṗ = v`, `m v̇ = f R e3 − m g e3`, `Ṙ = R ω̂`, `J ω̇ = M − ω × Jω`.
pub fn step_dynamics(
    state: &VehicleState,
    input: &ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, VehicleError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(VehicleError::InvalidTimestep(dt));
    }
    let j_inv = params
        .inertia
        .try_inverse()
        .ok_or_else(|| VehicleError::InvalidParams("singular inertia".into()))?;
    let k1 = derivative(state, input, params, &j_inv);
    let k2 = derivative(&offset(state, &k1, dt / 2.0), input, params, &j_inv);
    let k3 = derivative(&offset(state, &k2, dt / 2.0), input, params, &j_inv);
    let k4 = derivative(&offset(state, &k3, dt), input, params, &j_inv);
    let w = dt / 6.0;
    Ok(VehicleState {
        position: state.position + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * w,
        velocity: state.velocity + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * w,
        rotation: orthonormalize(&(state.rotation + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * w)),
        omega: state.omega + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * w,
    })
}
