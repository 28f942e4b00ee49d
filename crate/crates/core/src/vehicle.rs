//! Rigid-body translational and rotational dynamics with Z-Y-X Euler
//! attitude, plus the static longitudinal load of the body itself.
//!
//! Axes: body x forward, y starboard, z down; inertial z down, so altitude
//! is -z. Euler angles are (roll, pitch, yaw) applied yaw-first.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Pitch magnitude at which Euler-rate extraction refuses to continue [deg].
pub const PITCH_GUARD_DEG: f64 = 88.0;

/// Mass, inertia, and local gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Inertia tensor about the centre of mass, body axes [kg m^2].
    pub inertia: Matrix3<f64>,
    /// Cached inverse of the inertia tensor.
    inertia_inv: Matrix3<f64>,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
}

impl MassProperties {
    pub fn new(mass: f64, inertia: Matrix3<f64>, gravity: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid(format!(
                "mass must be finite and > 0, got {mass}"
            )));
        }
        if !(gravity.is_finite() && gravity >= 0.0) {
            return Err(Error::invalid(format!(
                "gravity must be finite and >= 0, got {gravity}"
            )));
        }
        if inertia.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("inertia tensor must be finite"));
        }
        if (inertia - inertia.transpose()).amax() > 1e-12 * (1.0 + inertia.amax()) {
            return Err(Error::invalid("inertia tensor must be symmetric"));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::invalid("inertia tensor must be invertible"))?;
        Ok(MassProperties {
            mass,
            inertia,
            inertia_inv,
            gravity,
        })
    }
}

/// Twelve-state rigid-body configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidBodyState {
    /// Velocity of the centre of mass, body axes [m/s].
    pub velocity: Vector3<f64>,
    /// Angular velocity (p, q, r), body axes [rad/s].
    pub omega: Vector3<f64>,
    /// Euler angles (roll, pitch, yaw) [rad].
    pub euler: Vector3<f64>,
    /// Position in the inertial frame [m]; altitude is -z.
    pub position: Vector3<f64>,
}

/// Inertial-to-body direction cosine matrix for Z-Y-X Euler angles.
pub fn euler_dcm(euler: Vector3<f64>) -> Matrix3<f64> {
    let (sphi, cphi) = euler.x.sin_cos();
    let (sth, cth) = euler.y.sin_cos();
    let (spsi, cpsi) = euler.z.sin_cos();
    Matrix3::new(
        cth * cpsi,
        cth * spsi,
        -sth,
        sphi * sth * cpsi - cphi * spsi,
        sphi * sth * spsi + cphi * cpsi,
        sphi * cth,
        cphi * sth * cpsi + sphi * spsi,
        cphi * sth * spsi - sphi * cpsi,
        cphi * cth,
    )
}

/// Weight resolved into body axes.
pub fn gravity_in_body(mp: &MassProperties, euler: Vector3<f64>) -> Vector3<f64> {
    euler_dcm(euler) * Vector3::new(0.0, 0.0, mp.mass * mp.gravity)
}

/// Acceleration of the centre of mass in body axes given the total external
/// force (aerodynamic plus gravity) in body axes.
pub fn translational_derivative(
    mp: &MassProperties,
    state: &RigidBodyState,
    total_force: Vector3<f64>,
) -> Vector3<f64> {
    total_force / mp.mass - state.omega.cross(&state.velocity)
}

/// Angular acceleration in body axes given the total external moment.
pub fn rotational_derivative(
    mp: &MassProperties,
    state: &RigidBodyState,
    total_moment: Vector3<f64>,
) -> Vector3<f64> {
    mp.inertia_inv * (total_moment - state.omega.cross(&(mp.inertia * state.omega)))
}

/// Euler-angle rates from the body angular velocity. Fails inside the
/// pitch singularity guard band.
pub fn euler_rates(state: &RigidBodyState) -> Result<Vector3<f64>> {
    let pitch_deg = state.euler.y.to_degrees();
    if pitch_deg.abs() >= PITCH_GUARD_DEG {
        return Err(Error::GimbalLock { pitch_deg });
    }
    let (sphi, cphi) = state.euler.x.sin_cos();
    let tth = state.euler.y.tan();
    let cth = state.euler.y.cos();
    let (p, q, r) = (state.omega.x, state.omega.y, state.omega.z);
    Ok(Vector3::new(
        p + q * sphi * tth + r * cphi * tth,
        q * cphi - r * sphi,
        (q * sphi + r * cphi) / cth,
    ))
}

/// Inertial position rate: body velocity carried through the attitude.
pub fn position_derivative(state: &RigidBodyState) -> Vector3<f64> {
    euler_dcm(state.euler).transpose() * state.velocity
}

/// Static longitudinal aerodynamics of the body alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyAero {
    /// Reference area [m^2].
    pub s_ref: f64,
    /// Reference chord [m].
    pub c_ref: f64,
    /// Pitching-moment coefficient at zero body angle of attack.
    pub pitch0: f64,
    /// Pitching-moment slope per radian.
    pub pitch_alpha: f64,
}

impl BodyAero {
    pub fn new(s_ref: f64, c_ref: f64, pitch0: f64, pitch_alpha: f64) -> Result<Self> {
        for (name, v) in [("reference area", s_ref), ("reference chord", c_ref)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !(pitch0.is_finite() && pitch_alpha.is_finite()) {
            return Err(Error::invalid("body moment coefficients must be finite"));
        }
        Ok(BodyAero {
            s_ref,
            c_ref,
            pitch0,
            pitch_alpha,
        })
    }
}

/// Body angle of attack from the body-frame velocity [rad].
pub fn body_alpha(v_body: Vector3<f64>) -> f64 {
    v_body.z.atan2(v_body.x)
}

/// Static pitching moment of the body, body axes [N m]. Zero at rest.
pub fn body_pitch_moment(ba: &BodyAero, air_density: f64, v_body: Vector3<f64>) -> Vector3<f64> {
    let q_bar = 0.5 * air_density * v_body.norm_squared();
    let coeff = ba.pitch0 + ba.pitch_alpha * body_alpha(v_body);
    Vector3::new(0.0, q_bar * ba.s_ref * ba.c_ref * coeff, 0.0)
}
