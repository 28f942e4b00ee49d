//! Wing frames, joint transforms, and blade-element flow kinematics.
//!
//! Frames (all right-handed, z down): body (x forward, y starboard), a
//! stroke frame per wing pitched nose-up from the body by the fixed stroke
//! tilt, and a wing frame per wing following the flap and sweep joints. The
//! right blade element sits at (0, r, 0) in its wing frame, the left at
//! (0, -r, 0); the left chain is the mirror image of the right one, so for
//! both wings positive flap raises the wing and positive sweep moves it
//! forward.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Which wing a transform or load refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WingSide {
    Right,
    Left,
}

impl WingSide {
    /// +1 for the right wing, -1 for the left: sign of the spanwise blade
    /// coordinate and of the mirrored joint-rotation components.
    pub fn sign(self) -> f64 {
        match self {
            WingSide::Right => 1.0,
            WingSide::Left => -1.0,
        }
    }
}

/// Fixed placement of a stroke frame on the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeFrame {
    /// Stroke-plane tilt about the body y-axis [rad], nose-up positive.
    pub tilt: f64,
    /// Stroke-frame origin relative to the centre of mass, body frame [m].
    /// The left wing uses the y-mirrored offset.
    pub offset: Vector3<f64>,
}

/// Wing joint angles [rad]: flap raises the wing, pitch rotates the chord
/// leading-edge-up, sweep moves the wing tip forward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub flap: f64,
    pub pitch: f64,
    pub sweep: f64,
}

/// Wing joint rates [rad/s], same axes as [`JointAngles`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointRates {
    pub flap: f64,
    pub pitch: f64,
    pub sweep: f64,
}

/// Wing planform and strip discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingGeometry {
    /// Semi-span of one wing [m].
    pub span: f64,
    /// Chord length [m].
    pub chord: f64,
    /// Spanwise strip width for load integration [m].
    pub strip_width: f64,
}

impl WingGeometry {
    pub fn new(span: f64, chord: f64, strip_width: f64) -> Result<Self> {
        for (name, v) in [
            ("span", span),
            ("chord", chord),
            ("strip width", strip_width),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if strip_width > span {
            return Err(Error::invalid("strip width exceeds the span"));
        }
        Ok(WingGeometry {
            span,
            chord,
            strip_width,
        })
    }

    /// Number of equal-width strips covering the span.
    pub fn strip_count(&self) -> usize {
        ((self.span / self.strip_width).round() as usize).max(1)
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Pitch-up rotation about the y-axis: maps a frame vector into the frame it
/// is pitched from. Used for the stroke tilt, the chord pitch, and nothing
/// else, so the sign convention lives in one place.
pub fn pitch_up(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Stroke-to-body rotation for the given tilt.
pub fn stroke_to_body(tilt: f64) -> Matrix3<f64> {
    pitch_up(tilt)
}

/// Wing-to-stroke rotation from the flap and sweep joints. The right chain
/// is R_z(-sweep) R_x(-flap); the left chain is its y-mirror image,
/// R_z(sweep) R_x(flap).
pub fn wing_to_stroke(side: WingSide, joints: &JointAngles) -> Matrix3<f64> {
    let s = side.sign();
    rot_z(-s * joints.sweep) * rot_x(-s * joints.flap)
}

/// Full wing-to-body rotation.
pub fn wing_to_body(frame: &StrokeFrame, side: WingSide, joints: &JointAngles) -> Matrix3<f64> {
    stroke_to_body(frame.tilt) * wing_to_stroke(side, joints)
}

/// Chord-to-wing rotation for the pitch joint. Identical for both wings
/// (pitching is about the spanwise axis, which the mirror preserves).
pub fn chord_to_wing(pitch: f64) -> Matrix3<f64> {
    pitch_up(pitch)
}

/// Stroke-frame origin offset for a side (left uses the y-mirrored offset).
pub fn side_offset(frame: &StrokeFrame, side: WingSide) -> Vector3<f64> {
    let d = frame.offset;
    Vector3::new(d.x, side.sign() * d.y, d.z)
}

/// Total angular velocity of the wing, stroke-frame components: body rate
/// carried into the stroke frame plus the joint rates. The stroke tilt is
/// fixed, so it contributes no rate of its own.
pub fn total_angular_velocity(
    frame: &StrokeFrame,
    side: WingSide,
    joints: &JointAngles,
    rates: &JointRates,
    omega_body: Vector3<f64>,
) -> Vector3<f64> {
    let s = side.sign();
    let joint_part = Vector3::new(
        -s * joints.sweep.cos() * rates.flap,
        joints.sweep.sin() * rates.flap,
        -s * rates.sweep,
    );
    stroke_to_body(frame.tilt).transpose() * omega_body + joint_part
}

/// Velocity of a blade element relative to the air, wing-frame components.
/// Combines vehicle translation (with the stroke-frame offset lever arm) and
/// the full rotation rate acting on the spanwise blade position. The wing is
/// rigid: no structural deformation terms.
pub fn blade_wind_velocity(
    frame: &StrokeFrame,
    side: WingSide,
    joints: &JointAngles,
    rates: &JointRates,
    v_body: Vector3<f64>,
    omega_body: Vector3<f64>,
    r: f64,
) -> Result<Vector3<f64>> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid(format!(
            "blade radius must be >= 0, got {r}"
        )));
    }
    let t_ws = wing_to_stroke(side, joints).transpose();
    let t_sb = stroke_to_body(frame.tilt).transpose();
    let carried = t_ws * (t_sb * (v_body + omega_body.cross(&side_offset(frame, side))));
    let omega_total = total_angular_velocity(frame, side, joints, rates, omega_body);
    let blade = Vector3::new(0.0, side.sign() * r, 0.0);
    Ok(carried + (t_ws * omega_total).cross(&blade))
}

/// Flow speeds below this are treated as undefined for angle extraction.
pub const DEGENERATE_FLOW_SPEED: f64 = 1e-12;

/// In-plane flow state at a blade element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    /// Chordwise-plane flow speed sqrt(vx^2 + vz^2) [m/s].
    pub speed: f64,
    /// Flow inclination beta = atan2(-vz, vx) [rad].
    pub inclination: f64,
    /// Local angle of attack alpha = pitch - beta [rad].
    pub alpha: f64,
    /// True when the in-plane speed is too small for the angles to mean
    /// anything; loads must be treated as zero.
    pub degenerate: bool,
}

/// Extracts flow angles from a wing-frame wind velocity and the current
/// chord pitch. The spanwise component vy does not enter the strip model.
pub fn local_flow(v_wind: Vector3<f64>, pitch: f64) -> FlowSample {
    let speed = v_wind.x.hypot(v_wind.z);
    let degenerate = speed < DEGENERATE_FLOW_SPEED;
    let inclination = if degenerate {
        0.0
    } else {
        (-v_wind.z).atan2(v_wind.x)
    };
    FlowSample {
        speed,
        inclination,
        alpha: pitch - inclination,
        degenerate,
    }
}

/// Reduced frequency of the flapping motion, flap_rate * chord / (2 v).
pub fn reduced_frequency(flap_rate: f64, chord: f64, v_body: f64) -> Result<f64> {
    if !(v_body.is_finite() && v_body > 0.0) {
        return Err(Error::invalid(format!(
            "reduced frequency needs a positive airspeed, got {v_body}"
        )));
    }
    Ok(flap_rate * chord / (2.0 * v_body))
}
