//! Quasi-steady blade-element aerodynamics.
//!
//! Strip coefficients follow the flat-plate fit
//!
//! ```text
//! C_L = 0.225 + 1.58 sin(2.13 a - 7.2 deg)
//! C_D = 1.92 - 1.55 cos(2.04 a - 9.82 deg)
//! ```
//!
//! with the angle of attack `a` in degrees inside the trig arguments. Each
//! strip carries translational lift and drag plus a rotational-circulation
//! lift term; strip forces are resolved in the wing frame and summed with a
//! midpoint rule over uniform spanwise strips, in ascending radius order so
//! the result is bit-reproducible.

use crate::error::{Error, Result};
use crate::kinematics::{
    blade_wind_velocity, chord_to_wing, local_flow, side_offset, wing_to_body, FlowSample,
    JointAngles, JointRates, StrokeFrame, WingGeometry, WingSide,
};
use nalgebra::Vector3;

/// Source of the pitching-rate term in the rotational lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaRateMode {
    /// Use the chord pitch rate directly (the flow-angle rate is neglected).
    #[default]
    PitchRate,
    /// Differentiate the full angle of attack, with the flow-angle rate
    /// obtained from the kinematic chain by central differences.
    FlowDerivative,
}

/// Fluid and strip-coefficient parameters shared by both wings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroModel {
    /// Air density [kg/m^3].
    pub air_density: f64,
    /// Chordwise rotation-axis location as a chord fraction, 0 = leading edge.
    pub rot_center: f64,
    /// Strip rolling-moment coefficient about the chord axis.
    pub roll0: f64,
    /// Strip pitching-moment coefficient at zero angle of attack.
    pub pitch0: f64,
    /// Strip pitching-moment slope per radian of angle of attack.
    pub pitch_alpha: f64,
    /// Strip yawing-moment coefficient.
    pub yaw0: f64,
    /// How the rotational-lift pitching rate is obtained.
    pub alpha_rate: AlphaRateMode,
}

impl AeroModel {
    pub fn new(
        air_density: f64,
        rot_center: f64,
        roll0: f64,
        pitch0: f64,
        pitch_alpha: f64,
        yaw0: f64,
        alpha_rate: AlphaRateMode,
    ) -> Result<Self> {
        if !(air_density.is_finite() && air_density > 0.0) {
            return Err(Error::invalid(format!(
                "air density must be finite and > 0, got {air_density}"
            )));
        }
        if !(rot_center.is_finite() && (0.0..=1.0).contains(&rot_center)) {
            return Err(Error::invalid(format!(
                "rotation centre must lie in [0, 1] chord fractions, got {rot_center}"
            )));
        }
        for (name, v) in [
            ("roll0", roll0),
            ("pitch0", pitch0),
            ("pitch_alpha", pitch_alpha),
            ("yaw0", yaw0),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(AeroModel {
            air_density,
            rot_center,
            roll0,
            pitch0,
            pitch_alpha,
            yaw0,
            alpha_rate,
        })
    }
}

/// Translational lift and drag coefficients of a strip at angle of attack
/// `alpha` [rad].
pub fn lift_drag_coefficients(alpha: f64) -> (f64, f64) {
    let a_deg = alpha.to_degrees();
    let cl = 0.225 + 1.58 * (2.13 * a_deg - 7.2).to_radians().sin();
    let cd = 1.92 - 1.55 * (2.04 * a_deg - 9.82).to_radians().cos();
    (cl, cd)
}

/// Per-strip load magnitudes [N].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StripLoads {
    pub lift: f64,
    pub drag: f64,
    pub rotational: f64,
}

/// Loads on one strip of width `width` from its flow sample and pitching
/// rate. A degenerate flow produces zero loads.
pub fn strip_loads(
    model: &AeroModel,
    geom: &WingGeometry,
    flow: &FlowSample,
    alpha_rate: f64,
) -> StripLoads {
    if flow.degenerate {
        return StripLoads::default();
    }
    let (cl, cd) = lift_drag_coefficients(flow.alpha);
    let q_area = 0.5 * model.air_density * geom.chord * flow.speed * flow.speed * geom.strip_width;
    let rot_coeff = std::f64::consts::TAU * (0.75 - model.rot_center);
    let rotational = 0.5
        * model.air_density
        * rot_coeff
        * geom.chord
        * geom.chord
        * flow.speed
        * alpha_rate
        * geom.strip_width;
    StripLoads {
        lift: cl * q_area,
        drag: cd * q_area,
        rotational,
    }
}

/// Integrated loads of one wing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingLoads {
    /// Wing-frame force (chordwise, 0, normal) [N].
    pub force_wing: Vector3<f64>,
    /// The same force in body coordinates [N].
    pub force_body: Vector3<f64>,
    /// Moment about the centre of mass, body coordinates [N m].
    pub moment_body: Vector3<f64>,
}

/// Step used for the central-difference flow-angle rate [s].
const FLOW_RATE_STEP: f64 = 1e-5;

fn flow_at(
    frame: &StrokeFrame,
    side: WingSide,
    joints: &JointAngles,
    rates: &JointRates,
    v_body: Vector3<f64>,
    omega_body: Vector3<f64>,
    r: f64,
) -> Result<FlowSample> {
    let v = blade_wind_velocity(frame, side, joints, rates, v_body, omega_body, r)?;
    Ok(local_flow(v, joints.pitch))
}

/// Angle-of-attack rate for the rotational-lift term at radius `r`.
#[allow(clippy::too_many_arguments)]
fn alpha_rate_at(
    model: &AeroModel,
    frame: &StrokeFrame,
    side: WingSide,
    joints: &JointAngles,
    rates: &JointRates,
    v_body: Vector3<f64>,
    omega_body: Vector3<f64>,
    r: f64,
) -> Result<f64> {
    match model.alpha_rate {
        AlphaRateMode::PitchRate => Ok(rates.pitch),
        AlphaRateMode::FlowDerivative => {
            let advance = |dt: f64| JointAngles {
                flap: joints.flap + dt * rates.flap,
                pitch: joints.pitch + dt * rates.pitch,
                sweep: joints.sweep + dt * rates.sweep,
            };
            let fwd = flow_at(
                frame,
                side,
                &advance(FLOW_RATE_STEP),
                rates,
                v_body,
                omega_body,
                r,
            )?;
            let back = flow_at(
                frame,
                side,
                &advance(-FLOW_RATE_STEP),
                rates,
                v_body,
                omega_body,
                r,
            )?;
            if fwd.degenerate || back.degenerate {
                // The flow direction is not differentiable through a stop;
                // fall back to the pitch rate alone.
                return Ok(rates.pitch);
            }
            let beta_rate = (fwd.inclination - back.inclination) / (2.0 * FLOW_RATE_STEP);
            Ok(rates.pitch - beta_rate)
        }
    }
}

/// Integrates strip loads over one wing: forces in the wing and body frames
/// and the moment about the centre of mass, including the strip
/// coefficient-based moments expressed in the pitched chord frame.
#[allow(clippy::too_many_arguments)]
pub fn integrate_wing(
    geom: &WingGeometry,
    frame: &StrokeFrame,
    model: &AeroModel,
    side: WingSide,
    joints: &JointAngles,
    rates: &JointRates,
    v_body: Vector3<f64>,
    omega_body: Vector3<f64>,
) -> Result<WingLoads> {
    let n = geom.strip_count();
    let dr = geom.span / n as f64;
    let strip_geom = WingGeometry {
        strip_width: dr,
        ..*geom
    };
    let r_wb = wing_to_body(frame, side, joints);
    let chord_rot = r_wb * chord_to_wing(joints.pitch);
    let d = side_offset(frame, side);
    let s = side.sign();

    let mut force_wing = Vector3::zeros();
    let mut moment_body = Vector3::zeros();
    for k in 0..n {
        let r = (k as f64 + 0.5) * dr;
        let flow = flow_at(frame, side, joints, rates, v_body, omega_body, r)?;
        let a_rate = alpha_rate_at(model, frame, side, joints, rates, v_body, omega_body, r)?;
        let loads = strip_loads(model, &strip_geom, &flow, a_rate);
        let (sb, cb) = flow.inclination.sin_cos();
        let df = Vector3::new(
            -(loads.lift + loads.rotational) * sb - loads.drag * cb,
            0.0,
            loads.drag * sb - (loads.lift + loads.rotational) * cb,
        );
        force_wing += df;

        let lever = r_wb * Vector3::new(0.0, s * r, 0.0) + d;
        moment_body += lever.cross(&(r_wb * df));
        if !flow.degenerate {
            let q_strip = 0.5 * model.air_density * flow.speed * flow.speed * geom.chord * dr;
            let coeff = Vector3::new(
                s * r * model.roll0,
                geom.chord * (model.pitch0 + model.pitch_alpha * flow.alpha),
                s * r * model.yaw0,
            );
            moment_body += chord_rot * (q_strip * coeff);
        }
    }

    let loads = WingLoads {
        force_wing,
        force_body: r_wb * force_wing,
        moment_body,
    };
    for v in [loads.force_wing, loads.force_body, loads.moment_body] {
        if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            return Err(Error::invalid("non-finite wing loads"));
        }
    }
    Ok(loads)
}
