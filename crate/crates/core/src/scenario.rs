//! Scenario files: a TOML schema describing an oscillator network, wing
//! and vehicle configuration, control gains, and run options, plus the
//! conversion into an engine [`SimSetup`].
//!
//! Angles are written in degrees in scenario files and converted to
//! radians here; node indices in the `[topology]` section are 1-based.
//! Unknown keys anywhere in the file are rejected.

use crate::aero::{AeroModel, AlphaRateMode};
use crate::control::{ControlGains, FlightMode, PidGains, SwitchThresholds};
use crate::engine::{
    ControlSetup, CpgDrive, EventAction, SimSetup, TimedEvent, VehicleSetup, WingSetup,
};
use crate::error::{Error, Result};
use crate::kinematics::{StrokeFrame, WingGeometry};
use crate::oscillator::{Bifurcation, HopfParams};
use crate::topology::{Edge, NetworkTopology};
use crate::vehicle::{BodyAero, MassProperties, RigidBodyState};
use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

/// Parses scenario text. Syntax errors and unknown keys are reported with
/// the location information the TOML parser provides.
pub fn parse(text: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
}

/// Top-level scenario document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Free-form scenario name, echoed into output preambles.
    #[serde(default)]
    pub name: Option<String>,
    pub oscillators: OscillatorsSpec,
    pub topology: TopologySpec,
    #[serde(default)]
    pub wing: Option<WingSpec>,
    #[serde(default)]
    pub aero: Option<AeroSpec>,
    #[serde(default)]
    pub vehicle: Option<VehicleSpec>,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    pub sim: SimSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub cpg_drive: Option<DriveSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorsSpec {
    /// Limit-cycle attraction gain [1/s].
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Attraction gain used while gliding [1/s].
    #[serde(default = "default_glide_lambda")]
    pub glide_lambda: f64,
    /// Initial angular frequency [rad/s].
    #[serde(default = "default_omega0")]
    pub omega0_radps: f64,
    /// Per-node amplitudes [deg]; length must match the node count.
    pub rho_deg: Vec<f64>,
    /// Per-node joint biases [deg]; defaults to all zero.
    #[serde(default)]
    pub bias_deg: Option<Vec<f64>>,
    /// Initial bifurcation branch: +1 oscillate, -1 inhibit.
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
}

fn default_lambda() -> f64 {
    10.0
}
fn default_glide_lambda() -> f64 {
    30.0
}
fn default_omega0() -> f64 {
    25.0
}
fn default_sigma0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Diffusive coupling gain.
    pub gain: f64,
    pub edges: Vec<EdgeSpec>,
}

/// Directed edge `to <- from` with phase offset, 1-based node ids.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub to: usize,
    pub from: usize,
    pub delta_deg: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingSpec {
    pub span_m: f64,
    pub chord_m: f64,
    #[serde(default = "default_strip_width")]
    pub strip_width_m: f64,
    /// Stroke-plane tilt, nose-up positive [deg].
    #[serde(default)]
    pub stroke_tilt_deg: f64,
    /// Right-wing root offset from the centre of mass [m]; the left wing
    /// mirrors the lateral component.
    #[serde(default)]
    pub offset_m: [f64; 3],
}

fn default_strip_width() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeroSpec {
    pub air_density_kgpm3: f64,
    /// Chordwise pitching-axis location as a fraction of chord.
    pub rotation_center: f64,
    /// Strip moment coefficients.
    pub roll0: f64,
    pub pitch0: f64,
    pub pitch_alpha: f64,
    pub yaw0: f64,
    /// "pitch-rate" or "flow-derivative".
    pub alpha_rate_mode: AlphaRateName,
}

impl Default for AeroSpec {
    fn default() -> Self {
        AeroSpec {
            air_density_kgpm3: 1.225,
            rotation_center: 0.25,
            roll0: 0.0,
            pitch0: 0.0,
            pitch_alpha: 0.0,
            yaw0: 0.0,
            alpha_rate_mode: AlphaRateName::PitchRate,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRateName {
    PitchRate,
    FlowDerivative,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub mass_kg: f64,
    /// Inertia [kg m^2]: three values for a diagonal tensor or nine
    /// row-major values for a full one.
    pub inertia_kgm2: Vec<f64>,
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
    /// Bare-body pitching-moment model.
    #[serde(default)]
    pub body_moment: Option<BodyMomentSpec>,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyMomentSpec {
    pub s_ref_m2: f64,
    pub c_ref_m: f64,
    pub pitch0: f64,
    pub pitch_alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub k_omega: f64,
    pub v_x_desired_mps: f64,
    #[serde(default = "default_omega_min")]
    pub omega_min_radps: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max_radps: f64,
    pub k_sweep_phase: f64,
    #[serde(default = "default_sweep_phase_base")]
    pub sweep_phase_base_deg: f64,
    /// Saturation window for the commanded sweep phase; omit either bound
    /// to leave that side unclamped.
    #[serde(default)]
    pub sweep_phase_min_deg: Option<f64>,
    #[serde(default)]
    pub sweep_phase_max_deg: Option<f64>,
    pub k_roll: f64,
    #[serde(default = "default_rho_min")]
    pub rho_min_deg: f64,
    #[serde(default)]
    pub delta_offset_deg: f64,
    #[serde(default)]
    pub delta_offset_enabled: bool,
    #[serde(default)]
    pub pitch_bias_ki: f64,
    #[serde(default)]
    pub glide_sweep: PidSpec,
    #[serde(default)]
    pub glide_flap: PidSpec,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    #[serde(default = "default_initial_mode")]
    pub initial_mode: ModeName,
}

fn default_omega_min() -> f64 {
    1.0
}
fn default_omega_max() -> f64 {
    80.0
}
fn default_sweep_phase_base() -> f64 {
    -180.0
}
fn default_rho_min() -> f64 {
    1.0
}
fn default_initial_mode() -> ModeName {
    ModeName::Flap
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Flap,
    Glide,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidSpec {
    pub kp: f64,
    pub kd: f64,
    pub ki: f64,
    pub bias_deg: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSpec {
    pub glide_entry_altitude_m: f64,
    pub glide_entry_speed_mps: f64,
    pub flap_entry_altitude_m: f64,
    pub flap_entry_speed_mps: f64,
    pub dwell_s: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec {
            glide_entry_altitude_m: 10.0,
            glide_entry_speed_mps: 5.0,
            flap_entry_altitude_m: 5.0,
            flap_entry_speed_mps: 3.0,
            dwell_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Integrate the rigid body; defaults to "vehicle section present".
    #[serde(default)]
    pub dynamics: Option<bool>,
    /// Evaluate wing aerodynamics; defaults to "wing section present".
    #[serde(default)]
    pub aero: Option<bool>,
    /// Freeze the body regardless of `dynamics` (wind-tunnel runs).
    #[serde(default)]
    pub pin_body: bool,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    /// Oscillator outputs [deg]; both arrays or neither.
    pub cpg_u_deg: Option<Vec<f64>>,
    pub cpg_v_deg: Option<Vec<f64>>,
    pub velocity_mps: [f64; 3],
    pub omega_body_dps: [f64; 3],
    pub euler_deg: [f64; 3],
    pub position_m: [f64; 3],
}

/// One timed action; exactly one of the action fields must be set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time_s: f64,
    #[serde(default)]
    pub set_bank_deg: Option<f64>,
    #[serde(default)]
    pub set_desired_speed_mps: Option<f64>,
    #[serde(default)]
    pub set_delta_offset_deg: Option<f64>,
    #[serde(default)]
    pub hold_frequency: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub base_deg: f64,
    pub amplitude_deg: f64,
    pub frequency_radps: f64,
    #[serde(default = "default_true")]
    pub correction: bool,
}

fn default_true() -> bool {
    true
}

impl ScenarioFile {
    /// Converts the parsed document into an engine setup: unit
    /// conversions, 1-based to 0-based indices, defaults, and the
    /// document-level consistency checks.
    pub fn build(&self) -> Result<SimSetup> {
        let edges = self
            .topology
            .edges
            .iter()
            .map(|e| {
                if e.to == 0 || e.from == 0 {
                    return Err(Error::Scenario(format!(
                        "topology edge ({} <- {}): node ids are 1-based",
                        e.to, e.from
                    )));
                }
                Ok(Edge::new(e.to - 1, e.from - 1, e.delta_deg.to_radians()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = edges
            .iter()
            .flat_map(|e| [e.to, e.from])
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        let topology = NetworkTopology::new(n, edges, self.topology.gain)?;

        let osc = &self.oscillators;
        if osc.rho_deg.len() != n {
            return Err(Error::Scenario(format!(
                "rho_deg has {} entries but the topology spans {} nodes",
                osc.rho_deg.len(),
                n
            )));
        }
        let biases = match &osc.bias_deg {
            Some(b) => {
                if b.len() != n {
                    return Err(Error::Scenario(format!(
                        "bias_deg has {} entries but the topology spans {} nodes",
                        b.len(),
                        n
                    )));
                }
                b.clone()
            }
            None => vec![0.0; n],
        };
        let sigma = Bifurcation::from_value(osc.sigma0)?;
        let params = osc
            .rho_deg
            .iter()
            .zip(&biases)
            .map(|(rho, bias)| {
                HopfParams::new(
                    osc.lambda,
                    rho.to_radians(),
                    bias.to_radians(),
                    osc.omega0_radps,
                    sigma,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let wing = match &self.wing {
            Some(w) => {
                let aero = self.aero.clone().unwrap_or_default();
                Some(WingSetup {
                    geometry: WingGeometry::new(w.span_m, w.chord_m, w.strip_width_m)?,
                    frame: StrokeFrame {
                        tilt: w.stroke_tilt_deg.to_radians(),
                        offset: Vector3::new(w.offset_m[0], w.offset_m[1], w.offset_m[2]),
                    },
                    model: AeroModel::new(
                        aero.air_density_kgpm3,
                        aero.rotation_center,
                        aero.roll0,
                        aero.pitch0,
                        aero.pitch_alpha,
                        aero.yaw0,
                        match aero.alpha_rate_mode {
                            AlphaRateName::PitchRate => AlphaRateMode::PitchRate,
                            AlphaRateName::FlowDerivative => AlphaRateMode::FlowDerivative,
                        },
                    )?,
                })
            }
            None => {
                if self.aero.is_some() {
                    return Err(Error::Scenario(
                        "an [aero] section requires a [wing] section".into(),
                    ));
                }
                None
            }
        };

        let vehicle = match &self.vehicle {
            Some(v) => {
                let inertia = match v.inertia_kgm2.len() {
                    3 => Matrix3::from_diagonal(&Vector3::new(
                        v.inertia_kgm2[0],
                        v.inertia_kgm2[1],
                        v.inertia_kgm2[2],
                    )),
                    9 => Matrix3::from_row_slice(&v.inertia_kgm2),
                    k => {
                        return Err(Error::Scenario(format!(
                            "inertia_kgm2 needs 3 (diagonal) or 9 (full) values, got {k}"
                        )))
                    }
                };
                let body_aero = v
                    .body_moment
                    .as_ref()
                    .map(|b| BodyAero::new(b.s_ref_m2, b.c_ref_m, b.pitch0, b.pitch_alpha))
                    .transpose()?;
                Some(VehicleSetup {
                    mass: MassProperties::new(v.mass_kg, inertia, v.gravity_mps2)?,
                    body_aero,
                })
            }
            None => None,
        };

        let (control, initial_mode) = match &self.control {
            Some(c) => {
                let pid = |p: &PidSpec| PidGains {
                    kp: p.kp,
                    kd: p.kd,
                    ki: p.ki,
                    bias: p.bias_deg.to_radians(),
                };
                let gains = ControlGains {
                    k_omega: c.k_omega,
                    v_x_desired: c.v_x_desired_mps,
                    omega_min: c.omega_min_radps,
                    omega_max: c.omega_max_radps,
                    k_sweep_phase: c.k_sweep_phase,
                    sweep_phase_base: c.sweep_phase_base_deg.to_radians(),
                    sweep_phase_min: c
                        .sweep_phase_min_deg
                        .map_or(f64::NEG_INFINITY, f64::to_radians),
                    sweep_phase_max: c.sweep_phase_max_deg.map_or(f64::INFINITY, f64::to_radians),
                    k_roll: c.k_roll,
                    rho_min: c.rho_min_deg.to_radians(),
                    delta_offset: c.delta_offset_deg.to_radians(),
                    delta_offset_enabled: c.delta_offset_enabled,
                    glide_sweep: pid(&c.glide_sweep),
                    glide_flap: pid(&c.glide_flap),
                    pitch_bias_ki: c.pitch_bias_ki,
                };
                let th = c.thresholds;
                let thresholds = SwitchThresholds {
                    glide_entry_altitude: th.glide_entry_altitude_m,
                    glide_entry_speed: th.glide_entry_speed_mps,
                    flap_entry_altitude: th.flap_entry_altitude_m,
                    flap_entry_speed: th.flap_entry_speed_mps,
                    dwell: th.dwell_s,
                };
                let mode = match c.initial_mode {
                    ModeName::Flap => FlightMode::Flapping,
                    ModeName::Glide => FlightMode::Gliding,
                };
                (Some(ControlSetup { gains, thresholds }), mode)
            }
            None => (None, FlightMode::Flapping),
        };

        let initial = self.initial.clone().unwrap_or_default();
        let initial_cpg = match (&initial.cpg_u_deg, &initial.cpg_v_deg) {
            (Some(u), Some(v)) => {
                if u.len() != n || v.len() != n {
                    return Err(Error::Scenario(format!(
                        "cpg_u_deg/cpg_v_deg need {n} entries each"
                    )));
                }
                Some(
                    u.iter()
                        .zip(v)
                        .map(|(a, b)| (a.to_radians(), b.to_radians()))
                        .collect(),
                )
            }
            (None, None) => None,
            _ => {
                return Err(Error::Scenario(
                    "cpg_u_deg and cpg_v_deg must be given together".into(),
                ))
            }
        };
        let initial_body = RigidBodyState {
            velocity: Vector3::from(initial.velocity_mps),
            omega: Vector3::from(initial.omega_body_dps).map(f64::to_radians),
            euler: Vector3::from(initial.euler_deg).map(f64::to_radians),
            position: Vector3::from(initial.position_m),
        };

        let events = self
            .events
            .iter()
            .map(|e| {
                let mut actions: Vec<EventAction> = Vec::new();
                if let Some(v) = e.set_bank_deg {
                    actions.push(EventAction::SetBank(v.to_radians()));
                }
                if let Some(v) = e.set_desired_speed_mps {
                    actions.push(EventAction::SetDesiredSpeed(v));
                }
                if let Some(v) = e.set_delta_offset_deg {
                    actions.push(EventAction::SetDeltaOffset(v.to_radians()));
                }
                if let Some(v) = e.hold_frequency {
                    actions.push(EventAction::HoldFrequency(v));
                }
                match actions.len() {
                    1 => Ok(TimedEvent {
                        time: e.time_s,
                        action: actions[0],
                    }),
                    0 => Err(Error::Scenario(format!(
                        "event at t = {} s has no action",
                        e.time_s
                    ))),
                    _ => Err(Error::Scenario(format!(
                        "event at t = {} s has more than one action",
                        e.time_s
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let drive = self.cpg_drive.as_ref().map(|d| CpgDrive::SweepPhaseSine {
            base: d.base_deg.to_radians(),
            amplitude: d.amplitude_deg.to_radians(),
            frequency: d.frequency_radps,
            correction: d.correction,
        });

        let dynamics = self.sim.dynamics.unwrap_or(self.vehicle.is_some()) && !self.sim.pin_body;
        let aero = self.sim.aero.unwrap_or(self.wing.is_some());

        Ok(SimSetup {
            topology,
            params,
            glide_lambda: osc.glide_lambda,
            wing,
            vehicle,
            control,
            drive,
            events,
            dt: self.sim.dt_s,
            duration: self.sim.duration_s,
            record_stride: self.sim.record_stride,
            dynamics,
            aero,
            initial_cpg,
            initial_body,
            initial_mode,
            preamble: Vec::new(),
        })
    }
}
