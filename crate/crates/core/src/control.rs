//! Flight control: joint-pattern laws for flapping, bias laws for gliding,
//! mode switching, and the correction feed that keeps the oscillator network
//! synchronized while its phases and amplitudes are modulated.
//!
//! The laws assume the eight-oscillator double-ring pattern generator:
//! nodes 1-4 drive the right wing (flap, pitch, sweep, spare flap), nodes
//! 5-8 mirror them on the left. Laws producing oscillator parameters are
//! pure functions of the vehicle state; laws that accumulate (frequency,
//! glide integrals) mutate the controller state once per integration step.

use crate::error::{Error, Result};
use crate::oscillator::{Bifurcation, NetworkState};
use crate::topology::CouplingMatrices;
use nalgebra::{DVector, Vector3};

/// Locomotion regime. Flapping runs the oscillators on their limit cycles;
/// gliding collapses them to their bias angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlightMode {
    Flapping,
    Gliding,
}

impl FlightMode {
    /// Bifurcation branch this mode drives the oscillators to.
    pub fn sigma(self) -> Bifurcation {
        match self {
            FlightMode::Flapping => Bifurcation::Oscillate,
            FlightMode::Gliding => Bifurcation::Inhibit,
        }
    }
}

/// Proportional-derivative-integral gains with an output bias [rad].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub kd: f64,
    pub ki: f64,
    pub bias: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        kd: 0.0,
        ki: 0.0,
        bias: 0.0,
    };
}

/// All controller gains and setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    /// Forward-speed error to frequency-rate gain [rad/m].
    pub k_omega: f64,
    /// Desired forward speed [m/s].
    pub v_x_desired: f64,
    /// Frequency clamp [rad/s].
    pub omega_min: f64,
    pub omega_max: f64,
    /// Pitch attitude to sweep-stage phase gain [rad/rad].
    pub k_sweep_phase: f64,
    /// Sweep-stage phase at level attitude [rad].
    pub sweep_phase_base: f64,
    /// Saturation window for the commanded sweep-stage phase [rad].
    /// Outside a band around the base phase the averaged pitching moment
    /// is no longer monotone in the phase, so letting the command run
    /// free would invert the feedback; infinities disable the clamp.
    pub sweep_phase_min: f64,
    pub sweep_phase_max: f64,
    /// Bank error to sweep-amplitude gain [rad/rad].
    pub k_roll: f64,
    /// Smallest amplitude the roll law may command [rad].
    pub rho_min: f64,
    /// Differential pitch-phase offset [rad], applied when enabled.
    pub delta_offset: f64,
    pub delta_offset_enabled: bool,
    /// Glide-mode PID on pitch attitude, output on the sweep bias.
    pub glide_sweep: PidGains,
    /// Glide-mode PID on pitch attitude, output on the flap bias
    /// (its bias term sets the gliding dihedral).
    pub glide_flap: PidGains,
    /// Integral gain feeding the wing pitch bias in glide [1/s].
    pub pitch_bias_ki: f64,
}

impl ControlGains {
    pub fn check(&self) -> Result<()> {
        let fields = [
            ("k_omega", self.k_omega),
            ("v_x_desired", self.v_x_desired),
            ("omega_min", self.omega_min),
            ("omega_max", self.omega_max),
            ("k_sweep_phase", self.k_sweep_phase),
            ("sweep_phase_base", self.sweep_phase_base),
            ("k_roll", self.k_roll),
            ("rho_min", self.rho_min),
            ("delta_offset", self.delta_offset),
            ("pitch_bias_ki", self.pitch_bias_ki),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "control gain {name} must be finite"
                )));
            }
        }
        if self.omega_min <= 0.0 || self.omega_max <= self.omega_min {
            return Err(Error::invalid(
                "frequency clamp must satisfy 0 < omega_min < omega_max",
            ));
        }
        if self.rho_min <= 0.0 {
            return Err(Error::invalid("rho_min must be > 0"));
        }
        // The window bounds may be infinite (clamp disabled) but must not
        // be NaN or inverted.
        if self.sweep_phase_min.is_nan()
            || self.sweep_phase_max.is_nan()
            || self.sweep_phase_min > self.sweep_phase_max
        {
            return Err(Error::invalid("sweep phase window must satisfy min <= max"));
        }
        if !(self.sweep_phase_min..=self.sweep_phase_max).contains(&self.sweep_phase_base) {
            return Err(Error::invalid(
                "sweep phase base must lie inside its saturation window",
            ));
        }
        Ok(())
    }
}

/// Mode-switch thresholds. Hysteresis: flapping exits upward through the
/// high altitude/speed pair, gliding exits downward through the low pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchThresholds {
    /// Altitude above which flapping may hand over to gliding [m].
    pub glide_entry_altitude: f64,
    /// Forward speed required to hand over to gliding [m/s].
    pub glide_entry_speed: f64,
    /// Altitude below which gliding falls back to flapping [m].
    pub flap_entry_altitude: f64,
    /// Forward speed below which gliding falls back to flapping [m/s].
    pub flap_entry_speed: f64,
    /// Minimum time between switches [s].
    pub dwell: f64,
}

impl SwitchThresholds {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("glide_entry_altitude", self.glide_entry_altitude),
            ("glide_entry_speed", self.glide_entry_speed),
            ("flap_entry_altitude", self.flap_entry_altitude),
            ("flap_entry_speed", self.flap_entry_speed),
            ("dwell", self.dwell),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("threshold {name} must be finite")));
            }
        }
        if self.dwell < 0.0 {
            return Err(Error::invalid("dwell must be >= 0"));
        }
        if self.flap_entry_altitude >= self.glide_entry_altitude {
            return Err(Error::invalid(
                "flap entry altitude must sit below glide entry altitude",
            ));
        }
        Ok(())
    }
}

/// Mutable controller memory. Updated once per integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    /// Commanded oscillator frequency [rad/s].
    pub omega: f64,
    /// Integral of pitch attitude while gliding [rad s].
    pub glide_pitch_integral: f64,
    /// Accumulated wing pitch bias while gliding [rad].
    pub pitch_bias_integral: f64,
    /// Current regime.
    pub mode: FlightMode,
    /// Commanded bank angle [rad].
    pub bank_command: f64,
    /// Freezes the frequency law while true.
    pub hold_frequency: bool,
    /// Time of the last mode switch [s].
    pub last_switch: f64,
}

impl ControllerState {
    pub fn new(omega: f64, mode: FlightMode) -> Self {
        ControllerState {
            omega,
            glide_pitch_integral: 0.0,
            pitch_bias_integral: 0.0,
            mode,
            bank_command: 0.0,
            hold_frequency: false,
            last_switch: f64::NEG_INFINITY,
        }
    }
}

/// Advances the flapping frequency toward the speed setpoint and returns the
/// new value. Clamping the stored state is what stops integrator windup at
/// the limits. Returns the held value when the frequency is frozen.
pub fn frequency_law(
    gains: &ControlGains,
    ctrl: &mut ControllerState,
    v_x_actual: f64,
    dt: f64,
) -> f64 {
    if !ctrl.hold_frequency {
        let rate = gains.k_omega * (gains.v_x_desired - v_x_actual);
        ctrl.omega = (ctrl.omega + rate * dt).clamp(gains.omega_min, gains.omega_max);
    }
    ctrl.omega
}

/// Sweep-stage phase from the pitch attitude, with its exact time
/// derivative obtained from the attitude kinematics. A nose-up attitude
/// advances the sweep timing relative to the wingbeat, shifting the stroke
/// plane and with it the pitching moment.
pub fn sweep_phase_law(
    gains: &ControlGains,
    euler: Vector3<f64>,
    omega_body: Vector3<f64>,
) -> (f64, f64) {
    let raw = gains.sweep_phase_base - gains.k_sweep_phase * euler.y;
    let phase = raw.clamp(gains.sweep_phase_min, gains.sweep_phase_max);
    if phase != raw {
        // Saturated: the command is pinned, so its time derivative is zero.
        return (phase, 0.0);
    }
    let pitch_rate = omega_body.y * euler.x.cos() - omega_body.z * euler.x.sin();
    (phase, -gains.k_sweep_phase * pitch_rate)
}

/// Output of the roll law: sweep amplitudes for the two wings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAmplitudes {
    /// Right-wing sweep amplitude and its rate [rad, rad/s].
    pub right: f64,
    pub right_rate: f64,
    /// Left-wing counterparts.
    pub left: f64,
    pub left_rate: f64,
    /// True when a clamp at rho_min was active.
    pub saturated: bool,
}

/// Differential sweep amplitudes from the bank error. Unsaturated outputs
/// keep right + left equal to the nominal sum.
pub fn roll_symmetry_law(
    gains: &ControlGains,
    nominal_right: f64,
    nominal_left: f64,
    euler: Vector3<f64>,
    omega_body: Vector3<f64>,
    bank_command: f64,
) -> SweepAmplitudes {
    let error = euler.x - bank_command;
    let (sphi, cphi) = euler.x.sin_cos();
    let tth = euler.y.tan();
    let roll_rate = omega_body.x + omega_body.y * sphi * tth + omega_body.z * cphi * tth;

    let mut right = nominal_right - gains.k_roll * error;
    let mut right_rate = -gains.k_roll * roll_rate;
    let mut left = nominal_left + gains.k_roll * error;
    let mut left_rate = gains.k_roll * roll_rate;
    let mut saturated = false;
    if right < gains.rho_min {
        right = gains.rho_min;
        right_rate = 0.0;
        saturated = true;
    }
    if left < gains.rho_min {
        left = gains.rho_min;
        left_rate = 0.0;
        saturated = true;
    }
    SweepAmplitudes {
        right,
        right_rate,
        left,
        left_rate,
        saturated,
    }
}

/// Flap-joint phases for the two wings: a right angle plus/minus the
/// differential offset (zero unless enabled).
pub fn pitch_sync_phases(gains: &ControlGains) -> (f64, f64) {
    let delta = if gains.delta_offset_enabled {
        gains.delta_offset
    } else {
        0.0
    };
    let quarter = std::f64::consts::FRAC_PI_2;
    (quarter - delta, quarter + delta)
}

/// Joint bias set produced by the glide law [rad].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlideBiases {
    /// Flap-joint bias (dihedral), nodes 1 and 5.
    pub flap: f64,
    /// Wing pitch bias, nodes 2 and 6.
    pub pitch: f64,
    /// Sweep bias (fore-aft trim), nodes 3 and 7.
    pub sweep: f64,
}

/// Accumulates the glide integrals and returns the commanded biases.
/// `pitch_bias_nominal` is the wing pitch bias the integral builds on.
pub fn glide_bias_law(
    gains: &ControlGains,
    ctrl: &mut ControllerState,
    pitch_attitude: f64,
    pitch_rate: f64,
    pitch_bias_nominal: f64,
    dt: f64,
) -> GlideBiases {
    ctrl.glide_pitch_integral += pitch_attitude * dt;
    ctrl.pitch_bias_integral += -gains.pitch_bias_ki * pitch_attitude * dt;
    glide_biases(gains, ctrl, pitch_attitude, pitch_rate, pitch_bias_nominal)
}

/// Pure evaluation of the glide biases from the current integrals.
pub fn glide_biases(
    gains: &ControlGains,
    ctrl: &ControllerState,
    pitch_attitude: f64,
    pitch_rate: f64,
    pitch_bias_nominal: f64,
) -> GlideBiases {
    let pid = |g: &PidGains| {
        -g.kp * pitch_attitude - g.kd * pitch_rate - g.ki * ctrl.glide_pitch_integral + g.bias
    };
    GlideBiases {
        flap: pid(&gains.glide_flap),
        pitch: pitch_bias_nominal + ctrl.pitch_bias_integral,
        sweep: pid(&gains.glide_sweep),
    }
}

/// Mode-switch decision from altitude and forward speed, before dwell.
pub fn mode_switch_law(
    th: &SwitchThresholds,
    current: FlightMode,
    altitude: f64,
    v_x: f64,
) -> FlightMode {
    match current {
        FlightMode::Flapping => {
            if altitude >= th.glide_entry_altitude && v_x >= th.glide_entry_speed {
                FlightMode::Gliding
            } else {
                FlightMode::Flapping
            }
        }
        FlightMode::Gliding => {
            if altitude <= th.flap_entry_altitude || v_x <= th.flap_entry_speed {
                FlightMode::Flapping
            } else {
                FlightMode::Gliding
            }
        }
    }
}

/// Time derivatives of the network's phase potentials and amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterRates {
    /// d/dt of each node's phase relative to node 1 [rad/s].
    pub phase: Vec<f64>,
    /// d/dt of each node's amplitude [rad/s].
    pub rho: Vec<f64>,
}

impl ParameterRates {
    pub fn zero(n: usize) -> Self {
        ParameterRates {
            phase: vec![0.0; n],
            rho: vec![0.0; n],
        }
    }
}

/// Correction term compensating time-varying phases and amplitudes: per
/// node (d/dt log g_i) x_i + (d/dt pot_i) J x_i with g_i = rho_1/rho_i and
/// J the quarter-turn. Subtracting this from the coupled derivative keeps
/// the transformed network autonomous.
pub fn correction_vector(rates: &ParameterRates, net: &NetworkState) -> Result<DVector<f64>> {
    let n = net.len();
    if rates.phase.len() != n || rates.rho.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: rates.phase.len().min(rates.rho.len()),
        });
    }
    let rho1 = net.params[0].rho;
    let rho1_rate = rates.rho[0];
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        let x = net.states[i].shifted(&net.params[i]);
        let log_ratio_rate = rho1_rate / rho1 - rates.rho[i] / net.params[i].rho;
        out[2 * i] = log_ratio_rate * x.x - rates.phase[i] * x.y;
        out[2 * i + 1] = log_ratio_rate * x.y + rates.phase[i] * x.x;
    }
    Ok(out)
}

/// Correction feed with a staleness contract: the supplied matrices must
/// have been built for exactly the potentials and amplitudes in effect.
pub fn correction_feed(
    mat: &CouplingMatrices,
    rates: &ParameterRates,
    net: &NetworkState,
    potentials: &[f64],
) -> Result<DVector<f64>> {
    if mat.phases.len() != net.len() || potentials.len() != net.len() {
        return Err(Error::SizeMismatch {
            expected: net.len(),
            got: mat.phases.len().min(potentials.len()),
        });
    }
    let stale_phase = mat
        .phases
        .iter()
        .zip(potentials)
        .any(|(a, b)| a.to_bits() != b.to_bits());
    let stale_rho = mat
        .rhos
        .iter()
        .zip(&net.params)
        .any(|(r, p)| r.to_bits() != p.rho.to_bits());
    if stale_phase || stale_rho {
        return Err(Error::StaleMatrices);
    }
    correction_vector(rates, net)
}

/// Modulated edge phases of the double ring: the four law-driven edges.
/// The remaining edges (sweep to spare-flap, the ring closures, and the
/// cross-ring pair) follow from cycle closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPhases {
    /// Right pitch <- flap phase (node 2 over node 1) [rad].
    pub pitch_right: f64,
    /// Right sweep <- pitch phase (node 3 over node 2) [rad].
    pub sweep_right: f64,
    /// Left pitch <- flap phase (node 6 over node 5) [rad].
    pub pitch_left: f64,
    /// Left sweep <- pitch phase (node 7 over node 6) [rad].
    pub sweep_left: f64,
}

/// Node potentials of the eight-node double ring for the given modulated
/// phases. Node order: right flap, pitch, sweep, spare flap, then the left
/// counterparts. The spare-flap edges carry zero phase and the cross-ring
/// pair ties the two flap nodes together, so potentials depend only on the
/// four modulated values.
pub fn ring_potentials(phases: &RingPhases) -> [f64; 8] {
    let p1 = -phases.pitch_right;
    let p2 = p1 - phases.sweep_right;
    let p5 = -phases.pitch_left;
    let p6 = p5 - phases.sweep_left;
    [0.0, p1, p2, p2, 0.0, p5, p6, p6]
}

/// Potential rates corresponding to [`ring_potentials`] when only the two
/// sweep phases vary (the pitch phases are stepwise constant).
pub fn ring_potential_rates(sweep_right_rate: f64, sweep_left_rate: f64) -> [f64; 8] {
    [
        0.0,
        0.0,
        -sweep_right_rate,
        -sweep_right_rate,
        0.0,
        0.0,
        -sweep_left_rate,
        -sweep_left_rate,
    ]
}
