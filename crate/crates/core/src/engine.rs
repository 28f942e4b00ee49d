//! Fixed-step simulation engine. Integrates the coupled oscillator network
//! and, when configured, the rigid-body flight dynamics with a classical
//! fourth-order scheme; evaluates the control laws at every integrator
//! stage; advances controller integrators, applies timed events, and
//! decides mode switches once per step; and records rows deterministically.
//!
//! The engine is configured through [`SimSetup`] and driven by
//! [`Simulation::run`], which streams comment lines, one header, and data
//! rows into a [`RecordSink`]. Identical setups produce byte-identical
//! text output.

use crate::aero::{integrate_wing, AeroModel};
use crate::control::{
    correction_vector, frequency_law, glide_bias_law, glide_biases, mode_switch_law,
    pitch_sync_phases, ring_potential_rates, ring_potentials, roll_symmetry_law, sweep_phase_law,
    ControlGains, ControllerState, FlightMode, ParameterRates, RingPhases, SwitchThresholds,
};
use crate::error::{Error, Result};
use crate::kinematics::{JointAngles, JointRates, StrokeFrame, WingGeometry, WingSide};
use crate::oscillator::{
    coupled_derivative, rotation, Bifurcation, HopfParams, NetworkState, OscillatorState,
};
use crate::topology::NetworkTopology;
use crate::vehicle::{
    body_pitch_moment, euler_rates, gravity_in_body, position_derivative, rotational_derivative,
    translational_derivative, BodyAero, MassProperties, RigidBodyState,
};
use nalgebra::{DVector, Vector2, Vector3};
use std::time::Instant;

/// Directed edge list (to, from) of the eight-node double-ring pattern
/// generator: two four-node rings (flap, pitch, sweep, spare flap per
/// wing) tied together through their flap nodes.
pub const RING_EDGE_LIST: [(usize, usize); 10] = [
    (1, 0),
    (2, 1),
    (3, 2),
    (0, 3),
    (4, 0),
    (0, 4),
    (5, 4),
    (6, 5),
    (7, 6),
    (4, 7),
];

/// Node roles within the ring, by index: right flap, right pitch, right
/// sweep, right spare flap, then the left counterparts.
pub const RING_NODES: usize = 8;

/// One classical fourth-order step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &(y + 0.5 * dt * &k1))?;
    let k3 = f(t + 0.5 * dt, &(y + 0.5 * dt * &k2))?;
    let k4 = f(t + dt, &(y + dt * &k3))?;
    Ok(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Fowler-Noll-Vo 1a 64-bit hash, used to fingerprint scenario text in
/// output preambles.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Destination for simulation output. Implementations must preserve the
/// order of calls; the engine emits comments, then one header, then rows.
pub trait RecordSink {
    fn comment(&mut self, line: &str) -> Result<()>;
    fn header(&mut self, names: &[String]) -> Result<()>;
    fn row(&mut self, values: &[f64]) -> Result<()>;
}

/// Writes comma-separated text: `#`-prefixed comments, a name header, and
/// one line per record. Floating-point values are printed with the
/// shortest representation that round-trips, so identical runs produce
/// identical bytes.
pub struct TextRecorder<W: std::io::Write> {
    writer: W,
}

impl<W: std::io::Write> TextRecorder<W> {
    pub fn new(writer: W) -> Self {
        TextRecorder { writer }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: std::io::Write> RecordSink for TextRecorder<W> {
    fn comment(&mut self, line: &str) -> Result<()> {
        writeln!(self.writer, "# {line}")?;
        Ok(())
    }

    fn header(&mut self, names: &[String]) -> Result<()> {
        writeln!(self.writer, "{}", names.join(","))?;
        Ok(())
    }

    fn row(&mut self, values: &[f64]) -> Result<()> {
        use std::fmt::Write as _;
        let mut line = String::with_capacity(16 * values.len());
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("formatting a float into a string cannot fail");
        }
        writeln!(self.writer, "{line}")?;
        Ok(())
    }
}

/// Keeps all output in memory, for tests and analysis.
#[derive(Debug, Default, Clone)]
pub struct MemoryRecorder {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MemoryRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of a named column in the header.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// All values of a named column, in record order.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

impl RecordSink for MemoryRecorder {
    fn comment(&mut self, line: &str) -> Result<()> {
        self.comments.push(line.to_string());
        Ok(())
    }

    fn header(&mut self, names: &[String]) -> Result<()> {
        self.header = names.to_vec();
        Ok(())
    }

    fn row(&mut self, values: &[f64]) -> Result<()> {
        self.rows.push(values.to_vec());
        Ok(())
    }
}

/// Wing geometry, mounting, and aerodynamic model shared by both wings.
#[derive(Debug, Clone)]
pub struct WingSetup {
    pub geometry: WingGeometry,
    pub frame: StrokeFrame,
    pub model: AeroModel,
}

/// Rigid-body mass properties and the optional bare-body pitch moment.
#[derive(Debug, Clone)]
pub struct VehicleSetup {
    pub mass: MassProperties,
    pub body_aero: Option<BodyAero>,
}

/// Closed-loop flight control configuration.
#[derive(Debug, Clone)]
pub struct ControlSetup {
    pub gains: ControlGains,
    pub thresholds: SwitchThresholds,
}

/// Open-loop modulation of the pattern generator, for studying phase
/// transients without the flight control laws.
#[derive(Debug, Clone, Copy)]
pub enum CpgDrive {
    /// Drives the sweep-stage phase of both rings sinusoidally:
    /// base + amplitude * sin(frequency * t). With `correction` false the
    /// compensation for the time-varying phase is left out.
    SweepPhaseSine {
        base: f64,
        amplitude: f64,
        frequency: f64,
        correction: bool,
    },
}

impl CpgDrive {
    fn phase_at(&self, t: f64) -> (f64, f64) {
        match *self {
            CpgDrive::SweepPhaseSine {
                base,
                amplitude,
                frequency,
                ..
            } => (
                base + amplitude * (frequency * t).sin(),
                amplitude * frequency * (frequency * t).cos(),
            ),
        }
    }

    fn correction_enabled(&self) -> bool {
        match *self {
            CpgDrive::SweepPhaseSine { correction, .. } => correction,
        }
    }
}

/// A parameter change applied at a step boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventAction {
    /// New bank-angle command [rad].
    SetBank(f64),
    /// New forward-speed setpoint [m/s].
    SetDesiredSpeed(f64),
    /// Enables the differential pitch-timing offset and sets it [rad].
    SetDeltaOffset(f64),
    /// Freezes (true) or releases (false) the frequency law.
    HoldFrequency(bool),
}

/// An action scheduled at a point in time. The time is snapped to the
/// nearest step boundary and the action fires exactly once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedEvent {
    pub time: f64,
    pub action: EventAction,
}

/// Complete simulation configuration. Build one, adjust its public
/// fields, then hand it to [`Simulation::new`].
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub topology: NetworkTopology,
    /// Nominal per-node oscillator parameters.
    pub params: Vec<HopfParams>,
    /// Convergence gain used while gliding [1/s].
    pub glide_lambda: f64,
    pub wing: Option<WingSetup>,
    pub vehicle: Option<VehicleSetup>,
    pub control: Option<ControlSetup>,
    pub drive: Option<CpgDrive>,
    pub events: Vec<TimedEvent>,
    /// Integration step [s].
    pub dt: f64,
    /// Total simulated time [s]; rounded to a whole number of steps.
    pub duration: f64,
    /// Record every this-many steps (>= 1).
    pub record_stride: usize,
    /// Integrate the rigid body (false freezes it at its initial state).
    pub dynamics: bool,
    /// Evaluate wing aerodynamics.
    pub aero: bool,
    /// Initial oscillator states (u, v) per node; the default starts the
    /// network on its synchronized orbit.
    pub initial_cpg: Option<Vec<(f64, f64)>>,
    pub initial_body: RigidBodyState,
    pub initial_mode: FlightMode,
    /// Comment lines placed at the top of the output.
    pub preamble: Vec<String>,
}

impl SimSetup {
    /// A pattern-generator-only setup with one-second duration,
    /// millisecond steps, and no body, wings, or control.
    pub fn cpg_only(topology: NetworkTopology, params: Vec<HopfParams>) -> Self {
        SimSetup {
            topology,
            params,
            glide_lambda: 30.0,
            wing: None,
            vehicle: None,
            control: None,
            drive: None,
            events: Vec::new(),
            dt: 1e-3,
            duration: 1.0,
            record_stride: 1,
            dynamics: false,
            aero: false,
            initial_cpg: None,
            initial_body: RigidBodyState::default(),
            initial_mode: FlightMode::Flapping,
            preamble: Vec::new(),
        }
    }
}

/// What happened during a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub records: u64,
    pub wall_seconds: f64,
    pub final_time: f64,
    /// Mode transitions as (time, mode entered).
    pub mode_switches: Vec<(f64, FlightMode)>,
    pub final_sync_error: f64,
}

/// Per-evaluation algebraic outputs kept for the body derivative and for
/// recording.
struct StageInfo {
    force: Vector3<f64>,
    moment: Vector3<f64>,
    omega: f64,
    sweep_phase: f64,
    rho_sweep_right: f64,
    rho_sweep_left: f64,
    sigma: f64,
    mode_value: f64,
    potentials: Vec<f64>,
    rhos: Vec<f64>,
    biases: Vec<f64>,
}

/// Oscillator-network parameters in effect at one integrator stage.
struct StageParams {
    potentials: Vec<f64>,
    pot_rates: Vec<f64>,
    rhos: Vec<f64>,
    rho_rates: Vec<f64>,
    biases: Vec<f64>,
    lambdas: Vec<f64>,
    omega: f64,
    sigma: Bifurcation,
    gain: f64,
    correction: bool,
    sweep_phase: f64,
}

/// A configured, runnable simulation.
pub struct Simulation {
    topo: NetworkTopology,
    base_params: Vec<HopfParams>,
    nominal_potentials: Vec<f64>,
    glide_lambda: f64,
    wing: Option<WingSetup>,
    vehicle: Option<VehicleSetup>,
    gains: Option<ControlGains>,
    thresholds: Option<SwitchThresholds>,
    ctrl: ControllerState,
    drive: Option<CpgDrive>,
    events: Vec<(u64, EventAction)>,
    next_event: usize,
    dt: f64,
    n_steps: u64,
    record_stride: u64,
    dynamics: bool,
    aero: bool,
    ring: bool,
    preamble: Vec<String>,
    state: DVector<f64>,
    step_index: u64,
    mode_switches: Vec<(f64, FlightMode)>,
    /// Switch time and the stage biases captured just before the switch;
    /// while present, the commanded biases slide from these values to the
    /// new regime's targets.
    bias_blend: Option<(f64, Vec<f64>)>,
}

/// Seconds over which oscillator biases slide from their pre-switch values
/// to the new regime's targets after a mode change. An instant jump would
/// step the wings' aerodynamic centers and slam the pitch axis, whose
/// inertia is tiny compared to the moments the wings generate; worse, the
/// glide bias law feeds the pitch rate back into the biases, so an
/// unblended hand-over during fast rotation can run away within a few
/// steps. Kept short so powered flight is not held at stale trim longer
/// than the oscillator amplitudes take to regrow.
const BIAS_BLEND_S: f64 = 0.25;

impl Simulation {
    pub fn new(setup: SimSetup) -> Result<Self> {
        let n = setup.topology.n;
        setup.topology.validate()?;
        let nominal_potentials = setup.topology.relative_phases()?;
        if setup.params.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: setup.params.len(),
            });
        }
        if !(setup.dt.is_finite() && setup.dt > 0.0) {
            return Err(Error::invalid("dt must be finite and > 0"));
        }
        if !(setup.duration.is_finite() && setup.duration >= 0.0) {
            return Err(Error::invalid("duration must be finite and >= 0"));
        }
        if setup.record_stride == 0 {
            return Err(Error::invalid("record_stride must be >= 1"));
        }
        if !(setup.glide_lambda.is_finite() && setup.glide_lambda > 0.0) {
            return Err(Error::invalid("glide_lambda must be finite and > 0"));
        }

        let ring = is_ring(&setup.topology);
        let needs_ring = setup.wing.is_some()
            || setup.vehicle.is_some()
            || setup.control.is_some()
            || setup.drive.is_some();
        if needs_ring && !ring {
            return Err(Error::invalid(
                "wings, vehicle, control, and phase drives require the \
                 eight-node double-ring oscillator layout",
            ));
        }
        if setup.control.is_some() && setup.drive.is_some() {
            return Err(Error::invalid(
                "closed-loop control and an open-loop phase drive are mutually exclusive",
            ));
        }
        if setup.aero && setup.wing.is_none() {
            return Err(Error::invalid("aerodynamics require a wing configuration"));
        }
        if setup.dynamics && setup.vehicle.is_none() {
            return Err(Error::invalid(
                "body dynamics require vehicle mass properties",
            ));
        }
        if setup.control.is_none() && !setup.events.is_empty() {
            return Err(Error::invalid("timed events require the flight controller"));
        }
        if let Some(c) = &setup.control {
            c.gains.check()?;
            c.thresholds.check()?;
        }
        if let Some(CpgDrive::SweepPhaseSine {
            base,
            amplitude,
            frequency,
            ..
        }) = setup.drive
        {
            for (name, v) in [
                ("base", base),
                ("amplitude", amplitude),
                ("frequency", frequency),
            ] {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("drive {name} must be finite")));
                }
            }
        }

        let n_steps = (setup.duration / setup.dt).round() as u64;

        let mut state = DVector::zeros(2 * n + 12);
        match &setup.initial_cpg {
            Some(init) => {
                if init.len() != n {
                    return Err(Error::SizeMismatch {
                        expected: n,
                        got: init.len(),
                    });
                }
                for (i, (u, v)) in init.iter().enumerate() {
                    state[2 * i] = *u;
                    state[2 * i + 1] = *v;
                }
            }
            None => {
                // Start on the synchronized orbit: node i sits at angle
                // -pot_i on its own circle.
                for i in 0..n {
                    let p = &setup.params[i];
                    let x = p.rho * rotation(-nominal_potentials[i]) * Vector2::new(1.0, 0.0);
                    state[2 * i] = p.bias + x.x;
                    state[2 * i + 1] = x.y;
                }
            }
        }
        let b = 2 * n;
        let body = &setup.initial_body;
        for k in 0..3 {
            state[b + k] = body.velocity[k];
            state[b + 3 + k] = body.omega[k];
            state[b + 6 + k] = body.euler[k];
            state[b + 9 + k] = body.position[k];
        }
        for (k, v) in state.iter().enumerate() {
            if !v.is_finite() {
                let subsystem = if k < b {
                    "oscillator-network"
                } else {
                    "rigid-body"
                };
                return Err(Error::NonFinite { subsystem, t: 0.0 });
            }
        }

        let mut events: Vec<(u64, EventAction)> = Vec::with_capacity(setup.events.len());
        for ev in &setup.events {
            if !(ev.time.is_finite() && ev.time >= 0.0) {
                return Err(Error::invalid("event times must be finite and >= 0"));
            }
            events.push(((ev.time / setup.dt).round() as u64, ev.action));
        }
        events.sort_by_key(|(step, _)| *step);

        let omega0 = setup.params[0].omega;
        Ok(Simulation {
            topo: setup.topology,
            base_params: setup.params,
            nominal_potentials,
            glide_lambda: setup.glide_lambda,
            wing: setup.wing,
            vehicle: setup.vehicle,
            gains: setup.control.as_ref().map(|c| c.gains),
            thresholds: setup.control.as_ref().map(|c| c.thresholds),
            ctrl: ControllerState::new(omega0, setup.initial_mode),
            drive: setup.drive,
            events,
            next_event: 0,
            dt: setup.dt,
            n_steps,
            record_stride: setup.record_stride as u64,
            dynamics: setup.dynamics,
            aero: setup.aero,
            ring,
            preamble: setup.preamble,
            state,
            step_index: 0,
            mode_switches: Vec::new(),
            bias_blend: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn controller(&self) -> &ControllerState {
        &self.ctrl
    }

    fn n(&self) -> usize {
        self.topo.n
    }

    fn body_offset(&self) -> usize {
        2 * self.n()
    }

    fn body_from_state(&self, y: &DVector<f64>) -> RigidBodyState {
        let b = self.body_offset();
        RigidBodyState {
            velocity: Vector3::new(y[b], y[b + 1], y[b + 2]),
            omega: Vector3::new(y[b + 3], y[b + 4], y[b + 5]),
            euler: Vector3::new(y[b + 6], y[b + 7], y[b + 8]),
            position: Vector3::new(y[b + 9], y[b + 10], y[b + 11]),
        }
    }

    /// Whether the output carries the flight columns (joints, body state,
    /// loads) or only the oscillator columns.
    fn flight_layout(&self) -> bool {
        self.wing.is_some() || self.vehicle.is_some()
    }

    fn column_names(&self) -> Vec<String> {
        let n = self.n();
        let mut names = Vec::new();
        names.push("t".to_string());
        for i in 1..=n {
            names.push(format!("u{i}_deg"));
        }
        for i in 1..=n {
            names.push(format!("v{i}_deg"));
        }
        if self.flight_layout() {
            for s in [
                "flap_r_deg",
                "pitch_r_deg",
                "sweep_r_deg",
                "flap_l_deg",
                "pitch_l_deg",
                "sweep_l_deg",
                "flap_r_rate_dps",
                "pitch_r_rate_dps",
                "sweep_r_rate_dps",
                "flap_l_rate_dps",
                "pitch_l_rate_dps",
                "sweep_l_rate_dps",
                "vx_mps",
                "vy_mps",
                "vz_mps",
                "p_dps",
                "q_dps",
                "r_dps",
                "roll_deg",
                "pitch_deg",
                "yaw_deg",
                "x_m",
                "y_m",
                "z_m",
                "fx_n",
                "fy_n",
                "fz_n",
                "mx_nm",
                "my_nm",
                "mz_nm",
                "omega_radps",
                "delta_sweep_deg",
                "rho_sweep_r_deg",
                "rho_sweep_l_deg",
                "sigma",
                "mode",
                "sync_err",
            ] {
                names.push(s.to_string());
            }
        } else if self.ring {
            for s in [
                "omega_radps",
                "delta_sweep_deg",
                "rho_sweep_r_deg",
                "rho_sweep_l_deg",
                "sigma",
                "sync_err",
            ] {
                names.push(s.to_string());
            }
        } else {
            for s in ["omega_radps", "sigma", "sync_err"] {
                names.push(s.to_string());
            }
        }
        names
    }

    /// The full bias vector the glide trim laws command for the given body
    /// state, with the current controller integrals.
    fn gliding_biases_vec(&self, gains: &ControlGains, body: &RigidBodyState) -> Vec<f64> {
        let pitch_rate = body.omega.y * body.euler.x.cos() - body.omega.z * body.euler.x.sin();
        let gb = glide_biases(
            gains,
            &self.ctrl,
            body.euler.y,
            pitch_rate,
            self.base_params[1].bias,
        );
        let mut biases: Vec<f64> = self.base_params.iter().map(|p| p.bias).collect();
        biases[0] = gb.flap;
        biases[4] = gb.flap;
        biases[1] = gb.pitch;
        biases[5] = gb.pitch;
        biases[2] = gb.sweep;
        biases[6] = gb.sweep;
        biases
    }

    /// Regime bias targets at time `t`: passed through unchanged, except
    /// during the short post-switch window where the output slides from the
    /// captured pre-switch values toward the (possibly moving) targets.
    fn blended_biases(&self, t: f64, target: Vec<f64>) -> Vec<f64> {
        match &self.bias_blend {
            Some((t0, start)) => {
                let s = ((t - t0) / BIAS_BLEND_S).clamp(0.0, 1.0);
                let w = s * s * (3.0 - 2.0 * s);
                target
                    .iter()
                    .zip(start)
                    .map(|(tb, sb)| sb + (tb - sb) * w)
                    .collect()
            }
            None => target,
        }
    }

    /// Oscillator parameters in effect at time `t` with the given body
    /// state, depending on regime and configuration. Controller
    /// integrators are read but never advanced here.
    fn stage_parameters(&self, t: f64, body: &RigidBodyState) -> StageParams {
        let n = self.n();
        let nominal_rhos: Vec<f64> = self.base_params.iter().map(|p| p.rho).collect();
        let nominal_biases: Vec<f64> = self.base_params.iter().map(|p| p.bias).collect();
        let nominal_lambdas: Vec<f64> = self.base_params.iter().map(|p| p.lambda).collect();

        let nominal_sweep_phase = if self.ring {
            // Edge phase of the sweep stage, recovered from the nominal
            // potentials (edge 3 <- 2 in ring order).
            self.nominal_potentials[1] - self.nominal_potentials[2]
        } else {
            0.0
        };

        match (&self.gains, &self.drive) {
            (Some(gains), None) => match self.ctrl.mode {
                FlightMode::Flapping => {
                    let (d21, d65) = pitch_sync_phases(gains);
                    let (d32, d32_rate) = sweep_phase_law(gains, body.euler, body.omega);
                    let sweep = roll_symmetry_law(
                        gains,
                        nominal_rhos[2],
                        nominal_rhos[6],
                        body.euler,
                        body.omega,
                        self.ctrl.bank_command,
                    );
                    let pots = ring_potentials(&RingPhases {
                        pitch_right: d21,
                        sweep_right: d32,
                        pitch_left: d65,
                        sweep_left: d32,
                    });
                    let pot_rates = ring_potential_rates(d32_rate, d32_rate);
                    let mut rhos = nominal_rhos;
                    let mut rho_rates = vec![0.0; n];
                    rhos[2] = sweep.right;
                    rhos[6] = sweep.left;
                    rho_rates[2] = sweep.right_rate;
                    rho_rates[6] = sweep.left_rate;
                    StageParams {
                        potentials: pots.to_vec(),
                        pot_rates: pot_rates.to_vec(),
                        rhos,
                        rho_rates,
                        biases: self.blended_biases(t, nominal_biases),
                        lambdas: nominal_lambdas,
                        omega: self.ctrl.omega,
                        sigma: Bifurcation::Oscillate,
                        gain: self.topo.gain,
                        correction: true,
                        sweep_phase: d32,
                    }
                }
                FlightMode::Gliding => {
                    let biases = self.blended_biases(t, self.gliding_biases_vec(gains, body));
                    StageParams {
                        potentials: self.nominal_potentials.clone(),
                        pot_rates: vec![0.0; n],
                        rhos: nominal_rhos.clone(),
                        rho_rates: vec![0.0; n],
                        biases,
                        lambdas: vec![self.glide_lambda; n],
                        omega: self.ctrl.omega,
                        sigma: Bifurcation::Inhibit,
                        gain: 0.0,
                        correction: false,
                        sweep_phase: nominal_sweep_phase,
                    }
                }
            },
            (None, Some(drive)) => {
                let (d32, d32_rate) = drive.phase_at(t);
                // Pitch-stage phases stay at their nominal values.
                let d21 = self.nominal_potentials[0] - self.nominal_potentials[1];
                let d65 = self.nominal_potentials[4] - self.nominal_potentials[5];
                let pots = ring_potentials(&RingPhases {
                    pitch_right: d21,
                    sweep_right: d32,
                    pitch_left: d65,
                    sweep_left: d32,
                });
                let pot_rates = ring_potential_rates(d32_rate, d32_rate);
                StageParams {
                    potentials: pots.to_vec(),
                    pot_rates: pot_rates.to_vec(),
                    rhos: nominal_rhos,
                    rho_rates: vec![0.0; n],
                    biases: nominal_biases,
                    lambdas: nominal_lambdas,
                    omega: self.base_params[0].omega,
                    sigma: self.base_params[0].sigma,
                    gain: self.topo.gain,
                    correction: drive.correction_enabled(),
                    sweep_phase: d32,
                }
            }
            _ => StageParams {
                potentials: self.nominal_potentials.clone(),
                pot_rates: vec![0.0; n],
                rhos: nominal_rhos,
                rho_rates: vec![0.0; n],
                biases: nominal_biases,
                lambdas: nominal_lambdas,
                omega: self.base_params[0].omega,
                sigma: self.base_params[0].sigma,
                gain: self.topo.gain,
                correction: false,
                sweep_phase: nominal_sweep_phase,
            },
        }
    }

    /// Full state derivative and algebraic outputs at (t, y).
    /// `want_loads` controls whether wing loads are evaluated when they do
    /// not feed the body derivative.
    fn eval(
        &self,
        t: f64,
        y: &DVector<f64>,
        want_loads: bool,
    ) -> Result<(DVector<f64>, StageInfo)> {
        let n = self.n();
        let body = self.body_from_state(y);
        let sp = self.stage_parameters(t, &body);

        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            params.push(HopfParams::new(
                sp.lambdas[i],
                sp.rhos[i],
                sp.biases[i],
                sp.omega,
                sp.sigma,
            )?);
        }
        let mut states = Vec::with_capacity(n);
        for i in 0..n {
            states.push(OscillatorState::new(y[2 * i], y[2 * i + 1]));
        }
        let net = NetworkState::new(states, params)?;

        let mut topo = self.topo.clone();
        topo.gain = sp.gain;
        for e in &mut topo.edges {
            e.phase = sp.potentials[e.from] - sp.potentials[e.to];
        }

        let correction = if sp.correction {
            let rates = ParameterRates {
                phase: sp.pot_rates.clone(),
                rho: sp.rho_rates.clone(),
            };
            Some(correction_vector(&rates, &net)?)
        } else {
            None
        };
        let cpg_deriv = coupled_derivative(&net, &topo, correction.as_ref())?;

        let mut force = Vector3::zeros();
        let mut moment = Vector3::zeros();
        let need_loads = self.aero && (self.dynamics || want_loads);
        if need_loads {
            let wing = self.wing.as_ref().expect("aero requires a wing setup");
            for side in [WingSide::Right, WingSide::Left] {
                let base = if side == WingSide::Right { 0 } else { 4 };
                let joints = JointAngles {
                    flap: y[2 * base],
                    pitch: y[2 * (base + 1)],
                    sweep: y[2 * (base + 2)],
                };
                let rates = JointRates {
                    flap: cpg_deriv[2 * base],
                    pitch: cpg_deriv[2 * (base + 1)],
                    sweep: cpg_deriv[2 * (base + 2)],
                };
                let loads = integrate_wing(
                    &wing.geometry,
                    &wing.frame,
                    &wing.model,
                    side,
                    &joints,
                    &rates,
                    body.velocity,
                    body.omega,
                )?;
                force += loads.force_body;
                moment += loads.moment_body;
            }
            if let Some(vehicle) = &self.vehicle {
                if let Some(ba) = &vehicle.body_aero {
                    let air_density = wing.model.air_density;
                    moment += body_pitch_moment(ba, air_density, body.velocity);
                }
            }
        }

        let mut deriv = DVector::zeros(2 * n + 12);
        for k in 0..2 * n {
            deriv[k] = cpg_deriv[k];
        }
        if self.dynamics {
            let mp = &self
                .vehicle
                .as_ref()
                .expect("dynamics require a vehicle")
                .mass;
            let total_force = force + gravity_in_body(mp, body.euler);
            let vdot = translational_derivative(mp, &body, total_force);
            let wdot = rotational_derivative(mp, &body, moment);
            let edot = euler_rates(&body)?;
            let pdot = position_derivative(&body);
            let b = 2 * n;
            for k in 0..3 {
                deriv[b + k] = vdot[k];
                deriv[b + 3 + k] = wdot[k];
                deriv[b + 6 + k] = edot[k];
                deriv[b + 9 + k] = pdot[k];
            }
        }

        let info = StageInfo {
            force,
            moment,
            omega: sp.omega,
            sweep_phase: sp.sweep_phase,
            rho_sweep_right: sp.rhos[2.min(n - 1)],
            rho_sweep_left: sp.rhos[6.min(n - 1)],
            sigma: sp.sigma.value(),
            mode_value: match (&self.gains, sp.sigma) {
                (Some(_), _) => match self.ctrl.mode {
                    FlightMode::Flapping => 0.0,
                    FlightMode::Gliding => 1.0,
                },
                (None, Bifurcation::Oscillate) => 0.0,
                (None, Bifurcation::Inhibit) => 1.0,
            },
            potentials: sp.potentials,
            rhos: sp.rhos,
            biases: sp.biases,
        };
        Ok((deriv, info))
    }

    /// Distance of the oscillator block from its synchronized set under
    /// the instantaneous phases and amplitudes.
    fn sync_error_now(&self, y: &DVector<f64>, info: &StageInfo) -> f64 {
        let n = self.n();
        let rho0 = info.rhos[0];
        let mut zs = Vec::with_capacity(n);
        let mut mean = Vector2::zeros();
        for i in 0..n {
            let x = Vector2::new(y[2 * i] - info.biases[i], y[2 * i + 1]);
            let z = (rho0 / info.rhos[i]) * rotation(info.potentials[i]) * x;
            mean += z;
            zs.push(z);
        }
        mean /= n as f64;
        let mut sum = 0.0;
        for z in zs {
            sum += (z - mean).norm_squared();
        }
        sum.sqrt()
    }

    fn record_row(&self, sink: &mut dyn RecordSink) -> Result<(f64, u64)> {
        let t = self.time();
        let (deriv, info) = self.eval(t, &self.state, true)?;
        let n = self.n();
        let y = &self.state;
        let mut row = Vec::with_capacity(2 * n + 38);
        row.push(t);
        for i in 0..n {
            row.push(y[2 * i].to_degrees());
        }
        for i in 0..n {
            row.push(y[2 * i + 1].to_degrees());
        }
        if self.flight_layout() {
            for idx in [0, 1, 2, 4, 5, 6] {
                row.push(y[2 * idx].to_degrees());
            }
            for idx in [0, 1, 2, 4, 5, 6] {
                row.push(deriv[2 * idx].to_degrees());
            }
            let b = 2 * n;
            for k in 0..3 {
                row.push(y[b + k]);
            }
            for k in 3..6 {
                row.push(y[b + k].to_degrees());
            }
            for k in 6..9 {
                row.push(y[b + k].to_degrees());
            }
            for k in 9..12 {
                row.push(y[b + k]);
            }
            for k in 0..3 {
                row.push(info.force[k]);
            }
            for k in 0..3 {
                row.push(info.moment[k]);
            }
            row.push(info.omega);
            row.push(info.sweep_phase.to_degrees());
            row.push(info.rho_sweep_right.to_degrees());
            row.push(info.rho_sweep_left.to_degrees());
            row.push(info.sigma);
            row.push(info.mode_value);
            row.push(self.sync_error_now(y, &info));
        } else if self.ring {
            row.push(info.omega);
            row.push(info.sweep_phase.to_degrees());
            row.push(info.rho_sweep_right.to_degrees());
            row.push(info.rho_sweep_left.to_degrees());
            row.push(info.sigma);
            row.push(self.sync_error_now(y, &info));
        } else {
            row.push(info.omega);
            row.push(info.sigma);
            row.push(self.sync_error_now(y, &info));
        }
        sink.row(&row)?;
        Ok((self.sync_error_now(y, &info), 1))
    }

    /// Applies events due at the current step boundary, decides mode
    /// switches, advances the per-step controller integrators, and takes
    /// one integration step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let idx = self.step_index;

        while self.next_event < self.events.len() && self.events[self.next_event].0 == idx {
            let action = self.events[self.next_event].1;
            self.apply_event(action);
            self.next_event += 1;
        }

        if let (Some(gains), Some(th)) = (self.gains, self.thresholds) {
            let b = self.body_offset();
            let altitude = -self.state[b + 11];
            let v_x = self.state[b];
            if let Some((t0, _)) = &self.bias_blend {
                if t - t0 > BIAS_BLEND_S {
                    self.bias_blend = None;
                }
            }

            let proposed = mode_switch_law(&th, self.ctrl.mode, altitude, v_x);
            if proposed != self.ctrl.mode && t - self.ctrl.last_switch >= th.dwell - 1e-9 {
                // Capture the biases commanded just before the switch so
                // the new regime can slide from them instead of jumping.
                let body = self.body_from_state(&self.state);
                let start = self.stage_parameters(t, &body).biases;
                match proposed {
                    FlightMode::Gliding => {
                        self.ctrl.glide_pitch_integral = 0.0;
                        self.ctrl.pitch_bias_integral = 0.0;
                    }
                    FlightMode::Flapping => {
                        self.rearm_oscillators(&start);
                    }
                }
                self.bias_blend = Some((t, start));
                self.ctrl.mode = proposed;
                self.ctrl.last_switch = t;
                self.mode_switches.push((t, proposed));
            }

            match self.ctrl.mode {
                FlightMode::Flapping => {
                    let v_x_actual = self.state[b];
                    frequency_law(&gains, &mut self.ctrl, v_x_actual, self.dt);
                }
                FlightMode::Gliding => {
                    let body = self.body_from_state(&self.state);
                    let pitch_rate =
                        body.omega.y * body.euler.x.cos() - body.omega.z * body.euler.x.sin();
                    glide_bias_law(
                        &gains,
                        &mut self.ctrl,
                        body.euler.y,
                        pitch_rate,
                        self.base_params[1].bias,
                        self.dt,
                    );
                }
            }
        }

        let y_new = {
            let mut f = |tt: f64, yy: &DVector<f64>| self.eval(tt, yy, false).map(|(d, _)| d);
            rk4_step(&mut f, t, &self.state, self.dt)?
        };
        let b = self.body_offset();
        for (k, v) in y_new.iter().enumerate() {
            if !v.is_finite() {
                let subsystem = if k < b {
                    "oscillator-network"
                } else {
                    "rigid-body"
                };
                return Err(Error::NonFinite {
                    subsystem,
                    t: t + self.dt,
                });
            }
        }
        self.state = y_new;
        self.step_index += 1;
        Ok(())
    }

    /// Re-seeds the network onto its synchronized manifold when flapping
    /// resumes.
    ///
    /// Two things make the raw post-glide state a bad starting point. An
    /// inhibited oscillator decays toward its bias exponentially, so a long
    /// glide drives every radius to zero to the last bit — and a bias point
    /// is a true equilibrium from which the limit cycle can never regrow.
    /// Worse, the glide trim laws move the bias points themselves, so
    /// relative to the flapping biases the parked states sit at arbitrary
    /// incoherent phases, and restarting the full coupling gain against
    /// that mismatch slews the joints violently.
    ///
    /// The fix places every oscillator exactly on the synchronized set
    /// centered on the attractor biases in effect at the switch (`biases`):
    /// the first node keeps its phase and its radius (floored at a fifth of
    /// its amplitude, capped at the orbit), and every other node is placed
    /// at the amplitude-scaled, phase-offset image of it. Amplitude growth
    /// then completes in about a quarter second with no coupling transient
    /// at all. The floor trades a bounded joint snap (a fifth of each
    /// stage's amplitude, at most) against thrust dead time: seeding lower
    /// leaves the vehicle ballistic for most of a second, which costs far
    /// more attitude than the snap does.
    fn rearm_oscillators(&mut self, biases: &[f64]) {
        let eps = 0.2;
        let p0 = &self.base_params[0];
        let du = self.state[0] - biases[0];
        let dv = self.state[1];
        let r0 = (du * du + dv * dv).sqrt().clamp(eps * p0.rho, p0.rho);
        let psi = dv.atan2(du);
        for (i, p) in self.base_params.iter().enumerate() {
            let x = (r0 * p.rho / p0.rho)
                * (rotation(psi - self.nominal_potentials[i]) * Vector2::new(1.0, 0.0));
            self.state[2 * i] = biases[i] + x.x;
            self.state[2 * i + 1] = x.y;
        }
    }

    fn apply_event(&mut self, action: EventAction) {
        match action {
            EventAction::SetBank(v) => self.ctrl.bank_command = v,
            EventAction::SetDesiredSpeed(v) => {
                if let Some(g) = &mut self.gains {
                    g.v_x_desired = v;
                }
            }
            EventAction::SetDeltaOffset(v) => {
                if let Some(g) = &mut self.gains {
                    g.delta_offset = v;
                    g.delta_offset_enabled = true;
                }
            }
            EventAction::HoldFrequency(b) => self.ctrl.hold_frequency = b,
        }
    }

    /// Runs to completion, streaming output into the sink. Rows are
    /// written at step indices divisible by the record stride (the initial
    /// state included) plus the final step when unaligned; a zero-step run
    /// produces only comments and the header. When integration or row
    /// evaluation fails a trailing comment names the cause and the error
    /// is returned.
    pub fn run(&mut self, sink: &mut dyn RecordSink) -> Result<RunSummary> {
        let start = Instant::now();
        for line in self.preamble.clone() {
            sink.comment(&line)?;
        }
        sink.comment(&format!(
            "dt: {} s, duration: {} s, stride: {}",
            self.dt,
            self.n_steps as f64 * self.dt,
            self.record_stride
        ))?;
        sink.header(&self.column_names())?;

        let mut records = 0u64;
        let mut last_sync = f64::NAN;
        if let Err(e) = self.advance_to_end(sink, &mut records, &mut last_sync) {
            // Best effort: when the failure came from the sink itself the
            // trailer cannot land either, and the original error matters more.
            let _ = sink.comment(&format!("aborted: {e}"));
            return Err(e);
        }
        Ok(RunSummary {
            steps: self.step_index,
            records,
            wall_seconds: start.elapsed().as_secs_f64(),
            final_time: self.time(),
            mode_switches: self.mode_switches.clone(),
            final_sync_error: last_sync,
        })
    }

    /// The stepping loop behind [`run`](Self::run), separated so a failure
    /// anywhere inside it funnels through one abort path.
    fn advance_to_end(
        &mut self,
        sink: &mut dyn RecordSink,
        records: &mut u64,
        last_sync: &mut f64,
    ) -> Result<()> {
        if self.n_steps > 0 {
            let (sync, cnt) = self.record_row(sink)?;
            *last_sync = sync;
            *records += cnt;
        }
        while self.step_index < self.n_steps {
            self.step()?;
            if self.step_index.is_multiple_of(self.record_stride) || self.step_index == self.n_steps
            {
                let (sync, cnt) = self.record_row(sink)?;
                *last_sync = sync;
                *records += cnt;
            }
        }
        Ok(())
    }
}

/// True when the topology is exactly the eight-node double ring (any
/// edge order, any phases).
fn is_ring(topo: &NetworkTopology) -> bool {
    if topo.n != RING_NODES || topo.edges.len() != RING_EDGE_LIST.len() {
        return false;
    }
    RING_EDGE_LIST
        .iter()
        .all(|&(to, from)| topo.edges.iter().any(|e| e.to == to && e.from == from))
}
