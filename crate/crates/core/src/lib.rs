//! Deterministic simulation of flapping-wing flight driven by a network
//! of coupled limit-cycle oscillators.
//!
//! The crate is organized bottom-up:
//!
//! - [`oscillator`]: amplitude-controlled limit-cycle units, their
//!   bifurcation between oscillation and rest, and diffusive coupling
//!   over a phase-offset graph.
//! - [`topology`]: coupling-graph validation, the matrix forms used for
//!   analysis, and the gain threshold that guarantees synchronization.
//! - [`control`]: flight-control laws that modulate the network's
//!   frequency, phases, amplitudes, and biases, plus the correction term
//!   that keeps the network synchronized while they vary.
//! - [`kinematics`]: stroke-plane, wing, and chord frames, joint-driven
//!   wing motion, and local flow at a blade station.
//! - [`aero`]: quasi-steady strip aerodynamics with empirical lift and
//!   drag coefficients and a rotational-lift term.
//! - [`vehicle`]: rigid-body equations of motion with Euler-angle
//!   attitude and a bare-body pitching moment.
//! - [`engine`]: the fixed-step integrator, event scheduling, mode
//!   switching, and deterministic text recording.
//! - [`scenario`]: the TOML file format that configures a run.

pub mod aero;
pub mod control;
pub mod engine;
pub mod error;
pub mod kinematics;
pub mod oscillator;
pub mod scenario;
pub mod topology;
pub mod vehicle;

pub use error::{Error, Result};
