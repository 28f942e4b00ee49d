//! Amplitude-controlled limit-cycle oscillators and their diffusive coupling.
//!
//! Each unit is a planar oscillator whose vector field, for state offset
//! x = (u - a, v), is
//!
//! ```text
//! dx/dt = [ -lambda (r^2/rho^2 - sigma)   -omega ] x + input
//!         [  omega    -lambda (r^2/rho^2 - sigma) ]
//! ```
//!
//! with r = |x|. For sigma = +1 the unit settles on a circular orbit of
//! radius rho centred at (a, 0); for sigma = -1 the orbit collapses and the
//! state converges to (a, 0) regardless of coupling gain. u is used directly
//! as a joint angle, so a is the joint bias and rho the oscillation
//! amplitude.

use crate::error::{Error, Result};
use crate::topology::NetworkTopology;
use nalgebra::{DVector, Matrix2, Vector2};

/// Branch selector for the oscillator's supercritical bifurcation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bifurcation {
    /// sigma = +1: stable limit cycle of radius rho.
    Oscillate,
    /// sigma = -1: globally stable equilibrium at the cycle centre.
    Inhibit,
}

impl Bifurcation {
    /// Numeric value of sigma.
    pub fn value(self) -> f64 {
        match self {
            Bifurcation::Oscillate => 1.0,
            Bifurcation::Inhibit => -1.0,
        }
    }

    /// Parses +1 / -1; any other value is rejected.
    pub fn from_value(x: f64) -> Result<Self> {
        if x == 1.0 {
            Ok(Bifurcation::Oscillate)
        } else if x == -1.0 {
            Ok(Bifurcation::Inhibit)
        } else {
            Err(Error::invalid(format!(
                "bifurcation parameter must be +1 or -1, got {x}"
            )))
        }
    }
}

/// Per-oscillator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfParams {
    /// Radial convergence gain [1/s], > 0.
    pub lambda: f64,
    /// Limit-cycle radius, i.e. oscillation amplitude [rad], > 0.
    pub rho: f64,
    /// Cycle centre offset along u, i.e. joint bias [rad].
    pub bias: f64,
    /// Angular frequency [rad/s], >= 0.
    pub omega: f64,
    /// Bifurcation branch.
    pub sigma: Bifurcation,
}

impl HopfParams {
    pub fn new(lambda: f64, rho: f64, bias: f64, omega: f64, sigma: Bifurcation) -> Result<Self> {
        let p = HopfParams {
            lambda,
            rho,
            bias,
            omega,
            sigma,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::invalid(format!(
                "rho must be finite and > 0, got {}",
                self.rho
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::invalid("bias must be finite"));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::invalid(format!(
                "omega must be finite and >= 0, got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// Planar oscillator state. u doubles as the joint angle output.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OscillatorState {
    pub u: f64,
    pub v: f64,
}

impl OscillatorState {
    pub fn new(u: f64, v: f64) -> Self {
        OscillatorState { u, v }
    }

    /// State offset from the cycle centre, x = (u - a, v).
    pub fn shifted(&self, params: &HopfParams) -> Vector2<f64> {
        Vector2::new(self.u - params.bias, self.v)
    }
}

/// Counter-clockwise planar rotation by `angle` [rad].
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Vector field of a single oscillator, evaluated on the raw (u, v) state.
/// Returns d(u, v)/dt; `input` is an additive forcing term.
pub fn hopf_derivative(
    state: &OscillatorState,
    params: &HopfParams,
    input: Vector2<f64>,
) -> Result<Vector2<f64>> {
    params.check()?;
    if !(state.u.is_finite() && state.v.is_finite() && input.x.is_finite() && input.y.is_finite()) {
        return Err(Error::invalid("non-finite oscillator state or input"));
    }
    let x = state.shifted(params);
    let r2 = x.norm_squared();
    let radial = -params.lambda * (r2 / (params.rho * params.rho) - params.sigma.value());
    Ok(Vector2::new(
        radial * x.x - params.omega * x.y + input.x,
        params.omega * x.x + radial * x.y + input.y,
    ))
}

/// A network of oscillators: states plus per-node parameters, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub states: Vec<OscillatorState>,
    pub params: Vec<HopfParams>,
}

impl NetworkState {
    pub fn new(states: Vec<OscillatorState>, params: Vec<HopfParams>) -> Result<Self> {
        if states.len() != params.len() {
            return Err(Error::SizeMismatch {
                expected: params.len(),
                got: states.len(),
            });
        }
        if states.is_empty() {
            return Err(Error::invalid(
                "network must contain at least one oscillator",
            ));
        }
        for p in &params {
            p.check()?;
        }
        Ok(NetworkState { states, params })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Stacked offsets (u_i - a_i, v_i) as a 2n vector.
    pub fn shifted_stack(&self) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.len());
        for (i, (s, p)) in self.states.iter().zip(&self.params).enumerate() {
            let x = s.shifted(p);
            out[2 * i] = x.x;
            out[2 * i + 1] = x.y;
        }
        out
    }
}

/// Sets the bifurcation branch on every node. All nodes switch together;
/// the state itself is untouched, so trajectories stay continuous.
pub fn bifurcation_set(net: &mut NetworkState, sigma: Bifurcation) {
    for p in &mut net.params {
        p.sigma = sigma;
    }
}

/// Sets the angular frequency on every node.
pub fn set_frequency(net: &mut NetworkState, omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid(format!(
            "omega must be finite and >= 0, got {omega}"
        )));
    }
    for p in &mut net.params {
        p.omega = omega;
    }
    Ok(())
}

/// Stacked network derivative: per node the own vector field minus
/// gain-weighted diffusive coupling along the directed edges, minus an
/// optional correction term (used when amplitudes or phases vary in time).
/// Layout is [du0, dv0, du1, dv1, ...].
pub fn coupled_derivative(
    net: &NetworkState,
    topo: &NetworkTopology,
    correction: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = net.len();
    if topo.n != n {
        return Err(Error::SizeMismatch {
            expected: topo.n,
            got: n,
        });
    }
    if let Some(c) = correction {
        if c.len() != 2 * n {
            return Err(Error::SizeMismatch {
                expected: 2 * n,
                got: c.len(),
            });
        }
    }

    let mut shifted = Vec::with_capacity(n);
    for (s, p) in net.states.iter().zip(&net.params) {
        shifted.push(s.shifted(p));
    }

    let mut out = DVector::zeros(2 * n);
    for (i, (s, p)) in net.states.iter().zip(&net.params).enumerate() {
        let f = hopf_derivative(s, p, Vector2::zeros())?;
        out[2 * i] = f.x;
        out[2 * i + 1] = f.y;
    }

    for e in &topo.edges {
        let (i, j) = (e.to, e.from);
        let gain_ratio = net.params[i].rho / net.params[j].rho;
        let coupled = shifted[i] - gain_ratio * rotation(e.phase) * shifted[j];
        out[2 * i] -= topo.gain * coupled.x;
        out[2 * i + 1] -= topo.gain * coupled.y;
    }

    if let Some(c) = correction {
        out -= c;
    }

    for k in 0..2 * n {
        if !out[k].is_finite() {
            return Err(Error::invalid("non-finite network derivative"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Edge;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(lambda: f64, rho: f64, bias: f64, omega: f64, sigma: Bifurcation) -> HopfParams {
        HopfParams::new(lambda, rho, bias, omega, sigma).unwrap()
    }

    #[test]
    fn on_cycle_state_moves_tangentially() {
        // On the orbit (r = rho) the radial term vanishes and the field is a
        // pure rotation: state (1, 0) with rho = 1, omega = 2*pi gives
        // (0, 2*pi).
        let p = params(
            10.0,
            1.0,
            0.0,
            std::f64::consts::TAU,
            Bifurcation::Oscillate,
        );
        let f = hopf_derivative(&OscillatorState::new(1.0, 0.0), &p, Vector2::zeros()).unwrap();
        assert_abs_diff_eq!(f.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y, std::f64::consts::TAU, epsilon = 1e-15);
    }

    #[test]
    fn bias_shifts_the_cycle_centre() {
        // Same geometry as above but centred at a = 2: (3, 0) is on the orbit.
        let p = params(10.0, 1.0, 2.0, 5.0, Bifurcation::Oscillate);
        let f = hopf_derivative(&OscillatorState::new(3.0, 0.0), &p, Vector2::zeros()).unwrap();
        assert_abs_diff_eq!(f.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y, 5.0, epsilon = 1e-15);
    }

    #[test]
    fn inhibited_branch_decays_to_centre() {
        // sigma = -1: |x| shrinks monotonically from (1.1, 0) toward (0, 0).
        let p = params(10.0, 1.0, 0.0, 6.0, Bifurcation::Inhibit);
        let mut s = OscillatorState::new(1.1, 0.0);
        let dt = 1e-3;
        let mut r_prev = s.shifted(&p).norm();
        for _ in 0..2000 {
            let k1 = hopf_derivative(&s, &p, Vector2::zeros()).unwrap();
            let mid = OscillatorState::new(s.u + 0.5 * dt * k1.x, s.v + 0.5 * dt * k1.y);
            let k2 = hopf_derivative(&mid, &p, Vector2::zeros()).unwrap();
            s.u += dt * k2.x;
            s.v += dt * k2.y;
            let r = s.shifted(&p).norm();
            assert!(r <= r_prev * (1.0 + 1e-12), "radius grew: {r_prev} -> {r}");
            r_prev = r;
        }
        assert!(r_prev < 1e-8);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HopfParams::new(0.0, 1.0, 0.0, 1.0, Bifurcation::Oscillate).is_err());
        assert!(HopfParams::new(10.0, -1.0, 0.0, 1.0, Bifurcation::Oscillate).is_err());
        assert!(HopfParams::new(10.0, 1.0, 0.0, -1.0, Bifurcation::Oscillate).is_err());
        assert!(HopfParams::new(f64::NAN, 1.0, 0.0, 1.0, Bifurcation::Oscillate).is_err());
        assert!(Bifurcation::from_value(0.5).is_err());
        assert!(Bifurcation::from_value(-1.0).is_ok());
        let p = params(10.0, 1.0, 0.0, 1.0, Bifurcation::Oscillate);
        assert!(
            hopf_derivative(&OscillatorState::new(f64::NAN, 0.0), &p, Vector2::zeros()).is_err()
        );
    }

    #[test]
    fn coupling_vanishes_on_the_synchronized_set() {
        // Two nodes, x_i = (rho_i/rho_j) R(delta_ij) x_j: the diffusive terms
        // cancel exactly and each node sees only its own field.
        let p1 = params(10.0, 2.0, 0.0, 3.0, Bifurcation::Oscillate);
        let p2 = params(10.0, 0.5, 1.0, 3.0, Bifurcation::Oscillate);
        let delta21 = 0.7_f64;
        let x1 = Vector2::new(1.3, -0.4);
        let x2 = (p2.rho / p1.rho) * rotation(delta21) * x1;
        let net = NetworkState::new(
            vec![
                OscillatorState::new(p1.bias + x1.x, x1.y),
                OscillatorState::new(p2.bias + x2.x, x2.y),
            ],
            vec![p1, p2],
        )
        .unwrap();
        let topo = NetworkTopology::new(
            2,
            vec![Edge::new(1, 0, delta21), Edge::new(0, 1, -delta21)],
            5.0,
        )
        .unwrap();
        let coupled = coupled_derivative(&net, &topo, None).unwrap();
        for (i, (s, p)) in net.states.iter().zip(&net.params).enumerate() {
            let own = hopf_derivative(s, p, Vector2::zeros()).unwrap();
            assert_abs_diff_eq!(coupled[2 * i], own.x, epsilon = 1e-12);
            assert_abs_diff_eq!(coupled[2 * i + 1], own.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn correction_is_subtracted_and_size_checked() {
        let p = params(10.0, 1.0, 0.0, 2.0, Bifurcation::Oscillate);
        let net = NetworkState::new(
            vec![
                OscillatorState::new(0.3, 0.1),
                OscillatorState::new(-0.2, 0.5),
            ],
            vec![p, p],
        )
        .unwrap();
        let topo =
            NetworkTopology::new(2, vec![Edge::new(1, 0, 0.0), Edge::new(0, 1, 0.0)], 1.0).unwrap();
        let base = coupled_derivative(&net, &topo, None).unwrap();
        let corr = DVector::from_vec(vec![0.1, -0.2, 0.3, -0.4]);
        let with = coupled_derivative(&net, &topo, Some(&corr)).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(with[k], base[k] - corr[k], epsilon = 1e-15);
        }
        let bad = DVector::from_vec(vec![0.0; 3]);
        assert!(coupled_derivative(&net, &topo, Some(&bad)).is_err());
    }

    proptest! {
        // Rotating the state rotates the field: f(R x) = R f(x).
        #[test]
        fn rotation_equivariance(
            u in -3.0..3.0f64,
            v in -3.0..3.0f64,
            angle in -std::f64::consts::PI..std::f64::consts::PI,
            rho in 0.1..3.0f64,
            lambda in 0.5..40.0f64,
            omega in 0.0..80.0f64,
            oscillate in proptest::bool::ANY,
        ) {
            let sigma = if oscillate { Bifurcation::Oscillate } else { Bifurcation::Inhibit };
            let p = params(lambda, rho, 0.0, omega, sigma);
            let r = rotation(angle);
            let x = Vector2::new(u, v);
            let fx = hopf_derivative(&OscillatorState::new(x.x, x.y), &p, Vector2::zeros()).unwrap();
            let rx = r * x;
            let frx = hopf_derivative(&OscillatorState::new(rx.x, rx.y), &p, Vector2::zeros()).unwrap();
            let rfx = r * fx;
            prop_assert!((frx - rfx).norm() <= 1e-12 * (1.0 + rfx.norm()));
        }

        // Scaling the state scales the field once the radius is scaled too:
        // f(g x; rho) = g f(x; rho/g).
        #[test]
        fn scaling_covariance(
            u in -2.0..2.0f64,
            v in -2.0..2.0f64,
            g in 0.1..10.0f64,
            rho in 0.2..2.0f64,
            lambda in 0.5..40.0f64,
            omega in 0.0..80.0f64,
        ) {
            let p_scaled = params(lambda, rho, 0.0, omega, Bifurcation::Oscillate);
            let p_base = params(lambda, rho / g, 0.0, omega, Bifurcation::Oscillate);
            let gx = Vector2::new(g * u, g * v);
            let f_gx = hopf_derivative(&OscillatorState::new(gx.x, gx.y), &p_scaled, Vector2::zeros()).unwrap();
            let f_x = hopf_derivative(&OscillatorState::new(u, v), &p_base, Vector2::zeros()).unwrap();
            let gf_x = g * f_x;
            prop_assert!((f_gx - gf_x).norm() <= 1e-12 * (1.0 + gf_x.norm()));
        }

        // One explicit integration step moves the radius toward the orbit
        // whenever the state starts measurably off it.  The step size shrinks
        // with the local radial stiffness lambda * (r/rho)^2 so the fourth-order
        // step stays inside its stability region for every drawn state.
        #[test]
        fn radius_attraction_per_step(
            r0 in 0.05..2.5f64,
            phase in 0.0..std::f64::consts::TAU,
            rho in 0.1..2.0f64,
            lambda in 1.0..30.0f64,
            omega in 0.0..80.0f64,
        ) {
            prop_assume!((r0 - rho).abs() > 1e-3 * rho);
            let p = params(lambda, rho, 0.0, omega, Bifurcation::Oscillate);
            let dt = (0.1 / (lambda * ((r0 / rho).powi(2) + 1.0))).min(1e-3);
            let s0 = OscillatorState::new(r0 * phase.cos(), r0 * phase.sin());
            // Classic fourth-order step.
            let f = |s: &OscillatorState| hopf_derivative(s, &p, Vector2::zeros()).unwrap();
            let k1 = f(&s0);
            let k2 = f(&OscillatorState::new(s0.u + 0.5 * dt * k1.x, s0.v + 0.5 * dt * k1.y));
            let k3 = f(&OscillatorState::new(s0.u + 0.5 * dt * k2.x, s0.v + 0.5 * dt * k2.y));
            let k4 = f(&OscillatorState::new(s0.u + dt * k3.x, s0.v + dt * k3.y));
            let s1 = OscillatorState::new(
                s0.u + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                s0.v + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
            );
            let e0 = (s0.shifted(&p).norm() - rho).abs();
            let e1 = (s1.shifted(&p).norm() - rho).abs();
            prop_assert!(e1 < e0, "radius error grew: {} -> {}", e0, e1);
        }
    }
}
