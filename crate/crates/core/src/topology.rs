//! Directed coupling graphs, their matrix representations, and the
//! synchronization gain condition.
//!
//! An edge `to <- from` couples oscillator `to` to `from` with a phase
//! offset. A valid graph is balanced (per-node in-degree equals out-degree),
//! phase-antisymmetric on bidirectional pairs, and has phase sums around
//! every directed cycle vanishing mod 2*pi. Those conditions make the edge
//! phases expressible as differences of per-node potentials (phase of each
//! node relative to node 1), which is what the block-diagonal transform T is
//! built from.

use crate::error::{Error, Result, TopologyError};
use crate::oscillator::{rotation, HopfParams, NetworkState};
use nalgebra::DMatrix;
use std::collections::VecDeque;

/// Tolerance for phase-consistency residuals [rad].
pub const PHASE_RESIDUAL_TOL: f64 = 1e-9;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Directed coupling edge `to <- from` with phase offset [rad]. A positive
/// phase makes node `to` lead node `from` on the synchronized orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub from: usize,
    pub phase: f64,
}

impl Edge {
    pub fn new(to: usize, from: usize, phase: f64) -> Self {
        Edge { to, from, phase }
    }
}

/// Coupling graph over `n` oscillators with a shared diffusive gain.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub n: usize,
    pub edges: Vec<Edge>,
    /// Diffusive coupling gain k, >= 0.
    pub gain: f64,
}

impl NetworkTopology {
    /// Basic well-formedness: index ranges, no self-loops, no duplicate
    /// directed edges, finite phases, finite non-negative gain. Structural
    /// validity is checked separately by [`NetworkTopology::validate`].
    pub fn new(n: usize, edges: Vec<Edge>, gain: f64) -> Result<Self> {
        if n == 0 {
            return Err(TopologyError::Empty.into());
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::invalid(format!(
                "coupling gain must be finite and >= 0, got {gain}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            for node in [e.to, e.from] {
                if node >= n {
                    return Err(TopologyError::NodeOutOfRange { node: node + 1, n }.into());
                }
            }
            if e.to == e.from {
                return Err(TopologyError::SelfLoop { node: e.to + 1 }.into());
            }
            if !e.phase.is_finite() {
                return Err(Error::invalid("edge phase must be finite"));
            }
            if !seen.insert((e.to, e.from)) {
                return Err(TopologyError::DuplicateEdge {
                    to: e.to + 1,
                    from: e.from + 1,
                }
                .into());
            }
        }
        Ok(NetworkTopology { n, edges, gain })
    }

    /// In-degree of every node (number of incoming coupling edges).
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for e in &self.edges {
            d[e.to] += 1;
        }
        d
    }

    /// Checks balance, phase antisymmetry on bidirectional pairs,
    /// connectivity to node 1, and cycle-consistency of the phases.
    /// Reports the first violation found.
    pub fn validate(&self) -> Result<()> {
        let mut in_deg = vec![0usize; self.n];
        let mut out_deg = vec![0usize; self.n];
        for e in &self.edges {
            in_deg[e.to] += 1;
            out_deg[e.from] += 1;
        }
        for node in 0..self.n {
            if in_deg[node] != out_deg[node] {
                return Err(TopologyError::Unbalanced {
                    node: node + 1,
                    in_degree: in_deg[node],
                    out_degree: out_deg[node],
                }
                .into());
            }
        }

        for (idx, e) in self.edges.iter().enumerate() {
            for back in &self.edges[idx + 1..] {
                if back.to == e.from && back.from == e.to {
                    let residual = wrap_angle(e.phase + back.phase);
                    if residual.abs() > PHASE_RESIDUAL_TOL {
                        return Err(TopologyError::PhaseAntisymmetry {
                            a: e.to + 1,
                            b: e.from + 1,
                            residual_deg: residual.to_degrees(),
                        }
                        .into());
                    }
                }
            }
        }

        let potentials = self.relative_phases()?;
        for e in &self.edges {
            let residual = wrap_angle(potentials[e.from] - potentials[e.to] - e.phase);
            if residual.abs() > PHASE_RESIDUAL_TOL {
                return Err(TopologyError::InconsistentCycle {
                    to: e.to + 1,
                    from: e.from + 1,
                    residual_deg: residual.to_degrees(),
                }
                .into());
            }
        }
        Ok(())
    }

    /// Per-node phase relative to node 1 (potentials), accumulated along a
    /// breadth-first spanning tree over the undirected support. For edge
    /// `i <- j` with phase d the relation is d = pot[j] - pot[i]; pot[0] = 0.
    /// Fails if some node is unreachable from node 1.
    pub fn relative_phases(&self) -> Result<Vec<f64>> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for e in &self.edges {
            // Stored as (neighbor, potential increment when walking there).
            adj[e.from].push((e.to, -e.phase));
            adj[e.to].push((e.from, e.phase));
        }
        let mut pot = vec![f64::NAN; self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &(w, inc) in &adj[u] {
                if pot[w].is_nan() {
                    pot[w] = pot[u] + inc;
                    queue.push_back(w);
                }
            }
        }
        if let Some(node) = pot.iter().position(|p| p.is_nan()) {
            return Err(TopologyError::Disconnected { node: node + 1 }.into());
        }
        Ok(pot)
    }
}

/// Matrix forms of a coupling graph for a particular set of per-node
/// amplitudes: the block coupling matrix G, the plain Laplacian L, the
/// block-diagonal transform T with G = T^-1 L T, and an orthonormal basis V
/// of the complement of the synchronized directions. `phases` and `rhos`
/// record the inputs the matrices were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub g: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Node potentials (phase of node i relative to node 1) [rad].
    pub phases: Vec<f64>,
    /// Per-node amplitudes the ratio blocks were built from [rad].
    pub rhos: Vec<f64>,
}

/// Orthonormal basis of the orthogonal complement of the two synchronized
/// directions in R^(2n): a Helmert basis of ones-complement in R^n, applied
/// to both planar components. Columns satisfy V^T V = I and V^T (1 (x) I2) = 0.
pub fn complement_basis(n: usize) -> DMatrix<f64> {
    let cols = if n == 0 { 0 } else { n - 1 };
    let mut v = DMatrix::zeros(2 * n, 2 * cols);
    for j in 1..n {
        let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            v[(2 * i, 2 * (j - 1))] = scale;
            v[(2 * i + 1, 2 * (j - 1) + 1)] = scale;
        }
        v[(2 * j, 2 * (j - 1))] = -(j as f64) * scale;
        v[(2 * j + 1, 2 * (j - 1) + 1)] = -(j as f64) * scale;
    }
    v
}

/// Assembles the matrix forms for a validated topology. Edge phases are
/// canonicalized through the node potentials, so the transform identity
/// G = T^-1 L T holds to machine precision; the assembly is rejected if it
/// does not.
pub fn build_matrices(topo: &NetworkTopology, params: &[HopfParams]) -> Result<CouplingMatrices> {
    if params.len() != topo.n {
        return Err(Error::SizeMismatch {
            expected: topo.n,
            got: params.len(),
        });
    }
    topo.validate()?;
    let phases = topo.relative_phases()?;
    let rhos: Vec<f64> = params.iter().map(|p| p.rho).collect();
    let n = topo.n;

    let mut g = DMatrix::zeros(2 * n, 2 * n);
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    for e in &topo.edges {
        let (i, j) = (e.to, e.from);
        for s in 0..2 {
            g[(2 * i + s, 2 * i + s)] += 1.0;
            l[(2 * i + s, 2 * i + s)] += 1.0;
            l[(2 * i + s, 2 * j + s)] -= 1.0;
        }
        let block = -(rhos[i] / rhos[j]) * rotation(phases[j] - phases[i]);
        for r in 0..2 {
            for c in 0..2 {
                g[(2 * i + r, 2 * j + c)] += block[(r, c)];
            }
        }
    }

    let mut t = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let block = (rhos[0] / rhos[i]) * rotation(phases[i]);
        for r in 0..2 {
            for c in 0..2 {
                t[(2 * i + r, 2 * i + c)] = block[(r, c)];
            }
        }
    }

    // T^-1 block-wise: inverse ratio, opposite rotation.
    let mut t_inv = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let block = (rhos[i] / rhos[0]) * rotation(-phases[i]);
        for r in 0..2 {
            for c in 0..2 {
                t_inv[(2 * i + r, 2 * i + c)] = block[(r, c)];
            }
        }
    }
    let similar = &t_inv * &l * &t;
    let scale = 1.0 + g.amax();
    if (&g - &similar).amax() > 1e-10 * scale {
        return Err(Error::invalid(
            "coupling matrix does not match its Laplacian transform",
        ));
    }

    Ok(CouplingMatrices {
        g,
        l,
        t,
        v: complement_basis(n),
        phases,
        rhos,
    })
}

/// Result of the synchronization gain analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncAnalysis {
    /// Smallest eigenvalue of V^T (L + L^T)/2 V.
    pub lambda_min: f64,
    /// Gain threshold lambda / lambda_min; `None` when lambda_min is not
    /// positive, in which case the sufficient condition cannot certify any
    /// gain.
    pub min_gain: Option<f64>,
}

impl SyncAnalysis {
    /// Guaranteed exponential contraction rate of the sync error at gain k.
    pub fn rate(&self, gain: f64, lambda: f64) -> f64 {
        gain * self.lambda_min - lambda
    }
}

/// Evaluates the sufficient synchronization condition: coupling gains above
/// lambda / lambda_min guarantee exponential convergence to the synchronized
/// orbit. Requires at least two nodes.
pub fn sync_gain_threshold(topo: &NetworkTopology, lambda: f64) -> Result<SyncAnalysis> {
    if topo.n < 2 {
        return Err(Error::invalid(
            "gain condition needs at least two oscillators",
        ));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be finite and > 0, got {lambda}"
        )));
    }
    topo.validate()?;
    let n = topo.n;
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    for e in &topo.edges {
        for s in 0..2 {
            l[(2 * e.to + s, 2 * e.to + s)] += 1.0;
            l[(2 * e.to + s, 2 * e.from + s)] -= 1.0;
        }
    }
    let v = complement_basis(n);
    let sym = (&l + l.transpose()) * 0.5;
    let projected = v.transpose() * sym * &v;
    let eigen = nalgebra::SymmetricEigen::new(projected);
    let lambda_min = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let min_gain = if lambda_min > 1e-12 {
        Some(lambda / lambda_min)
    } else {
        None
    };
    Ok(SyncAnalysis {
        lambda_min,
        min_gain,
    })
}

/// Distance of the network state from the synchronized set:
/// || V^T T {x} || with {x} the stacked centre offsets. Rejects matrices
/// built for different amplitudes than the network currently carries.
pub fn sync_error(net: &NetworkState, mat: &CouplingMatrices) -> Result<f64> {
    if net.len() != mat.rhos.len() {
        return Err(Error::SizeMismatch {
            expected: mat.rhos.len(),
            got: net.len(),
        });
    }
    if net
        .params
        .iter()
        .zip(&mat.rhos)
        .any(|(p, &rho)| p.rho != rho)
    {
        return Err(Error::StaleMatrices);
    }
    let z = &mat.t * net.shifted_stack();
    Ok((mat.v.transpose() * z).norm())
}
