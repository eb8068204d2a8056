// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Propagation of the reduced transfer dynamics and its auxiliary systems.
//!
//! # The five-variable system
//!
//! During the 2I₁zI₂z → 2I₂zI₃z transfer only five operator expectation
//! values couple to each other: z₁ = ⟨2I₁zI₂z⟩, x₁ = ⟨2I₁zI₂x⟩,
//! y₂ = ⟨√2(2I₁zI₂yI₃z + I₂y/2)⟩, x₃ = −⟨2I₂xI₃z⟩ and z₃ = ⟨2I₂zI₃z⟩.
//! In normalized time (units of 1/(πJ√2)) their equations of motion are
//! linear,
//!
//! ```text
//!   d/dt (z₁, x₁, y₂, x₃, z₃)ᵀ = G(Ω) (z₁, x₁, y₂, x₃, z₃)ᵀ,
//!
//!         ⎡ 0  −Ω   0   0   0 ⎤
//!         ⎢ Ω  −ξ  −1   0   0 ⎥
//!   G(Ω) = ⎢ 0   1  −ξ  −1   0 ⎥
//!         ⎢ 0   0   1  −ξ  −Ω ⎥
//!         ⎣ 0   0   0   Ω   0 ⎦
//! ```
//!
//! with ξ the normalized transverse relaxation rate of the middle spin and
//! Ω(t) the control amplitude. The symmetric part of G is diag(0,−ξ,−ξ,−ξ,0),
//! so the Euclidean norm of the state never grows and is exactly conserved
//! when ξ = 0. The transfer efficiency is z₃ at the end of the horizon.
//!
//! Propagation is exact: the control is piecewise constant, so each segment
//! is advanced by a matrix exponential (scaling-and-squaring). Instantaneous
//! rotations — the hard-pulse limit — act as exact plane rotations on
//! (z₁, x₁) and (x₃, z₃). A fixed-step Runge–Kutta integrator is kept as an
//! independent cross-check.
//!
//! # Radial and quadratic pictures
//!
//! Grouping the variables into three radii, r₁² = z₁² + x₁², r₂² = y₂²,
//! r₃² = x₃² + z₃², and writing the polar angles as controls u_i = cos θ_i
//! turns the dynamics into the bilinear r-system
//!
//! ```text
//!   ṙ = ⎡ −ξu₁²   −u₁u₂     0    ⎤ r,     u_i ∈ [−1, 1].
//!       ⎢  u₁u₂   −ξu₂²   −u₂u₃  ⎥
//!       ⎣   0      u₂u₃   −ξu₃²  ⎦
//! ```
//!
//! Squaring, p_i = r_i², normalizing the products m_i ∝ u_i r_i to a unit
//! vector, and rescaling time by dτ/dt = Σ(u_i r_i)² makes the dynamics
//! linear in τ with constant rates dp/dτ = diag(A m mᵀ),
//! A = 2·[−ξ,−1,0; 1,−ξ,−1; 0,1,−ξ]. That relaxed picture is where the
//! transfer bound κ is proved and certified (see [`crate::bounds`]); this
//! module supplies the propagators for all three pictures.

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::pulses::PulseProgram;
use crate::{invalid, numerical, Result};

/// 5×5 real matrix acting on the reduced state.
pub type Mat5 = SMatrix<f64, 5, 5>;
/// Reduced state as a dense vector (z₁, x₁, y₂, x₃, z₃).
pub type Vec5 = SVector<f64, 5>;
type Mat3 = SMatrix<f64, 3, 3>;
type Vec3 = SVector<f64, 3>;

/// Physical parameters and the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Normalized relaxation rate ξ = k/(J√2) of the middle spin.
    pub xi: f64,
    /// Total duration T in units of 1/(πJ√2).
    pub horizon: f64,
    /// Number of equal time slices N.
    pub steps: usize,
}

impl ChainParams {
    /// Validates and builds chain parameters.
    pub fn new(xi: f64, horizon: f64, steps: usize) -> Result<Self> {
        if !xi.is_finite() || xi < 0.0 {
            return Err(invalid(format!(
                "relaxation parameter must be non-negative and finite, got {xi}"
            )));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(invalid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(invalid(format!("need at least 2 time steps, got {steps}")));
        }
        Ok(ChainParams { xi, horizon, steps })
    }

    /// Default grid — T = 10, N = 1000 — which is long and fine enough that
    /// doubling N moves any reported efficiency by less than 1e−5.
    pub fn standard(xi: f64) -> Result<Self> {
        ChainParams::new(xi, 10.0, 1000)
    }

    /// Segment duration Δt = T/N.
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Expectation values of the five operators participating in the transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// ⟨2I₁zI₂z⟩ — the source two-spin order.
    pub z1: f64,
    /// ⟨2I₁zI₂x⟩.
    pub x1: f64,
    /// ⟨√2(2I₁zI₂yI₃z + I₂y/2)⟩ — the middle, relaxation-exposed pathway.
    pub y2: f64,
    /// −⟨2I₂xI₃z⟩.
    pub x3: f64,
    /// ⟨2I₂zI₃z⟩ — the target two-spin order.
    pub z3: f64,
}

impl ReducedState {
    /// The canonical initial condition: all order on the source operator.
    pub fn initial_order() -> Self {
        ReducedState {
            z1: 1.0,
            x1: 0.0,
            y2: 0.0,
            x3: 0.0,
            z3: 0.0,
        }
    }

    /// Packs the state into a vector ordered (z₁, x₁, y₂, x₃, z₃).
    pub fn to_vector(self) -> Vec5 {
        Vec5::from([self.z1, self.x1, self.y2, self.x3, self.z3])
    }

    /// Unpacks a vector ordered (z₁, x₁, y₂, x₃, z₃).
    pub fn from_vector(v: Vec5) -> Self {
        ReducedState {
            z1: v[0],
            x1: v[1],
            y2: v[2],
            x3: v[3],
            z3: v[4],
        }
    }

    /// Euclidean norm — non-increasing along any trajectory with ξ ≥ 0.
    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// Polar angle θ₃ of the target pair: the two-argument arctangent of
    /// (z₃, x₃), which lies in [0, π/2] while both components are
    /// nonnegative. When the pair is still empty (both magnitudes below
    /// 1e−12, as at t = 0) the angle is defined as 0.
    pub fn theta3(&self) -> f64 {
        if self.x3.abs() < 1e-12 && self.z3.abs() < 1e-12 {
            0.0
        } else {
            f64::atan2(self.z3, self.x3)
        }
    }
}

/// A simulated trajectory on the uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Grid times, strictly increasing, from 0 to T inclusive.
    pub times: Vec<f64>,
    /// One state per grid time. The first entry is the initial state before
    /// any rotation event scheduled at t = 0; the last entry includes every
    /// event up to and including t = T.
    pub states: Vec<ReducedState>,
    /// θ₃ per grid point (see [`ReducedState::theta3`]).
    pub theta3: Vec<f64>,
}

impl Trajectory {
    /// Assembles a trajectory from a time grid and matching states,
    /// deriving θ₃ per point.
    pub fn from_parts(times: Vec<f64>, states: Vec<ReducedState>) -> Self {
        assert_eq!(times.len(), states.len(), "one state per grid time");
        let theta3 = states.iter().map(ReducedState::theta3).collect();
        Trajectory {
            times,
            states,
            theta3,
        }
    }

    /// State at the end of the horizon.
    pub fn final_state(&self) -> ReducedState {
        *self
            .states
            .last()
            .expect("trajectory has at least one point")
    }

    /// Transfer efficiency: z₃ at the end of the horizon.
    pub fn efficiency(&self) -> f64 {
        self.final_state().z3
    }

    /// Renders the trajectory as CSV with header
    /// `t,z1,x1,y2,x3,z3,theta3`, twelve significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,z1,x1,y2,x3,z3,theta3\n");
        for ((t, s), th) in self.times.iter().zip(&self.states).zip(&self.theta3) {
            out.push_str(&format!(
                "{t:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{th:.11e}\n",
                s.z1, s.x1, s.y2, s.x3, s.z3
            ));
        }
        out
    }
}

/// The generator G(Ω) of the reduced dynamics at relaxation ξ and control
/// amplitude Ω. Its symmetric part is diag(0, −ξ, −ξ, −ξ, 0) for every Ω.
pub fn reduced_generator(xi: f64, omega: f64) -> Mat5 {
    Mat5::from_row_slice(&[
        0.0, -omega, 0.0, 0.0, 0.0, //
        omega, -xi, -1.0, 0.0, 0.0, //
        0.0, 1.0, -xi, -1.0, 0.0, //
        0.0, 0.0, 1.0, -xi, -omega, //
        0.0, 0.0, 0.0, omega, 0.0,
    ])
}

/// Derivative of G(Ω) with respect to Ω: the antisymmetric control generator
/// that rotates (z₁, x₁) and (x₃, z₃).
pub fn control_generator() -> Mat5 {
    let mut b = Mat5::zeros();
    b[(0, 1)] = -1.0;
    b[(1, 0)] = 1.0;
    b[(3, 4)] = -1.0;
    b[(4, 3)] = 1.0;
    b
}

/// Applies an instantaneous rotation by `angle` in the (z₁, x₁) and
/// (x₃, z₃) planes — the action of a hard pulse on the middle spin, under
/// which y₂ is invariant.
pub fn delta_rotate(state: ReducedState, angle: f64) -> ReducedState {
    let (s, c) = angle.sin_cos();
    ReducedState {
        z1: state.z1 * c - state.x1 * s,
        x1: state.z1 * s + state.x1 * c,
        y2: state.y2,
        x3: state.x3 * c - state.z3 * s,
        z3: state.x3 * s + state.z3 * c,
    }
}

/// Matrix exponentials of G(Ω_j)·Δt for a piecewise-constant control, one
/// per segment. This is the inner loop of both the propagator and the
/// pulse-shape optimizer, so segments are processed in parallel.
pub fn segment_propagators(samples: &[f64], dt: f64, xi: f64) -> Vec<Mat5> {
    samples
        .par_iter()
        .map(|&omega| (reduced_generator(xi, omega) * dt).exp())
        .collect()
}

/// Forward states at all segment boundaries: `states[0]` is `initial`,
/// `states[j+1] = propagators[j] · states[j]`.
pub fn propagate_states(initial: Vec5, propagators: &[Mat5]) -> Vec<Vec5> {
    let mut states = Vec::with_capacity(propagators.len() + 1);
    states.push(initial);
    let mut v = initial;
    for p in propagators {
        v = p * v;
        states.push(v);
    }
    states
}

/// Resolves the per-segment control amplitudes for a pulse on the grid of
/// `params`. Piecewise programs must already match the grid; Gaussian
/// programs are midpoint-sampled; delta programs contribute no continuous
/// amplitude.
pub(crate) fn segment_samples(pulse: &PulseProgram, params: &ChainParams) -> Result<Vec<f64>> {
    let rel = (pulse.horizon() - params.horizon).abs() / params.horizon.max(1.0);
    if rel > 1e-6 {
        return Err(invalid(format!(
            "pulse horizon {} does not match simulation horizon {}",
            pulse.horizon(),
            params.horizon
        )));
    }
    match pulse {
        PulseProgram::Piecewise { samples, .. } => {
            if samples.len() != params.steps {
                return Err(invalid(format!(
                    "piecewise pulse has {} segments but the grid has {}",
                    samples.len(),
                    params.steps
                )));
            }
            Ok(samples.clone())
        }
        PulseProgram::Gaussian { .. } => match pulse.discretize(params.steps)? {
            PulseProgram::Piecewise { samples, .. } => Ok(samples),
            _ => unreachable!("discretize returns a piecewise program"),
        },
        PulseProgram::Deltas { .. } => Ok(vec![0.0; params.steps]),
    }
}

/// Shared propagation driver: walks the grid, splitting segments at
/// rotation-event times. `advance` evolves a state vector for a duration
/// `tau` under constant control `omega`.
fn propagate_with(
    initial: ReducedState,
    pulse: &PulseProgram,
    params: &ChainParams,
    advance: impl Fn(Vec5, f64, f64) -> Vec5,
) -> Result<Trajectory> {
    let samples = segment_samples(pulse, params)?;
    let events = pulse.delta_events();
    let dt = params.dt();

    let mut v = initial.to_vector();
    let mut times = Vec::with_capacity(params.steps + 1);
    let mut states = Vec::with_capacity(params.steps + 1);
    times.push(0.0);
    states.push(initial);

    let mut next_event = 0;
    for (j, &omega) in samples.iter().enumerate() {
        let t0 = j as f64 * dt;
        let t1 = (j + 1) as f64 * dt;
        // Events inside [t0, t1) split the segment; an event landing exactly
        // on a grid time fires before the segment that starts there.
        let mut cursor = t0;
        while next_event < events.len() && events[next_event].0 < t1 {
            let (te, angle) = events[next_event];
            if te > cursor {
                v = advance(v, omega, te - cursor);
                cursor = te;
            }
            v = delta_rotate(ReducedState::from_vector(v), angle).to_vector();
            next_event += 1;
        }
        v = advance(v, omega, t1 - cursor);
        times.push(t1);
        states.push(ReducedState::from_vector(v));
    }
    // Events scheduled exactly at t = T fire after the final segment and are
    // reflected in the last trajectory point.
    let mut last = *states.last().expect("at least one state");
    while next_event < events.len() {
        last = delta_rotate(last, events[next_event].1);
        next_event += 1;
    }
    *states.last_mut().expect("at least one state") = last;

    if states
        .iter()
        .any(|s| !s.to_vector().iter().all(|x| x.is_finite()))
    {
        return Err(numerical(
            "reduced-state propagation produced non-finite values",
        ));
    }
    Ok(Trajectory::from_parts(times, states))
}

/// Propagates the reduced system exactly: one matrix exponential per
/// piecewise-constant segment, exact plane rotations at delta events.
pub fn propagate_reduced(
    initial: ReducedState,
    pulse: &PulseProgram,
    params: &ChainParams,
) -> Result<Trajectory> {
    let xi = params.xi;
    propagate_with(initial, pulse, params, |v, omega, tau| {
        (reduced_generator(xi, omega) * tau).exp() * v
    })
}

/// Propagates the reduced system with a classical 4th-order Runge–Kutta
/// rule at `substeps` sub-iterations per grid segment. Kept as an
/// independent cross-check of the matrix-exponential path; with
/// `substeps ≥ 4` the two agree to better than 1e−8 per component on the
/// default grid.
pub fn propagate_reduced_rk4(
    initial: ReducedState,
    pulse: &PulseProgram,
    params: &ChainParams,
    substeps: usize,
) -> Result<Trajectory> {
    if substeps == 0 {
        return Err(invalid("need at least one Runge-Kutta substep per segment"));
    }
    let xi = params.xi;
    let dt = params.dt();
    propagate_with(initial, pulse, params, move |v, omega, tau| {
        let g = reduced_generator(xi, omega);
        // Scale the substep count with the (possibly event-shortened)
        // segment length so accuracy is uniform across splits.
        let n = ((tau / dt) * substeps as f64).ceil().max(1.0) as usize;
        let h = tau / n as f64;
        let mut v = v;
        for _ in 0..n {
            let k1 = g * v;
            let k2 = g * (v + 0.5 * h * k1);
            let k3 = g * (v + 0.5 * h * k2);
            let k4 = g * (v + h * k3);
            v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        v
    })
}

// ---------------------------------------------------------------------------
// Radial (r) picture
// ---------------------------------------------------------------------------

/// One grid point of an r-system trajectory: the three radii together with
/// the controls active on the segment that starts at this point (the final
/// point repeats the last segment's controls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RState {
    /// Radius of the (z₁, x₁) pair.
    pub r1: f64,
    /// Radius of the y₂ axis (|y₂|).
    pub r2: f64,
    /// Radius of the (x₃, z₃) pair.
    pub r3: f64,
    /// Control u₁ = cos θ₁ ∈ [−1, 1].
    pub u1: f64,
    /// Control u₂ = cos θ₂ ∈ [−1, 1].
    pub u2: f64,
    /// Control u₃ = cos θ₃ ∈ [−1, 1].
    pub u3: f64,
}

/// Generator of the r-system for controls u = (u₁, u₂, u₃): −ξu_i² on the
/// diagonal, ±u_iu_j on the nearest-neighbor couplings.
pub fn r_generator(u: [f64; 3], xi: f64) -> Mat3 {
    let [u1, u2, u3] = u;
    Mat3::from_row_slice(&[
        -xi * u1 * u1,
        -u1 * u2,
        0.0, //
        u1 * u2,
        -xi * u2 * u2,
        -u2 * u3, //
        0.0,
        u2 * u3,
        -xi * u3 * u3,
    ])
}

/// Integrates the r-system under piecewise-constant control waveforms with a
/// fixed-step 4th-order Runge–Kutta rule, one step per grid segment.
///
/// `controls` holds one (u₁, u₂, u₃) triple per segment and must cover the
/// whole grid; all components must lie in [−1, 1]. Halving the step (by
/// doubling `steps` and repeating each control) changes r₃(T) by less than
/// 1e−8 on the grids used in this crate.
pub fn propagate_r_system(
    controls: &[[f64; 3]],
    initial: [f64; 3],
    xi: f64,
    horizon: f64,
    steps: usize,
) -> Result<Vec<RState>> {
    if steps == 0 {
        return Err(invalid("r-system integration needs at least one step"));
    }
    if controls.len() < steps {
        return Err(invalid(format!(
            "control waveform has {} segments but the grid has {steps}",
            controls.len()
        )));
    }
    for (j, u) in controls[..steps].iter().enumerate() {
        if u.iter().any(|c| !c.is_finite() || c.abs() > 1.0 + 1e-12) {
            return Err(invalid(format!(
                "control triple {u:?} at segment {j} leaves [-1, 1]"
            )));
        }
    }
    let h = horizon / steps as f64;
    let mut r = Vec3::from(initial);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(make_rstate(r, controls[0]));
    for u in &controls[..steps] {
        let g = r_generator(*u, xi);
        let k1 = g * r;
        let k2 = g * (r + 0.5 * h * k1);
        let k3 = g * (r + 0.5 * h * k2);
        let k4 = g * (r + h * k3);
        r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(make_rstate(r, *u));
    }
    if out
        .iter()
        .any(|s| ![s.r1, s.r2, s.r3].iter().all(|x| x.is_finite()))
    {
        return Err(numerical("r-system integration produced non-finite radii"));
    }
    Ok(out)
}

fn make_rstate(r: Vec3, u: [f64; 3]) -> RState {
    RState {
        r1: r[0],
        r2: r[1],
        r3: r[2],
        u1: u[0],
        u2: u[1],
        u3: u[2],
    }
}

// ---------------------------------------------------------------------------
// Quadratic (p) picture
// ---------------------------------------------------------------------------

/// A point of the quadratic picture: p_i = r_i² with the unit direction m
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PVector {
    /// p₁ = r₁².
    pub p1: f64,
    /// p₂ = r₂².
    pub p2: f64,
    /// p₃ = r₃².
    pub p3: f64,
    /// Unit direction m ∝ (u₁r₁, u₂r₂, u₃r₃).
    pub m: [f64; 3],
}

/// The transfer matrix A = 2·[−ξ,−1,0; 1,−ξ,−1; 0,1,−ξ] of the quadratic
/// picture: dp/dτ = diag(A m mᵀ).
pub fn transfer_matrix(xi: f64) -> Mat3 {
    2.0 * Mat3::from_row_slice(&[
        -xi, -1.0, 0.0, //
        1.0, -xi, -1.0, //
        0.0, 1.0, -xi,
    ])
}

/// Constant rates dp/dτ = diag(A m mᵀ) for a fixed unit direction m:
///
/// ```text
///   ṗ₁ = 2(−ξm₁² − m₁m₂)
///   ṗ₂ = 2(m₁m₂ − ξm₂² − m₂m₃)
///   ṗ₃ = 2(m₂m₃ − ξm₃²)
/// ```
pub fn p_rates(m: [f64; 3], xi: f64) -> [f64; 3] {
    let [m1, m2, m3] = m;
    [
        2.0 * (-xi * m1 * m1 - m1 * m2),
        2.0 * (m1 * m2 - xi * m2 * m2 - m2 * m3),
        2.0 * (m2 * m3 - xi * m3 * m3),
    ]
}

/// Drives the quadratic picture with a constant unit direction m from
/// p(0) = (1, 0, 0) until p₁ first reaches zero, entirely in closed form
/// (the motion is linear in τ).
///
/// Returns the stopping time τ and the final p. Fails if m is not a unit
/// vector, or if the p₁ rate is nonnegative so the source never empties.
pub fn propagate_p_linear(m: [f64; 3], xi: f64) -> Result<(f64, PVector)> {
    let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "direction m must be a unit vector, got norm {norm}"
        )));
    }
    let [c1, c2, c3] = p_rates(m, xi);
    if c1 >= 0.0 {
        return Err(invalid(format!(
            "p1 rate {c1} is nonnegative: the source order never empties under this direction"
        )));
    }
    let tau_stop = -1.0 / c1;
    let p = PVector {
        p1: 0.0,
        p2: c2 * tau_stop,
        p3: c3 * tau_stop,
        m,
    };
    Ok((tau_stop, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseProgram;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn generator_matches_printed_structure() {
        let g = reduced_generator(1.0, 0.0);
        assert_eq!(g.diagonal().as_slice(), [0.0, -1.0, -1.0, -1.0, 0.0]);
        assert_eq!(g[(1, 2)], -1.0);
        assert_eq!(g[(2, 1)], 1.0);
        assert_eq!(g[(2, 3)], -1.0);
        assert_eq!(g[(3, 2)], 1.0);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn generator_symmetric_part_is_relaxation_only() {
        for &(xi, omega) in &[(0.0, 0.7), (1.3, -2.1), (0.4, 0.0)] {
            let g = reduced_generator(xi, omega);
            let sym = 0.5 * (g + g.transpose());
            let expected = Mat5::from_diagonal(&Vec5::from([0.0, -xi, -xi, -xi, 0.0]));
            assert_relative_eq!(sym, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn control_generator_is_the_omega_derivative() {
        let b = control_generator();
        let diff = reduced_generator(0.7, 2.5) - reduced_generator(0.7, 0.0);
        assert_relative_eq!(diff, 2.5 * b, epsilon = 1e-15);
    }

    #[test]
    fn zero_control_keeps_initial_order() {
        let params = ChainParams::new(1.0, 10.0, 200).unwrap();
        let pulse = PulseProgram::piecewise(vec![0.0; 200], 10.0).unwrap();
        let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params).unwrap();
        for s in &traj.states {
            assert_relative_eq!(s.z1, 1.0, epsilon = 1e-14);
            assert!(s.x1.abs() < 1e-14 && s.z3.abs() < 1e-14);
        }
    }

    #[test]
    fn hard_pulse_transfer_matches_closed_form() {
        // After a π/2 rotation at t = 0 with the field then off, the target
        // transverse component follows x₃(t) = e^(−ξt)·sin²(t/√2).
        let params = ChainParams::new(1.0, 10.0, 500).unwrap();
        let pulse = PulseProgram::deltas(vec![(0.0, FRAC_PI_2)], 10.0).unwrap();
        let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let expected = (-t).exp() * (t / std::f64::consts::SQRT_2).sin().powi(2);
            assert!(
                (s.x3 - expected).abs() < 1e-10,
                "t={t}: {} vs {expected}",
                s.x3
            );
        }
    }

    #[test]
    fn gaussian_pulse_efficiency_reference_point() {
        let params = ChainParams::standard(1.0).unwrap();
        let pulse = PulseProgram::gaussian(1.11, 1.30, 10.0).unwrap();
        let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params).unwrap();
        assert!((traj.efficiency() - 0.2510).abs() < 5e-4);
        // Pinned high-precision value guarding against propagator regressions.
        assert_relative_eq!(traj.efficiency(), 0.250861994, epsilon = 1e-8);
    }

    #[test]
    fn exponential_and_rk4_paths_agree() {
        let params = ChainParams::new(0.5, 10.0, 400).unwrap();
        let pulse = PulseProgram::gaussian(1.0, 1.4, 10.0).unwrap();
        let exact = propagate_reduced(ReducedState::initial_order(), &pulse, &params).unwrap();
        let rk4 =
            propagate_reduced_rk4(ReducedState::initial_order(), &pulse, &params, 10).unwrap();
        for (a, b) in exact.states.iter().zip(&rk4.states) {
            assert!((a.to_vector() - b.to_vector()).amax() < 1e-8);
        }
    }

    #[test]
    fn norm_never_grows_and_is_conserved_without_relaxation() {
        let pulse = PulseProgram::gaussian(1.2, 1.3, 10.0).unwrap();
        let lossy = ChainParams::new(0.8, 10.0, 300).unwrap();
        let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &lossy).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1].norm() <= w[0].norm() + 1e-12);
        }
        let lossless = ChainParams::new(0.0, 10.0, 300).unwrap();
        let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &lossless).unwrap();
        for s in &traj.states {
            assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn piecewise_pulse_must_match_grid() {
        let params = ChainParams::new(1.0, 10.0, 100).unwrap();
        let pulse = PulseProgram::piecewise(vec![0.1; 50], 10.0).unwrap();
        assert!(propagate_reduced(ReducedState::initial_order(), &pulse, &params).is_err());
        let pulse = PulseProgram::piecewise(vec![0.1; 100], 8.0).unwrap();
        assert!(propagate_reduced(ReducedState::initial_order(), &pulse, &params).is_err());
    }

    #[test]
    fn theta3_starts_at_zero_and_tracks_the_target_pair() {
        assert_eq!(ReducedState::initial_order().theta3(), 0.0);
        let s = ReducedState {
            z1: 0.0,
            x1: 0.0,
            y2: 0.0,
            x3: 0.5,
            z3: 0.5,
        };
        assert_relative_eq!(s.theta3(), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn p_rates_match_transfer_matrix_quadratic_form() {
        let m = [0.6_f64, -0.64, 0.48];
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        let m = [m[0] / norm, m[1] / norm, m[2] / norm];
        let xi = 0.7;
        let rates = p_rates(m, xi);
        let mv = Vec3::from(m);
        let amm = transfer_matrix(xi) * mv * mv.transpose();
        for i in 0..3 {
            assert_relative_eq!(rates[i], amm[(i, i)], epsilon = 1e-14);
        }
    }

    #[test]
    fn p_linear_source_only_direction_transfers_nothing() {
        let (tau, p) = propagate_p_linear([1.0, 0.0, 0.0], 0.5).unwrap();
        assert_relative_eq!(tau, 1.0, epsilon = 1e-15); // rate −2ξ = −1
        assert_eq!(p.p2, 0.0);
        assert_eq!(p.p3, 0.0);
    }

    #[test]
    fn p_linear_rejects_bad_directions() {
        assert!(propagate_p_linear([1.0, 1.0, 0.0], 0.5).is_err());
        // m₂ < 0 makes the p₁ rate positive at ξ = 0.
        let m = [
            std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
            0.0,
        ];
        assert!(propagate_p_linear(m, 0.0).is_err());
    }

    #[test]
    fn r_system_source_decay_only() {
        let controls = vec![[1.0, 0.0, 0.0]; 200];
        let traj = propagate_r_system(&controls, [1.0, 0.0, 0.0], 0.5, 4.0, 200).unwrap();
        let last = traj.last().unwrap();
        assert_relative_eq!(last.r1, (-2.0f64).exp(), epsilon = 1e-9);
        assert_eq!(last.r2, 0.0);
        assert_eq!(last.r3, 0.0);
    }

    #[test]
    fn r_system_norm_conserved_without_relaxation() {
        let controls = vec![[1.0, 1.0, 1.0]; 400];
        let traj = propagate_r_system(&controls, [1.0, 0.0, 0.0], 0.0, 8.0, 400).unwrap();
        for s in traj {
            let norm = (s.r1 * s.r1 + s.r2 * s.r2 + s.r3 * s.r3).sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn r_system_rejects_out_of_range_controls() {
        let controls = vec![[1.5, 0.0, 0.0]; 10];
        assert!(propagate_r_system(&controls, [1.0, 0.0, 0.0], 0.5, 1.0, 10).is_err());
        let controls = vec![[1.0, 0.0, 0.0]; 5];
        assert!(propagate_r_system(&controls, [1.0, 0.0, 0.0], 0.5, 1.0, 10).is_err());
    }
}
