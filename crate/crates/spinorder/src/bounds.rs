// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed-form baselines, the transfer bound, and its numerical certificate.
//!
//! # The bound κ
//!
//! However the control is shaped, the 2I₁zI₂z → 2I₂zI₃z transfer efficiency
//! at normalized relaxation ξ cannot exceed
//!
//! ```text
//!   κ(ξ) = (√(ξ² + 2) − ξ)² / 2 = ξ² + 1 − ξ√(ξ² + 2),
//! ```
//!
//! which decreases from κ(0) = 1 (lossless transfer can be perfect) towards
//! the asymptote 1/(2ξ²). The quantity κ satisfies
//! κ·(1 + ξ² + ξ√(ξ²+2)) = 1 and is the positive root of
//! κ² − 2(ξ²+1)κ + 1 = 0 below 1 — the algebraic facts behind both the
//! attainment construction and the non-exceedance certificate.
//!
//! # Hard-pulse baseline
//!
//! The conventional concatenated-INEPT experiment (two hard π/2 pulses
//! separated by free evolution, see [`crate::pulses::PulseProgram::cinept`])
//! reaches
//!
//! ```text
//!   η_CI(ξ) = exp(−ξ√2·arccot(ξ/√2)) · sin²(arccot(ξ/√2)),
//! ```
//!
//! the peak of the decaying envelope e^(−ξt)·sin²(t/√2), attained at the
//! mixing time t_m = √2·arccot(ξ/√2) with the arccotangent branch in
//! (0, π/2]. For every ξ > 0, η_CI(ξ) < κ(ξ): shaped pulses genuinely beat
//! hard pulses in the presence of relaxation.
//!
//! # Certification
//!
//! In the quadratic picture (see [`crate::dynamics`]) the dynamics are
//! linear, dp/dτ = diag(A m mᵀ) with a unit direction vector m. Two facts
//! are certified numerically:
//!
//! * **Attainment** — the constant direction m ∝ (1, (1−κ)/ξ, κ) keeps the
//!   intermediate inventory p₂ exactly static and drives p₃ to κ² at the
//!   instant the source p₁ empties; thus r₃ = √p₃ reaches κ.
//! * **Non-exceedance** — no piecewise-constant direction schedule does
//!   better: random schedules drawn uniformly from the unit sphere, evolved
//!   with face projection so that every p_i stays nonnegative, never push
//!   p₃ above κ². (Underlying this is the Lyapunov function
//!   Φ = p₃ + κp₂ + κ²p₁, whose τ-derivative is a negative-semidefinite
//!   quadratic form in m with the optimal direction as its kernel.)

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use std::f64::consts::SQRT_2;

use crate::dynamics::{p_rates, propagate_p_linear, r_generator};
use crate::{invalid, numerical, Result};

fn check_xi(xi: f64) -> Result<f64> {
    if !xi.is_finite() || xi < 0.0 {
        return Err(invalid(format!(
            "relaxation parameter must be non-negative and finite, got {xi}"
        )));
    }
    Ok(xi)
}

/// The transfer bound κ(ξ) = (√(ξ²+2) − ξ)²/2.
///
/// Evaluated through the algebraically identical reciprocal
/// 1/(1 + ξ² + ξ√(ξ²+2)), which is free of subtractive cancellation for
/// every ξ ≥ 0 and returns exactly 1 at ξ = 0.
pub fn kappa(xi: f64) -> Result<f64> {
    let xi = check_xi(xi)?;
    let s = (xi * xi + 2.0).sqrt();
    Ok(1.0 / (1.0 + xi * xi + xi * s))
}

/// The concatenated-INEPT efficiency η_CI(ξ) together with its optimal
/// mixing time t_m = √2·arccot(ξ/√2), branch in (0, π/2].
pub fn cinept_efficiency(xi: f64) -> Result<(f64, f64)> {
    let xi = check_xi(xi)?;
    // arccot(ξ/√2) on (0, π/2] is the angle of the point (ξ, √2).
    let theta = f64::atan2(SQRT_2, xi);
    let t_m = SQRT_2 * theta;
    let eta = (-xi * t_m).exp() * theta.sin().powi(2);
    Ok((eta, t_m))
}

/// Summary of the analytic quantities at one ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// Normalized relaxation rate.
    pub xi: f64,
    /// Transfer bound κ(ξ).
    pub kappa: f64,
    /// Hard-pulse (concatenated INEPT) efficiency η_CI(ξ).
    pub eta_ci: f64,
    /// Optimal hard-pulse mixing time t_m.
    pub t_m: f64,
    /// Optimal inventory ratios (u₂r₂/u₁r₁, u₃r₃/u₁r₁) = ((1−κ)/ξ, κ),
    /// with the ξ → 0 limit (√2, 1).
    pub ratios: (f64, f64),
}

/// Computes the full analytic summary at one ξ.
pub fn bound_report(xi: f64) -> Result<BoundReport> {
    let k = kappa(xi)?;
    let (eta_ci, t_m) = cinept_efficiency(xi)?;
    let mid = if xi > 0.0 { (1.0 - k) / xi } else { SQRT_2 };
    Ok(BoundReport {
        xi,
        kappa: k,
        eta_ci,
        t_m,
        ratios: (mid, k),
    })
}

/// The optimal constant direction m ∝ (1, (1−κ)/ξ, κ), normalized; the
/// ξ = 0 singularity in the middle component is resolved by its analytic
/// limit √2, giving m = (1, √2, 1)/2.
pub fn optimal_direction(xi: f64) -> Result<[f64; 3]> {
    let report = bound_report(xi)?;
    let raw = [1.0, report.ratios.0, report.ratios.1];
    let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    Ok([raw[0] / norm, raw[1] / norm, raw[2] / norm])
}

/// Outcome of [`certify_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCertificate {
    /// Normalized relaxation rate.
    pub xi: f64,
    /// The bound κ(ξ).
    pub kappa: f64,
    /// p₃ reached by the optimal constant direction; equals κ² to
    /// floating-point accuracy.
    pub attained_p3: f64,
    /// The p₂ rate under the optimal direction; vanishes identically.
    pub p2_rate: f64,
    /// Number of random schedules probed.
    pub trials: usize,
    /// Largest final p₃ over all random schedules; never exceeds
    /// κ² + tolerance.
    pub max_trial_p3: f64,
}

/// Certifies the bound at one ξ: verifies that the optimal direction
/// attains p₃ = κ² exactly, then drives `trials` random piecewise-constant
/// unit-direction schedules (64 fresh unit-sphere draws per trial, cycled)
/// until the source empties (p₁ ≤ 1e−9) and checks that none exceeds
/// κ² + `tolerance`.
///
/// A trial that does exceed the bound is a genuine certification failure
/// and is reported as a numerical error. Trials are independent and run in
/// parallel; the schedule of trial `i` depends only on `seed` and `i`, so
/// results are reproducible and order-independent.
pub fn certify_bound(
    xi: f64,
    trials: usize,
    tolerance: f64,
    seed: u64,
) -> Result<BoundCertificate> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid(format!(
            "bound certification needs xi > 0, got {xi}"
        )));
    }
    if trials < 100 {
        return Err(invalid(format!(
            "bound certification needs at least 100 trials, got {trials}"
        )));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(invalid(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }

    let k = kappa(xi)?;
    let kappa_sq = k * k;
    let m_opt = optimal_direction(xi)?;
    let p2_rate = p_rates(m_opt, xi)[1];
    let (_, p_final) = propagate_p_linear(m_opt, xi)?;
    if (p_final.p3 - kappa_sq).abs() > 1e-9 {
        return Err(numerical(format!(
            "optimal direction reached p3 = {} instead of kappa^2 = {kappa_sq}",
            p_final.p3
        )));
    }

    let max_trial_p3 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            // Decorrelate trials while keeping each one a pure function of
            // (seed, trial index).
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let dirs: Vec<[f64; 3]> = (0..64).map(|_| UnitSphere.sample(&mut rng)).collect();
            random_schedule_p3(xi, &dirs)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    if max_trial_p3 > kappa_sq + tolerance {
        return Err(numerical(format!(
            "bound violation: a random schedule reached p3 = {max_trial_p3} > kappa^2 + tolerance = {}",
            kappa_sq + tolerance
        )));
    }

    Ok(BoundCertificate {
        xi,
        kappa: k,
        attained_p3: p_final.p3,
        p2_rate,
        trials,
        max_trial_p3,
    })
}

/// Evolves p from (1, 0, 0) under a cyclic schedule of unit directions with
/// fixed per-segment τ budget, projecting the direction onto the feasible
/// faces whenever an inventory empties (p_i = 0 forces u_ir_i = 0, hence
/// m_i = 0), and returns p₃ once the source inventory is exhausted.
fn random_schedule_p3(xi: f64, dirs: &[[f64; 3]]) -> f64 {
    const SEGMENT_TAU: f64 = 0.25;
    const MAX_CYCLES: usize = 200;
    const DONE_P1: f64 = 1e-9;
    const EMPTY: f64 = 1e-12;

    let mut p = [1.0_f64, 0.0, 0.0];
    for _ in 0..MAX_CYCLES {
        for dir in dirs {
            let mut m = *dir;
            let mut budget = SEGMENT_TAU;
            'segment: loop {
                // Project away components that would push an empty
                // inventory negative, renormalizing the direction.
                let mut rates = p_rates(m, xi);
                loop {
                    let mut changed = false;
                    for i in 0..3 {
                        if p[i] <= EMPTY && rates[i] < 0.0 && m[i] != 0.0 {
                            m[i] = 0.0;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                    let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    if norm < 1e-12 {
                        break 'segment; // no admissible motion left
                    }
                    for c in &mut m {
                        *c /= norm;
                    }
                    rates = p_rates(m, xi);
                }
                // Advance to the segment end or the first face crossing,
                // whichever comes first.
                let mut step = budget;
                let mut crossing = None;
                for i in 0..3 {
                    if rates[i] < 0.0 && p[i] > EMPTY {
                        let hit = p[i] / -rates[i];
                        if hit < step {
                            step = hit;
                            crossing = Some(i);
                        }
                    }
                }
                for i in 0..3 {
                    p[i] = (p[i] + rates[i] * step).max(0.0);
                }
                if let Some(i) = crossing {
                    p[i] = 0.0;
                }
                if p[0] <= DONE_P1 {
                    return p[2];
                }
                budget -= step;
                if budget <= 1e-15 {
                    break 'segment;
                }
                // A face was hit mid-segment; reproject and continue.
            }
        }
    }
    // The cycle cap is a safety net for extreme parameter choices; the
    // Lyapunov argument bounds p₃ at every intermediate time as well.
    p[2]
}

// ---------------------------------------------------------------------------
// Held-ratio analysis of the two-radius reduction
// ---------------------------------------------------------------------------

/// Asymptotic target radius of the two-variable reduction when the ratio
/// u₃r₃/(u₁r₁) is held at a constant c ∈ (0, 1]:
///
/// ```text
///   r₃(∞) = √(c·g(c)),    g(c) = (1 − (ξ²+1)c) / ((ξ²+1) − c),
/// ```
///
/// clipped to 0 where the expression turns negative (holding too large a
/// ratio burns the target faster than it fills). The maximizer over c is
/// exactly κ, where g(κ) = κ and r₃(∞) = κ.
pub fn held_ratio_r3_infinity(xi: f64, c: f64) -> Result<f64> {
    let xi = check_xi(xi)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(invalid(format!("held ratio must lie in (0, 1], got {c}")));
    }
    let q = xi * xi + 1.0;
    let g = (1.0 - q * c) / (q - c);
    Ok((c * g).max(0.0).sqrt())
}

/// Integrates the two-variable reduction in real time with feedback that
/// holds u₃r₃/(u₁r₁) = c, and returns r₃ at the end of the horizon.
///
/// Eliminating the intermediate radius (its net rate vanishes on the held
/// ratio) leaves
///
/// ```text
///   d/dt [r₁, r₃] = [ −(ξ+1/ξ)u₁²,  u₁u₃/ξ    ] [r₁]
///                   [  u₁u₃/ξ,    −(ξ+1/ξ)u₃² ] [r₃]
/// ```
///
/// The feedback u₁ = λ/r₁, u₃ = λc/r₃ with λ = min(r₁, r₃/c) keeps both
/// controls within [−1, 1] and the ratio on target; the empty target at
/// t = 0 is handled by seeding the first step with (u₁, u₃) = (0.01, 1).
/// For c = κ and a long horizon the result converges to κ itself.
pub fn simulate_held_ratio(xi: f64, c: f64, horizon: f64, steps: usize) -> Result<f64> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid(format!(
            "the two-variable reduction needs xi > 0, got {xi}"
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(invalid(format!("held ratio must lie in (0, 1], got {c}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
        return Err(invalid("horizon must be positive and steps nonzero"));
    }
    let q = xi + 1.0 / xi;
    let h = horizon / steps as f64;
    let mut r1 = 1.0_f64;
    let mut r3 = 0.0_f64;
    for step in 0..steps {
        let (u1, u3) = if step == 0 {
            (0.01, 1.0)
        } else {
            let lambda = r1.min(r3 / c);
            let u1 = (lambda / r1).clamp(-1.0, 1.0);
            let u3 = (lambda * c / r3).clamp(-1.0, 1.0);
            (u1, u3)
        };
        let a = -q * u1 * u1;
        let b = u1 * u3 / xi;
        let d = -q * u3 * u3;
        // One classical Runge-Kutta step of the frozen-control linear system.
        let f = |x: f64, y: f64| (a * x + b * y, b * x + d * y);
        let (k1x, k1y) = f(r1, r3);
        let (k2x, k2y) = f(r1 + 0.5 * h * k1x, r3 + 0.5 * h * k1y);
        let (k3x, k3y) = f(r1 + 0.5 * h * k2x, r3 + 0.5 * h * k2y);
        let (k4x, k4y) = f(r1 + h * k3x, r3 + h * k3y);
        r1 += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        r3 += (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        if !(r1.is_finite() && r3.is_finite()) {
            return Err(numerical(
                "held-ratio integration produced non-finite radii",
            ));
        }
    }
    Ok(r3)
}

/// Integrates the full three-radius system with ratio-tracking feedback and
/// returns the final target radius, which converges to κ.
///
/// The feedback u_i = λ·m_i/r_i with λ = min_i(r_i/m_i) holds the products
/// u_ir_i proportional to the optimal direction m while keeping every
/// control in [−1, 1]. On that singular arc the intermediate radius is
/// exactly static, so progress measured in real time stalls as the controls
/// shrink; the integration therefore runs in the rescaled time τ (where the
/// quadratic picture is linear) from an analytic seed just after the start
/// to just before the source empties.
pub fn ratio_feedback_r3(xi: f64) -> Result<f64> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid(format!(
            "ratio-tracking feedback needs xi > 0, got {xi}"
        )));
    }
    let m = optimal_direction(xi)?;
    let rates = p_rates(m, xi);
    let tau_stop = -1.0 / rates[0];

    // Seed at a small τ₀ from the known linear motion of p = r²; the
    // intermediate radius starts at a matching small value.
    let tau0 = 1e-6 * tau_stop;
    let eps2 = 1e-6;
    let mut r = [
        (1.0 + rates[0] * tau0).sqrt(),
        eps2,
        (rates[2] * tau0).sqrt(),
    ];

    let controls = |r: &[f64; 3]| -> ([f64; 3], f64) {
        let lambda = (r[0] / m[0]).min(r[1] / m[1]).min(r[2] / m[2]);
        let mut u = [0.0; 3];
        for i in 0..3 {
            u[i] = (lambda * m[i] / r[i]).clamp(-1.0, 1.0);
        }
        // dτ/dt = Σ(u_ir_i)²; guard the rescaling against a vanishing arc.
        let w2 = (0..3).map(|i| (u[i] * r[i]).powi(2)).sum::<f64>();
        (u, w2.max(1e-30))
    };
    let deriv = |r: &[f64; 3]| -> [f64; 3] {
        let (u, w2) = controls(r);
        let g = r_generator(u, xi);
        let v = nalgebra::Vector3::from(*r);
        let d = g * v / w2;
        [d[0], d[1], d[2]]
    };

    let steps = 100_000;
    let tau_end = (1.0 - 1e-6) * tau_stop;
    let h = (tau_end - tau0) / steps as f64;
    for _ in 0..steps {
        let k1 = deriv(&r);
        let mid1 = [
            r[0] + 0.5 * h * k1[0],
            r[1] + 0.5 * h * k1[1],
            r[2] + 0.5 * h * k1[2],
        ];
        let k2 = deriv(&mid1);
        let mid2 = [
            r[0] + 0.5 * h * k2[0],
            r[1] + 0.5 * h * k2[1],
            r[2] + 0.5 * h * k2[2],
        ];
        let k3 = deriv(&mid2);
        let end = [r[0] + h * k3[0], r[1] + h * k3[1], r[2] + h * k3[2]];
        let k4 = deriv(&end);
        for i in 0..3 {
            r[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(numerical(
                "ratio-tracking integration produced non-finite radii",
            ));
        }
    }
    Ok(r[2])
}
