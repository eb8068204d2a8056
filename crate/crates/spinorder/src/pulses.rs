// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Control-waveform representations.
//!
//! Every pulse program describes the same physical control: a y-phase
//! radio-frequency field applied to the middle spin, with normalized
//! amplitude Ω(t) over a horizon t ∈ [0, T]. Three representations cover the
//! use cases in this crate:
//!
//! * [`PulseProgram::Piecewise`] — N equal-length segments of constant
//!   amplitude; the native format of the steepest-descent optimizer and of
//!   the exact piecewise propagator.
//! * [`PulseProgram::Gaussian`] — the two-parameter bell curve
//!   Ω(t) = A·exp(−(t − T/2)² / (2σ²)); a smooth ansatz whose best (A, σ)
//!   come remarkably close to fully optimized shapes.
//! * [`PulseProgram::Deltas`] — instantaneous rotations by a fixed angle at
//!   fixed times, modeling hard pulses that are much faster than both the
//!   couplings and the relaxation. The concatenated-INEPT sequence built by
//!   [`PulseProgram::cinept`] is the canonical example.
//!
//! Continuous programs discretize to midpoint-sampled piecewise form, and
//! all programs serialize to disk: piecewise waveforms as two-column CSV,
//! Gaussian and delta programs as small JSON documents. Numbers are written
//! with twelve significant digits so repeated runs produce byte-identical
//! files.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fs;
use std::path::Path;

use crate::{invalid, Result};

/// A time-dependent control amplitude on [0, T], in normalized units.
///
/// The amplitude convention matches the reduced equations of motion: a
/// constant Ω rotates the (z₁, x₁) and (x₃, z₃) variable pairs at angular
/// rate Ω, while the scalar couplings mix neighbors at unit rate.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseProgram {
    /// N equal segments of constant amplitude. Segment j covers
    /// [j·Δt, (j+1)·Δt) with Δt = T/N and amplitude `samples[j]`.
    Piecewise {
        /// Per-segment amplitudes, one per time slice.
        samples: Vec<f64>,
        /// Total duration T.
        horizon: f64,
    },
    /// Smooth bell Ω(t) = A·exp(−(t − T/2)² / (2σ²)), centered mid-sequence.
    Gaussian {
        /// Peak amplitude A.
        a: f64,
        /// Width parameter σ (standard deviation of the bell).
        sigma: f64,
        /// Total duration T.
        horizon: f64,
    },
    /// Instantaneous rotations: at each event time the (z₁, x₁) and
    /// (x₃, z₃) pairs are rotated by the stored angle while all other
    /// dynamics are frozen. Events are sorted by time.
    Deltas {
        /// (time, rotation angle) pairs, non-decreasing in time.
        events: Vec<(f64, f64)>,
        /// Total duration T.
        horizon: f64,
    },
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(invalid(format!(
            "pulse horizon must be positive and finite, got {horizon}"
        )));
    }
    Ok(())
}

impl PulseProgram {
    /// Builds a piecewise-constant program from per-segment amplitudes.
    pub fn piecewise(samples: Vec<f64>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if samples.is_empty() {
            return Err(invalid("piecewise pulse needs at least one segment"));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(invalid(format!("non-finite pulse amplitude {bad}")));
        }
        Ok(PulseProgram::Piecewise { samples, horizon })
    }

    /// Builds a Gaussian program with peak amplitude `a` and width `sigma`.
    pub fn gaussian(a: f64, sigma: f64, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if !a.is_finite() {
            return Err(invalid(format!("non-finite Gaussian amplitude {a}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(invalid(format!(
                "Gaussian width must be positive and finite, got {sigma}"
            )));
        }
        Ok(PulseProgram::Gaussian { a, sigma, horizon })
    }

    /// Builds a delta-rotation program from (time, angle) events.
    pub fn deltas(events: Vec<(f64, f64)>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        for &(t, angle) in &events {
            if !t.is_finite() || t < 0.0 || t > horizon {
                return Err(invalid(format!(
                    "delta event time {t} outside pulse horizon [0, {horizon}]"
                )));
            }
            if !angle.is_finite() {
                return Err(invalid(format!("non-finite delta rotation angle {angle}")));
            }
        }
        if events.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(invalid("delta events must be sorted by time"));
        }
        Ok(PulseProgram::Deltas { events, horizon })
    }

    /// Builds the concatenated-INEPT hard-pulse sequence for relaxation
    /// parameter `xi`.
    ///
    /// The sequence applies a π/2 rotation at t = 0 (converting the initial
    /// two-spin order into the transverse pathway), lets the couplings act
    /// for the mixing time t_m = √2·arccot(ξ/√2), then applies a second π/2
    /// rotation that parks the transferred order along the target axis. The
    /// mixing time maximizes the decaying envelope e^(−ξt)·sin²(t/√2); the
    /// arccotangent branch is taken in (0, π/2], so t_m ∈ (0, √2·π/2].
    pub fn cinept(xi: f64, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if !xi.is_finite() || xi < 0.0 {
            return Err(invalid(format!(
                "relaxation parameter must be non-negative, got {xi}"
            )));
        }
        let t_m = SQRT_2 * f64::atan2(SQRT_2, xi);
        if t_m > horizon {
            return Err(invalid(format!(
                "horizon {horizon} is shorter than the mixing time {t_m:.6}"
            )));
        }
        PulseProgram::deltas(vec![(0.0, FRAC_PI_2), (t_m, FRAC_PI_2)], horizon)
    }

    /// Total duration T of the program.
    pub fn horizon(&self) -> f64 {
        match self {
            PulseProgram::Piecewise { horizon, .. }
            | PulseProgram::Gaussian { horizon, .. }
            | PulseProgram::Deltas { horizon, .. } => *horizon,
        }
    }

    /// Continuous control amplitude at time `t` (zero for delta programs,
    /// whose rotations act instantaneously rather than through a field).
    ///
    /// Times outside [0, T] are clamped to the nearest endpoint.
    pub fn amplitude(&self, t: f64) -> f64 {
        match self {
            PulseProgram::Piecewise { samples, horizon } => {
                let dt = horizon / samples.len() as f64;
                let idx = ((t / dt).floor() as isize).clamp(0, samples.len() as isize - 1);
                samples[idx as usize]
            }
            PulseProgram::Gaussian { a, sigma, horizon } => {
                let u = (t - 0.5 * horizon) / (SQRT_2 * sigma);
                a * (-u * u).exp()
            }
            PulseProgram::Deltas { .. } => 0.0,
        }
    }

    /// Instantaneous rotation events, empty for continuous programs.
    pub fn delta_events(&self) -> &[(f64, f64)] {
        match self {
            PulseProgram::Deltas { events, .. } => events,
            _ => &[],
        }
    }

    /// Midpoint-sampled piecewise approximation with `steps` equal segments:
    /// segment j takes the amplitude at its center time (j + ½)·Δt.
    ///
    /// Delta programs have no meaningful finite-amplitude sampling and are
    /// rejected.
    pub fn discretize(&self, steps: usize) -> Result<PulseProgram> {
        if steps == 0 {
            return Err(invalid("discretization needs at least one segment"));
        }
        if matches!(self, PulseProgram::Deltas { .. }) {
            return Err(invalid(
                "instantaneous-rotation programs cannot be discretized to finite amplitudes",
            ));
        }
        let horizon = self.horizon();
        let dt = horizon / steps as f64;
        let samples = (0..steps)
            .map(|j| self.amplitude((j as f64 + 0.5) * dt))
            .collect();
        PulseProgram::piecewise(samples, horizon)
    }

    /// Integral of the continuous amplitude over the horizon.
    ///
    /// For the Gaussian variant this is the full-line closed form A·σ·√(2π);
    /// the truncation error is negligible whenever σ ≪ T, which holds for
    /// every waveform this crate produces. The total rotation angle delivered
    /// by a delta program is the sum of its event angles.
    pub fn area(&self) -> f64 {
        match self {
            PulseProgram::Piecewise { samples, horizon } => {
                let dt = horizon / samples.len() as f64;
                samples.iter().sum::<f64>() * dt
            }
            PulseProgram::Gaussian { a, sigma, .. } => {
                a * sigma * (2.0 * std::f64::consts::PI).sqrt()
            }
            PulseProgram::Deltas { events, .. } => events.iter().map(|(_, angle)| angle).sum(),
        }
    }

    /// Writes the program to `path`.
    ///
    /// Piecewise programs become a `t,omega` CSV with one row per segment,
    /// times at segment midpoints. Gaussian programs become a JSON document
    /// with keys `A`, `sigma`, `T`; delta programs a JSON document with keys
    /// `deltas` (list of [time, angle] pairs) and `T`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = match self {
            PulseProgram::Piecewise { samples, horizon } => {
                let dt = horizon / samples.len() as f64;
                let mut out = String::from("t,omega\n");
                for (j, &w) in samples.iter().enumerate() {
                    let t = (j as f64 + 0.5) * dt;
                    out.push_str(&format!("{t:.11e},{w:.11e}\n"));
                }
                out
            }
            PulseProgram::Gaussian { a, sigma, horizon } => format!(
                "{{\n  \"A\": {a:.11e},\n  \"sigma\": {sigma:.11e},\n  \"T\": {horizon:.11e}\n}}\n"
            ),
            PulseProgram::Deltas { events, horizon } => {
                let mut out = String::from("{\n  \"deltas\": [\n");
                for (i, &(t, angle)) in events.iter().enumerate() {
                    let sep = if i + 1 == events.len() { "" } else { "," };
                    out.push_str(&format!("    [{t:.11e}, {angle:.11e}]{sep}\n"));
                }
                out.push_str(&format!("  ],\n  \"T\": {horizon:.11e}\n}}\n"));
                out
            }
        };
        fs::write(path, text)?;
        Ok(())
    }

    /// Reads a program previously written by [`PulseProgram::write`].
    ///
    /// The format is detected from the content: JSON documents yield Gaussian
    /// or delta programs, anything else is parsed as midpoint-sampled CSV.
    pub fn read(path: &Path) -> Result<PulseProgram> {
        let text = fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            Self::parse_json(&text)
        } else {
            Self::parse_csv(&text)
        }
    }

    fn parse_json(text: &str) -> Result<PulseProgram> {
        let doc: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| invalid(format!("malformed pulse JSON: {e}")))?;
        let horizon = doc
            .get("T")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| invalid("pulse JSON is missing numeric key \"T\""))?;
        if let Some(deltas) = doc.get("deltas") {
            let list = deltas
                .as_array()
                .ok_or_else(|| invalid("\"deltas\" must be a list of [time, angle] pairs"))?;
            let mut events = Vec::with_capacity(list.len());
            for pair in list {
                let pair = pair
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| invalid("each delta entry must be a [time, angle] pair"))?;
                let t = pair[0].as_f64();
                let angle = pair[1].as_f64();
                match (t, angle) {
                    (Some(t), Some(angle)) => events.push((t, angle)),
                    _ => return Err(invalid("delta entries must be numeric")),
                }
            }
            return PulseProgram::deltas(events, horizon);
        }
        let a = doc
            .get("A")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| invalid("pulse JSON is missing numeric key \"A\""))?;
        let sigma = doc
            .get("sigma")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| invalid("pulse JSON is missing numeric key \"sigma\""))?;
        PulseProgram::gaussian(a, sigma, horizon)
    }

    fn parse_csv(text: &str) -> Result<PulseProgram> {
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (t, w) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(w), None) => (t.trim(), w.trim()),
                _ => {
                    return Err(invalid(format!(
                        "pulse CSV line {} must have exactly two fields",
                        lineno + 1
                    )))
                }
            };
            match (t.parse::<f64>(), w.parse::<f64>()) {
                (Ok(t), Ok(w)) => rows.push((t, w)),
                // A single unparsable first row is the header.
                _ if rows.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(invalid(format!(
                        "pulse CSV line {} is not numeric",
                        lineno + 1
                    )))
                }
            }
        }
        if rows.is_empty() {
            return Err(invalid("pulse CSV contains no samples"));
        }
        // Midpoint convention: the first sample sits at t = Δt/2, so the
        // segment length and total horizon follow from the first time stamp.
        let dt = 2.0 * rows[0].0;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!(
                "first pulse sample time {} does not define a positive segment length",
                rows[0].0
            )));
        }
        let horizon = dt * rows.len() as f64;
        for (j, &(t, _)) in rows.iter().enumerate() {
            let expected = (j as f64 + 0.5) * dt;
            if (t - expected).abs() > 1e-6 * horizon.max(1.0) {
                return Err(invalid(format!(
                    "pulse CSV times are not midpoint-uniform: row {} has t = {t}, expected {expected}",
                    j + 1
                )));
            }
        }
        PulseProgram::piecewise(rows.into_iter().map(|(_, w)| w).collect(), horizon)
    }
}
