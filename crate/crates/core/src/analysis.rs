//! Dark-state and adiabaticity diagnostics.

use nalgebra::Vector5;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::atom::{DensityMatrix, Level};
use crate::error::{StirapError, StirapResult};
use crate::pulse::PulsePair;

/// Mixing angle θ = atan2(Ω₈₅₀, Ω₈₅₄).
pub fn mixing_angle(omega850: f64, omega854: f64) -> StirapResult<f64> {
    if omega850 == 0.0 && omega854 == 0.0 {
        return Err(StirapError::InvalidParameter("mixing angle undefined with both beams off".into()));
    }
    Ok(omega850.atan2(omega854))
}

/// cos θ |D3/2⟩ − sin θ |D5/2⟩.
pub fn dark_state(theta: f64) -> Vector5<C64> {
    let mut v = Vector5::zeros();
    v[Level::D32.index()] = C64::new(theta.cos(), 0.0);
    v[Level::D52.index()] = C64::new(-theta.sin(), 0.0);
    v
}

/// ⟨dark(θ)|ρ|dark(θ)⟩.
pub fn dark_population(rho: &DensityMatrix, theta: f64) -> f64 {
    let d = dark_state(theta);
    (d.adjoint() * rho.matrix() * d)[(0, 0)].re
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticitySample {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub omega_eff: f64,
    /// |θ̇|/ω_eff; infinite where both beams are off.
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityTrace {
    pub samples: Vec<AdiabaticitySample>,
}

impl AdiabaticityTrace {
    /// Largest ratio over samples where ω_eff exceeds 1% of its peak in the trace.
    pub fn max_ratio(&self) -> f64 {
        let peak = self.samples.iter().map(|s| s.omega_eff).fold(0.0, f64::max);
        self.samples
            .iter()
            .filter(|s| s.omega_eff > 0.01 * peak)
            .map(|s| s.ratio)
            .fold(0.0, f64::max)
    }
}

/// θ, θ̇ and ω_eff = √(Ω₈₅₀² + Ω₈₅₄²) at each sample time, with θ̇ from the
/// analytic envelope derivatives.
pub fn adiabaticity_trace(pair: &PulsePair, sample_times: &[f64]) -> AdiabaticityTrace {
    let samples = sample_times
        .iter()
        .map(|&t| {
            let (p, s) = (pair.pump.rabi(t), pair.stokes.rabi(t));
            let (dp, ds) = (pair.pump.rabi_rate(t), pair.stokes.rabi_rate(t));
            let w2 = p * p + s * s;
            let omega_eff = w2.sqrt();
            if w2 == 0.0 {
                return AdiabaticitySample { t, theta: f64::NAN, theta_dot: 0.0, omega_eff, ratio: f64::INFINITY };
            }
            let theta_dot = (dp * s - p * ds) / w2;
            AdiabaticitySample { t, theta: p.atan2(s), theta_dot, omega_eff, ratio: theta_dot.abs() / omega_eff }
        })
        .collect();
    AdiabaticityTrace { samples }
}
