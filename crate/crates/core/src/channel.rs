//! Collective-dephasing quantum channel.
//!
//! Every physical qubit sharing a transmission window picks up the same map
//! `|0⟩ → |0⟩`, `|1⟩ → e^{iφ}|1⟩`. A dual-rail logical qubit carries exactly
//! one excitation, so on the code space the window only contributes a global
//! phase.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::StateVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("phase {0} is outside [0, 2π)")]
    PhaseOutOfRange(f64),
    #[error("a transmission window carries exactly one logical particle, got {0} physical qubits")]
    NotOneParticle(usize),
}

/// Phase applied to one transmission window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingWindow {
    phase: f64,
}

impl DephasingWindow {
    pub const NONE: DephasingWindow = DephasingWindow { phase: 0.0 };

    pub fn new(phase: f64) -> Result<Self, ChannelError> {
        if !(0.0..TAU).contains(&phase) {
            return Err(ChannelError::PhaseOutOfRange(phase));
        }
        Ok(Self { phase })
    }

    /// Reduces any finite angle into `[0, 2π)`.
    pub fn wrapping(phase: f64) -> Self {
        let mut p = phase.rem_euclid(TAU);
        if p >= TAU {
            p = 0.0;
        }
        Self { phase: p }
    }

    pub fn phase(self) -> f64 {
        self.phase
    }

    /// The window equivalent to passing through `self` then `other`.
    pub fn then(self, other: DephasingWindow) -> DephasingWindow {
        Self::wrapping(self.phase + other.phase)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    #[default]
    Noiseless,
    #[serde(alias = "dephasing")]
    CollectiveDephasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseDistribution {
    #[default]
    UniformOnCircle,
    FixedPhase(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub phase_distribution: PhaseDistribution,
}

impl ChannelConfig {
    pub fn noiseless() -> Self {
        Self {
            mode: ChannelMode::Noiseless,
            phase_distribution: PhaseDistribution::UniformOnCircle,
        }
    }

    pub fn dephasing() -> Self {
        Self {
            mode: ChannelMode::CollectiveDephasing,
            phase_distribution: PhaseDistribution::UniformOnCircle,
        }
    }

    pub fn fixed_phase(phase: f64) -> Result<Self, ChannelError> {
        DephasingWindow::new(phase)?;
        Ok(Self {
            mode: ChannelMode::CollectiveDephasing,
            phase_distribution: PhaseDistribution::FixedPhase(phase),
        })
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if let PhaseDistribution::FixedPhase(p) = self.phase_distribution {
            DephasingWindow::new(p)?;
        }
        Ok(())
    }
}

/// Applies the window to every physical qubit of `s`: basis amplitude `i`
/// is multiplied by `e^{iφ·popcount(i)}`.
pub fn transmit(s: &StateVector, window: DephasingWindow) -> StateVector {
    if window.phase == 0.0 {
        return s.clone();
    }
    s.map_amplitudes(|i, a| a * Complex64::from_polar(1.0, window.phase * i.count_ones() as f64))
}

/// [`transmit`] for a single logical particle in flight.
pub fn transmit_particle(
    s: &StateVector,
    window: DephasingWindow,
) -> Result<StateVector, ChannelError> {
    if s.num_qubits() != 2 {
        return Err(ChannelError::NotOneParticle(s.num_qubits()));
    }
    Ok(transmit(s, window))
}

/// Applies the window only to the listed physical qubits of a larger register.
pub fn transmit_subsystem(
    s: &StateVector,
    qubits: &[usize],
    window: DephasingWindow,
) -> StateVector {
    if window.phase == 0.0 {
        return s.clone();
    }
    let n = s.num_qubits();
    let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << (n - 1 - q)));
    s.map_amplitudes(|i, a| {
        a * Complex64::from_polar(1.0, window.phase * (i & mask).count_ones() as f64)
    })
}

pub fn sample_window<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> DephasingWindow {
    match (cfg.mode, cfg.phase_distribution) {
        (ChannelMode::Noiseless, _) => DephasingWindow::NONE,
        (ChannelMode::CollectiveDephasing, PhaseDistribution::UniformOnCircle) => {
            DephasingWindow::wrapping(rng.gen_range(0.0..TAU))
        }
        (ChannelMode::CollectiveDephasing, PhaseDistribution::FixedPhase(p)) => {
            DephasingWindow::wrapping(p)
        }
    }
}
