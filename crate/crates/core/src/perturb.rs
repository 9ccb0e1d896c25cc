//! Seeded noise for the final-time data `h` and the time factor ψ.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`, 20 rounds). The 256-bit key
//! holds the seed in its first eight bytes (little endian) and zeros elsewhere;
//! the 64-bit stream id is `2·row + target`, with target 0 for `h` and 1 for ψ.
//! A uniform draw on `(-1, 1)` is `2·(k + ½)·2⁻⁵³ - 1` where `k` is the top 53
//! bits of the next `u64` word.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::spatial_l2_norm;
use crate::scalar::Real;
use crate::source::TemporalSource;

/// Number of equal subintervals carrying the ψ perturbation.
pub const PSI_LEVELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    #[default]
    DataH,
    SourcePsi,
    Both,
}

impl NoiseTarget {
    pub fn includes_data(self) -> bool {
        matches!(self, Self::DataH | Self::Both)
    }

    pub fn includes_source(self) -> bool {
        matches!(self, Self::SourcePsi | Self::Both)
    }
}

/// How the data noise is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `h̃_j = h_j + ε Y_j`, so `max |h̃ - h| ≤ ε`.
    #[default]
    Pointwise,
    /// The same draw rescaled so that the discrete `‖h̃ - h‖₂ = ε`.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
    pub target: NoiseTarget,
    /// Row index of an ε sweep; distinct rows draw independent streams.
    #[serde(default)]
    pub row: u64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64, target: NoiseTarget) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("noise level ε must be ≥ 0, got {epsilon}")));
        }
        Ok(Self { epsilon, seed, target, row: 0 })
    }

    pub fn with_row(self, row: u64) -> Self {
        Self { row, ..self }
    }

    fn stream(&self, target: u64) -> UniformStream {
        UniformStream::new(self.seed, 2 * self.row + target)
    }
}

/// I.i.d. uniform draws on the open interval `(-1, 1)`.
pub struct UniformStream {
    rng: ChaCha20Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn next_symmetric(&mut self) -> f64 {
        let k = self.rng.next_u64() >> 11;
        let unit = (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        2.0 * unit - 1.0
    }
}

impl Iterator for UniformStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_symmetric())
    }
}

/// Noisy data `h̃`. Returns `h` unchanged when the target excludes the data or
/// ε = 0. `dx` only matters for [`NoiseModel::L2`].
pub fn perturb_data<T: Real>(h: &[T], spec: &NoiseSpec, model: NoiseModel, dx: T) -> Vec<T> {
    if !spec.target.includes_data() || spec.epsilon == 0.0 {
        return h.to_vec();
    }
    let draws: Vec<f64> = spec.stream(0).take(h.len()).collect();
    let scale = match model {
        NoiseModel::Pointwise => spec.epsilon,
        NoiseModel::L2 => {
            let norm = spatial_l2_norm(&draws, dx.as_f64());
            if norm > 0.0 {
                spec.epsilon / norm
            } else {
                0.0
            }
        }
    };
    h.iter().zip(&draws).map(|(&v, &y)| v + T::lit(scale * y)).collect()
}

/// `ψ̃ = ψ + δ` with δ piecewise constant on [`PSI_LEVELS`] equal subintervals,
/// levels uniform on `(-ε/T, ε/T)`, so `‖ψ̃ - ψ‖₁ < ε`. Also returns the exact
/// achieved L¹ distance `Σ|δ_i|·T/16`.
pub fn perturb_source<T: Real>(psi: &TemporalSource<T>, spec: &NoiseSpec) -> Result<(TemporalSource<T>, T)> {
    if !spec.target.includes_source() || spec.epsilon == 0.0 {
        return Ok((psi.clone(), T::zero()));
    }
    let horizon = psi.horizon().as_f64();
    let bound = spec.epsilon / horizon;
    let levels: Vec<f64> = spec.stream(1).take(PSI_LEVELS).map(|y| bound * y).collect();
    let achieved = levels.iter().map(|l| l.abs()).sum::<f64>() * horizon / PSI_LEVELS as f64;
    let perturbed = psi.with_piecewise_offset(levels.into_iter().map(T::lit).collect())?;
    Ok((perturbed, T::lit(achieved)))
}
