//! Spectral reconstruction of f from noisy data: the modified truncation
//! `f̂ = ĥ/H · χ_{|H|>α}`, the Tikhonov filter `H/(α + H²)`, and the a-priori
//! rule `α(ε) = ε^{1/(1 + s/(2-θ) + b)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::check_same_grid;
use crate::grid::{forward_ft, inverse_ft, SpatialGrid};
use crate::kernel::KernelProfile;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    #[default]
    Truncation,
    Tikhonov,
}

impl Filter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Truncation => "truncation",
            Self::Tikhonov => "tikhonov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTag {
    Rule,
}

/// `alpha = "rule"` or a fixed positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Rule(RuleTag),
    Fixed(f64),
}

impl Default for AlphaChoice {
    fn default() -> Self {
        Self::Rule(RuleTag::Rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    pub filter: Filter,
    pub alpha: AlphaChoice,
    /// Sobolev index of the error norm.
    pub s: f64,
    pub sigma: f64,
    /// Singularity exponent of ψ at the final time.
    pub theta: f64,
    /// Smoothness of f.
    pub gamma: f64,
    /// Level-set constant of the kernel; user supplied.
    pub beta: f64,
    /// Hausdorff–Young exponent, `q > 2`.
    pub q: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            filter: Filter::Truncation,
            alpha: AlphaChoice::default(),
            s: 0.0,
            sigma: 1.0,
            theta: 0.0,
            gamma: 2.0,
            beta: 1.0,
            q: 4.0,
        }
    }
}

impl RegularizationConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self;
        if !(c.sigma > 0.0 && c.sigma <= 1.0) {
            return Err(Error::Config(format!("reg.sigma must lie in (0, 1], got {}", c.sigma)));
        }
        if !(c.theta < 2.0) {
            return Err(Error::Config(format!("reg.theta must be < 2, got {}", c.theta)));
        }
        if !(c.s >= 0.0 && c.s <= c.gamma) {
            return Err(Error::Config(format!(
                "reg.s must satisfy 0 ≤ s ≤ gamma, got s = {}, gamma = {}",
                c.s, c.gamma
            )));
        }
        if !(c.beta > 0.0) {
            return Err(Error::Config(format!("reg.beta must be > 0, got {}", c.beta)));
        }
        if !(c.q > 2.0) {
            return Err(Error::Config(format!("reg.q must be > 2, got {}", c.q)));
        }
        if let AlphaChoice::Fixed(a) = c.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("reg.alpha must be > 0, got {a}")));
            }
        }
        Ok(())
    }
}

/// `b = min{β(q-2)/(2q), (γ-s)/(2σ(2-θ))}`.
pub fn effective_b(cfg: &RegularizationConfig) -> f64 {
    let level = cfg.beta * (cfg.q - 2.0) / (2.0 * cfg.q);
    let smooth = (cfg.gamma - cfg.s) / (2.0 * cfg.sigma * (2.0 - cfg.theta));
    level.min(smooth)
}

/// Exponents of the a-priori rule for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaRule {
    pub b: f64,
    /// `α = ε^{alpha_exponent}`.
    pub alpha_exponent: f64,
    /// Predicted error order `ε^{rate_exponent}` in the `H^s` norm.
    pub rate_exponent: f64,
    /// α(ε) → 0 and ε/α^{1+s/(2σ)} → 0 as ε → 0.
    pub convergence_conditions: bool,
}

impl AlphaRule {
    pub fn new(cfg: &RegularizationConfig) -> Result<Self> {
        let b = effective_b(cfg);
        if !(b > 0.0) {
            return Err(Error::Config(format!("rate exponent b = {b} must be > 0 (need s < gamma)")));
        }
        let denom = 1.0 + cfg.s / (2.0 - cfg.theta) + b;
        let alpha_exponent = 1.0 / denom;
        let convergence_conditions = alpha_exponent > 0.0 && alpha_exponent * (1.0 + cfg.s / (2.0 * cfg.sigma)) < 1.0;
        Ok(Self { b, alpha_exponent, rate_exponent: b / denom, convergence_conditions })
    }

    pub fn alpha(&self, epsilon: f64) -> f64 {
        epsilon.powf(self.alpha_exponent)
    }
}

/// `α(ε)` from the rule, ignoring any fixed α in `cfg`.
pub fn select_alpha(epsilon: f64, cfg: &RegularizationConfig) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("noise level ε must be > 0, got {epsilon}")));
    }
    Ok(AlphaRule::new(cfg)?.alpha(epsilon))
}

/// Multipliers applied to `ĥ` on every frequency node.
pub fn filter_values<T: Real>(filter: Filter, profile: &KernelProfile<T>, alpha: T) -> Result<Vec<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::Config(format!("regularization parameter α must be > 0, got {alpha}")));
    }
    let values = profile.values().iter().map(|&h| match filter {
        Filter::Truncation if h.abs() > alpha => h.recip(),
        Filter::Truncation => T::zero(),
        Filter::Tikhonov => h / (alpha + h * h),
    });
    Ok(values.collect())
}

/// Reconstructed source and the number of frequency nodes where the filter is
/// nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T> {
    pub field: Vec<T>,
    pub mask_size: usize,
}

pub fn reconstruct<T: Real>(
    filter: Filter,
    h_tilde: &[T],
    profile: &KernelProfile<T>,
    alpha: T,
    grid: &SpatialGrid<T>,
) -> Result<Reconstruction<T>> {
    check_same_grid(profile, grid)?;
    let multiplier = filter_values(filter, profile, alpha)?;
    let mask_size = multiplier.iter().filter(|&&m| m != T::zero()).count();
    let spectrum = forward_ft(h_tilde, grid)?.scaled_by(&multiplier)?;
    Ok(Reconstruction { field: inverse_ft(&spectrum)?, mask_size })
}

pub fn truncation_reconstruct<T: Real>(
    h_tilde: &[T],
    profile: &KernelProfile<T>,
    alpha: T,
    grid: &SpatialGrid<T>,
) -> Result<Vec<T>> {
    Ok(reconstruct(Filter::Truncation, h_tilde, profile, alpha, grid)?.field)
}

pub fn tikhonov_reconstruct<T: Real>(
    h_tilde: &[T],
    profile: &KernelProfile<T>,
    alpha: T,
    grid: &SpatialGrid<T>,
) -> Result<Vec<T>> {
    Ok(reconstruct(Filter::Tikhonov, h_tilde, profile, alpha, grid)?.field)
}
