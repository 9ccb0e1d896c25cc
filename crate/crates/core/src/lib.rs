//! Reconstruction of the spatial source f in the fractional bi-parabolic
//! equation `(∂_t + (-Δ)^σ)² u = ψ(t) f(x)` from noisy final-time data, by
//! truncated spectral division with an a-priori parameter rule.
//!
//! Numerical modules are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

// `!(x > 0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod kernel;
pub mod metrics;
pub mod perturb;
pub mod quadrature;
pub mod regularize;
pub mod scalar;
pub mod source;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::SpatialGrid<f64>;
pub type Spectrum = grid::SpectralField<f64>;
pub type Psi = source::TemporalSource<f64>;
pub type SpatialF = source::SpatialSource<f64>;
pub type Profile = kernel::KernelProfile<f64>;
pub type Witness = metrics::InstabilityWitness<f64>;
