//! Uniform spatial grid on a truncated line and the discrete approximation of
//! the unitary continuous Fourier transform
//! `f̂(z) = (2π)^{-1/2} ∫ f(x) e^{-ixz} dx` on that grid.
//!
//! Spectral values are stored in increasing frequency order
//! `z_k = k·Δz`, `k = -⌊L/2⌋ .. L-1-⌊L/2⌋`, `Δz = 2π/(L·dx)`.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_NODES: usize = 4;

/// Uniform partition of `[a, b]` into `len` nodes, `x_j = a + j·dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid<T> {
    a: T,
    b: T,
    len: usize,
    dx: T,
}

impl<T: Real> SpatialGrid<T> {
    pub fn new(a: T, b: T, len: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Domain(format!("grid endpoints must satisfy A < B, got A = {a}, B = {b}")));
        }
        if len < MIN_NODES {
            return Err(Error::Domain(format!("grid needs at least {MIN_NODES} nodes, got {len}")));
        }
        let dx = (b - a) / T::from_usize_lossy(len - 1);
        Ok(Self { a, b, len, dx })
    }

    /// `[-10, 10]` with 1024 nodes.
    pub fn default_domain() -> Self {
        Self::new(T::lit(-10.0), T::lit(10.0), 1024).expect("default grid is valid")
    }

    pub fn left(&self) -> T {
        self.a
    }

    pub fn right(&self) -> T {
        self.b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn node(&self, j: usize) -> T {
        self.a + T::from_usize_lossy(j) * self.dx
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.len).map(|j| self.node(j)).collect()
    }

    /// Frequency spacing `2π/(L·dx)`.
    pub fn dz(&self) -> T {
        T::TAU() / (T::from_usize_lossy(self.len) * self.dx)
    }

    /// Integer frequency index of storage slot `i`.
    pub fn freq_index(&self, i: usize) -> i64 {
        i as i64 - (self.len / 2) as i64
    }

    pub fn freq_node(&self, i: usize) -> T {
        T::lit(self.freq_index(i) as f64) * self.dz()
    }

    pub fn freq_nodes(&self) -> Vec<T> {
        (0..self.len).map(|i| self.freq_node(i)).collect()
    }

    /// Largest representable frequency magnitude, `π/dx`.
    pub fn max_frequency(&self) -> T {
        T::PI() / self.dx
    }

    /// Storage slot holding frequency `-z_k` for the slot holding `z_k`, if it
    /// exists on the grid (the lowest slot of an even grid has no partner).
    pub fn mirror_slot(&self, i: usize) -> Option<usize> {
        let k = self.freq_index(i);
        let j = -k + (self.len / 2) as i64;
        (0..self.len as i64).contains(&j).then_some(j as usize)
    }

    fn fft_bin(&self, i: usize) -> usize {
        self.freq_index(i).rem_euclid(self.len as i64) as usize
    }

    /// `e^{-i z_k A}` for slot `i`.
    fn phase(&self, i: usize) -> Complex<T> {
        // z_k·A = 2π·k·(A/dx)/L, reduced before the trig call
        let k = self.freq_index(i) as f64;
        let turns = (k * (self.a / self.dx).as_f64() / self.len as f64).rem_euclid(1.0);
        let angle = -std::f64::consts::TAU * turns;
        Complex::new(T::lit(angle.cos()), T::lit(angle.sin()))
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len {
            return Err(Error::Shape { expected: self.len, got });
        }
        Ok(())
    }
}

/// Complex frequency-domain samples on the frequency nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    values: Vec<Complex<T>>,
    grid: SpatialGrid<T>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(values: Vec<Complex<T>>, grid: SpatialGrid<T>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: SpatialGrid<T>) -> Self {
        Self { values: vec![Complex::new(T::zero(), T::zero()); grid.len()], grid }
    }

    /// Samples `g(z_k)` on every frequency node.
    pub fn from_fn(grid: SpatialGrid<T>, g: impl Fn(T) -> Complex<T>) -> Self {
        let values = (0..grid.len()).map(|i| g(grid.freq_node(i))).collect();
        Self { values, grid }
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    /// Pointwise product with a real multiplier given per storage slot.
    pub fn scaled_by(&self, multiplier: &[T]) -> Result<Self> {
        self.grid.check_len(multiplier.len())?;
        let values = self.values.iter().zip(multiplier).map(|(v, &m)| v * m).collect();
        Ok(Self { values, grid: self.grid })
    }

    /// Discrete spectral L² norm `(Σ |v_k|² Δz)^{1/2}`.
    pub fn l2_norm(&self) -> T {
        let sum: T = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * self.grid.dz()).sqrt()
    }

    /// Largest relative deviation from `v(-z) = conj(v(z))`. The unpaired lowest
    /// slot of an even grid is checked by requiring its unphased DFT bin to be real.
    pub fn hermitian_deviation(&self) -> T {
        let scale = self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max);
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.grid.len() {
            let dev = match self.grid.mirror_slot(i) {
                Some(j) => (self.values[i] - self.values[j].conj()).norm(),
                None => (self.values[i] * self.grid.phase(i).conj()).im.abs(),
            };
            worst = worst.max(dev);
        }
        worst / scale
    }
}

fn hermitian_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::lit(1e3) * T::epsilon())
}

/// Discrete approximation of the continuous Fourier transform of real samples.
pub fn forward_ft<T: Real>(samples: &[T], grid: &SpatialGrid<T>) -> Result<SpectralField<T>> {
    grid.check_len(samples.len())?;
    let n = grid.len();
    let mut buf: Vec<Complex<T>> = samples.iter().map(|&s| Complex::new(s, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let scale = grid.dx() / T::TAU().sqrt();
    let half = T::lit(0.5);
    let mut values = vec![Complex::new(T::zero(), T::zero()); n];
    // real input: pair ±z exactly as conjugates so real multipliers keep the symmetry
    for i in 0..n {
        match grid.mirror_slot(i) {
            Some(j) if j < i => continue,
            Some(j) => {
                let v = buf[grid.fft_bin(i)] * grid.phase(i) * scale;
                let w = buf[grid.fft_bin(j)] * grid.phase(j) * scale;
                let avg = (v + w.conj()) * half;
                values[i] = avg;
                values[j] = avg.conj();
            }
            None => {
                let bin = Complex::new(buf[grid.fft_bin(i)].re, T::zero());
                values[i] = bin * grid.phase(i) * scale;
            }
        }
    }
    Ok(SpectralField { values, grid: *grid })
}

/// Inverse of [`forward_ft`]. Fails if the field is not the transform of a real
/// field, which signals an inconsistent spectral manipulation upstream.
pub fn inverse_ft<T: Real>(field: &SpectralField<T>) -> Result<Vec<T>> {
    let tolerance = hermitian_tolerance::<T>();
    let deviation = field.hermitian_deviation();
    if deviation > tolerance {
        return Err(Error::Symmetry { deviation: deviation.as_f64(), tolerance: tolerance.as_f64() });
    }
    let grid = field.grid();
    let n = grid.len();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (i, v) in field.values().iter().enumerate() {
        buf[grid.fft_bin(i)] = v * grid.phase(i).conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

    let scale = grid.dz() / T::TAU().sqrt();
    Ok(buf.into_iter().map(|c| c.re * scale).collect())
}

/// Discrete spatial L² norm `(dx Σ f_j²)^{1/2}`.
pub fn spatial_l2_norm<T: Real>(samples: &[T], dx: T) -> T {
    let sum: T = samples.iter().map(|&v| v * v).sum();
    (dx * sum).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian(grid: &SpatialGrid<f64>) -> Vec<f64> {
        grid.nodes().iter().map(|x| (-x * x).exp()).collect()
    }

    #[test]
    fn default_spacing_and_frequency_range() {
        let g = SpatialGrid::<f64>::new(-10.0, 10.0, 1024).unwrap();
        assert_relative_eq!(g.dx(), 20.0 / 1023.0);
        assert!((g.dx() - 0.019550).abs() < 1e-6);
        assert!((g.max_frequency() - 160.69).abs() < 0.01);
        let z = g.freq_nodes();
        assert_eq!(z.len(), 1024);
        assert_relative_eq!(z[0], -g.max_frequency(), max_relative = 1e-12);
        assert!(z.windows(2).all(|w| (w[1] - w[0] - g.dz()).abs() < 1e-9));
        assert!(*z.last().unwrap() < g.max_frequency());
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(matches!(SpatialGrid::<f64>::new(0.0, 1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(SpatialGrid::<f64>::new(1.0, 1.0, 16), Err(Error::Domain(_))));
        assert!(matches!(SpatialGrid::<f64>::new(2.0, 1.0, 16), Err(Error::Domain(_))));
    }

    #[test]
    fn gaussian_transform_at_origin() {
        let g = SpatialGrid::default_domain();
        let fh = forward_ft(&gaussian(&g), &g).unwrap();
        let zero_slot = g.len() / 2;
        assert_eq!(g.freq_node(zero_slot), 0.0);
        let v = fh.values()[zero_slot];
        assert!((v.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(v.im.abs() < 1e-12);
        // analytic pair everywhere
        for (i, v) in fh.values().iter().enumerate() {
            let z = g.freq_node(i);
            let exact = std::f64::consts::FRAC_1_SQRT_2 * (-z * z / 4.0).exp();
            assert!((v - Complex::new(exact, 0.0)).norm() < 1e-8, "slot {i}");
        }
    }

    #[test]
    fn parseval_for_gaussian() {
        let g = SpatialGrid::default_domain();
        let f = gaussian(&g);
        let fh = forward_ft(&f, &g).unwrap();
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        let spectral = fh.l2_norm().powi(2);
        let spatial = spatial_l2_norm(&f, g.dx()).powi(2);
        assert!((spectral - expected).abs() < 1e-8);
        assert!((spatial - expected).abs() < 1e-8);
    }

    #[test]
    fn zeros_map_to_zeros() {
        let g = SpatialGrid::<f64>::default_domain();
        let fh = forward_ft(&vec![0.0; g.len()], &g).unwrap();
        assert!(fh.values().iter().all(|v| v.norm() == 0.0));
        assert!(inverse_ft(&fh).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roundtrip_gaussian() {
        let g = SpatialGrid::default_domain();
        let f = gaussian(&g);
        let back = inverse_ft(&forward_ft(&f, &g).unwrap()).unwrap();
        let dev = f.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn analytic_spectrum_inverts_to_gaussian() {
        let g = SpatialGrid::default_domain();
        let fh = SpectralField::from_fn(g, |z: f64| {
            Complex::new(std::f64::consts::FRAC_1_SQRT_2 * (-z * z / 4.0).exp(), 0.0)
        });
        let f = inverse_ft(&fh).unwrap();
        for (x, v) in g.nodes().iter().zip(&f) {
            assert!((v - (-x * x).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn odd_grid_roundtrip() {
        let g = SpatialGrid::new(-8.0, 8.0, 301).unwrap();
        assert!(g.mirror_slot(0).is_some());
        let f = gaussian(&g);
        let back = inverse_ft(&forward_ft(&f, &g).unwrap()).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_field_rejected() {
        let g = SpatialGrid::<f64>::new(-5.0, 5.0, 64).unwrap();
        let mut fh = SpectralField::zeros(g);
        fh.values_mut()[40] = Complex::new(1.0, 0.0);
        assert!(matches!(inverse_ft(&fh), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let g = SpatialGrid::<f64>::default_domain();
        assert!(matches!(forward_ft(&[1.0, 2.0], &g), Err(Error::Shape { expected: 1024, got: 2 })));
    }

    #[test]
    fn single_precision_roundtrip() {
        let g = SpatialGrid::<f32>::new(-6.0, 6.0, 256).unwrap();
        let f: Vec<f32> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let back = inverse_ft(&forward_ft(&f, &g).unwrap()).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
