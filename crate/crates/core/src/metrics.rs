//! Discrete error norms, log–log rate fitting and the instability witness.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::check_same_grid;
use crate::grid::{forward_ft, inverse_ft, spatial_l2_norm, SpatialGrid, SpectralField};
use crate::kernel::KernelProfile;
use crate::regularize::Filter;
use crate::scalar::Real;

/// Rows with a relative error above this are treated as saturated by
/// [`fit_rate_unsaturated`].
pub const SATURATION: f64 = 0.4;

/// `E_abs = (dx Σ (f_j - g_j)²)^{1/2}`, plain Riemann weights at every node.
pub fn l2_error<T: Real>(f_exact: &[T], f_rec: &[T], dx: T) -> Result<T> {
    if f_exact.len() != f_rec.len() {
        return Err(Error::Shape { expected: f_exact.len(), got: f_rec.len() });
    }
    let sum: T = f_exact.iter().zip(f_rec).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((dx * sum).sqrt())
}

/// `E_abs / (dx Σ f_j²)^{1/2}` as a fraction.
pub fn relative_error<T: Real>(f_exact: &[T], f_rec: &[T], dx: T) -> Result<T> {
    let norm = spatial_l2_norm(f_exact, dx);
    if norm == T::zero() {
        return Err(Error::UndefinedMetric("relative error of a zero reference field".into()));
    }
    Ok(l2_error(f_exact, f_rec, dx)? / norm)
}

/// `(Σ (1 + z_k²)^s |f̂_k|² Δz)^{1/2}`.
pub fn hs_norm<T: Real>(field: &[T], s: T, grid: &SpatialGrid<T>) -> Result<T> {
    if !(s >= T::zero()) {
        return Err(Error::Domain(format!("Sobolev index must be ≥ 0, got {s}")));
    }
    let spectrum = forward_ft(field, grid)?;
    let sum: T = spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z = grid.freq_node(i);
            (T::one() + z * z).powf(s) * v.norm_sqr()
        })
        .sum();
    Ok((sum * grid.dz()).sqrt())
}

/// Least-squares slope of `ln err` against `ln ε`.
pub fn fit_rate(eps: &[f64], err: &[f64]) -> Result<f64> {
    if eps.len() != err.len() {
        return Err(Error::Shape { expected: eps.len(), got: err.len() });
    }
    if eps.len() < 3 {
        return Err(Error::Domain(format!("rate fit needs at least 3 rows, got {}", eps.len())));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("noise levels must be strictly decreasing".into()));
    }
    if eps.iter().chain(err).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("rate fit needs positive finite entries".into()));
    }
    let x: Vec<f64> = eps.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    /// True when the largest-ε row was left out because its relative error exceeds [`SATURATION`].
    pub skipped_saturated: bool,
    pub rows_used: usize,
}

/// [`fit_rate`] on `(ε, E_abs)` that drops the largest ε when it is
/// saturated and at least three rows remain.
pub fn fit_rate_unsaturated(eps: &[f64], e_abs: &[f64], e_rel: &[f64]) -> Result<RateFit> {
    if e_rel.len() != eps.len() {
        return Err(Error::Shape { expected: eps.len(), got: e_rel.len() });
    }
    let skip = eps.len() > 3 && e_rel[0] > SATURATION;
    let start = usize::from(skip);
    let slope = fit_rate(&eps[start..], &e_abs[start..])?;
    Ok(RateFit { slope, skipped_saturated: skip, rows_used: eps.len() - start })
}

/// A pair `(f_n, h_n = K f_n)` with `‖f_n‖² ≥ n` and `‖h_n‖² ≤ 1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityWitness<T> {
    pub n: u64,
    /// Frequency radius of the set `A = {|H| ≤ 1/n, 0 < |z| ≤ m}`.
    pub m: u64,
    /// Number of nodes in `A`.
    pub support: usize,
    pub f: Vec<T>,
    pub h: Vec<T>,
    pub f_norm_sq: T,
    pub h_norm_sq: T,
    pub ratio: T,
}

/// `f̂_n = χ_A/(|H| m(A))^{1/2}` with `m(A) = |A|·Δz` and `m` the smallest
/// integer making `A` nonempty. Nodes where `H = 0` exactly and the unpaired
/// lowest slot are excluded from `A`.
pub fn instability_sequence<T: Real>(
    n: u64,
    profile: &KernelProfile<T>,
    grid: &SpatialGrid<T>,
) -> Result<InstabilityWitness<T>> {
    check_same_grid(profile, grid)?;
    if n == 0 {
        return Err(Error::Domain("witness index n must be ≥ 1".into()));
    }
    let level = T::one() / T::lit(n as f64);
    let candidate = |i: usize| {
        let h = profile.values()[i].abs();
        grid.mirror_slot(i).is_some() && h > T::zero() && h <= level
    };
    let Some(z_min) = (0..grid.len()).filter(|&i| candidate(i)).map(|i| grid.freq_node(i).abs()).reduce(T::min) else {
        return Err(Error::Range(format!(
            "no frequency node has 0 < |H| ≤ 1/{n}; widen the frequency range (smaller dx)"
        )));
    };
    let m = z_min.ceil().max(T::one());
    let in_a: Vec<bool> = (0..grid.len()).map(|i| candidate(i) && grid.freq_node(i).abs() <= m).collect();
    let support = in_a.iter().filter(|&&b| b).count();
    let measure = T::from_usize_lossy(support) * grid.dz();

    let zero = Complex::new(T::zero(), T::zero());
    let mut f_hat = vec![zero; grid.len()];
    for (i, _) in in_a.iter().enumerate().filter(|(_, &b)| b) {
        let amp = (profile.values()[i].abs() * measure).sqrt().recip();
        f_hat[i] = Complex::new(amp, T::zero());
    }
    let f_field = SpectralField::new(f_hat, *grid)?;
    let h_field = f_field.scaled_by(profile.values())?;
    let f = inverse_ft(&f_field)?;
    let h = inverse_ft(&h_field)?;
    let f_norm_sq = spatial_l2_norm(&f, grid.dx()).powi(2);
    let h_norm_sq = spatial_l2_norm(&h, grid.dx()).powi(2);
    Ok(InstabilityWitness {
        n,
        m: m.as_f64() as u64,
        support,
        f,
        h,
        f_norm_sq,
        h_norm_sq,
        ratio: (f_norm_sq / h_norm_sq).sqrt(),
    })
}

/// Grid used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub a: f64,
    pub b: f64,
    pub len: usize,
}

impl<T: Real> From<&SpatialGrid<T>> for GridDescriptor {
    fn from(g: &SpatialGrid<T>) -> Self {
        Self { a: g.left().as_f64(), b: g.right().as_f64(), len: g.len() }
    }
}

/// Outcome of one `(ε, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    #[serde(rename = "E_abs")]
    pub e_abs: f64,
    /// Fraction, not percent.
    #[serde(rename = "E_rel")]
    pub e_rel: f64,
    pub filter: Filter,
    pub grid: GridDescriptor,
    pub mask_size: usize,
    /// Discrete `‖h̃ - h‖₂`.
    pub data_noise_l2: f64,
    /// `‖ψ̃ - ψ‖₁`.
    pub source_noise_l1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::TemporalSource;

    fn gaussian(g: &SpatialGrid<f64>) -> Vec<f64> {
        g.nodes().iter().map(|x| (-x * x).exp()).collect()
    }

    #[test]
    fn l2_error_examples() {
        let g = SpatialGrid::<f64>::default_domain();
        let f = gaussian(&g);
        assert_eq!(l2_error(&f, &f, g.dx()).unwrap(), 0.0);
        let shifted: Vec<f64> = f.iter().map(|v| v + 0.3).collect();
        let expected = (g.dx() * g.len() as f64).sqrt() * 0.3;
        assert!((l2_error(&f, &shifted, g.dx()).unwrap() - expected).abs() < 1e-12);
        let zero = vec![0.0; g.len()];
        let norm = l2_error(&f, &zero, g.dx()).unwrap();
        assert!((norm - (std::f64::consts::FRAC_PI_2).powf(0.25)).abs() < 1e-12);
        assert!(matches!(l2_error(&f, &f[1..], g.dx()), Err(Error::Shape { .. })));
    }

    #[test]
    fn relative_error_examples() {
        let g = SpatialGrid::<f64>::default_domain();
        let f = gaussian(&g);
        let zero = vec![0.0; g.len()];
        assert_eq!(relative_error(&f, &zero, g.dx()).unwrap(), 1.0);
        assert!(matches!(relative_error(&zero, &f, g.dx()), Err(Error::UndefinedMetric(_))));
        let e_abs = l2_error(&f, &zero, g.dx()).unwrap();
        let e_rel = relative_error(&f, &zero, g.dx()).unwrap();
        assert_eq!(e_rel * spatial_l2_norm(&f, g.dx()), e_abs);
    }

    #[test]
    fn hs_norm_examples() {
        let g = SpatialGrid::<f64>::default_domain();
        let f = gaussian(&g);
        let s0 = hs_norm(&f, 0.0, &g).unwrap();
        assert!((s0 - spatial_l2_norm(&f, g.dx())).abs() < 1e-8);
        assert_eq!(hs_norm(&vec![0.0; g.len()], 1.0, &g).unwrap(), 0.0);
        // (∫ (1 + z²) ½ e^{-z²/2} dz)^{1/2} = (2π)^{1/4}
        let s1 = hs_norm(&f, 1.0, &g).unwrap();
        assert!((s1 - 1.5832335).abs() < 1e-7, "{s1}");
    }

    #[test]
    fn fit_rate_examples() {
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        assert!((fit_rate(&eps, &eps).unwrap() - 1.0).abs() < 1e-12);
        let root: Vec<f64> = eps.iter().map(|e| e.sqrt()).collect();
        assert!((fit_rate(&eps, &root).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(fit_rate(&eps, &[1.0, 0.0, 1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(fit_rate(&[1e-2, 1e-1, 1e-3], &[1.0; 3]), Err(Error::Domain(_))));
        assert!(matches!(fit_rate(&eps[..2], &eps[..2]), Err(Error::Domain(_))));
    }

    #[test]
    fn published_table_slope() {
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let e_abs = [5.29e-1, 1.03e-1, 5.07e-3, 2.71e-3];
        let e_rel = [0.4726, 0.0922, 0.0045, 0.0024];
        assert!((fit_rate(&eps, &e_abs).unwrap() - 0.8179288).abs() < 1e-6);
        let fit = fit_rate_unsaturated(&eps, &e_abs, &e_rel).unwrap();
        assert!(fit.skipped_saturated);
        assert_eq!(fit.rows_used, 3);
        assert!((fit.slope - 0.7899340).abs() < 1e-6);
    }

    fn unit_profile() -> (SpatialGrid<f64>, KernelProfile<f64>) {
        let g = SpatialGrid::default_domain();
        let psi = TemporalSource::<f64>::constant(1.0, 1.0).unwrap();
        let p = KernelProfile::build(&psi, &g, 1.0).unwrap();
        (g, p)
    }

    #[test]
    fn instability_witness_norms() {
        let (g, p) = unit_profile();
        let tol = 1e-6;
        for n in [1, 10, 100, 1000] {
            let w = instability_sequence(n, &p, &g).unwrap();
            let nf = n as f64;
            assert!(w.f_norm_sq >= nf * (1.0 - tol), "n={n}: {}", w.f_norm_sq);
            assert!(w.h_norm_sq <= (1.0 + tol) / nf, "n={n}: {}", w.h_norm_sq);
            assert!(w.ratio >= nf * (1.0 - tol));
            assert!(w.support > 0);
        }
    }

    #[test]
    fn instability_out_of_reach() {
        // max frequency π/dx ≈ 5 on this grid, so |H| ≥ 1/ν² ≳ 1e-3
        let g = SpatialGrid::new(-10.0, 10.0, 32).unwrap();
        let psi = TemporalSource::<f64>::constant(1.0, 1.0).unwrap();
        let p = KernelProfile::build(&psi, &g, 1.0).unwrap();
        assert!(matches!(instability_sequence(1_000_000, &p, &g), Err(Error::Range(_))));
    }
}
