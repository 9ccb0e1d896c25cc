//! Forward map `f ↦ h = Kf` with `ĥ(z) = H_ψ(|z|^{2σ}) f̂(z)`, and the solution
//! `u(·, t)` at intermediate times. Both are exact spectral formulas; there is
//! no time stepping.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{forward_ft, inverse_ft, SpatialGrid};
use crate::kernel::{decay_breaks, KernelProfile};
use crate::quadrature::Tolerance;
use crate::scalar::Real;
use crate::source::{integrate_graded, TemporalSource};

const EXP_CUTOFF: f64 = 700.0;

pub(crate) fn check_same_grid<T: Real>(profile: &KernelProfile<T>, grid: &SpatialGrid<T>) -> Result<()> {
    if profile.grid() != grid {
        return Err(Error::Config("kernel profile was built on a different grid".into()));
    }
    Ok(())
}

/// Final-time data `h = Kf` on the grid.
pub fn apply_forward<T: Real>(f: &[T], profile: &KernelProfile<T>, grid: &SpatialGrid<T>) -> Result<Vec<T>> {
    check_same_grid(profile, grid)?;
    let spectrum = forward_ft(f, grid)?;
    inverse_ft(&spectrum.scaled_by(profile.values())?)
}

/// `u(·, t)` with `û(z, t) = f̂(z) ∫₀ᵗ e^{-|z|^{2σ}(t-s)} (t-s) ψ(s) ds`.
pub fn time_solution<T: Real>(
    f: &[T],
    psi: &TemporalSource<T>,
    grid: &SpatialGrid<T>,
    sigma: T,
    t: T,
) -> Result<Vec<T>> {
    let horizon = psi.horizon();
    if !(t >= T::zero() && t <= horizon) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    grid.check_len(f.len())?;
    if t == T::zero() {
        return Ok(vec![T::zero(); grid.len()]);
    }
    if t == horizon {
        let profile = KernelProfile::build(psi, grid, sigma)?;
        return apply_forward(f, &profile, grid);
    }
    if !(sigma > T::zero() && sigma <= T::one()) {
        return Err(Error::Config(format!("fractional order σ must lie in (0, 1], got {sigma}")));
    }

    // kinks of ψ(t - τ) in τ
    let shift = horizon - t;
    let breaks: Vec<T> = psi.tau_breaks().into_iter().map(|b| b - shift).filter(|&b| b > T::zero() && b < t).collect();
    let multiplier = |nu: T| -> Result<T> {
        let cutoff = T::lit(EXP_CUTOFF);
        let tau_max = if nu * t > cutoff { cutoff / nu } else { t };
        let mut local = decay_breaks(nu, tau_max);
        local.extend(breaks.iter().copied().filter(|&b| b < tau_max));
        let integrand = |tau: T| (-nu * tau).exp() * tau * psi.eval_from_end(shift + tau);
        Ok(integrate_graded(integrand, tau_max, None, local, Tolerance::default())?.value)
    };

    let two_sigma = T::lit(2.0) * sigma;
    let nu: Vec<T> = grid.freq_nodes().into_iter().map(|z| z.abs().powf(two_sigma)).collect();
    let n = grid.len();
    let owners: Vec<usize> = (0..n)
        .map(|i| match grid.mirror_slot(i) {
            Some(j) if j < i => j,
            _ => i,
        })
        .collect();
    let unique: Vec<usize> = (0..n).filter(|&i| owners[i] == i).collect();
    let evaluated: Vec<T> = unique.par_iter().map(|&i| multiplier(nu[i])).collect::<Result<_>>()?;
    let mut values = vec![T::zero(); n];
    for (&i, &v) in unique.iter().zip(&evaluated) {
        values[i] = v;
    }
    for i in 0..n {
        values[i] = values[owners[i]];
    }
    inverse_ft(&forward_ft(f, grid)?.scaled_by(&values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::spatial_l2_norm;
    use crate::quadrature::integrate;

    fn setup() -> (SpatialGrid<f64>, TemporalSource<f64>, Vec<f64>) {
        let g = SpatialGrid::default_domain();
        let psi = TemporalSource::<f64>::constant(1.0, 1.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x: &f64| (-x * x).exp()).collect();
        (g, psi, f)
    }

    /// `∫₀^{t} s (4s+1)^{-1/2} e^{-x²/(4s+1)} ds` by quadrature.
    fn gaussian_response(x: f64, t: f64) -> f64 {
        integrate(|s: f64| s / (4.0 * s + 1.0).sqrt() * (-x * x / (4.0 * s + 1.0)).exp(), 0.0, t, Tolerance::default())
            .unwrap()
            .value
    }

    #[test]
    fn gaussian_data_at_origin() {
        let (g, psi, f) = setup();
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let h = apply_forward(&f, &profile, &g).unwrap();
        // antiderivative (1/24)((4s+1)^{3/2} - 3(4s+1)^{1/2}) on [0, 1]
        let exact = (2.0 * 5f64.sqrt() + 2.0) / 24.0;
        assert!((exact - 0.2696723).abs() < 1e-7);
        let mid = g.len() / 2;
        let x = g.node(mid);
        assert!((h[mid] - gaussian_response(x, 1.0)).abs() < 1e-6);
    }

    #[test]
    fn zero_source_gives_zero_data() {
        let (g, psi, _) = setup();
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let h = apply_forward(&vec![0.0; g.len()], &profile, &g).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wide_gaussian_is_scaled_by_kernel_at_zero() {
        // spectrum concentrated near z = 0 where H ≈ 1/2
        let g = SpatialGrid::new(-400.0, 400.0, 4096).unwrap();
        let psi = TemporalSource::<f64>::constant(1.0, 1.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x: &f64| (-(x / 60.0).powi(2)).exp()).collect();
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let h = apply_forward(&f, &profile, &g).unwrap();
        let dev = f.iter().zip(&h).map(|(a, b)| (0.5 * a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn time_solution_endpoints() {
        let (g, psi, f) = setup();
        let u0 = time_solution(&f, &psi, &g, 1.0, 0.0).unwrap();
        assert!(u0.iter().all(|&v| v == 0.0));
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let h = apply_forward(&f, &profile, &g).unwrap();
        let ut = time_solution(&f, &psi, &g, 1.0, 1.0).unwrap();
        assert!(h.iter().zip(&ut).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn half_horizon_matches_quadrature() {
        let (g, psi, f) = setup();
        let u = time_solution(&f, &psi, &g, 1.0, 0.5).unwrap();
        let mid = g.len() / 2;
        assert!((gaussian_response(0.0, 0.5) - 1.0 / 12.0).abs() < 1e-14);
        for j in [mid, mid + 40, mid - 100, mid + 200] {
            assert!((u[j] - gaussian_response(g.node(j), 0.5)).abs() < 1e-6, "j={j}");
        }
    }

    #[test]
    fn intermediate_time_close_to_horizon_agrees() {
        let (g, psi, f) = setup();
        let near = time_solution(&f, &psi, &g, 1.0, 1.0 - 1e-9).unwrap();
        let at = time_solution(&f, &psi, &g, 1.0, 1.0).unwrap();
        assert!(near.iter().zip(&at).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn translation_commutes_with_k() {
        let (g, psi, _) = setup();
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let shape = |x: f64| (-(x - 0.3).powi(2)).exp();
        let f: Vec<f64> = g.nodes().iter().map(|&x| shape(x)).collect();
        let shifted: Vec<f64> = g.nodes().iter().map(|&x| shape(x - g.dx())).collect();
        let h = apply_forward(&f, &profile, &g).unwrap();
        let hs = apply_forward(&shifted, &profile, &g).unwrap();
        for j in 100..g.len() - 100 {
            assert!((hs[j + 1] - h[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn operator_norm_bound() {
        let (g, psi, f) = setup();
        let profile = KernelProfile::build(&psi, &g, 1.0).unwrap();
        let h = apply_forward(&f, &profile, &g).unwrap();
        assert!(spatial_l2_norm(&h, g.dx()) <= profile.max_abs() * spatial_l2_norm(&f, g.dx()) + 1e-12);
    }

    #[test]
    fn time_outside_horizon_rejected() {
        let (g, psi, f) = setup();
        assert!(matches!(time_solution(&f, &psi, &g, 1.0, 1.5), Err(Error::Domain(_))));
    }
}
