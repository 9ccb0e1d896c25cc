//! The spectral symbol `H_ψ(ν) = ∫₀ᵀ e^{-(T-s)ν} (T-s) ψ(s) ds` relating the
//! source spectrum to the final-time data spectrum, and the frequency sets it
//! induces.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quadrature::Tolerance;
use crate::scalar::Real;
use crate::source::TemporalSource;

/// Beyond `ν·τ = EXP_CUTOFF` the weight `e^{-ντ}` is below 1e-304 and dropped.
const EXP_CUTOFF: f64 = 700.0;
pub const DEFAULT_H0: f64 = 10.0;
pub const ZERO_SCAN_SAMPLES: usize = 4096;
const ZERO_TOL: f64 = 1e-12;

/// `H_ψ(ν)` by adaptive quadrature in the backward variable `τ = T - s`.
pub fn eval_kernel<T: Real>(psi: &TemporalSource<T>, nu: T) -> Result<T> {
    if !(nu >= T::zero()) || !nu.is_finite() {
        return Err(Error::Domain(format!("kernel argument ν must be ≥ 0, got {nu}")));
    }
    let horizon = psi.horizon();
    let cutoff = T::lit(EXP_CUTOFF);
    let tau_max = if nu * horizon > cutoff { cutoff / nu } else { horizon };
    let integrand = |tau: T| (-nu * tau).exp() * tau * psi.eval_from_end(tau);
    Ok(psi
        .integrate_backward(&[], tau_max, T::one(), decay_breaks(nu, tau_max), integrand, Tolerance::default())?
        .value)
}

/// Breakpoints `2^j/ν` resolving the exponential layer `e^{-ντ}` near τ = 0.
pub(crate) fn decay_breaks<T: Real>(nu: T, tau_max: T) -> Vec<T> {
    let mut out = Vec::new();
    if nu > T::one() / tau_max {
        let mut b = T::one() / nu;
        while b < tau_max {
            out.push(b);
            b = b + b;
        }
    }
    out
}

/// `x^{2-θ} H_ψ(x) - p_T Γ(2-θ)`, which tends to zero as `x → ∞`.
pub fn asymptotic_residual<T: Real>(psi: &TemporalSource<T>, x: T) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("asymptotic residual needs x > 0, got {x}")));
    }
    let p_t = psi.p_t();
    if p_t == T::zero() {
        return Err(Error::Config("asymptotics need p_T ≠ 0".into()));
    }
    let exponent = T::lit(2.0) - psi.theta();
    Ok(x.powf(exponent) * eval_kernel(psi, x)? - asymptotic_limit(psi))
}

/// `p_T Γ(2-θ)`.
pub fn asymptotic_limit<T: Real>(psi: &TemporalSource<T>) -> T {
    let exponent = T::lit(2.0) - psi.theta();
    psi.p_t() * T::lit(libm::tgamma(exponent.as_f64()))
}

/// `H_ψ(|z_k|^{2σ})` on every frequency node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile<T> {
    grid: SpatialGrid<T>,
    sigma: T,
    nu: Vec<T>,
    values: Vec<T>,
    psi_l1: T,
    theta: T,
    p_t: T,
}

impl<T: Real> KernelProfile<T> {
    pub fn build(psi: &TemporalSource<T>, grid: &SpatialGrid<T>, sigma: T) -> Result<Self> {
        if !(sigma > T::zero() && sigma <= T::one()) {
            return Err(Error::Config(format!("fractional order σ must lie in (0, 1], got {sigma}")));
        }
        let nu: Vec<T> = grid.freq_nodes().into_iter().map(|z| z.abs().powf(T::lit(2.0) * sigma)).collect();

        // ±z share a value; evaluate once per magnitude
        let n = grid.len();
        let owners: Vec<usize> = (0..n)
            .map(|i| match grid.mirror_slot(i) {
                Some(j) if j < i => j,
                _ => i,
            })
            .collect();
        let unique: Vec<usize> = (0..n).filter(|&i| owners[i] == i).collect();
        let evaluated: Vec<T> = unique.par_iter().map(|&i| eval_kernel(psi, nu[i])).collect::<Result<_>>()?;
        let mut values = vec![T::zero(); n];
        for (&i, &v) in unique.iter().zip(&evaluated) {
            values[i] = v;
        }
        for i in 0..n {
            values[i] = values[owners[i]];
        }

        let psi_l1 = psi.l1_norm()?;
        let profile = Self { grid: *grid, sigma, nu, values, psi_l1, theta: psi.theta(), p_t: psi.p_t() };
        profile.check_decay_bound()?;
        Ok(profile)
    }

    /// `ν |H(ν)| ≤ e^{-1} ‖ψ‖₁` at every node.
    fn check_decay_bound(&self) -> Result<()> {
        let bound = (-T::one()).exp() * self.psi_l1;
        let slack = T::lit(1e-9) * self.psi_l1.max(T::one());
        for (&nu, &h) in self.nu.iter().zip(&self.values) {
            if nu * h.abs() > bound + slack {
                return Err(Error::Consistency(format!(
                    "decay bound violated at ν = {nu}: ν|H| = {} > {bound}",
                    nu * h.abs()
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn psi_l1(&self) -> T {
        self.psi_l1
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn p_t(&self) -> T {
        self.p_t
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `p_T Γ(2-θ)` for the source the profile was built from.
    pub fn asymptotic_limit(&self) -> T {
        let exponent = T::lit(2.0) - self.theta;
        self.p_t * T::lit(libm::tgamma(exponent.as_f64()))
    }

    /// Smallest profile node `ν` beyond which every node satisfies
    /// `|ν^{2-θ}H(ν) - p_TΓ(2-θ)| ≤ ½|p_TΓ(2-θ)|`; [`DEFAULT_H0`] when no node qualifies.
    pub fn choose_h0(&self) -> T {
        let limit = self.asymptotic_limit();
        if limit == T::zero() {
            return T::lit(DEFAULT_H0);
        }
        let exponent = T::lit(2.0) - self.theta;
        let mut pairs: Vec<(T, T)> = self.nu.iter().copied().zip(self.values.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ν"));
        let ok =
            |&(nu, h): &(T, T)| nu > T::zero() && (nu.powf(exponent) * h - limit).abs() <= T::lit(0.5) * limit.abs();
        let tail = pairs.iter().rev().take_while(|p| ok(p)).count();
        if tail == 0 {
            return T::lit(DEFAULT_H0);
        }
        pairs[pairs.len() - tail].0
    }

    /// `C₁ = (½|p_T|Γ(2-θ))^{1/(2σ(2-θ))}`.
    pub fn c1_constant(&self) -> T {
        let exponent = T::lit(2.0) - self.theta;
        let gamma = T::lit(libm::tgamma(exponent.as_f64()));
        (T::lit(0.5) * self.p_t.abs() * gamma).powf(T::one() / (T::lit(2.0) * self.sigma * exponent))
    }

    /// Level sets at threshold α with the low/high frequency split at `h0`.
    pub fn level_sets(&self, alpha: T, h0: T) -> Result<LevelSets<T>> {
        if !(alpha > T::zero()) {
            return Err(Error::Config(format!("threshold α must be > 0, got {alpha}")));
        }
        if !(h0 > T::zero()) {
            return Err(Error::Config(format!("split h0 must be > 0, got {h0}")));
        }
        let omega: Vec<bool> = self.values.iter().map(|h| h.abs() > alpha).collect();
        let low: Vec<bool> = self.nu.iter().map(|&nu| nu <= h0).collect();
        let pi: Vec<bool> = omega.iter().map(|&w| !w).collect();
        let b_mask = pi.iter().zip(&low).map(|(&p, &l)| p && l).collect();
        let c_mask = pi.iter().zip(&low).map(|(&p, &l)| p && !l).collect();
        Ok(LevelSets { alpha, h0, omega_mask: omega, pi_mask: pi, b_mask, c_mask })
    }
}

/// Pass band `ω(α) = {|H| > α}`, stop band `π(α)` and its split into the
/// low-frequency part `B` (`ν ≤ h0`) and high-frequency part `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSets<T> {
    pub alpha: T,
    pub h0: T,
    pub omega_mask: Vec<bool>,
    pub pi_mask: Vec<bool>,
    pub b_mask: Vec<bool>,
    pub c_mask: Vec<bool>,
}

impl<T> LevelSets<T> {
    pub fn omega_count(&self) -> usize {
        self.omega_mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelZero<T> {
    pub nu: T,
    /// False when the zero was seen only as a tiny scan value without a sign change.
    pub confirmed: bool,
}

/// Zeros of `H_ψ` on `[0, nu_max]`: a uniform scan, sign-change brackets
/// refined by bisection, plus scan nodes where `|H| < 1e-12`.
pub fn find_zeros<T: Real>(psi: &TemporalSource<T>, nu_max: T) -> Result<Vec<KernelZero<T>>> {
    find_zeros_with(psi, nu_max, ZERO_SCAN_SAMPLES)
}

pub fn find_zeros_with<T: Real>(psi: &TemporalSource<T>, nu_max: T, samples: usize) -> Result<Vec<KernelZero<T>>> {
    if !(nu_max > T::zero()) {
        return Err(Error::Domain(format!("ν_max must be > 0, got {nu_max}")));
    }
    let samples = samples.max(2);
    let step = nu_max / T::from_usize_lossy(samples - 1);
    let nodes: Vec<T> = (0..samples).map(|i| T::from_usize_lossy(i) * step).collect();
    let values: Vec<T> = nodes.par_iter().map(|&nu| eval_kernel(psi, nu)).collect::<Result<_>>()?;

    let tiny = |v: T| v.abs() < T::lit(ZERO_TOL);
    let mut zeros = Vec::new();
    for i in 0..samples {
        if tiny(values[i]) {
            let left = (i > 0).then(|| values[i - 1]).filter(|v| !tiny(*v));
            let right = values.get(i + 1).copied().filter(|v| !tiny(*v));
            let confirmed = matches!((left, right), (Some(l), Some(r)) if l.signum() != r.signum());
            zeros.push(KernelZero { nu: nodes[i], confirmed });
        } else if i + 1 < samples && !tiny(values[i + 1]) && values[i].signum() != values[i + 1].signum() {
            let nu = bisect(psi, nodes[i], nodes[i + 1], values[i])?;
            zeros.push(KernelZero { nu, confirmed: true });
        }
    }
    Ok(zeros)
}

fn bisect<T: Real>(psi: &TemporalSource<T>, mut lo: T, mut hi: T, mut f_lo: T) -> Result<T> {
    let tol = T::lit(ZERO_TOL).max(T::lit(4.0) * T::epsilon() * hi.abs());
    while hi - lo > tol {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = eval_kernel(psi, mid)?;
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> TemporalSource<f64> {
        TemporalSource::<f64>::constant(1.0, 1.0).unwrap()
    }

    /// `(1 - e^{-ν}(1+ν))/ν²` without cancellation for small ν.
    fn closed_form(nu: f64) -> f64 {
        if nu < 1e-2 {
            // Σ_{k≥0} (-ν)^k / (k! (k+2))
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..20 {
                sum += term / (k as f64 + 2.0);
                term *= -nu / (k as f64 + 1.0);
            }
            sum
        } else {
            (-(-nu).exp_m1() - nu * (-nu).exp()) / (nu * nu)
        }
    }

    #[test]
    fn constant_source_values() {
        assert!((eval_kernel(&one(), 0.0).unwrap() - 0.5).abs() < 1e-15);
        let expected = 1.0 - 2.0 / std::f64::consts::E;
        assert!((eval_kernel(&one(), 1.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.2642411).abs() < 1e-7);
        for nu in [1e-3, 0.3, 7.0, 90.0, 650.0, 800.0, 1e5] {
            let h = eval_kernel(&one(), nu).unwrap();
            assert!((h / closed_form(nu) - 1.0).abs() < 1e-10, "ν={nu}");
        }
    }

    #[test]
    fn affine_source_vanishes_at_zero() {
        let aff = TemporalSource::<f64>::affine(1.0, 1.0, -3.0).unwrap();
        assert!(eval_kernel(&aff, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(matches!(eval_kernel(&one(), -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn profile_on_unit_and_half_order() {
        let grid = SpatialGrid::new(-std::f64::consts::PI, std::f64::consts::PI, 9).unwrap();
        // dz = 2π/(9·dx) with dx = 2π/8 → dz = 8/9
        let p1 = KernelProfile::build(&one(), &grid, 1.0).unwrap();
        for (i, z) in grid.freq_nodes().iter().enumerate() {
            assert!((p1.values()[i] - closed_form(z * z)).abs() < 1e-12);
        }
        // L·dx = 2π gives dz = 1, so the slot with k = 4 has |z| = 4
        let pi = std::f64::consts::PI;
        let g = SpatialGrid::new(-pi, -pi + 31.0 * 2.0 * pi / 32.0, 32).unwrap();
        assert!((g.dz() - 1.0).abs() < 1e-12);
        let half = KernelProfile::build(&one(), &g, 0.5).unwrap();
        for (i, z) in g.freq_nodes().iter().enumerate() {
            assert!((half.values()[i] - closed_form(z.abs())).abs() < 1e-12);
        }
        assert!((closed_form(4.0) - 0.0567764).abs() < 1e-7);
        let zero_slot = g.len() / 2;
        assert!((half.values()[zero_slot] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sigma_out_of_range_rejected() {
        let g = SpatialGrid::<f64>::default_domain();
        assert!(KernelProfile::build(&one(), &g, 0.0).is_err());
        assert!(KernelProfile::build(&one(), &g, 1.5).is_err());
    }

    #[test]
    fn level_sets_examples() {
        let g = SpatialGrid::default_domain();
        let p = KernelProfile::build(&one(), &g, 1.0).unwrap();
        assert!((p.max_abs() - 0.5).abs() < 1e-15);
        // max H is H(0) = 1/2 (up to rounding); strict inequality leaves ω empty
        let empty = p.level_sets(p.max_abs(), 10.0).unwrap();
        assert_eq!(empty.omega_count(), 0);
        let full = p.level_sets(1e-12, 10.0).unwrap();
        assert_eq!(full.omega_count(), g.len());

        // H(ν*) = 0.2 at ν* ≈ 1.4696161 (bisection on the closed form)
        let (mut lo, mut hi) = (0.1, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if closed_form(mid) > 0.2 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 1.4696161).abs() < 1e-6);
        let sets = p.level_sets(0.2, 10.0).unwrap();
        for (i, z) in g.freq_nodes().iter().enumerate() {
            assert_eq!(sets.omega_mask[i], z * z < lo, "z={z}");
            assert_eq!(sets.pi_mask[i], !sets.omega_mask[i]);
            assert_eq!(sets.pi_mask[i], sets.b_mask[i] || sets.c_mask[i]);
            assert!(!(sets.b_mask[i] && sets.c_mask[i]));
        }
    }

    #[test]
    fn tie_goes_to_stop_band() {
        let g = SpatialGrid::default_domain();
        let p = KernelProfile::build(&one(), &g, 1.0).unwrap();
        let at = p.values()[g.len() / 2 + 3];
        let sets = p.level_sets(at, 10.0).unwrap();
        assert!(!sets.omega_mask[g.len() / 2 + 3]);
        assert!(sets.pi_mask[g.len() / 2 + 3]);
    }

    #[test]
    fn zeros_of_constant_and_affine() {
        assert!(find_zeros(&one(), 100.0).unwrap().is_empty());
        let aff = TemporalSource::<f64>::affine(1.0, 1.0, -3.0).unwrap();
        let zeros = find_zeros(&aff, 50.0).unwrap();
        assert!(zeros.iter().any(|z| z.nu == 0.0));
    }

    #[test]
    fn asymptotics_of_constant_source() {
        let r5 = asymptotic_residual(&one(), 5.0).unwrap();
        assert!((r5 - (-6.0 * (-5f64).exp())).abs() < 1e-12);
        assert!((r5 + 0.04043).abs() < 1e-5);
        let r50 = asymptotic_residual(&one(), 50.0).unwrap();
        assert!(r50.abs() < 1e-12);
    }

    #[test]
    fn asymptotics_of_singular_source() {
        let p = TemporalSource::<f64>::power_singular(1.0, 0.5, 1.0, 0.0).unwrap();
        let limit = asymptotic_limit(&p);
        assert!((limit - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        assert!(asymptotic_residual(&p, 1e4).unwrap().abs() < 1e-2);
    }

    #[test]
    fn zero_p_t_rejected() {
        let p = TemporalSource::<f64>::affine(1.0, 1.0, -1.0).unwrap();
        assert!(matches!(asymptotic_residual(&p, 10.0), Err(Error::Config(_))));
    }

    #[test]
    fn h0_and_c1_for_constant_source() {
        let g = SpatialGrid::default_domain();
        let p = KernelProfile::build(&one(), &g, 1.0).unwrap();
        let h0 = p.choose_h0();
        // ν²H(ν) = 1 - e^{-ν}(1+ν) ≥ 1/2 exactly when ν ≥ ν₀
        let (mut lo, mut hi) = (0.1, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * closed_form(mid) < 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((hi - 1.6783).abs() < 1e-4);
        let first = p.nu().iter().copied().filter(|&nu| nu >= hi).fold(f64::INFINITY, f64::min);
        assert_eq!(h0, first);
        assert!((p.c1_constant() - 0.5f64.sqrt().sqrt()).abs() < 1e-12);
    }
}
