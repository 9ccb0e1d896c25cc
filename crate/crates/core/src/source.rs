//! Temporal sources ψ on `[0, T]` and spatial sources f, with the singularity
//! metadata `(θ, p_T, P)` the rate analysis relies on.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quadrature::{self, Estimate, Tolerance};
use crate::scalar::Real;

/// Number of levels in the geometric mesh toward a final-time singularity.
pub const GRADED_LEVELS: i32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiKind<T> {
    Constant {
        c: T,
    },
    /// `ψ(t) = (T-t)^{-θ} (b0 + (T-t)·xi)`.
    PowerSingular {
        theta: T,
        b0: T,
        xi: T,
    },
    /// `ψ(t) = a + b·t`.
    Affine {
        a: T,
        b: T,
    },
    /// Piecewise-linear interpolation of `(t, value)` rows.
    Sampled {
        t: Vec<T>,
        value: Vec<T>,
    },
    /// `base + δ` with δ piecewise constant on equal subintervals of `[0, T]`.
    Perturbed {
        base: Box<PsiKind<T>>,
        levels: Vec<T>,
    },
}

/// The time factor ψ of the source term on the horizon `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSource<T> {
    horizon: T,
    kind: PsiKind<T>,
}

impl<T: Real> TemporalSource<T> {
    pub fn new(horizon: T, kind: PsiKind<T>) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        validate_kind(&kind, horizon)?;
        Ok(Self { horizon, kind })
    }

    pub fn constant(horizon: T, c: T) -> Result<Self> {
        Self::new(horizon, PsiKind::Constant { c })
    }

    pub fn affine(horizon: T, a: T, b: T) -> Result<Self> {
        Self::new(horizon, PsiKind::Affine { a, b })
    }

    pub fn power_singular(horizon: T, theta: T, b0: T, xi: T) -> Result<Self> {
        Self::new(horizon, PsiKind::PowerSingular { theta, b0, xi })
    }

    /// Table source; the horizon is the last abscissa and the first must be 0.
    pub fn sampled(t: Vec<T>, value: Vec<T>) -> Result<Self> {
        let horizon = *t.last().ok_or_else(|| Error::Config("empty ψ table".into()))?;
        Self::new(horizon, PsiKind::Sampled { t, value })
    }

    /// Reads a two-column `(t, value)` CSV with a mandatory header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || headers.iter().any(|h| h.parse::<f64>().is_ok()) {
            return Err(Error::Config("ψ table must start with a two-column header row such as `t,value`".into()));
        }
        let (mut t, mut value) = (Vec::new(), Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |col: usize| -> Result<T> {
                record.get(col).and_then(|s| s.parse::<f64>().ok()).map(T::lit).ok_or_else(|| {
                    Error::Config(format!("ψ table row {}: column {} is not a number", row + 1, col + 1))
                })
            };
            t.push(parse(0)?);
            value.push(parse(1)?);
        }
        Self::sampled(t, value)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn kind(&self) -> &PsiKind<T> {
        &self.kind
    }

    /// Singularity exponent θ with `ψ(T-τ) ~ p_T τ^{-θ}`.
    pub fn theta(&self) -> T {
        kind_theta(&self.kind)
    }

    /// `p_T = lim_{τ→0+} τ^θ ψ(T-τ)`.
    pub fn p_t(&self) -> T {
        kind_p_t(&self.kind, self.horizon)
    }

    /// Upper bound `P ≥ sup_τ |τ^θ ψ(T-τ)|`.
    pub fn bound_p(&self) -> T {
        kind_bound(&self.kind, self.horizon)
    }

    pub fn is_singular(&self) -> bool {
        self.theta() > T::zero()
    }

    /// ψ(t) for `0 ≤ t ≤ T`; `t = T` is rejected for singular kinds.
    pub fn eval(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t <= self.horizon) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        if t == self.horizon && self.is_singular() {
            return Err(Error::Singularity { t: t.as_f64() });
        }
        Ok(self.eval_from_end(self.horizon - t))
    }

    /// `ψ(T - τ)`, evaluated in the backward variable so the singular factor
    /// `τ^{-θ}` never suffers cancellation.
    pub fn eval_from_end(&self, tau: T) -> T {
        kind_eval_from_end(&self.kind, self.horizon, tau)
    }

    /// Interior kinks of ψ in the backward variable τ, ascending.
    pub fn tau_breaks(&self) -> Vec<T> {
        let mut t = Vec::new();
        kind_breaks(&self.kind, self.horizon, &mut t);
        let mut tau: Vec<T> =
            t.into_iter().map(|t| self.horizon - t).filter(|&tau| tau > T::zero() && tau < self.horizon).collect();
        tau.sort_by(|a, b| a.partial_cmp(b).expect("finite breaks"));
        tau.dedup();
        tau
    }

    /// Integral over `τ ∈ [0, τ_max]` of an integrand that behaves like
    /// `τ^{tau_power} ψ(T-τ)` near τ = 0. Kinks of every source involved become
    /// panel boundaries, and the mesh is graded toward τ = 0 for power kinds.
    pub(crate) fn integrate_backward<F: Fn(T) -> T>(
        &self,
        others: &[&Self],
        tau_max: T,
        tau_power: T,
        extra_breaks: Vec<T>,
        integrand: F,
        tol: Tolerance,
    ) -> Result<Estimate<T>> {
        let mut breaks = extra_breaks;
        breaks.extend(self.tau_breaks());
        let mut theta = power_theta(&self.kind);
        for o in others {
            breaks.extend(o.tau_breaks());
            theta = match (theta, power_theta(&o.kind)) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        let tau_max = tau_max.min(self.horizon);
        breaks.retain(|&b| b > T::zero() && b < tau_max);
        let endpoint_power = theta.map(|theta| tau_power - theta);
        integrate_graded(integrand, tau_max, endpoint_power, breaks, tol)
    }

    /// `‖ψ‖_{L¹(0,T)}`.
    pub fn l1_norm(&self) -> Result<T> {
        Ok(self
            .integrate_backward(
                &[],
                self.horizon,
                T::zero(),
                Vec::new(),
                |tau| self.eval_from_end(tau).abs(),
                Tolerance::default(),
            )?
            .value)
    }

    /// `‖ψ - ϑ‖_{L¹(0,T)}` by adaptive quadrature.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        if self.horizon != other.horizon {
            return Err(Error::Config(format!(
                "sources have different horizons: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        let diff = |tau: T| (self.eval_from_end(tau) - other.eval_from_end(tau)).abs();
        let est = self.integrate_backward(&[other], self.horizon, T::zero(), Vec::new(), diff, Tolerance::default())?;
        Ok(est.value.max(T::zero()))
    }

    /// `ψ + δ` where δ takes `levels[i]` on the i-th of `levels.len()` equal
    /// subintervals of `[0, T]`.
    pub fn with_piecewise_offset(&self, levels: Vec<T>) -> Result<Self> {
        Self::new(self.horizon, PsiKind::Perturbed { base: Box::new(self.kind.clone()), levels })
    }
}

/// Integrates over `[0, tau_max]`. With `endpoint_power = Some(e)`, for an
/// integrand behaving like `τ^e` at 0 (`e > -1`), the interval is split
/// geometrically (ratio 1/2, [`GRADED_LEVELS`] levels) toward 0 and the
/// innermost piece is mapped by `τ = δ v^p`, `p = max(1, 2/(1+e))`, which turns
/// the endpoint behaviour into `v^{≥1}`.
pub fn integrate_graded<T: Real, F: Fn(T) -> T>(
    integrand: F,
    tau_max: T,
    endpoint_power: Option<T>,
    mut breaks: Vec<T>,
    tol: Tolerance,
) -> Result<Estimate<T>> {
    if !(tau_max > T::zero()) {
        return Ok(Estimate { value: T::zero(), error: T::zero() });
    }
    let Some(power) = endpoint_power else {
        breaks.push(T::zero());
        breaks.push(tau_max);
        sort_dedup(&mut breaks);
        return quadrature::integrate_pieces(integrand, &breaks, tol);
    };

    let half = T::lit(0.5);
    let inner = tau_max * half.powi(GRADED_LEVELS);
    let mut level = tau_max;
    breaks.push(tau_max);
    for _ in 0..GRADED_LEVELS {
        level = level * half;
        breaks.push(level);
    }
    breaks.retain(|&b| b >= inner);
    sort_dedup(&mut breaks);
    let outer = quadrature::integrate_pieces(&integrand, &breaks, tol)?;

    if !(power > -T::one()) {
        return Err(Error::Config(format!("integrand behaves like τ^{power} at 0 and is not integrable")));
    }
    let p = (T::lit(2.0) / (T::one() + power)).max(T::one());
    let mapped = |v: T| {
        if v <= T::zero() {
            return T::zero();
        }
        let tau = inner * v.powf(p);
        integrand(tau) * inner * p * v.powf(p - T::one())
    };
    let core = quadrature::integrate(mapped, T::zero(), T::one(), tol)?;
    Ok(Estimate { value: outer.value + core.value, error: outer.error + core.error })
}

fn sort_dedup<T: Real>(v: &mut Vec<T>) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    v.dedup();
}

fn validate_kind<T: Real>(kind: &PsiKind<T>, horizon: T) -> Result<()> {
    let finite = |name: &str, v: T| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} must be finite, got {v}")))
        }
    };
    match kind {
        PsiKind::Constant { c } => finite("c", *c),
        PsiKind::Affine { a, b } => {
            finite("a", *a)?;
            finite("b", *b)
        }
        PsiKind::PowerSingular { theta, b0, xi } => {
            finite("b0", *b0)?;
            finite("xi", *xi)?;
            if !(*theta < T::lit(2.0)) || !theta.is_finite() {
                return Err(Error::Config(format!("singularity exponent θ must be < 2, got {theta}")));
            }
            // τ^{-θ} b0 is integrable on (0, T) only for θ < 1
            if *theta >= T::one() && *b0 != T::zero() {
                return Err(Error::Config(format!("ψ must lie in L¹(0, T): θ = {theta} ≥ 1 requires b0 = 0")));
            }
            Ok(())
        }
        PsiKind::Sampled { t, value } => {
            if t.len() != value.len() || t.len() < 2 {
                return Err(Error::Config("ψ table needs at least two (t, value) rows".into()));
            }
            if t[0] != T::zero() {
                return Err(Error::Config(format!("ψ table must start at t = 0, got {}", t[0])));
            }
            if t.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("ψ table abscissae must be strictly increasing".into()));
            }
            if t.iter().chain(value).any(|v| !v.is_finite()) {
                return Err(Error::Config("ψ table contains non-finite entries".into()));
            }
            if t[t.len() - 1] != horizon {
                return Err(Error::Config("ψ table must end at the horizon".into()));
            }
            Ok(())
        }
        PsiKind::Perturbed { base, levels } => {
            if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
                return Err(Error::Config("perturbation levels must be finite and nonempty".into()));
            }
            validate_kind(base, horizon)
        }
    }
}

/// Exponent of the leading `τ^{-θ}` behaviour of a power kind, used for mesh grading.
fn power_theta<T: Real>(kind: &PsiKind<T>) -> Option<T> {
    match kind {
        PsiKind::PowerSingular { theta, b0, .. } if *b0 == T::zero() => Some(*theta - T::one()),
        PsiKind::PowerSingular { theta, .. } => Some(*theta),
        PsiKind::Perturbed { base, .. } => power_theta(base),
        _ => None,
    }
}

fn kind_theta<T: Real>(kind: &PsiKind<T>) -> T {
    match kind {
        PsiKind::PowerSingular { theta, .. } => *theta,
        // an additive bounded offset only changes the leading term when the base vanishes at T
        PsiKind::Perturbed { base, .. } => kind_theta(base).max(T::zero()),
        _ => T::zero(),
    }
}

fn kind_p_t<T: Real>(kind: &PsiKind<T>, horizon: T) -> T {
    match kind {
        PsiKind::Constant { c } => *c,
        PsiKind::Affine { a, b } => *a + *b * horizon,
        PsiKind::PowerSingular { b0, theta, .. } => {
            if *theta < T::zero() {
                T::zero()
            } else {
                *b0
            }
        }
        PsiKind::Sampled { value, .. } => value[value.len() - 1],
        PsiKind::Perturbed { base, levels } => {
            let base_theta = kind_theta(base);
            let base_p = kind_p_t(base, horizon);
            if base_theta > T::zero() {
                base_p
            } else if base_theta == T::zero() {
                base_p + levels[levels.len() - 1]
            } else {
                levels[levels.len() - 1]
            }
        }
    }
}

fn kind_bound<T: Real>(kind: &PsiKind<T>, horizon: T) -> T {
    match kind {
        PsiKind::Constant { c } => c.abs(),
        PsiKind::Affine { a, b } => a.abs().max((*a + *b * horizon).abs()),
        PsiKind::PowerSingular { theta, b0, xi } => {
            let edge = b0.abs().max((*b0 + *xi * horizon).abs());
            if *theta < T::zero() {
                // here the reported θ is that of the kind, but τ^{-θ} ≤ T^{-θ}
                horizon.powf(-*theta) * edge
            } else {
                edge
            }
        }
        PsiKind::Sampled { value, .. } => value.iter().fold(T::zero(), |m, v| m.max(v.abs())),
        PsiKind::Perturbed { base, levels } => {
            let offset = levels.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let theta = kind_theta(base);
            kind_bound(base, horizon) + horizon.powf(theta) * offset
        }
    }
}

fn kind_eval_from_end<T: Real>(kind: &PsiKind<T>, horizon: T, tau: T) -> T {
    match kind {
        PsiKind::Constant { c } => *c,
        PsiKind::Affine { a, b } => *a + *b * (horizon - tau),
        PsiKind::PowerSingular { theta, b0, xi } => tau.powf(-*theta) * (*b0 + tau * *xi),
        PsiKind::Sampled { t, value } => interpolate(t, value, horizon - tau),
        PsiKind::Perturbed { base, levels } => {
            let n = levels.len();
            let t = horizon - tau;
            let idx = ((t / horizon) * T::from_usize_lossy(n)).floor().to_usize().unwrap_or(0).min(n - 1);
            kind_eval_from_end(base, horizon, tau) + levels[idx]
        }
    }
}

fn kind_breaks<T: Real>(kind: &PsiKind<T>, horizon: T, out: &mut Vec<T>) {
    match kind {
        PsiKind::Sampled { t, .. } => out.extend_from_slice(t),
        PsiKind::Perturbed { base, levels } => {
            let n = levels.len();
            out.extend((1..n).map(|i| horizon * T::from_usize_lossy(i) / T::from_usize_lossy(n)));
            kind_breaks(base, horizon, out);
        }
        _ => {}
    }
}

fn interpolate<T: Real>(t: &[T], value: &[T], at: T) -> T {
    let i = t.partition_point(|&x| x <= at);
    if i == 0 {
        return value[0];
    }
    if i >= t.len() {
        return value[t.len() - 1];
    }
    let w = (at - t[i - 1]) / (t[i] - t[i - 1]);
    value[i - 1] + w * (value[i] - value[i - 1])
}

/// Closed-form or tabulated spatial source f with its claimed `H^γ` smoothness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialShape<T> {
    /// `amplitude · exp(-(x/width)²)`.
    Gaussian {
        amplitude: T,
        width: T,
    },
    Sampled {
        values: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSource<T> {
    pub shape: SpatialShape<T>,
    /// Sobolev index γ ≥ 0 the source is asserted to belong to.
    pub gamma: T,
}

impl<T: Real> SpatialSource<T> {
    pub fn gaussian(amplitude: T, width: T, gamma: T) -> Result<Self> {
        if !(width > T::zero()) || !amplitude.is_finite() {
            return Err(Error::Config("gaussian source needs finite amplitude and positive width".into()));
        }
        Self::validated(SpatialShape::Gaussian { amplitude, width }, gamma)
    }

    pub fn sampled(values: Vec<T>, gamma: T) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("spatial source samples must be finite".into()));
        }
        Self::validated(SpatialShape::Sampled { values }, gamma)
    }

    fn validated(shape: SpatialShape<T>, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero()) {
            return Err(Error::Config(format!("smoothness γ must be ≥ 0, got {gamma}")));
        }
        Ok(Self { shape, gamma })
    }

    pub fn sample(&self, grid: &SpatialGrid<T>) -> Result<Vec<T>> {
        match &self.shape {
            SpatialShape::Gaussian { amplitude, width } => Ok(grid
                .nodes()
                .into_iter()
                .map(|x| {
                    let u = x / *width;
                    *amplitude * (-u * u).exp()
                })
                .collect()),
            SpatialShape::Sampled { values } => {
                grid.check_len(values.len())?;
                Ok(values.clone())
            }
        }
    }

    /// Exact continuous transform when the shape has one.
    pub fn spectrum(&self, z: T) -> Option<T> {
        match &self.shape {
            SpatialShape::Gaussian { amplitude, width } => {
                let w = *width;
                Some(*amplitude * w * T::FRAC_1_SQRT_2() * (-(w * w * z * z) / T::lit(4.0)).exp())
            }
            SpatialShape::Sampled { .. } => None,
        }
    }
}
