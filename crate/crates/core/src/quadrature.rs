//! Globally adaptive 15-point Gauss–Legendre quadrature.
//!
//! Every panel carries the difference between its one-panel rule and the sum of
//! the rules on its two halves as an error estimate. The panel with the largest
//! estimate is bisected until the summed estimate meets the tolerance.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

const ORDER: usize = 15;
const MAX_PANELS: usize = 20_000;

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-10, max_depth: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on `P_15`.
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // three-term recurrence for P_n and its derivative
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // exact mirror symmetry
        for i in 0..n / 2 {
            nodes[n - 1 - i] = -nodes[i];
            weights[n - 1 - i] = weights[i];
        }
        nodes[n / 2] = 0.0;
        (nodes, weights)
    })
}

fn gauss15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> T {
    let (nodes, weights) = rule();
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    // symmetric pairs; the rule's middle node is 0
    let centre = ORDER / 2;
    let mut sum = T::lit(weights[centre]) * f(mid);
    for i in 0..centre {
        let dx = half * T::lit(nodes[i]);
        sum = sum + T::lit(weights[i]) * (f(mid + dx) + f(mid - dx));
    }
    sum * half
}

struct Panel<T> {
    a: T,
    b: T,
    depth: u32,
    left: T,
    right: T,
    error: T,
}

impl<T: Real> Panel<T> {
    fn new<F: Fn(T) -> T>(f: &F, a: T, b: T, whole: T, depth: u32) -> Self {
        let mid = (a + b) * T::lit(0.5);
        let left = gauss15(f, a, mid);
        let right = gauss15(f, mid, b);
        let error = (whole - left - right).abs();
        Self { a, b, depth, left, right, error }
    }

    fn value(&self) -> T {
        self.left + self.right
    }
}

/// `∫_a^b f` to within `max(tol.abs, tol.rel·|I|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: Tolerance) -> Result<Estimate<T>> {
    integrate_pieces(f, &[a, b], tol)
}

/// Integral over `[breaks[0], breaks[n-1]]`, starting from one panel per
/// consecutive pair of `breaks` (which must be nondecreasing).
pub fn integrate_pieces<T: Real, F: Fn(T) -> T>(f: F, breaks: &[T], tol: Tolerance) -> Result<Estimate<T>> {
    if breaks.len() < 2 {
        return Ok(Estimate { value: T::zero(), error: T::zero() });
    }
    let floor = T::lit(50.0) * T::epsilon();
    let abs_tol = T::lit(tol.abs);
    let rel_tol = T::lit(tol.rel).max(floor);

    let mut panels: Vec<Panel<T>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Panel::new(&f, w[0], w[1], gauss15(&f, w[0], w[1]), 0))
        .collect();

    loop {
        let value: T = panels.iter().map(Panel::value).sum();
        let error: T = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Accuracy { estimate: value.as_f64(), error: f64::INFINITY });
        }
        let target = abs_tol.max(rel_tol * value.abs());
        // roundoff floor: the estimate cannot drop below a few ulps of the panel sums
        let noise: T = panels.iter().map(|p| p.left.abs() + p.right.abs()).sum::<T>() * floor;
        if error <= target || error <= noise {
            return Ok(Estimate { value, error });
        }

        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.depth < tol.max_depth)
            .max_by(|(_, p), (_, q)| p.error.partial_cmp(&q.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < MAX_PANELS) else {
            return Err(Error::Accuracy { estimate: value.as_f64(), error: error.as_f64() });
        };
        let p = panels.swap_remove(i);
        let mid = (p.a + p.b) * T::lit(0.5);
        panels.push(Panel::new(&f, p.a, mid, p.left, p.depth + 1));
        panels.push(Panel::new(&f, mid, p.b, p.right, p.depth + 1));
    }
}
