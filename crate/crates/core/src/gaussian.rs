//! Scalar Gaussian utilities: densities, tail probabilities, truncated
//! moments, and an adaptive quadrature engine for expectations over a
//! standard normal variable.
//!
//! The truncated-moment helpers make expectations of piecewise-quadratic
//! functions of a Gaussian exact, which is how the solver evaluates the
//! estimator MSE terms without any quadrature error. The adaptive engine is
//! reserved for smooth integrands without closed form (posterior moments of
//! mixture priors).

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in the lower tail.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail Q(x) = P(N(0,1) > x), accurate in the upper tail.
#[inline]
pub fn std_normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// P(|N(mean, std^2)| > thr) for thr >= 0, via tail-stable Q evaluations.
pub fn prob_abs_exceeds(mean: f64, std: f64, thr: f64) -> f64 {
    debug_assert!(std > 0.0);
    if thr <= 0.0 {
        return 1.0;
    }
    std_normal_tail((thr - mean) / std) + std_normal_tail((thr + mean) / std)
}

/// Moments of a standard normal restricted to the interval (a, b):
/// `i{k} = E[w^k ; a < w < b]`. Infinite endpoints are allowed.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedMoments {
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Compute `TruncatedMoments` for the interval (a, b), a <= b.
///
/// The mass term is evaluated as a difference of same-side tails so that far
/// tail intervals do not cancel catastrophically.
pub fn truncated_moments(a: f64, b: f64) -> TruncatedMoments {
    debug_assert!(a <= b);
    let i0 = if a >= 0.0 {
        std_normal_tail(a) - std_normal_tail(b)
    } else if b <= 0.0 {
        std_normal_tail(-b) - std_normal_tail(-a)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    };
    let pa = if a.is_finite() { std_normal_pdf(a) } else { 0.0 };
    let pb = if b.is_finite() { std_normal_pdf(b) } else { 0.0 };
    let apa = if a.is_finite() { a * pa } else { 0.0 };
    let bpb = if b.is_finite() { b * pb } else { 0.0 };
    TruncatedMoments {
        i0: i0.max(0.0),
        i1: pa - pb,
        i2: (i0 + apa - bpb).max(0.0),
    }
}

/// E[(p + q w)^2 ; a < w < b] for w ~ N(0,1).
#[inline]
pub fn truncated_quadratic(p: f64, q: f64, a: f64, b: f64) -> f64 {
    let m = truncated_moments(a, b);
    p * p * m.i0 + 2.0 * p * q * m.i1 + q * q * m.i2
}

// 15-point Gauss-Legendre rule on [-1, 1].
const GL15: [(f64, f64); 15] = [
    (-0.9879925180204854, 0.030753241996118154),
    (-0.937273392400706, 0.07036604748810715),
    (-0.8482065834104272, 0.10715922046717176),
    (-0.7244177313601701, 0.13957067792615432),
    (-0.5709721726085388, 0.16626920581699411),
    (-0.3941513470775634, 0.18616100001556224),
    (-0.20119409399743454, 0.19843148532711163),
    (0.0, 0.20257824192556137),
    (0.20119409399743454, 0.19843148532711163),
    (0.3941513470775634, 0.18616100001556224),
    (0.5709721726085388, 0.16626920581699411),
    (0.7244177313601701, 0.13957067792615432),
    (0.8482065834104272, 0.10715922046717176),
    (0.937273392400706, 0.07036604748810715),
    (0.9879925180204854, 0.030753241996118154),
];

/// Beyond this many standard deviations the normal mass (< 2e-32) is ignored.
const DOMAIN_HALF_WIDTH: f64 = 12.0;
const MAX_PANELS: usize = 1 << 14;

/// Adaptive expectation E[f(w)] for w ~ N(0,1).
///
/// Integrates f(w) phi(w) over [-12, 12] with composite 15-point
/// Gauss-Legendre panels, doubling the panel count until two successive
/// refinements agree to `rel_tol` (relative to the larger of |result| and
/// `abs_floor`). `base_nodes` sets the starting resolution, so callers that
/// request more nodes start finer but every request converges to the same
/// value; predictions are therefore insensitive to the base rule size.
pub fn gauss_expect<F: Fn(f64) -> f64>(
    f: F,
    base_nodes: usize,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    let mut n_panels = (base_nodes.div_ceil(15)).max(4);
    let mut prev: Option<f64> = None;
    loop {
        let total = panels_integrate(&f, n_panels);
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integral with {n_panels} panels"
            )));
        }
        if let Some(p) = prev {
            if (total - p).abs() <= rel_tol * total.abs().max(abs_floor) {
                return Ok(total);
            }
        }
        if n_panels >= MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "no convergence at {n_panels} panels (last delta {:.3e})",
                prev.map_or(f64::NAN, |p| (total - p).abs())
            )));
        }
        prev = Some(total);
        n_panels *= 2;
    }
}

fn panels_integrate<F: Fn(f64) -> f64>(f: &F, n_panels: usize) -> f64 {
    let width = 2.0 * DOMAIN_HALF_WIDTH / n_panels as f64;
    let mut total = 0.0;
    for i in 0..n_panels {
        let lo = -DOMAIN_HALF_WIDTH + i as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for &(x, w) in &GL15 {
            let t = mid + half * x;
            acc += w * f(t) * std_normal_pdf(t);
        }
        total += half * acc;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_tail_symmetry() {
        for &x in &[-8.0, -2.0, -0.3, 0.0, 0.7, 3.0, 9.0] {
            assert_abs_diff_eq!(std_normal_cdf(x) + std_normal_tail(x), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(std_normal_cdf(x), std_normal_tail(-x), epsilon = 1e-15);
        }
    }

    #[test]
    fn truncated_moments_full_line() {
        let m = truncated_moments(f64::NEG_INFINITY, f64::INFINITY);
        assert_abs_diff_eq!(m.i0, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.i1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.i2, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn truncated_moments_half_line() {
        // E[w; w>0] = phi(0), E[w^2; w>0] = 1/2
        let m = truncated_moments(0.0, f64::INFINITY);
        assert_abs_diff_eq!(m.i0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.i1, std_normal_pdf(0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(m.i2, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn truncated_moments_far_tail_nonnegative() {
        let m = truncated_moments(10.0, 11.0);
        assert!(m.i0 > 0.0 && m.i0 < 1e-20);
        assert!(m.i2 >= 0.0);
    }

    #[test]
    fn adaptive_expectation_polynomial() {
        // E[w^2] = 1 and E[(2+3w)^2] = 4 + 9 exactly.
        let v = gauss_expect(|w| w * w, 61, 1e-12, 1e-300).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        let v = gauss_expect(|w| (2.0 + 3.0 * w) * (2.0 + 3.0 * w), 31, 1e-12, 1e-300).unwrap();
        assert_abs_diff_eq!(v, 13.0, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_expectation_base_rule_independent() {
        // A sharp but smooth integrand: logistic switch of width ~0.02.
        let f = |w: f64| 1.0 / (1.0 + (-200.0 * (w - 0.3)).exp());
        let a = gauss_expect(f, 31, 1e-12, 1e-300).unwrap();
        let b = gauss_expect(f, 61, 1e-12, 1e-300).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        // the logistic differs from the sharp step by O(width^2)
        assert_abs_diff_eq!(a, std_normal_tail(0.3), epsilon = 1e-4);
    }

    #[test]
    fn prob_abs_exceeds_limits() {
        assert_abs_diff_eq!(prob_abs_exceeds(0.0, 1.0, 0.0), 1.0, epsilon = 1e-15);
        assert!(prob_abs_exceeds(0.0, 1.0, 40.0) < 1e-300);
        // P(|N(0,1)| > 1) = 2 Q(1)
        assert_abs_diff_eq!(
            prob_abs_exceeds(0.0, 1.0, 1.0),
            2.0 * std_normal_tail(1.0),
            epsilon = 1e-15
        );
    }
}
