use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{true_quantile, Direction, PiecewiseFunctional};
use crate::special::{factorial, std_normal_mass, std_normal_pdf};

use super::{hermite_eval, phi_derivative};

pub const DEFAULT_MAX_ORDER: usize = 20;
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;
pub const DEFAULT_GRID_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lower_closed { t >= self.lower } else { t > self.lower };
        let below = if self.upper_closed { t <= self.upper } else { t < self.upper };
        above && below
    }
}

/// Sorted disjoint union of intervals with extended-real endpoints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(t))
    }

    /// Standard Gaussian measure of the union.
    pub fn gaussian_mass(&self) -> f64 {
        self.intervals.iter().map(|i| std_normal_mass(i.lower, i.upper)).sum()
    }
}

/// `{t : g(t) ≤ u}`, assembled from each branch's inverse.
pub fn sublevel_set(g: &PiecewiseFunctional, u: f64) -> Result<IntervalUnion> {
    if u.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    let (range_lo, range_hi) = g.range();
    if u < range_lo {
        return Err(Error::OutOfRange { u, below: true });
    }
    if u > range_hi {
        return Err(Error::OutOfRange { u, below: false });
    }

    let mut pieces: Vec<Interval> = Vec::with_capacity(g.branches().len());
    for b in g.branches() {
        if u <= b.image_lower {
            continue;
        }
        let piece = if u >= b.image_upper {
            Interval { lower: b.lower, upper: b.upper, lower_closed: false, upper_closed: false }
        } else {
            let x = (b.inverse)(u);
            match b.direction {
                Direction::Increasing => Interval { lower: b.lower, upper: x, lower_closed: false, upper_closed: true },
                Direction::Decreasing => Interval { lower: x, upper: b.upper, lower_closed: true, upper_closed: false },
            }
        };
        if piece.lower < piece.upper {
            pieces.push(piece);
        }
    }

    let mut merged: Vec<Interval> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        if let Some(last) = merged.last_mut() {
            // Adjacent branches meet at a single point; glue through it when
            // g at that point also lies below u.
            if last.upper == piece.lower && g.eval(piece.lower) <= u {
                last.upper = piece.upper;
                last.upper_closed = piece.upper_closed;
                continue;
            }
        }
        merged.push(piece);
    }
    for iv in merged.iter_mut() {
        if iv.lower.is_infinite() {
            iv.lower_closed = false;
        }
        if iv.upper.is_infinite() {
            iv.upper_closed = false;
        }
    }
    Ok(IntervalUnion { intervals: merged })
}

/// `∫_a^b H_j(t) φ(t) dt`. For `j ≥ 1` this is `H_{j−1}(a)φ(a) − H_{j−1}(b)φ(b)`
/// with the product taken as 0 at ±∞.
pub fn interval_hermite_coefficient(j: usize, a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is not ordered")));
    }
    if j == 0 {
        return Ok(std_normal_mass(a, b));
    }
    let edge = |t: f64| {
        let phi = std_normal_pdf(t);
        if phi == 0.0 {
            0.0
        } else {
            hermite_eval(j - 1, t) * phi
        }
    };
    Ok(edge(a) - edge(b))
}

/// Hermite expansion of the centered indicator `h_u`.
///
/// `coeffs` holds `c_0..=c_J` with `c_0 = 0`. `variance` is
/// `Var(h_u(Y)) = F(u)(1 − F(u))`, the full Parseval mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteCoefficients {
    pub u: f64,
    pub coeffs: Vec<f64>,
    pub max_order: usize,
    pub rank: Option<usize>,
    pub zero_tol: f64,
    pub cdf: f64,
    pub variance: f64,
}

impl HermiteCoefficients {
    /// Wraps raw coefficients; the rank is detected from `coeffs[1..]`.
    pub fn from_coeffs(u: f64, coeffs: Vec<f64>, zero_tol: f64, cdf: f64) -> Self {
        let max_order = coeffs.len().saturating_sub(1);
        let rank = hermite_rank(&coeffs, zero_tol).ok();
        Self { u, coeffs, max_order, rank, zero_tol, cdf, variance: cdf * (1.0 - cdf) }
    }

    /// `a_j = c_j² / j!` for `j = 0..=J`.
    pub fn series_weights(&self) -> Vec<f64> {
        self.coeffs.iter().enumerate().map(|(j, c)| c * c / factorial(j)).collect()
    }

    /// `Σ_{j ≤ J} c_j² / j!`.
    pub fn partial_energy(&self) -> f64 {
        self.series_weights().iter().sum()
    }

    /// Parseval mass beyond order J.
    pub fn tail_mass(&self) -> f64 {
        self.variance - self.partial_energy()
    }
}

/// Closed-form Hermite coefficients of `h_u` for `g`.
pub fn coefficients_of_indicator(
    g: &PiecewiseFunctional,
    u: f64,
    max_order: usize,
    zero_tol: f64,
) -> Result<HermiteCoefficients> {
    if max_order < 1 {
        return Err(Error::InvalidArgument("max_order must be at least 1".into()));
    }
    if !(zero_tol > 0.0) {
        return Err(Error::InvalidArgument("zero_tol must be positive".into()));
    }
    let set = sublevel_set(g, u)?;
    let mut coeffs = vec![0.0; max_order + 1];
    for iv in set.intervals() {
        for (j, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c += interval_hermite_coefficient(j, iv.lower, iv.upper)?;
        }
    }
    let rank = hermite_rank(&coeffs, zero_tol)?;
    let cdf = set.gaussian_mass();
    Ok(HermiteCoefficients { u, coeffs, max_order, rank: Some(rank), zero_tol, cdf, variance: cdf * (1.0 - cdf) })
}

/// Smallest `j ≥ 1` with `|c_j| > zero_tol`.
pub fn hermite_rank(coeffs: &[f64], zero_tol: f64) -> Result<usize> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.abs() > zero_tol)
        .map(|(j, _)| j)
        .ok_or(Error::RankUndetectable { max_order: coeffs.len().saturating_sub(1), zero_tol })
}

/// Default neighborhood half-width around `ξ(p)`: 5% of a unit of `p`
/// converted to the `u` scale by a central difference of the quantile, and
/// capped at half the distance from `ξ(p)` to the edge of the range of `g`.
pub fn default_half_width(g: &PiecewiseFunctional, p: f64) -> Result<f64> {
    let delta = 0.01f64.min(0.5 * p).min(0.5 * (1.0 - p));
    let hi = true_quantile(g, p + delta)?;
    let lo = true_quantile(g, p - delta)?;
    let xi = true_quantile(g, p)?;
    let (range_lo, range_hi) = g.range();
    let cap = 0.5 * (xi - range_lo).min(range_hi - xi);
    Ok((0.05 * (hi - lo) / (2.0 * delta)).min(cap))
}

/// Minimal Hermite rank of `h_u` over a symmetric grid of `u` around `ξ(p)`.
pub fn min_rank_neighborhood(
    g: &PiecewiseFunctional,
    p: f64,
    half_width: f64,
    grid_points: usize,
    max_order: usize,
    zero_tol: f64,
) -> Result<usize> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument("half_width must be positive".into()));
    }
    if grid_points < 3 {
        return Err(Error::InvalidArgument("grid_points must be at least 3".into()));
    }
    let xi = true_quantile(g, p)?;
    let mut best = usize::MAX;
    for k in 0..grid_points {
        let u = xi - half_width + 2.0 * half_width * k as f64 / (grid_points - 1) as f64;
        let c = coefficients_of_indicator(g, u, max_order, zero_tol)?;
        best = best.min(c.rank.expect("coefficients_of_indicator detects the rank"));
    }
    Ok(best)
}

/// `κ_j = 2 Σ_i H_j(x_i) φ(x_i) / |g′(x_i)|` at the preimages `x_i` of `level`,
/// i.e. `2(−1)^j Σ_i φ^{(j)}(x_i) / |g′(x_i)|`: the slope of
/// `∫ H_j φ 1{|g − level| ≤ u}` as `u → 0`.
pub fn kappa_at_level(g: &PiecewiseFunctional, level: f64, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidArgument("kappa is defined for j >= 1".into()));
    }
    let mut sum = 0.0;
    for b in g.branches() {
        let Some(x) = b.preimage(level) else { continue };
        let d = (b.derivative)(x);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::AssumptionViolated(format!("g' vanishes at preimage {x} of {level}")));
        }
        sum += phi_derivative(j, x) / d.abs();
    }
    let sign = if j.is_multiple_of(2) { 2.0 } else { -2.0 };
    Ok(sign * sum)
}

pub fn kappa(g: &PiecewiseFunctional, p: f64, j: usize) -> Result<f64> {
    let xi = true_quantile(g, p)?;
    kappa_at_level(g, xi, j)
}

/// Truncated `E[h(Y₁)h(Y₂)] = Σ_{j=τ..J} c_j²/j! ρ^j`.
pub fn cross_moment(coeffs: &HermiteCoefficients, rho: f64) -> f64 {
    debug_assert!(rho.abs() <= 1.0);
    let start = coeffs.rank.unwrap_or(1).max(1);
    let mut acc = 0.0;
    for j in (start..=coeffs.max_order).rev() {
        acc = acc * rho + coeffs.coeffs[j] * coeffs.coeffs[j] / factorial(j);
    }
    // Horner above leaves one factor of ρ^start to apply.
    acc * rho.powi(start as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::cdf_gy;
    use crate::hermite::coefficients_by_quadrature;
    use crate::special::std_normal_cdf;
    use proptest::prelude::*;

    const PHI_0: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn interval_coefficient_examples() {
        let c = interval_hermite_coefficient(1, f64::NEG_INFINITY, 0.0).unwrap();
        assert!((c + PHI_0).abs() < 1e-16);
        assert_eq!(interval_hermite_coefficient(2, f64::NEG_INFINITY, f64::INFINITY).unwrap(), 0.0);
        let q = 1.959_964;
        let c0 = interval_hermite_coefficient(0, -q, q).unwrap();
        assert!((c0 - 0.95).abs() < 1e-6);
        assert!(interval_hermite_coefficient(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn interval_coefficient_matches_gauss_legendre() {
        // 1-D oracle: composite Simpson on a finite interval.
        let (a, b) = (-0.7, 1.3);
        for j in 0..8 {
            let n = 2000;
            let h = (b - a) / n as f64;
            let f = |t: f64| hermite_eval(j, t) * std_normal_pdf(t);
            let mut s = f(a) + f(b);
            for k in 1..n {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
            }
            s *= h / 3.0;
            assert!((s - interval_hermite_coefficient(j, a, b).unwrap()).abs() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn sublevel_examples() {
        let s = sublevel_set(&PiecewiseFunctional::identity(), 0.0).unwrap();
        assert_eq!(s.intervals().len(), 1);
        assert_eq!(s.intervals()[0].lower, f64::NEG_INFINITY);
        assert_eq!(s.intervals()[0].upper, 0.0);
        assert!(s.intervals()[0].upper_closed);

        let s = sublevel_set(&PiecewiseFunctional::abs(), 1.5).unwrap();
        assert_eq!(s.intervals(), &[Interval { lower: -1.5, upper: 1.5, lower_closed: true, upper_closed: true }]);

        let s = sublevel_set(&PiecewiseFunctional::square(), 4.0).unwrap();
        assert_eq!(s.intervals().len(), 1);
        assert_eq!((s.intervals()[0].lower, s.intervals()[0].upper), (-2.0, 2.0));
        assert!(s.contains(0.0) && !s.contains(2.1));
    }

    #[test]
    fn sublevel_out_of_range() {
        assert!(matches!(sublevel_set(&PiecewiseFunctional::abs(), -1.0), Err(Error::OutOfRange { below: true, .. })));
        assert!(sublevel_set(&PiecewiseFunctional::identity(), f64::NAN).is_err());
        assert!(sublevel_set(&PiecewiseFunctional::abs(), 0.0).unwrap().is_empty());
    }

    #[test]
    fn indicator_coefficient_examples() {
        let id = PiecewiseFunctional::identity();
        let c = coefficients_of_indicator(&id, 0.0, 3, DEFAULT_ZERO_TOL).unwrap();
        assert!((c.coeffs[1] + PHI_0).abs() < 1e-16);
        assert_eq!(c.rank, Some(1));
        assert_eq!(c.coeffs[0], 0.0);
        assert_eq!(c.coeffs[2], 0.0);

        let c = coefficients_of_indicator(&PiecewiseFunctional::abs(), 0.8, 4, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(c.coeffs[1], 0.0);
        assert_eq!(c.rank, Some(2));
    }

    #[test]
    fn indicator_coefficients_against_quadrature_oracle() {
        let id = PiecewiseFunctional::identity();
        let c = coefficients_of_indicator(&id, 0.0, 1, DEFAULT_ZERO_TOL).unwrap();
        let q = coefficients_by_quadrature(|t| if t <= 0.0 { 0.5 } else { -0.5 }, 1, 256).unwrap();
        assert!((c.coeffs[1] - q[1]).abs() < 1e-2);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(hermite_rank(&[0.0, -0.39, 0.0], 1e-10).unwrap(), 1);
        assert_eq!(hermite_rank(&[0.0, 0.0, 0.48], 1e-10).unwrap(), 2);
        assert!(matches!(hermite_rank(&[0.0, 1e-14, 1e-14], 1e-10), Err(Error::RankUndetectable { .. })));
    }

    #[test]
    fn min_rank_examples() {
        let id = PiecewiseFunctional::identity();
        assert_eq!(min_rank_neighborhood(&id, 0.5, 0.1, 21, 20, DEFAULT_ZERO_TOL).unwrap(), 1);
        assert_eq!(min_rank_neighborhood(&id, 0.975, 0.01, 3, 20, DEFAULT_ZERO_TOL).unwrap(), 1);
        let abs = PiecewiseFunctional::abs();
        assert_eq!(min_rank_neighborhood(&abs, 0.5, 0.1, 21, 20, DEFAULT_ZERO_TOL).unwrap(), 2);
        assert_eq!(min_rank_neighborhood(&PiecewiseFunctional::square(), 0.3, 0.05, 21, 20, 1e-10).unwrap(), 2);
        assert_eq!(min_rank_neighborhood(&PiecewiseFunctional::cube(), 0.7, 0.05, 21, 20, 1e-10).unwrap(), 1);
        assert!(min_rank_neighborhood(&id, 0.5, 0.0, 21, 20, 1e-10).is_err());
        assert!(min_rank_neighborhood(&id, 0.5, 0.1, 2, 20, 1e-10).is_err());
    }

    #[test]
    fn default_half_width_identity() {
        // 0.05 / φ(0) to first order.
        let hw = default_half_width(&PiecewiseFunctional::identity(), 0.5).unwrap();
        assert!((hw - 0.05 / PHI_0).abs() < 1e-4);
    }

    #[test]
    fn kappa_examples() {
        let id = PiecewiseFunctional::identity();
        assert!(kappa_at_level(&id, 0.0, 1).unwrap().abs() < 1e-16);
        let two_phi1 = 2.0 * std_normal_pdf(1.0);
        assert!((kappa_at_level(&id, 1.0, 1).unwrap() - two_phi1).abs() < 1e-15);
        // H_2(1) = 0: the thin-slab integral of H_2 φ around 1 is second order.
        assert!(kappa_at_level(&id, 1.0, 2).unwrap().abs() < 1e-15);
        assert!(kappa(&id, 0.5, 0).is_err());
    }

    #[test]
    fn kappa_limit_identity_slab() {
        // I(u)/u for the slab [1 − u, 1 + u] via the closed-form interval integral.
        let id = PiecewiseFunctional::identity();
        let u = 1e-4;
        for j in 1..=6 {
            let i = interval_hermite_coefficient(j, 1.0 - u, 1.0 + u).unwrap();
            let k = kappa_at_level(&id, 1.0, j).unwrap();
            assert!((i / u - k).abs() < 1e-6, "j={j}");
        }
    }

    #[test]
    fn cross_moment_examples() {
        let id = PiecewiseFunctional::identity();
        let c = coefficients_of_indicator(&id, 0.0, 20, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(cross_moment(&c, 0.0), 0.0);
        let full = cross_moment(&c, 1.0);
        assert!(full <= 0.25 && full > 0.25 - c.tail_mass() - 1e-15);
        assert!((full + c.tail_mass() - 0.25).abs() < 1e-15);

        let abs = coefficients_of_indicator(&PiecewiseFunctional::abs(), 1.0, 20, DEFAULT_ZERO_TOL).unwrap();
        assert!((cross_moment(&abs, -1.0) - cross_moment(&abs, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn cdf_consistency_of_stored_variance() {
        let g = PiecewiseFunctional::square();
        let c = coefficients_of_indicator(&g, 1.0, 5, DEFAULT_ZERO_TOL).unwrap();
        let f = 2.0 * std_normal_cdf(1.0) - 1.0;
        assert!((c.cdf - f).abs() < 1e-15);
        let fu = cdf_gy(&g, 1.0);
        assert!((c.variance - fu * (1.0 - fu)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn even_functionals_have_no_odd_coefficients(u in 0.01f64..6.0) {
            for g in [PiecewiseFunctional::abs(), PiecewiseFunctional::square()] {
                let c = coefficients_of_indicator(&g, u, 15, DEFAULT_ZERO_TOL).unwrap();
                for j in (1..=15).step_by(2) {
                    prop_assert!(c.coeffs[j].abs() < 1e-15);
                }
            }
        }

        #[test]
        fn bessel_inequality(u in -4.0f64..4.0, which in 0usize..4) {
            let g = crate::functionals::FunctionalName::ALL[which].build();
            if let Ok(c) = coefficients_of_indicator(&g, u, 20, DEFAULT_ZERO_TOL) {
                prop_assert!(c.partial_energy() <= c.variance + DEFAULT_ZERO_TOL);
            }
        }
    }
}
