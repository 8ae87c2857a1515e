//! Probabilists' Hermite polynomials, Gauss–Hermite quadrature and the
//! Hermite analysis of indicator functionals `h_u(t) = 1{g(t) ≤ u} − F(u)`.
//!
//! Convention throughout: `E[H_j(Y) H_k(Y)] = j! δ_jk` for standard Gaussian
//! `Y`, and `c_j = E[f(Y) H_j(Y)]`, so `f = Σ c_j / j! · H_j`.

mod coefficients;
mod quadrature;

pub use coefficients::{
    coefficients_of_indicator, cross_moment, default_half_width, hermite_rank, interval_hermite_coefficient, kappa,
    kappa_at_level, min_rank_neighborhood, sublevel_set, HermiteCoefficients, Interval, IntervalUnion,
    DEFAULT_GRID_POINTS, DEFAULT_MAX_ORDER, DEFAULT_ZERO_TOL,
};
pub use quadrature::{coefficients_by_quadrature, gauss_hermite_rule, GaussHermiteRule, MAX_RULE_SIZE};

use crate::special::std_normal_pdf;

/// `H_j(t)` by the three-term recurrence `H_{j+1} = t H_j − j H_{j−1}`.
pub fn hermite_eval(j: usize, t: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = t;
    for k in 1..j {
        let next = t * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[H_0(t), …, H_max(t)]` in one recurrence pass.
pub fn hermite_all(max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(t);
    }
    for k in 1..max {
        let next = t * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// `φ^{(k)}(t) = (−1)^k H_k(t) φ(t)`.
pub fn phi_derivative(k: usize, t: f64) -> f64 {
    let phi = std_normal_pdf(t);
    if phi == 0.0 {
        return 0.0;
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hermite_eval(k, t) * phi
}
