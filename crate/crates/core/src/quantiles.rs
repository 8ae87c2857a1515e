//! Empirical CDF, sample quantile and the Bahadur remainder of one path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{pdf_gy, true_quantile, PiecewiseFunctional};
use crate::gaussproc::GaussianPath;

/// `(1/n) #{i : sample_i ≤ t}`.
pub fn empirical_cdf(sample: &[f64], t: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let count = sample.iter().filter(|&&x| x <= t).count();
    Ok(count as f64 / sample.len() as f64)
}

/// 1-based order-statistic index `k = min{k : k/n ≥ p}`.
pub fn quantile_rank(n: usize, p: f64) -> usize {
    let nf = n as f64;
    let mut k = ((nf * p).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= p {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < p {
        k += 1;
    }
    k
}

/// `inf{x : F̂(x) ≥ p}`, by selection on a scratch copy.
pub fn sample_quantile(sample: &[f64], p: f64) -> Result<f64> {
    let mut scratch = sample.to_vec();
    sample_quantile_in_place(&mut scratch, p)
}

/// Same as [`sample_quantile`] but reorders `sample`.
pub fn sample_quantile_in_place(sample: &mut [f64], p: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} not in (0, 1)")));
    }
    let k = quantile_rank(sample.len(), p);
    let (_, kth, _) = sample.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    Ok(*kth)
}

/// One path's Bahadur decomposition `ξ̂ − ξ = linear_term + remainder`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileObservation {
    pub n: usize,
    pub p: f64,
    pub xi_hat: f64,
    #[serde(rename = "F_hat_at_xi")]
    pub f_hat_at_xi: f64,
    pub linear_term: f64,
    pub remainder: f64,
}

/// Precomputed `ξ(p)` and `f(ξ(p))` for repeated remainder evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileTarget {
    pub p: f64,
    pub xi: f64,
    pub density: f64,
}

impl QuantileTarget {
    pub fn new(g: &PiecewiseFunctional, p: f64) -> Result<Self> {
        let xi = true_quantile(g, p)?;
        let density = pdf_gy(g, xi)?;
        if !(density > 0.0) {
            return Err(Error::AssumptionViolated(format!("density of g(Y) vanishes at {xi}")));
        }
        Ok(Self { p, xi, density })
    }

    /// Decomposes an already transformed sample `g(Y(1..n))`; reorders it.
    pub fn observe(&self, transformed: &mut [f64]) -> Result<QuantileObservation> {
        let n = transformed.len();
        let f_hat_at_xi = empirical_cdf(transformed, self.xi)?;
        let xi_hat = sample_quantile_in_place(transformed, self.p)?;
        let linear_term = (self.p - f_hat_at_xi) / self.density;
        let remainder = xi_hat - self.xi - linear_term;
        Ok(QuantileObservation { n, p: self.p, xi_hat, f_hat_at_xi, linear_term, remainder })
    }
}

/// Pushes `path` through `g` and measures the Bahadur remainder at `p`.
pub fn bahadur_remainder(path: &GaussianPath, g: &PiecewiseFunctional, p: f64) -> Result<QuantileObservation> {
    let target = QuantileTarget::new(g, p)?;
    let mut transformed: Vec<f64> = path.values.iter().map(|&y| g.eval(y)).collect();
    target.observe(&mut transformed)
}
