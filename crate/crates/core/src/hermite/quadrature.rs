use crate::error::{Error, Result};

use super::hermite_all;

pub const MAX_RULE_SIZE: usize = 512;

/// Gauss–Hermite rule for the standard Gaussian measure; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Golub–Welsch: eigenvalues of the Jacobi matrix (zero diagonal,
/// off-diagonal `√k`) are the nodes; squared first eigenvector components
/// are the weights.
pub fn gauss_hermite_rule(m: usize) -> Result<GaussHermiteRule> {
    if m == 0 || m > MAX_RULE_SIZE {
        return Err(Error::InvalidArgument(format!("rule size {m} outside 1..={MAX_RULE_SIZE}")));
    }
    let mut diag = vec![0.0; m];
    let mut off: Vec<f64> = (1..m).map(|k| (k as f64).sqrt()).collect();
    off.push(0.0);
    let mut first = vec![0.0; m];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first).ok_or(Error::NoConvergence(m))?;

    let mut pairs: Vec<(f64, f64)> = diag.into_iter().zip(first.into_iter().map(|z| z * z)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // The rule is symmetric about 0; average mirrored pairs to remove rounding skew.
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(GaussHermiteRule { nodes, weights })
}

// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
// `off[i]` couples rows i and i+1. Only the first row of the eigenvector
// matrix is accumulated, in `first`.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Option<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return None;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let z = first[i + 1];
                first[i + 1] = s * first[i] + c * z;
                first[i] = c * first[i] - s * z;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Some(())
}

/// Quadrature estimate of `c_j = E[f(Y) H_j(Y)]` for `j = 0..=max_order`.
/// Accuracy degrades for discontinuous `f`.
pub fn coefficients_by_quadrature(f: impl Fn(f64) -> f64, max_order: usize, m: usize) -> Result<Vec<f64>> {
    if m < max_order + 1 {
        return Err(Error::InvalidArgument(format!(
            "rule size {m} must be at least max_order + 1 = {}",
            max_order + 1
        )));
    }
    let rule = gauss_hermite_rule(m)?;
    let mut coeffs = vec![0.0; max_order + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        let fx = w * f(x);
        if fx == 0.0 {
            continue;
        }
        for (c, h) in coeffs.iter_mut().zip(hermite_all(max_order, x)) {
            *c += fx * h;
        }
    }
    Ok(coeffs)
}
