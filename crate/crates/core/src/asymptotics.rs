//! Closed-form asymptotics: the rate `r_n(α, τ̄)`, its regime, the SRD limit
//! variance `σ²_p`, the LRD normalizing constant `K(τ̄, α)`, and the exact
//! variance of the empirical CDF at a fixed threshold.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{pdf_gy, true_quantile, PiecewiseFunctional};
use crate::gaussproc::CorrelationModel;
use crate::hermite::{
    coefficients_of_indicator, cross_moment, default_half_width, min_rank_neighborhood, HermiteCoefficients,
    DEFAULT_GRID_POINTS, DEFAULT_ZERO_TOL,
};
use crate::special::{factorial, gamma};

/// `|ατ̄ − 1|` at or below this counts as the boundary case.
pub const BOUNDARY_TOL: f64 = 1e-12;
pub const DEFAULT_LAG_CAP: usize = 100_000;
/// `sigma2_p` refuses results whose dropped mass exceeds this fraction.
pub const MAX_RELATIVE_TAIL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "SRD")]
    Srd,
    Boundary,
    #[serde(rename = "LRD")]
    Lrd,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Srd => "SRD",
            Regime::Boundary => "Boundary",
            Regime::Lrd => "LRD",
        })
    }
}

/// Regime and rate for a pair `(α, τ̄)`. Short-memory models (no power-law
/// tail) carry `α = +∞` and serialize it as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    #[serde(with = "alpha_serde")]
    pub alpha: f64,
    pub tau_bar: usize,
    pub regime: Regime,
}

mod alpha_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(alpha: &f64, s: S) -> Result<S::Ok, S::Error> {
        if alpha.is_finite() {
            s.serialize_some(alpha)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn classify_regime(alpha: f64, tau_bar: usize) -> RateSpec {
    debug_assert!(alpha > 0.0 && tau_bar >= 1);
    let product = alpha * tau_bar as f64;
    let regime = if (product - 1.0).abs() <= BOUNDARY_TOL {
        Regime::Boundary
    } else if product > 1.0 {
        Regime::Srd
    } else {
        Regime::Lrd
    };
    RateSpec { alpha, tau_bar, regime }
}

/// Regime of a correlation model paired with a rank.
pub fn rate_spec_for(model: &CorrelationModel, tau_bar: usize) -> RateSpec {
    classify_regime(model.memory_exponent().unwrap_or(f64::INFINITY), tau_bar)
}

/// `r_n`: `n^{−1/2}` (SRD), `n^{−1/2} log(n)^{1/2}` (boundary), `n^{−ατ̄/2}` (LRD).
pub fn rate_rn(spec: &RateSpec, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    let nf = n as f64;
    Ok(match spec.regime {
        Regime::Srd => nf.powf(-0.5),
        Regime::Boundary => (nf.ln() / nf).sqrt(),
        Regime::Lrd => nf.powf(-spec.alpha * spec.tau_bar as f64 / 2.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2 {
    pub value: f64,
    pub tail_bound: f64,
}

/// `σ²_p` for `g`, `p`, `model`, with `τ̄_p` from the default neighborhood grid.
pub fn sigma2_p(
    g: &PiecewiseFunctional,
    p: f64,
    model: &CorrelationModel,
    max_order: usize,
    lag_cap: usize,
) -> Result<Sigma2> {
    let half_width = default_half_width(g, p)?;
    let tau_bar = min_rank_neighborhood(g, p, half_width, DEFAULT_GRID_POINTS, max_order, DEFAULT_ZERO_TOL)?;
    let xi = true_quantile(g, p)?;
    let coeffs = coefficients_of_indicator(g, xi, max_order, DEFAULT_ZERO_TOL)?;
    let density = pdf_gy(g, xi)?;
    sigma2_from_parts(&coeffs, density, model, tau_bar, lag_cap)
}

/// `(1/f²) Σ_{|i| ≤ L} Σ_j c_j²/j! ρ(i)^j`, with the lag-0 term taken as the
/// exact `Var(h)`. The bound covers lags beyond `L` and orders beyond `J`.
pub fn sigma2_from_parts(
    coeffs: &HermiteCoefficients,
    density: f64,
    model: &CorrelationModel,
    tau_bar: usize,
    lag_cap: usize,
) -> Result<Sigma2> {
    if lag_cap < 1 {
        return Err(Error::InvalidArgument("lag_cap must be at least 1".into()));
    }
    if !(density > 0.0) {
        return Err(Error::AssumptionViolated("density at the quantile is not positive".into()));
    }
    let spec = rate_spec_for(model, tau_bar);
    if spec.regime != Regime::Srd {
        return Err(Error::WrongRegime { found: spec.regime.to_string(), required: "SRD".into() });
    }
    let lag_zero = coeffs.variance.max(coeffs.partial_energy());
    let mut lags = 0.0;
    let mut order_tail = 0.0;
    for i in (1..=lag_cap).rev() {
        let r = model.rho(i as i64);
        lags += cross_moment(coeffs, r);
        order_tail += r.abs().powi(coeffs.max_order as i32 + 1);
    }
    let f2 = density * density;
    let value = (lag_zero + 2.0 * lags) / f2;
    let tail_bound = 2.0
        * (coeffs.variance * model.tail_sum_bound(lag_cap, tau_bar) + coeffs.tail_mass().max(0.0) * order_tail)
        / f2;
    if tail_bound > MAX_RELATIVE_TAIL * value {
        return Err(Error::LagCapTooSmall { value, tail_bound });
    }
    Ok(Sigma2 { value, tail_bound })
}

/// `K(τ, α) = [(1 − ατ/2)(1 − ατ) / (τ! (2Γ(α) sin(π(1−α)/2))^τ)]^{1/2}`.
pub fn k_const(tau: usize, alpha: f64) -> Result<f64> {
    if tau < 1 || !(alpha > 0.0) {
        return Err(Error::InvalidArgument("need tau >= 1 and alpha > 0".into()));
    }
    let product = alpha * tau as f64;
    if product >= 1.0 {
        return Err(Error::WrongRegime {
            found: classify_regime(alpha, tau).regime.to_string(),
            required: "LRD (alpha * tau < 1)".into(),
        });
    }
    let base = 2.0 * gamma(alpha) * (PI * (1.0 - alpha) / 2.0).sin();
    let radicand = (1.0 - product / 2.0) * (1.0 - product) / (factorial(tau) * base.powi(tau as i32));
    if !(radicand > 0.0) {
        return Err(Error::NonpositiveRadicand(radicand));
    }
    Ok(radicand.sqrt())
}

/// `Var(F̂_n(u) − F(u)) = (1/n²) Σ_{|k|<n} (n − |k|) Σ_j c_j²/j! ρ(k)^j`, in
/// `O(n·J)`; the `k = 0` term uses the exact `Var(h_u)`.
pub fn var_empirical_cdf(model: &CorrelationModel, coeffs: &HermiteCoefficients, n: usize) -> f64 {
    assert!(n >= 1, "n must be positive");
    let nf = n as f64;
    let lag_zero = coeffs.variance.max(coeffs.partial_energy());
    let mut acc = 0.0;
    for k in (1..n).rev() {
        acc += (n - k) as f64 * cross_moment(coeffs, model.rho(k as i64));
    }
    (nf * lag_zero + 2.0 * acc) / (nf * nf)
}
