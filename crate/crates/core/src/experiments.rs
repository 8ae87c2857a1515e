//! Seeded Monte-Carlo studies of the Bahadur remainder and of the quantile
//! CLT, with deterministic output independent of the worker count.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    k_const, rate_rn, rate_spec_for, sigma2_from_parts, var_empirical_cdf, RateSpec, Regime, DEFAULT_LAG_CAP,
};
use crate::error::{Error, Result};
use crate::functionals::{FunctionalName, PiecewiseFunctional};
use crate::gaussproc::{CirculantEmbedding, CorrelationModel};
use crate::hermite::{
    coefficients_of_indicator, default_half_width, min_rank_neighborhood, HermiteCoefficients, DEFAULT_GRID_POINTS,
    DEFAULT_MAX_ORDER, DEFAULT_ZERO_TOL,
};
use crate::quantiles::{sample_quantile, QuantileObservation, QuantileTarget};
use crate::special::{factorial, std_normal_cdf};

/// Description of the per-replicate seed derivation, echoed in summaries.
pub const SEED_SCHEME: &str = "chacha8(splitmix64(splitmix64(splitmix64(base_seed) ^ n) ^ replicate))";

fn default_max_order() -> usize {
    DEFAULT_MAX_ORDER
}

/// Configuration of a study; `output` is where the tidy CSV goes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: CorrelationModel,
    pub functional: FunctionalName,
    pub p: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!("probability {} not in (0, 1)", self.p)));
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidArgument("n_grid is empty".into()));
        }
        if self.n_grid.iter().any(|&n| n < 16) {
            return Err(Error::InvalidArgument("every n in n_grid must be at least 16".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidArgument("need at least 2 replicates".into()));
        }
        if self.max_order < 1 {
            return Err(Error::InvalidArgument("max_order must be at least 1".into()));
        }
        Ok(())
    }

    /// Short content hash of the configuration, excluding the output path.
    pub fn run_id(&self) -> String {
        let mut echo = self.clone();
        echo.output = None;
        let json = serde_json::to_string(&echo).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of replicate `m` at sample size `n`; see [`SEED_SCHEME`].
pub fn replicate_seed(base_seed: u64, n: usize, m: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ n as u64) ^ m as u64)
}

/// Location and spread of one column across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
}

impl ColumnSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("need at least two values".into()));
        }
        let (mean, var) = mean_and_variance(values);
        let mut scratch = values.to_vec();
        scratch.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| sample_quantile(&scratch, p);
        Ok(Self { mean, sd: var.sqrt(), q05: q(0.05)?, q50: q(0.5)?, q90: q(0.9)?, q95: q(0.95)? })
    }
}

/// Mean and unbiased variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerNSummary {
    pub n: usize,
    pub replicates: usize,
    pub rate_rn: f64,
    pub remainder: ColumnSummary,
    /// Statistics of `|R_n| / r_n`.
    pub normalized_remainder: ColumnSummary,
    /// Statistics of `ξ̂ − ξ`.
    pub error: ColumnSummary,
    pub linear_term_variance: f64,
    /// `var_empirical_cdf / f²`, the closed form of the line above.
    pub linear_term_variance_theory: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Per-replicate row of the tidy CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub observation: QuantileObservation,
    pub normalized_remainder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BahadurStudyResult {
    pub config: StudyConfig,
    pub run_id: String,
    pub seed_scheme: String,
    pub xi: f64,
    pub density: f64,
    pub tau_bar: usize,
    pub tau_p: usize,
    pub rate: RateSpec,
    /// Log-log slope of `r_n` itself, for comparison with `sd_slope`.
    pub rate_slope: f64,
    pub per_n: Vec<PerNSummary>,
    /// Fit of `log SD(R_n)` on `log n`; absent for grids shorter than 3.
    pub sd_slope: Option<SlopeFit>,
    pub sigma2_p: Option<f64>,
    pub k_const: Option<f64>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

impl BahadurStudyResult {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut echo = self.config.clone();
        echo.output = None;
        writeln!(w, "# config={}", serde_json::to_string(&echo).expect("config serializes"))?;
        writeln!(w, "run_id,n,replicate,xi_hat,F_hat_at_xi,linear_term,remainder,normalized_remainder")?;
        for r in &self.records {
            let o = &r.observation;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.run_id,
                r.n,
                r.replicate,
                o.xi_hat,
                o.f_hat_at_xi,
                o.linear_term,
                o.remainder,
                r.normalized_remainder
            )?;
        }
        Ok(())
    }

    pub fn observations_at(&self, n: usize) -> impl Iterator<Item = &QuantileObservation> {
        self.records.iter().filter(move |r| r.n == n).map(|r| &r.observation)
    }
}

/// Everything derived from `(g, p)` before any simulation.
#[derive(Debug, Clone)]
pub struct StudyTheory {
    pub functional: PiecewiseFunctional,
    pub target: QuantileTarget,
    pub coeffs: HermiteCoefficients,
    pub tau_bar: usize,
    pub tau_p: usize,
    pub rate: RateSpec,
}

impl StudyTheory {
    pub fn new(config: &StudyConfig) -> Result<Self> {
        config.validate()?;
        let functional = config.functional.build();
        let target = QuantileTarget::new(&functional, config.p)?;
        let half_width = default_half_width(&functional, config.p)?;
        let tau_bar = min_rank_neighborhood(
            &functional,
            config.p,
            half_width,
            DEFAULT_GRID_POINTS,
            config.max_order,
            DEFAULT_ZERO_TOL,
        )?;
        let coeffs = coefficients_of_indicator(&functional, target.xi, config.max_order, DEFAULT_ZERO_TOL)?;
        let tau_p = coeffs.rank.expect("rank detected");
        if tau_p != tau_bar {
            return Err(Error::AssumptionViolated(format!(
                "rank at the quantile ({tau_p}) differs from the neighborhood rank ({tau_bar})"
            )));
        }
        let rate = rate_spec_for(&config.model, tau_bar);
        Ok(Self { functional, target, coeffs, tau_bar, tau_p, rate })
    }

    pub fn sigma2_p(&self, model: &CorrelationModel) -> Option<f64> {
        (self.rate.regime == Regime::Srd)
            .then(|| sigma2_from_parts(&self.coeffs, self.target.density, model, self.tau_bar, DEFAULT_LAG_CAP).ok())
            .flatten()
            .map(|s| s.value)
    }

    pub fn k_const(&self) -> Option<f64> {
        (self.rate.regime == Regime::Lrd).then(|| k_const(self.tau_bar, self.rate.alpha).ok()).flatten()
    }

    /// `log r_n` slope in `log n`.
    pub fn rate_slope(&self) -> f64 {
        match self.rate.regime {
            Regime::Lrd => -self.rate.alpha * self.tau_bar as f64 / 2.0,
            _ => -0.5,
        }
    }
}

/// Simulates `replicates` paths of length `n` and decomposes each one.
/// Output order is the replicate index, whatever the scheduling.
pub fn simulate_observations(
    model: &CorrelationModel,
    theory: &StudyTheory,
    n: usize,
    replicates: usize,
    base_seed: u64,
) -> Result<Vec<QuantileObservation>> {
    let embedding = CirculantEmbedding::new(*model, n)?;
    (0..replicates)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(path, transformed), m| {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(replicate_seed(base_seed, n, m));
                embedding.sample_into(&mut rng, path);
                for (t, &y) in transformed.iter_mut().zip(path.iter()) {
                    *t = theory.functional.eval(y);
                }
                theory.target.observe(transformed)
            },
        )
        .collect()
}

/// Runs the Bahadur remainder study over the configured `n` grid.
pub fn run_bahadur_study(config: &StudyConfig) -> Result<BahadurStudyResult> {
    let theory = StudyTheory::new(config)?;
    let mut records = Vec::with_capacity(config.n_grid.len() * config.replicates);
    let mut per_n = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let obs = simulate_observations(&config.model, &theory, n, config.replicates, config.base_seed)?;
        let r_n = rate_rn(&theory.rate, n as u64)?;
        let remainders: Vec<f64> = obs.iter().map(|o| o.remainder).collect();
        let normalized: Vec<f64> = remainders.iter().map(|r| r.abs() / r_n).collect();
        let errors: Vec<f64> = obs.iter().map(|o| o.xi_hat - theory.target.xi).collect();
        let linear: Vec<f64> = obs.iter().map(|o| o.linear_term).collect();
        let density2 = theory.target.density * theory.target.density;
        per_n.push(PerNSummary {
            n,
            replicates: obs.len(),
            rate_rn: r_n,
            remainder: ColumnSummary::from_values(&remainders)?,
            normalized_remainder: ColumnSummary::from_values(&normalized)?,
            error: ColumnSummary::from_values(&errors)?,
            linear_term_variance: mean_and_variance(&linear).1,
            linear_term_variance_theory: var_empirical_cdf(&config.model, &theory.coeffs, n) / density2,
        });
        records.extend(obs.into_iter().zip(normalized).enumerate().map(|(m, (observation, nr))| ReplicateRecord {
            n,
            replicate: m,
            observation,
            normalized_remainder: nr,
        }));
    }

    let sd_slope = if per_n.len() >= 3 {
        let ns: Vec<f64> = per_n.iter().map(|s| s.n as f64).collect();
        let sds: Vec<f64> = per_n.iter().map(|s| s.remainder.sd).collect();
        Some(fit_loglog_slope(&ns, &sds)?)
    } else {
        None
    };

    Ok(BahadurStudyResult {
        config: config.clone(),
        run_id: config.run_id(),
        seed_scheme: SEED_SCHEME.to_string(),
        xi: theory.target.xi,
        density: theory.target.density,
        tau_bar: theory.tau_bar,
        tau_p: theory.tau_p,
        rate: theory.rate,
        rate_slope: theory.rate_slope(),
        per_n,
        sd_slope,
        sigma2_p: theory.sigma2_p(&config.model),
        k_const: theory.k_const(),
        records,
    })
}

/// Ordinary least squares of `log values` on `log ns`.
pub fn fit_loglog_slope(ns: &[f64], values: &[f64]) -> Result<SlopeFit> {
    if ns.len() != values.len() {
        return Err(Error::InvalidArgument("ns and values differ in length".into()));
    }
    if ns.len() < 3 {
        return Err(Error::InvalidArgument("slope fit needs at least 3 points".into()));
    }
    if ns.iter().chain(values).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("slope fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr })
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltMode {
    /// `√n (ξ̂ − ξ) → N(0, σ²_p)`.
    Srd,
    /// `n^{α/2} (ξ̂ − ξ)` Gaussian in the first chaos.
    LrdFirstChaos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub config: StudyConfig,
    pub run_id: String,
    pub mode: CltMode,
    pub rate: RateSpec,
    pub n: usize,
    pub replicates: usize,
    /// KS distance of the standardized errors to the standard Gaussian; in the
    /// LRD mode the errors are standardized by their own mean and SD.
    pub ks_distance: f64,
    /// Variance of the normalized errors at the largest `n`.
    pub empirical_variance: f64,
    pub sigma2_p: Option<f64>,
    pub variance_ratio: Option<f64>,
    /// Fit of `log Var(ξ̂ − ξ)` on `log n` (LRD mode).
    pub variance_exponent: Option<SlopeFit>,
    pub expected_exponent: Option<f64>,
    pub k_const: Option<f64>,
    /// `c_τ̄ / (τ̄! f)`, the scale in front of the limit variable.
    pub limit_scale: Option<f64>,
}

/// Distributional check of the quantile limit law.
pub fn run_clt_check(config: &StudyConfig) -> Result<CltReport> {
    let theory = StudyTheory::new(config)?;
    let rate = theory.rate;
    let mode = match (rate.regime, theory.tau_bar) {
        (Regime::Srd, _) => CltMode::Srd,
        (Regime::Lrd, 1) => CltMode::LrdFirstChaos,
        (regime, tau) => {
            return Err(Error::WrongRegime {
                found: format!("{regime} with tau_bar = {tau}"),
                required: "SRD, or LRD with tau_bar = 1".into(),
            })
        }
    };
    let n_max = *config.n_grid.last().expect("validated grid");
    let xi = theory.target.xi;

    match mode {
        CltMode::Srd => {
            let sigma2 = sigma2_from_parts(
                &theory.coeffs,
                theory.target.density,
                &config.model,
                theory.tau_bar,
                DEFAULT_LAG_CAP,
            )?
            .value;
            let obs = simulate_observations(&config.model, &theory, n_max, config.replicates, config.base_seed)?;
            let scale = (n_max as f64).sqrt();
            let scaled: Vec<f64> = obs.iter().map(|o| scale * (o.xi_hat - xi)).collect();
            let sigma = sigma2.sqrt();
            let z: Vec<f64> = scaled.iter().map(|s| s / sigma).collect();
            let empirical_variance = mean_and_variance(&scaled).1;
            Ok(CltReport {
                config: config.clone(),
                run_id: config.run_id(),
                mode,
                rate,
                n: n_max,
                replicates: config.replicates,
                ks_distance: ks_distance(&z, std_normal_cdf),
                empirical_variance,
                sigma2_p: Some(sigma2),
                variance_ratio: Some(empirical_variance / sigma2),
                variance_exponent: None,
                expected_exponent: None,
                k_const: None,
                limit_scale: None,
            })
        }
        CltMode::LrdFirstChaos => {
            if config.n_grid.len() < 3 {
                return Err(Error::InvalidArgument("LRD exponent fit needs at least 3 grid points".into()));
            }
            let mut variances = Vec::with_capacity(config.n_grid.len());
            let mut last = Vec::new();
            for &n in &config.n_grid {
                let obs = simulate_observations(&config.model, &theory, n, config.replicates, config.base_seed)?;
                let errors: Vec<f64> = obs.iter().map(|o| o.xi_hat - xi).collect();
                variances.push(mean_and_variance(&errors).1);
                last = errors;
            }
            let ns: Vec<f64> = config.n_grid.iter().map(|&n| n as f64).collect();
            let fit = fit_loglog_slope(&ns, &variances)?;
            let exponent = rate.alpha * theory.tau_bar as f64;
            let scale = (n_max as f64).powf(exponent / 2.0);
            let scaled: Vec<f64> = last.iter().map(|e| scale * e).collect();
            let (mean, var) = mean_and_variance(&scaled);
            let sd = var.sqrt();
            let z: Vec<f64> = scaled.iter().map(|s| (s - mean) / sd).collect();
            let c = theory.coeffs.coeffs[theory.tau_bar];
            Ok(CltReport {
                config: config.clone(),
                run_id: config.run_id(),
                mode,
                rate,
                n: n_max,
                replicates: config.replicates,
                ks_distance: ks_distance(&z, std_normal_cdf),
                empirical_variance: var,
                sigma2_p: None,
                variance_ratio: None,
                variance_exponent: Some(fit),
                expected_exponent: Some(-exponent),
                k_const: k_const(theory.tau_bar, rate.alpha).ok(),
                limit_scale: Some(c / (factorial(theory.tau_bar) * theory.target.density)),
            })
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
