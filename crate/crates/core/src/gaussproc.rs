//! Stationary standard Gaussian sequences: correlation models, exact
//! simulation by circulant embedding, and small diagnostics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance below which negative embedding eigenvalues are clipped.
pub const EIGEN_CLIP_TOL: f64 = 1e-8;
/// Embedding size may grow up to this multiple of `n`.
pub const MAX_EMBEDDING_FACTOR: usize = 1 << 10;

/// Correlation function `ρ(i)` of a unit-variance stationary Gaussian sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CorrelationModel {
    /// `ρ(i) = (1 + |i|)^{−α}`.
    PowerLaw {
        alpha: f64,
    },
    /// Increments of fractional Brownian motion with Hurst index `H`.
    FgnIncrements {
        hurst: f64,
    },
    Iid,
    /// `ρ(i) = φ^{|i|}`.
    Ar {
        phi: f64,
    },
}

impl CorrelationModel {
    pub fn power_law(alpha: f64) -> Result<Self> {
        Self::PowerLaw { alpha }.validated()
    }

    pub fn fgn(hurst: f64) -> Result<Self> {
        Self::FgnIncrements { hurst }.validated()
    }

    pub fn ar(phi: f64) -> Result<Self> {
        Self::Ar { phi }.validated()
    }

    fn validated(self) -> Result<Self> {
        match self {
            Self::PowerLaw { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidArgument("alpha must be positive".into()))
            }
            Self::FgnIncrements { hurst } if !(hurst > 0.0 && hurst < 1.0) => {
                Err(Error::InvalidArgument("H must lie in (0, 1)".into()))
            }
            Self::Ar { phi } if !(phi > -1.0 && phi < 1.0) => {
                Err(Error::InvalidArgument("phi must lie in (-1, 1)".into()))
            }
            m => Ok(m),
        }
    }

    /// `ρ(lag)`, symmetric in `lag`.
    pub fn rho(&self, lag: i64) -> f64 {
        let i = lag.unsigned_abs();
        if i == 0 {
            return 1.0;
        }
        match *self {
            Self::PowerLaw { alpha } => (1.0 + i as f64).powf(-alpha),
            Self::FgnIncrements { hurst } => fgn_correlation(hurst, i as f64),
            Self::Iid => 0.0,
            Self::Ar { phi } => phi.powi(i.min(i32::MAX as u64) as i32),
        }
    }

    /// Exponent `α` with `|ρ(i)| ~ c·i^{−α}`; `None` for models whose
    /// correlations vanish or decay exponentially.
    pub fn memory_exponent(&self) -> Option<f64> {
        match *self {
            Self::PowerLaw { alpha } => Some(alpha),
            Self::FgnIncrements { hurst } if hurst != 0.5 => Some(2.0 - 2.0 * hurst),
            _ => None,
        }
    }

    /// Upper bound on `Σ_{i > lag_cap} |ρ(i)|^τ`; infinite when not summable.
    pub fn tail_sum_bound(&self, lag_cap: usize, tau: usize) -> f64 {
        let cap = lag_cap.max(1) as f64;
        let tau_f = tau as f64;
        match *self {
            Self::Iid => 0.0,
            Self::FgnIncrements { hurst: 0.5 } => 0.0,
            Self::Ar { phi } => {
                let r = phi.abs().powi(tau as i32);
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(cap + 1.0) / (1.0 - r)
                }
            }
            Self::PowerLaw { alpha } => {
                let s = alpha * tau_f;
                if s <= 1.0 {
                    f64::INFINITY
                } else {
                    cap.powf(1.0 - s) / (s - 1.0)
                }
            }
            Self::FgnIncrements { hurst } => {
                // |ρ(i)| ≤ H|2H−1|(i−1)^{2H−2} by the mean value theorem on the
                // second difference of t^{2H}.
                let s = (2.0 - 2.0 * hurst) * tau_f;
                if s <= 1.0 {
                    f64::INFINITY
                } else {
                    let c = (hurst * (2.0 * hurst - 1.0).abs()).powi(tau as i32);
                    c * (cap.powf(-s) + cap.powf(1.0 - s) / (s - 1.0))
                }
            }
        }
    }
}

// ½(|i+1|^{2H} − 2|i|^{2H} + |i−1|^{2H}), written with expm1/ln_1p so the
// second difference keeps its relative precision for large lags.
fn fgn_correlation(hurst: f64, i: f64) -> f64 {
    let two_h = 2.0 * hurst;
    if i < 8.0 {
        return 0.5 * ((i + 1.0).powf(two_h) - 2.0 * i.powf(two_h) + (i - 1.0).abs().powf(two_h));
    }
    let x = 1.0 / i;
    let up = (two_h * x.ln_1p()).exp_m1();
    let down = (two_h * (-x).ln_1p()).exp_m1();
    0.5 * i.powf(two_h) * (up + down)
}

impl fmt::Display for CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { alpha } => write!(f, "powerlaw:alpha={alpha}"),
            Self::FgnIncrements { hurst } => write!(f, "fgn:H={hurst}"),
            Self::Iid => f.write_str("iid"),
            Self::Ar { phi } => write!(f, "ar:phi={phi}"),
        }
    }
}

impl FromStr for CorrelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<f64> {
            let (k, v) = params
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("model '{s}' needs {key}=<value>")))?;
            if !k.trim().eq_ignore_ascii_case(key) {
                return Err(Error::InvalidArgument(format!("model '{s}': expected parameter {key}")));
            }
            v.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("model '{s}': bad number '{v}'")))
        };
        match kind.to_ascii_lowercase().as_str() {
            "powerlaw" => Self::power_law(param("alpha")?),
            "fgn" => Self::fgn(param("H")?),
            "ar" => Self::ar(param("phi")?),
            "iid" if params.is_empty() => Ok(Self::Iid),
            _ => Err(Error::InvalidArgument(format!(
                "malformed model '{s}' (expected powerlaw:alpha=A | fgn:H=H | iid | ar:phi=P)"
            ))),
        }
    }
}

impl TryFrom<String> for CorrelationModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CorrelationModel> for String {
    fn from(m: CorrelationModel) -> String {
        m.to_string()
    }
}

/// Circulant extension of the covariance of `(Y(1), …, Y(n))`, ready for
/// repeated sampling.
#[derive(Clone)]
pub struct CirculantEmbedding {
    model: CorrelationModel,
    n: usize,
    eigenvalues: Vec<f64>,
    scale: Vec<f64>,
    clipped: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("model", &self.model)
            .field("n", &self.n)
            .field("size", &self.size())
            .field("clipped", &self.clipped)
            .finish()
    }
}

impl CirculantEmbedding {
    pub fn new(model: CorrelationModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("path length must be at least 2".into()));
        }
        let mut planner = FftPlanner::new();
        let mut size = (2 * (n - 1)).next_power_of_two();
        loop {
            let fft = planner.plan_fft_forward(size);
            let eigenvalues = circulant_eigenvalues(&model, size, fft.as_ref());
            let max = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min >= -EIGEN_CLIP_TOL * max {
                let clipped = eigenvalues.iter().filter(|&&l| l < 0.0).count();
                let scale = eigenvalues.iter().map(|&l| (l.max(0.0) / size as f64).sqrt()).collect();
                return Ok(Self { model, n, eigenvalues, scale, clipped, fft });
            }
            if size * 2 > MAX_EMBEDDING_FACTOR * n {
                return Err(Error::EmbeddingNotNnd { min_eig: min, size });
            }
            size *= 2;
        }
    }

    pub fn model(&self) -> CorrelationModel {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of slightly negative eigenvalues set to zero.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Fills `out` (length `n`) with one exact draw.
    pub fn sample_into(&self, rng: &mut impl rand::Rng, out: &mut [f64]) {
        assert_eq!(out.len(), self.n, "output length must equal n");
        let mut buf: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re;
        }
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.n];
        self.sample_into(&mut rng, &mut values);
        GaussianPath { values, model: self.model, seed, n: self.n, clipped_eigenvalues: self.clipped }
    }
}

fn circulant_eigenvalues(model: &CorrelationModel, size: usize, fft: &dyn Fft<f64>) -> Vec<f64> {
    let mut row: Vec<Complex<f64>> = (0..size).map(|k| Complex::new(model.rho(k.min(size - k) as i64), 0.0)).collect();
    fft.process(&mut row);
    row.into_iter().map(|z| z.re).collect()
}

/// Eigenvalues of the circulant embedding used to simulate `n` points.
pub fn embedding_spectrum(model: &CorrelationModel, n: usize) -> Result<Vec<f64>> {
    Ok(CirculantEmbedding::new(*model, n)?.eigenvalues)
}

/// One simulated path with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPath {
    pub values: Vec<f64>,
    pub model: CorrelationModel,
    pub seed: u64,
    pub n: usize,
    pub clipped_eigenvalues: usize,
}

impl GaussianPath {
    /// Single-column CSV with a provenance comment line.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# model={} n={} seed={}", self.model, self.n, self.seed)?;
        writeln!(w, "y")?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// Deterministic exact draw of `n` points for `(model, n, seed)`.
pub fn sample_path(model: &CorrelationModel, n: usize, seed: u64) -> Result<GaussianPath> {
    Ok(CirculantEmbedding::new(*model, n)?.sample(seed))
}

/// Biased sample autocovariance without mean removal, lags `0..=max_lag`.
pub fn empirical_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!("max_lag {max_lag} must be below length {n}")));
    }
    Ok((0..=max_lag).map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64).collect())
}

/// `(1/n) Σ_{|i|<n} ρ(i)^τ`.
pub fn partial_sum(model: &CorrelationModel, tau: usize, n: usize) -> f64 {
    assert!(n >= 1, "n must be positive");
    let tail: f64 = (1..n).rev().map(|i| model.rho(i as i64).powi(tau as i32)).sum();
    (1.0 + 2.0 * tail) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        assert_eq!(CorrelationModel::power_law(1.0).unwrap().rho(3), 0.25);
        assert_eq!(CorrelationModel::Iid.rho(5), 0.0);
        let r = CorrelationModel::fgn(0.75).unwrap().rho(1);
        assert!((r - 0.5 * (2f64.powf(1.5) - 2.0)).abs() < 1e-15);
        assert!((r - 0.414_213_562_373_095).abs() < 1e-12);
    }

    #[test]
    fn rho_is_symmetric_and_bounded() {
        for m in [
            CorrelationModel::power_law(0.3).unwrap(),
            CorrelationModel::fgn(0.2).unwrap(),
            CorrelationModel::fgn(0.9).unwrap(),
            CorrelationModel::ar(-0.7).unwrap(),
        ] {
            assert_eq!(m.rho(0), 1.0);
            for i in 1..200 {
                assert_eq!(m.rho(i), m.rho(-i));
                assert!(m.rho(i).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn fgn_large_lag_matches_asymptote() {
        let h = 0.85;
        let m = CorrelationModel::fgn(h).unwrap();
        let i = 1e5;
        let asym = h * (2.0 * h - 1.0) * f64::powf(i, 2.0 * h - 2.0);
        assert!((m.rho(100_000) / asym - 1.0).abs() < 1e-8);
        // Branch switch at lag 8 is continuous.
        let direct = 0.5 * (9f64.powf(1.7) - 2.0 * 8f64.powf(1.7) + 7f64.powf(1.7));
        assert!((m.rho(8) - direct).abs() < 1e-13);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["powerlaw:alpha=0.3", "fgn:H=0.85", "iid", "ar:phi=0.5"] {
            let m: CorrelationModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("powerlaw:alpha=0".parse::<CorrelationModel>().is_err());
        assert!("powerlaw:beta=1".parse::<CorrelationModel>().is_err());
        assert!("ar:phi=1".parse::<CorrelationModel>().is_err());
        assert!("garch".parse::<CorrelationModel>().is_err());
        let json = serde_json::to_string(&CorrelationModel::ar(0.5).unwrap()).unwrap();
        assert_eq!(json, "\"ar:phi=0.5\"");
    }

    #[test]
    fn iid_spectrum_is_flat() {
        for n in [2, 5, 64] {
            let eig = embedding_spectrum(&CorrelationModel::Iid, n).unwrap();
            assert!(eig.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn ar_spectrum_positive() {
        let eig = embedding_spectrum(&CorrelationModel::ar(0.5).unwrap(), 8).unwrap();
        assert!(eig.iter().all(|&l| l > 0.0));
        // Closed form 1 + 2 Σ_k ρ_k cos(2πjk/m) on the symmetrized row.
        let m = eig.len();
        for (j, &l) in eig.iter().enumerate() {
            let mut want = 0.0;
            for k in 0..m {
                let lag = k.min(m - k) as i32;
                want += 0.5f64.powi(lag) * (2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64).cos();
            }
            assert!((l - want).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_embedding_is_nnd() {
        let eig = embedding_spectrum(&CorrelationModel::power_law(0.3).unwrap(), 1024).unwrap();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-8 * max);
        assert!(eig.len() >= 2 * 1023);
    }

    #[test]
    fn iid_path_is_deterministic() {
        let a = sample_path(&CorrelationModel::Iid, 4, 42).unwrap();
        let b = sample_path(&CorrelationModel::Iid, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 4);
        let c = sample_path(&CorrelationModel::Iid, 4, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rejects_short_paths() {
        assert!(sample_path(&CorrelationModel::Iid, 1, 0).is_err());
    }

    #[test]
    fn acf_examples() {
        assert_eq!(empirical_acf(&[0.0; 5], 3).unwrap(), vec![0.0; 4]);
        let r = empirical_acf(&[1.0, -1.0, 1.0, -1.0], 1).unwrap();
        assert_eq!(r[1], -0.75);
        assert!(empirical_acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn iid_lag_one_acf_is_small() {
        let n = 1 << 14;
        let p = sample_path(&CorrelationModel::Iid, n, 7).unwrap();
        let r = empirical_acf(&p.values, 1).unwrap();
        assert!(r[1].abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn partial_sum_examples() {
        assert!((partial_sum(&CorrelationModel::Iid, 1, 100) - 0.01).abs() < 1e-16);
        let want = (1.0 + 2.0 * (1..=9).map(|i| 1.0 / (1.0 + i as f64)).sum::<f64>()) / 10.0;
        let got = partial_sum(&CorrelationModel::power_law(1.0).unwrap(), 1, 10);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.4858).abs() < 1e-4);
    }

    #[test]
    fn partial_sum_lrd_scaling() {
        let m = CorrelationModel::power_law(0.4).unwrap();
        let n = 1 << 16;
        let ratio = partial_sum(&m, 1, 2 * n) / partial_sum(&m, 1, n);
        assert!((ratio / 2f64.powf(-0.4) - 1.0).abs() < 0.01);
    }

    #[test]
    fn tail_bounds_dominate_exact_tails() {
        let cases = [
            CorrelationModel::power_law(2.0).unwrap(),
            CorrelationModel::fgn(0.3).unwrap(),
            CorrelationModel::ar(0.8).unwrap(),
            CorrelationModel::power_law(0.6).unwrap(),
        ];
        for m in cases {
            for tau in 1..=3 {
                let bound = m.tail_sum_bound(50, tau);
                let exact: f64 = (51..200_000).map(|i| m.rho(i).abs().powi(tau as i32)).sum();
                assert!(exact <= bound * (1.0 + 1e-12), "{m} tau={tau}: {exact} > {bound}");
            }
        }
        assert_eq!(CorrelationModel::Iid.tail_sum_bound(10, 1), 0.0);
        assert!(CorrelationModel::power_law(0.5).unwrap().tail_sum_bound(10, 1).is_infinite());
    }

    #[test]
    fn csv_export_has_header() {
        let p = sample_path(&CorrelationModel::ar(0.5).unwrap(), 3, 9).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# model=ar:phi=0.5 n=3 seed=9");
        assert_eq!(lines[1], "y");
        assert_eq!(lines.len(), 5);
    }
}
