//! Bundled nonlinear functionals `g` with their monotone branch structure,
//! and the induced law of `g(Y)` for standard Gaussian `Y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::sublevel_set;
use crate::special::std_normal_pdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Restriction of `g` to one open interval on which it is a C¹ diffeomorphism.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    /// Open domain interval `U_i = (lower, upper)`.
    pub lower: f64,
    pub upper: f64,
    /// Open image interval `g(U_i) = (image_lower, image_upper)`.
    pub image_lower: f64,
    pub image_upper: f64,
    pub direction: Direction,
    pub forward: fn(f64) -> f64,
    pub inverse: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

impl Branch {
    pub fn image_contains(&self, u: f64) -> bool {
        self.image_lower < u && u < self.image_upper
    }

    pub fn domain_contains(&self, t: f64) -> bool {
        self.lower < t && t < self.upper
    }

    /// Preimage of `u` on this branch, when `u` is interior to the image.
    pub fn preimage(&self, u: f64) -> Option<f64> {
        self.image_contains(u).then(|| (self.inverse)(u))
    }
}

/// Names of the bundled functionals, as accepted by `--functional`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalName {
    Identity,
    Abs,
    Square,
    Cube,
}

impl FunctionalName {
    pub const ALL: [FunctionalName; 4] =
        [FunctionalName::Identity, FunctionalName::Abs, FunctionalName::Square, FunctionalName::Cube];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionalName::Identity => "identity",
            FunctionalName::Abs => "abs",
            FunctionalName::Square => "square",
            FunctionalName::Cube => "cube",
        }
    }

    pub fn build(self) -> PiecewiseFunctional {
        match self {
            FunctionalName::Identity => PiecewiseFunctional::identity(),
            FunctionalName::Abs => PiecewiseFunctional::abs(),
            FunctionalName::Square => PiecewiseFunctional::square(),
            FunctionalName::Cube => PiecewiseFunctional::cube(),
        }
    }
}

impl fmt::Display for FunctionalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionalName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "id" => Ok(FunctionalName::Identity),
            "abs" | "absolute" => Ok(FunctionalName::Abs),
            "square" | "sq" => Ok(FunctionalName::Square),
            "cube" => Ok(FunctionalName::Cube),
            other => {
                Err(Error::InvalidArgument(format!("unknown functional '{other}' (expected identity|abs|square|cube)")))
            }
        }
    }
}

/// A function `g` together with the disjoint branches `U_1..U_L` whose union
/// has full Gaussian measure.
#[derive(Debug, Clone)]
pub struct PiecewiseFunctional {
    name: String,
    branches: Vec<Branch>,
    global: fn(f64) -> f64,
}

impl PiecewiseFunctional {
    /// Validates that branches are sorted, disjoint and leave only a
    /// Lebesgue-null gap (finitely many points) uncovered.
    pub fn new(name: impl Into<String>, branches: Vec<Branch>, global: fn(f64) -> f64) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidArgument("functional needs at least one branch".into()));
        }
        if branches[0].lower != f64::NEG_INFINITY || branches[branches.len() - 1].upper != f64::INFINITY {
            return Err(Error::InvalidArgument("branches must cover the real line".into()));
        }
        for w in branches.windows(2) {
            if w[0].upper != w[1].lower {
                return Err(Error::InvalidArgument("branches must be sorted, disjoint and adjacent".into()));
            }
        }
        for b in &branches {
            if !(b.lower < b.upper) || !(b.image_lower < b.image_upper) {
                return Err(Error::InvalidArgument("empty branch interval".into()));
            }
        }
        Ok(Self { name: name.into(), branches, global })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.global)(t)
    }

    /// Closure of the overall range, as `(inf, sup)`.
    pub fn range(&self) -> (f64, f64) {
        self.branches
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b.image_lower), hi.max(b.image_upper)))
    }

    pub fn identity() -> Self {
        Self::new(
            "identity",
            vec![Branch {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                image_lower: f64::NEG_INFINITY,
                image_upper: f64::INFINITY,
                direction: Direction::Increasing,
                forward: |t| t,
                inverse: |u| u,
                derivative: |_| 1.0,
            }],
            |t| t,
        )
        .expect("identity is well formed")
    }

    pub fn abs() -> Self {
        Self::new(
            "abs",
            vec![
                Branch {
                    lower: f64::NEG_INFINITY,
                    upper: 0.0,
                    image_lower: 0.0,
                    image_upper: f64::INFINITY,
                    direction: Direction::Decreasing,
                    forward: |t| -t,
                    inverse: |u| -u,
                    derivative: |_| -1.0,
                },
                Branch {
                    lower: 0.0,
                    upper: f64::INFINITY,
                    image_lower: 0.0,
                    image_upper: f64::INFINITY,
                    direction: Direction::Increasing,
                    forward: |t| t,
                    inverse: |u| u,
                    derivative: |_| 1.0,
                },
            ],
            f64::abs,
        )
        .expect("abs is well formed")
    }

    pub fn square() -> Self {
        Self::new(
            "square",
            vec![
                Branch {
                    lower: f64::NEG_INFINITY,
                    upper: 0.0,
                    image_lower: 0.0,
                    image_upper: f64::INFINITY,
                    direction: Direction::Decreasing,
                    forward: |t| t * t,
                    inverse: |u| -u.sqrt(),
                    derivative: |t| 2.0 * t,
                },
                Branch {
                    lower: 0.0,
                    upper: f64::INFINITY,
                    image_lower: 0.0,
                    image_upper: f64::INFINITY,
                    direction: Direction::Increasing,
                    forward: |t| t * t,
                    inverse: f64::sqrt,
                    derivative: |t| 2.0 * t,
                },
            ],
            |t| t * t,
        )
        .expect("square is well formed")
    }

    /// `g(t) = t³ + t`: a cube shifted by a linear term so that `g′ ≥ 1`.
    pub fn cube() -> Self {
        Self::new(
            "cube",
            vec![Branch {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                image_lower: f64::NEG_INFINITY,
                image_upper: f64::INFINITY,
                direction: Direction::Increasing,
                forward: cube_forward,
                inverse: cube_inverse,
                derivative: |t| 3.0 * t * t + 1.0,
            }],
            cube_forward,
        )
        .expect("cube is well formed")
    }
}

fn cube_forward(t: f64) -> f64 {
    t * t * t + t
}

// Cardano for t³ + t = u, written as a - 1/(3a) to avoid cancellation,
// then one Newton polish.
fn cube_inverse(u: f64) -> f64 {
    if u == 0.0 || !u.is_finite() {
        return u;
    }
    let v = u.abs();
    let a = (0.5 * v + (0.25 * v * v + 1.0 / 27.0).sqrt()).cbrt();
    let mut t = a - 1.0 / (3.0 * a);
    t -= (t * t * t + t - v) / (3.0 * t * t + 1.0);
    t.copysign(u)
}

/// `F(u) = P(g(Y) ≤ u)`.
pub fn cdf_gy(g: &PiecewiseFunctional, u: f64) -> f64 {
    match sublevel_set(g, u) {
        Ok(set) => set.gaussian_mass(),
        Err(Error::OutOfRange { below, .. }) => {
            if below {
                0.0
            } else {
                1.0
            }
        }
        Err(_) => f64::NAN,
    }
}

/// Density of `g(Y)`: `Σ_i φ(g_i⁻¹(u)) / |g′(g_i⁻¹(u))|` over branches whose
/// image contains `u`.
pub fn pdf_gy(g: &PiecewiseFunctional, u: f64) -> Result<f64> {
    let mut density = 0.0;
    let mut hit = false;
    for b in g.branches() {
        let Some(x) = b.preimage(u) else { continue };
        hit = true;
        let d = (b.derivative)(x).abs();
        if d == 0.0 || !d.is_finite() {
            return Err(Error::AssumptionViolated(format!(
                "derivative of {} vanishes at preimage {x} of {u}",
                g.name()
            )));
        }
        density += std_normal_pdf(x) / d;
    }
    if !hit {
        return Err(Error::InvalidArgument(format!("{u} is not interior to the range of {}", g.name())));
    }
    Ok(density)
}

const BISECTION_WIDTH: f64 = 1e-8;
const QUANTILE_TOL: f64 = 1e-13;

/// True quantile `ξ(p)` of `g(Y)`: bracket, bisect to width 1e-8, then Newton.
pub fn true_quantile(g: &PiecewiseFunctional, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} not in (0, 1)")));
    }
    let (range_lo, range_hi) = g.range();
    let mut lo = (-1.0f64).max(range_lo);
    let mut hi = 1.0f64.min(range_hi);
    if lo >= hi {
        return Err(Error::NotBracketable(p));
    }
    let mut step = 1.0;
    let mut guard = 0;
    while cdf_gy(g, lo) > p {
        hi = lo;
        lo = if range_lo.is_finite() && lo - step <= range_lo { range_lo } else { lo - step };
        step *= 2.0;
        guard += 1;
        if guard > 1100 || (lo == range_lo && cdf_gy(g, lo) > p) {
            return Err(Error::NotBracketable(p));
        }
    }
    step = 1.0;
    guard = 0;
    while cdf_gy(g, hi) < p {
        lo = hi;
        hi = if range_hi.is_finite() && hi + step >= range_hi { range_hi } else { hi + step };
        step *= 2.0;
        guard += 1;
        if guard > 1100 || (hi == range_hi && cdf_gy(g, hi) < p) {
            return Err(Error::NotBracketable(p));
        }
    }

    while hi - lo > BISECTION_WIDTH * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if cdf_gy(g, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let resid = cdf_gy(g, x) - p;
        if resid.abs() <= QUANTILE_TOL {
            break;
        }
        let f = pdf_gy(g, x)?;
        if f <= 0.0 {
            return Err(Error::AssumptionViolated(format!("density of g(Y) is zero at {x}")));
        }
        let next = x - resid / f;
        if !(next > lo && next < hi) || next == x {
            break;
        }
        x = next;
    }
    let f = pdf_gy(g, x)?;
    if f <= 0.0 {
        return Err(Error::AssumptionViolated(format!("density of g(Y) is zero at {x}")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::std_normal_cdf;

    const PHI_0: f64 = 0.398_942_280_401_432_7;
    const PHI_1: f64 = 0.241_970_724_519_143_37;

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf_gy(&PiecewiseFunctional::identity(), 0.0), 0.5);
        let q975 = 1.959_963_984_540_054;
        assert!((cdf_gy(&PiecewiseFunctional::abs(), q975) - 0.95).abs() < 1e-14);
        let want = 2.0 * std_normal_cdf(1.0) - 1.0;
        assert!((cdf_gy(&PiecewiseFunctional::square(), 1.0) - want).abs() < 1e-15);
        assert!((want - 0.682_689_492_137_085_9).abs() < 1e-15);
    }

    #[test]
    fn cdf_outside_range() {
        assert_eq!(cdf_gy(&PiecewiseFunctional::abs(), -1.0), 0.0);
        assert_eq!(cdf_gy(&PiecewiseFunctional::square(), 0.0), 0.0);
    }

    #[test]
    fn pdf_examples() {
        assert!((pdf_gy(&PiecewiseFunctional::identity(), 0.0).unwrap() - PHI_0).abs() < 1e-16);
        assert!((pdf_gy(&PiecewiseFunctional::abs(), 1.0).unwrap() - 2.0 * PHI_1).abs() < 1e-16);
        assert!((pdf_gy(&PiecewiseFunctional::square(), 1.0).unwrap() - PHI_1).abs() < 1e-16);
    }

    #[test]
    fn pdf_rejects_range_boundary() {
        assert!(pdf_gy(&PiecewiseFunctional::square(), 0.0).is_err());
        assert!(pdf_gy(&PiecewiseFunctional::abs(), -0.5).is_err());
    }

    #[test]
    fn quantile_examples() {
        let id = PiecewiseFunctional::identity();
        assert!((true_quantile(&id, 0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!(true_quantile(&id, 0.5).unwrap().abs() < 1e-12);
        let abs = PiecewiseFunctional::abs();
        assert!((true_quantile(&abs, 0.5).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_bad_probability() {
        let id = PiecewiseFunctional::identity();
        assert!(true_quantile(&id, 0.0).is_err());
        assert!(true_quantile(&id, 1.0).is_err());
        assert!(true_quantile(&id, f64::NAN).is_err());
    }

    #[test]
    fn cube_inverse_round_trip() {
        for &u in &[-1e6, -50.0, -2.0, -1e-3, 0.0, 1e-9, 0.3, 2.0, 123.4, 1e6] {
            let t = cube_inverse(u);
            assert!((cube_forward(t) - u).abs() <= 1e-12 * u.abs().max(1.0), "u={u}");
        }
    }

    #[test]
    fn name_parsing() {
        for name in FunctionalName::ALL {
            assert_eq!(name.as_str().parse::<FunctionalName>().unwrap(), name);
            assert_eq!(name.build().name(), name.as_str());
        }
        assert!("exp".parse::<FunctionalName>().is_err());
    }

    #[test]
    fn rejects_gappy_branches() {
        let mut b = PiecewiseFunctional::abs().branches().to_vec();
        b[1].lower = 1.0;
        assert!(PiecewiseFunctional::new("bad", b, f64::abs).is_err());
    }
}
