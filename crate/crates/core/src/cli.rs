//! Command-line front end. Every command prints JSON (or CSV with `--csv`)
//! that echoes its resolved configuration.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{classify_regime, k_const, rate_rn, sigma2_p, DEFAULT_LAG_CAP};
use crate::error::Error;
use crate::experiments::{run_bahadur_study, run_clt_check, with_threads, StudyConfig};
use crate::functionals::{pdf_gy, true_quantile, FunctionalName};
use crate::gaussproc::{sample_path, CorrelationModel};
use crate::hermite::{
    coefficients_of_indicator, default_half_width, min_rank_neighborhood, DEFAULT_GRID_POINTS, DEFAULT_MAX_ORDER,
    DEFAULT_ZERO_TOL,
};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "BAHADUR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "bahadur", version, about = "Bahadur representation of sample quantiles under long memory")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Emit a CSV table instead of JSON where one exists.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one exact path of the Gaussian sequence.
    Simulate(SimulateArgs),
    /// Hermite coefficients of the indicator of {g(Y) <= u}.
    Coeffs(CoeffsArgs),
    /// Hermite rank at the quantile and over its neighborhood.
    Rank(RankArgs),
    /// The rate r_n and its regime.
    Rate(RateArgs),
    /// The SRD limit variance of the sample quantile.
    Variance(VarianceArgs),
    /// The normalizing constant K(tau, alpha).
    Kconst(KconstArgs),
    /// Monte-Carlo study of the Bahadur remainder over an n grid.
    BahadurStudy(StudyArgs),
    /// Distributional check of the quantile CLT.
    CltCheck(StudyArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    corr: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoeffsArgs {
    #[arg(long, default_value = "identity")]
    functional: String,
    /// Probability level; the level u is its quantile.
    #[arg(long, conflicts_with = "u", required_unless_present = "u")]
    p: Option<f64>,
    /// Level u directly.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long = "J", alias = "max-order", default_value_t = DEFAULT_MAX_ORDER)]
    max_order: usize,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long, default_value = "identity")]
    functional: String,
    #[arg(long)]
    p: f64,
    #[arg(long = "J", alias = "max-order", default_value_t = DEFAULT_MAX_ORDER)]
    max_order: usize,
    /// Neighborhood half-width in u; defaults to a density-scaled width.
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[arg(long, conflicts_with = "corr", required_unless_present = "corr")]
    alpha: Option<f64>,
    /// Take alpha from a correlation model instead.
    #[arg(long)]
    corr: Option<String>,
    #[arg(long)]
    tau: usize,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[arg(long, default_value = "identity")]
    functional: String,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    corr: String,
    #[arg(long = "J", alias = "max-order", default_value_t = DEFAULT_MAX_ORDER)]
    max_order: usize,
    #[arg(long, default_value_t = DEFAULT_LAG_CAP)]
    lag_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KconstArgs {
    #[arg(long)]
    tau: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// JSON config (or a previous summary); explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corr: Option<String>,
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, alias = "M")]
    replicates: Option<usize>,
    #[arg(long, alias = "base-seed")]
    seed: Option<u64>,
    #[arg(long = "J", alias = "max-order")]
    max_order: Option<usize>,
    /// Per-replicate CSV destination (bahadur-study only).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 1 computation error, 2 usage error.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Compute(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let pretty = cli.pretty;
    match &cli.command {
        Command::Simulate(a) => {
            let model = parse_model(&a.corr)?;
            let path = sample_path(&model, a.n, a.seed)?;
            let mut buf = Vec::new();
            if cli.csv {
                path.write_csv(&mut buf)?;
            } else {
                let v = json!({
                    "command": "simulate",
                    "config": { "corr": model, "n": a.n, "seed": a.seed },
                    "clipped_eigenvalues": path.clipped_eigenvalues,
                    "values": path.values,
                });
                buf = render(&v, pretty);
            }
            emit(out, a.out.as_ref(), &buf)
        }
        Command::Coeffs(a) => {
            let name = parse_functional(&a.functional)?;
            let g = name.build();
            let u = match (a.u, a.p) {
                (Some(u), _) => u,
                (None, Some(p)) => {
                    check_probability(p)?;
                    true_quantile(&g, p)?
                }
                (None, None) => return Err(Failure::Usage("need --p or --u".into())),
            };
            let c = coefficients_of_indicator(&g, u, a.max_order, a.zero_tol)?;
            let buf = if cli.csv {
                let mut b = Vec::new();
                writeln!(b, "# functional={} u={} J={} rank={:?}", name, u, a.max_order, c.rank)?;
                writeln!(b, "j,c_j")?;
                for (j, cj) in c.coeffs.iter().enumerate() {
                    writeln!(b, "{j},{cj}")?;
                }
                b
            } else {
                render(
                    &json!({
                        "command": "coeffs",
                        "config": { "functional": name, "p": a.p, "u": u, "J": a.max_order, "zero_tol": a.zero_tol },
                        "coeffs": c.coeffs,
                        "rank": c.rank,
                        "cdf": c.cdf,
                        "variance": c.variance,
                        "tail_mass": c.tail_mass(),
                    }),
                    pretty,
                )
            };
            emit(out, a.out.as_ref(), &buf)
        }
        Command::Rank(a) => {
            check_probability(a.p)?;
            let name = parse_functional(&a.functional)?;
            let g = name.build();
            let xi = true_quantile(&g, a.p)?;
            let hw = match a.half_width {
                Some(h) => h,
                None => default_half_width(&g, a.p)?,
            };
            let tau_bar = min_rank_neighborhood(&g, a.p, hw, a.grid, a.max_order, a.zero_tol)?;
            let tau_p = coefficients_of_indicator(&g, xi, a.max_order, a.zero_tol)?.rank;
            let v = json!({
                "command": "rank",
                "config": {
                    "functional": name, "p": a.p, "J": a.max_order, "half_width": hw,
                    "grid": a.grid, "zero_tol": a.zero_tol,
                },
                "xi": xi,
                "tau_p": tau_p,
                "tau_bar": tau_bar,
            });
            emit(out, a.out.as_ref(), &render(&v, pretty))
        }
        Command::Rate(a) => {
            let (alpha, corr) = match (&a.corr, a.alpha) {
                (Some(s), _) => {
                    let m = parse_model(s)?;
                    (m.memory_exponent().unwrap_or(f64::INFINITY), Some(m))
                }
                (None, Some(alpha)) => (alpha, None),
                (None, None) => return Err(Failure::Usage("need --alpha or --corr".into())),
            };
            if !(alpha > 0.0) {
                return Err(Failure::Usage("alpha must be positive".into()));
            }
            if a.tau < 1 {
                return Err(Failure::Usage("tau must be at least 1".into()));
            }
            let spec = classify_regime(alpha, a.tau);
            let value = rate_rn(&spec, a.n)?;
            let v = json!({
                "command": "rate",
                "config": { "alpha": finite_or_null(alpha), "corr": corr, "tau": a.tau, "n": a.n },
                "value": value,
                "regime": spec.regime,
            });
            emit(out, a.out.as_ref(), &render(&v, pretty))
        }
        Command::Variance(a) => {
            check_probability(a.p)?;
            let name = parse_functional(&a.functional)?;
            let model = parse_model(&a.corr)?;
            let g = name.build();
            let s = sigma2_p(&g, a.p, &model, a.max_order, a.lag_cap)?;
            let xi = true_quantile(&g, a.p)?;
            let v = json!({
                "command": "variance",
                "config": {
                    "functional": name, "p": a.p, "corr": model, "J": a.max_order, "lag_cap": a.lag_cap,
                },
                "value": s.value,
                "tail_bound": s.tail_bound,
                "regime": "SRD",
                "density": pdf_gy(&g, xi)?,
            });
            emit(out, a.out.as_ref(), &render(&v, pretty))
        }
        Command::Kconst(a) => {
            if !(a.alpha > 0.0) {
                return Err(Failure::Usage("alpha must be positive".into()));
            }
            if a.tau < 1 {
                return Err(Failure::Usage("tau must be at least 1".into()));
            }
            let value = k_const(a.tau, a.alpha)?;
            let v = json!({
                "command": "kconst",
                "config": { "tau": a.tau, "alpha": a.alpha },
                "value": value,
                "regime": classify_regime(a.alpha, a.tau).regime,
            });
            emit(out, a.out.as_ref(), &render(&v, pretty))
        }
        Command::BahadurStudy(a) => {
            let config = resolve_study(a)?;
            let result = with_threads(a.threads, || run_bahadur_study(&config))??;
            let mut csv = Vec::new();
            result.write_csv(&mut csv)?;
            if let Some(path) = &config.output {
                fs::write(path, &csv)?;
            }
            if cli.csv {
                out.write_all(&csv)?;
                Ok(())
            } else {
                out.write_all(&render(&result, pretty))?;
                Ok(())
            }
        }
        Command::CltCheck(a) => {
            let config = resolve_study(a)?;
            let report = with_threads(a.threads, || run_clt_check(&config))??;
            out.write_all(&render(&report, pretty))?;
            Ok(())
        }
    }
}

/// Merges `--config` with explicit flags, flags winning.
fn resolve_study(a: &StudyArgs) -> Result<StudyConfig, Failure> {
    let mut base = match &a.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let missing = |what: &str| Failure::Usage(format!("--{what} is required without --config"));
    let model = match &a.corr {
        Some(s) => parse_model(s)?,
        None => base.as_ref().map(|c| c.model).ok_or_else(|| missing("corr"))?,
    };
    let functional = match &a.functional {
        Some(s) => parse_functional(s)?,
        None => base.as_ref().map(|c| c.functional).unwrap_or(FunctionalName::Identity),
    };
    let p = a.p.or(base.as_ref().map(|c| c.p)).ok_or_else(|| missing("p"))?;
    let n_grid = match &a.n_grid {
        Some(g) => g.clone(),
        None => base.as_ref().map(|c| c.n_grid.clone()).ok_or_else(|| missing("n-grid"))?,
    };
    let replicates = a.replicates.or(base.as_ref().map(|c| c.replicates)).ok_or_else(|| missing("replicates"))?;
    let base_seed = a.seed.or(base.as_ref().map(|c| c.base_seed)).unwrap_or(0);
    let max_order = a.max_order.or(base.as_ref().map(|c| c.max_order)).unwrap_or(DEFAULT_MAX_ORDER);
    let output = a.out.clone().or(base.as_mut().and_then(|c| c.output.take()));
    let config = StudyConfig { model, functional, p, n_grid, replicates, base_seed, max_order, output };
    config.validate()?;
    Ok(config)
}

/// Reads a config file: either a bare config object or any output carrying
/// one under `"config"`.
pub fn load_config(path: &PathBuf) -> Result<StudyConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_model(s: &str) -> Result<CorrelationModel, Failure> {
    s.parse::<CorrelationModel>().map_err(|e| Failure::Usage(e.to_string()))
}

fn parse_functional(s: &str) -> Result<FunctionalName, Failure> {
    s.parse::<FunctionalName>().map_err(|e| Failure::Usage(e.to_string()))
}

fn check_probability(p: f64) -> Result<(), Failure> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("probability {p} not in (0, 1)")))
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn render(v: &impl Serialize, pretty: bool) -> Vec<u8> {
    let mut buf = if pretty { serde_json::to_vec_pretty(v) } else { serde_json::to_vec(v) }.expect("output serializes");
    buf.push(b'\n');
    buf
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}
