//! Command-line arguments. Every command's arguments double as its run
//! configuration: they are echoed into each artifact and can be fed back via
//! `smearing rerun`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use smearing_core::dist::GaussianParams;
use smearing_core::ring::{
    binomial_with_root, find_roots, reduce_signed, x_n_plus_one, RingParams,
};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "smearing",
    version,
    about = "Smearing probabilities and the smearing attack on Decision-PLWE"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smearing probability curves P(m, q)
    Prob(ProbArgs),
    /// Discrete Gaussian and its image under evaluation at a root
    Mapdist(MapdistArgs),
    /// Run the smearing attack on generated or recorded samples
    Attack(AttackArgs),
    /// Recommend (m, N) for the smearing decision
    Params(ParamsArgs),
    /// Re-run a command from a config echoed in an earlier artifact
    Rerun(RerunArgs),
}

/// A fully specified run, as echoed into artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Prob(ProbArgs),
    Mapdist(MapdistArgs),
    Attack(AttackArgs),
    Params(ParamsArgs),
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Emit JSON instead of CSV
    #[arg(long)]
    pub json: bool,
    /// Write to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct RingArgs {
    /// Prime modulus q
    #[arg(long)]
    pub q: Option<u64>,
    /// Degree n of f
    #[arg(long)]
    pub n: Option<usize>,
    /// Ascending coefficients of f, comma separated (e.g. -57,0,1)
    #[arg(long, allow_hyphen_values = true, value_name = "COEFFS")]
    pub f: Option<String>,
    /// Use f = x^n + 1
    #[arg(long, conflicts_with = "f")]
    #[serde(default)]
    pub x_n_plus_one: bool,
    /// Root of f mod q (defaults to the smallest root)
    #[arg(long)]
    pub gamma: Option<u64>,
}

impl RingArgs {
    /// Builds the ring and rewrites `self` into its resolved form: explicit
    /// `f` coefficients in `[0, q)`, `n` and `gamma`. Without `f`, the ring is
    /// `x^n - gamma^n`.
    pub fn resolve(&mut self) -> Result<RingParams, CliError> {
        let q = self.q.ok_or_else(|| CliError::usage("--q is required"))?;
        if q < 2 {
            return Err(CliError::usage("--q must be at least 2"));
        }
        let f: Vec<u64> = match (&self.f, self.x_n_plus_one) {
            (Some(text), _) => {
                let coeffs =
                    parse_int_list(text).map_err(|e| CliError::usage(format!("--f: {e}")))?;
                coeffs.iter().map(|&c| reduce_signed(c, q)).collect()
            }
            (None, true) => {
                let n = self
                    .n
                    .ok_or_else(|| CliError::usage("--x-n-plus-one needs --n"))?;
                x_n_plus_one(n, q)
            }
            (None, false) => {
                let (Some(n), Some(gamma)) = (self.n, self.gamma) else {
                    return Err(CliError::usage(
                        "give --f, or --x-n-plus-one with --n, or --n with --gamma",
                    ));
                };
                binomial_with_root(n, gamma % q, q)
            }
        };
        if f.len() < 2 {
            return Err(CliError::usage("f must have degree at least 1"));
        }
        if let Some(n) = self.n {
            if n + 1 != f.len() {
                return Err(CliError::usage(format!(
                    "--n {n} does not match f of degree {}",
                    f.len() - 1
                )));
            }
        }
        let roots = find_roots(&f, q);
        let gamma = match self.gamma {
            Some(g) if roots.contains(&(g % q)) => g % q,
            Some(g) => {
                return Err(CliError::usage(format!(
                    "gamma = {g} is not a root of f mod {q}; roots found: {roots:?}"
                )))
            }
            None => *roots
                .first()
                .ok_or_else(|| CliError::usage(format!("f has no roots mod {q}")))?,
        };
        let params = RingParams::new(q, f, gamma)?;
        self.n = Some(params.n());
        self.gamma = Some(gamma);
        self.x_n_plus_one = false;
        self.f = Some(join(params.f_coeffs()));
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct GaussArgs {
    /// Gaussian width parameter sigma
    #[arg(long, conflicts_with = "beta")]
    pub sigma: Option<f64>,
    /// Relative Gaussian width: sigma = beta * q / sqrt(2 pi)
    #[arg(long)]
    pub beta: Option<f64>,
}

impl GaussArgs {
    pub fn resolve(&self) -> Result<Option<GaussianParams>, CliError> {
        Ok(match (self.sigma, self.beta) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage("give only one of --sigma and --beta"))
            }
            (Some(s), None) => Some(GaussianParams::sigma(s)?),
            (None, Some(b)) => Some(GaussianParams::beta(b)?),
            (None, None) => None,
        })
    }

    pub fn require(&self) -> Result<GaussianParams, CliError> {
        self.resolve()?
            .ok_or_else(|| CliError::usage("one of --sigma or --beta is required"))
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProbArgs {
    /// Support size q (largest q of the grid)
    #[arg(long)]
    pub q: usize,
    /// Smallest q of the grid (defaults to q)
    #[arg(long)]
    pub q_min: Option<usize>,
    /// Largest m
    #[arg(long)]
    pub m_max: usize,
    /// Smallest m
    #[arg(long, default_value_t = 1)]
    pub m_min: usize,
    /// Add the asymptotic approximation column
    #[arg(long)]
    #[serde(default)]
    pub approx: bool,
    /// Add a Monte Carlo column with this many trials per row
    #[arg(long)]
    pub mc_trials: Option<usize>,
    /// Non-uniform distribution (JSON float array) instead of uniform
    #[arg(long, value_name = "PATH")]
    pub chi: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MapdistArgs {
    #[command(flatten)]
    pub ring: RingArgs,
    #[command(flatten)]
    pub gaussian: GaussArgs,
    /// Use the uniform distribution for each coefficient
    #[arg(long)]
    #[serde(default)]
    pub uniform_base: bool,
    /// Validate against this many simulated e(gamma) draws
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    /// Generate PLWE samples
    Plwe,
    /// Generate uniform samples
    Uniform,
    /// Read samples from --samples
    File,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub mode: AttackMode,
    #[command(flatten)]
    pub ring: RingArgs,
    #[command(flatten)]
    pub gaussian: GaussArgs,
    /// Samples per trial
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of trials N (odd)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Choose (m, N) from the known error distribution
    #[arg(long)]
    #[serde(default)]
    pub auto_params: bool,
    /// Target Type-1 error of each decision [default: 0.05 / q, so that the
    /// q decisions together wrongly flag a guess with probability about 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target Type-2 error of each decision
    #[arg(long, default_value_t = 0.05)]
    pub beta_err: f64,
    /// Largest m considered by --auto-params
    #[arg(long)]
    pub m_cap: Option<usize>,
    /// Secret coefficients, comma separated (random otherwise)
    #[arg(long, allow_hyphen_values = true, value_name = "COEFFS")]
    pub secret: Option<String>,
    /// Sample file for --mode file
    #[arg(long, value_name = "PATH")]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ParamsArgs {
    /// Uniform smearing probability, skips the distribution search
    #[arg(long, requires = "p_chi")]
    pub p_u: Option<f64>,
    /// Non-uniform smearing probability
    #[arg(long, requires = "p_u")]
    pub p_chi: Option<f64>,
    #[command(flatten)]
    pub ring: RingArgs,
    #[command(flatten)]
    pub gaussian: GaussArgs,
    /// Distribution file (JSON float array) to separate from uniform
    #[arg(long, value_name = "PATH")]
    pub chi: Option<PathBuf>,
    /// Use the uniform distribution as chi
    #[arg(long)]
    #[serde(default)]
    pub uniform_chi: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub beta_err: f64,
    /// Largest m considered
    #[arg(long)]
    pub m_cap: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A config file, or an artifact carrying an echoed config
    pub config: PathBuf,
    /// Write to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn output(&self) -> &OutputArgs {
        match self {
            Self::Prob(a) => &a.output,
            Self::Mapdist(a) => &a.output,
            Self::Attack(a) => &a.output,
            Self::Params(a) => &a.output,
        }
    }

    pub fn output_mut(&mut self) -> &mut OutputArgs {
        match self {
            Self::Prob(a) => &mut a.output,
            Self::Mapdist(a) => &mut a.output,
            Self::Attack(a) => &mut a.output,
            Self::Params(a) => &mut a.output,
        }
    }

    /// Extracts a config from a bare config file, a JSON artifact with a
    /// `config` field, or a CSV artifact whose first line is `# config: {...}`.
    pub fn from_artifact_text(text: &str) -> Result<Self, CliError> {
        if let Some(line) = text.lines().next() {
            if let Some(json) = line.strip_prefix(CONFIG_PREFIX) {
                return Ok(serde_json::from_str(json)?);
            }
        }
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("config") {
            Some(cfg) => Ok(serde_json::from_value(cfg.clone())?),
            None => Ok(serde_json::from_value(value)?),
        }
    }
}

pub const CONFIG_PREFIX: &str = "# config: ";

pub fn parse_int_list(text: &str) -> Result<Vec<i64>, String> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<i64>()
                .map_err(|e| format!("bad integer {t:?}: {e}"))
        })
        .collect()
}

pub fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
