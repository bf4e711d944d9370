use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use respoles::dispersion::SystemParams;
use respoles::poles::ContourBox;
use respoles::stability::{critical_coupling, StabilityMode};

#[derive(Debug, Parser)]
#[command(
    name = "respoles",
    version,
    about = "Resonance poles and order-parameter decay of the delayed Kuramoto linearization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Locate resonance poles in a region
    Poles,
    /// Print the critical coupling k_c(tau)
    Kc,
    /// Stability verdicts on a (tau, k) grid
    StabilityMap,
    /// Time-domain simulation of r(t)
    Simulate,
    /// Simulation against the residue expansion
    Compare,
    /// Residue expansion of r(t)
    Expansion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every flag is optional so that a config file can fill the gaps.
#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Flags {
    /// Coupling: a number, or a multiple of k_c such as 0.8kc
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Delay, e.g. 2 or pi/2
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Mean frequency, e.g. pi/2
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega0: Option<String>,
    /// Gaussian concentration (variance 1/(2h))
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Search box re_min:re_max:im_min:im_max
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Lambert branch range n_lo:n_hi
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub branches: Option<String>,
    /// Gauss-Hermite node count
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Steps per delay
    #[arg(long = "dt-divisor", global = true)]
    pub dt_divisor: Option<usize>,
    /// End time
    #[arg(long = "T", global = true)]
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    /// Output file (standard output when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all processors)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON file with any of these flags; command-line flags win
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Delay grid lo:hi:count for stability-map
    #[arg(long = "tau-grid", global = true)]
    pub tau_grid: Option<String>,
    /// Coupling grid lo:hi:count for stability-map
    #[arg(long = "k-grid", global = true, allow_hyphen_values = true)]
    pub k_grid: Option<String>,
    /// Stability classifier: closed_form, nishi or lambert
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Number of poles kept in the expansion
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Start of the comparison window (default 2 tau)
    #[arg(long = "window-start", global = true)]
    pub window_start: Option<f64>,
}

impl Flags {
    /// Fills unset flags from `other`.
    fn or(self, other: Flags) -> Flags {
        Flags {
            k: self.k.or(other.k),
            tau: self.tau.or(other.tau),
            omega0: self.omega0.or(other.omega0),
            h: self.h.or(other.h),
            region: self.region.or(other.region),
            branches: self.branches.or(other.branches),
            nodes: self.nodes.or(other.nodes),
            dt_divisor: self.dt_divisor.or(other.dt_divisor),
            t_end: self.t_end.or(other.t_end),
            out: self.out.or(other.out),
            format: self.format.or(other.format),
            jobs: self.jobs.or(other.jobs),
            config: self.config,
            tau_grid: self.tau_grid.or(other.tau_grid),
            k_grid: self.k_grid.or(other.k_grid),
            mode: self.mode.or(other.mode),
            modes: self.modes.or(other.modes),
            window_start: self.window_start.or(other.window_start),
        }
    }
}

/// Config file values may be written as JSON numbers or strings.
fn load_config(path: &Path) -> Result<Flags> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(map) = value.as_object_mut() {
        for key in [
            "k", "tau", "omega0", "region", "branches", "tau-grid", "k-grid", "mode",
        ] {
            if let Some(v) = map.get_mut(key) {
                if v.is_number() {
                    *v = serde_json::Value::String(v.to_string());
                }
            }
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

/// Parses `x`, `pi`, `3pi/4`, `2*pi`, `-pi/2` and the like.
pub fn parse_scalar(s: &str) -> Result<f64> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    let mut v = parse_term(num)?;
    if let Some(d) = den {
        v /= parse_term(d)?;
    }
    if !v.is_finite() {
        bail!("'{s}' is not a finite number");
    }
    Ok(v)
}

fn parse_term(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(coef) = s.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*').trim();
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c
                .parse::<f64>()
                .map_err(|_| anyhow!("cannot parse '{s}'"))?,
        };
        return Ok(c * PI);
    }
    s.parse::<f64>()
        .map_err(|_| anyhow!("cannot parse '{s}' as a number"))
}

/// Resolves `--k`, which may be relative to the critical coupling.
pub fn parse_k(s: &str, tau: f64, omega0: f64) -> Result<f64> {
    let s = s.trim();
    if let Some(factor) = s.strip_suffix("kc") {
        let factor = factor.trim().trim_end_matches('*').trim();
        let f = match factor {
            "" | "+" => 1.0,
            "-" => -1.0,
            f => parse_scalar(f)?,
        };
        return Ok(f * critical_coupling(tau, omega0)?);
    }
    parse_scalar(s)
}

fn split_fields(s: &str, n: usize, what: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = s.split(':').map(str::to_string).collect();
    if parts.len() != n {
        bail!("{what} expects {n} colon-separated fields, got '{s}'");
    }
    Ok(parts)
}

pub fn parse_region(s: &str) -> Result<ContourBox> {
    let f = split_fields(s, 4, "--region")?;
    let v: Vec<f64> = f.iter().map(|x| parse_scalar(x)).collect::<Result<_>>()?;
    Ok(ContourBox::new(v[0], v[1], v[2], v[3])?)
}

pub fn parse_branches(s: &str) -> Result<(i32, i32)> {
    let f = split_fields(s, 2, "--branches")?;
    let lo: i32 = f[0]
        .trim()
        .parse()
        .with_context(|| format!("bad branch '{}'", f[0]))?;
    let hi: i32 = f[1]
        .trim()
        .parse()
        .with_context(|| format!("bad branch '{}'", f[1]))?;
    if lo > hi {
        bail!("--branches needs n_lo <= n_hi, got {lo}:{hi}");
    }
    Ok((lo, hi))
}

pub fn parse_grid(s: &str, what: &str) -> Result<(f64, f64, usize)> {
    let f = split_fields(s, 3, what)?;
    let lo = parse_scalar(&f[0])?;
    let hi = parse_scalar(&f[1])?;
    let n: usize = f[2]
        .trim()
        .parse()
        .with_context(|| format!("bad count '{}'", f[2]))?;
    if n == 0 {
        bail!("{what} needs at least one point");
    }
    Ok((lo, hi, n))
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub params: SystemParams,
    /// The `--k` text as given, recorded next to the resolved value.
    pub k_input: String,
    pub region: Option<ContourBox>,
    pub branches: Option<(i32, i32)>,
    pub nodes: usize,
    pub dt_divisor: usize,
    pub t_end: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub tau_grid: (f64, f64, usize),
    pub k_grid: (f64, f64, usize),
    pub mode: StabilityMode,
    pub modes: usize,
    pub window_start: Option<f64>,
}

pub const DEFAULT_TAU: f64 = 2.0;
pub const DEFAULT_OMEGA0: f64 = PI / 2.0;
pub const DEFAULT_H: f64 = 50.0;
pub const DEFAULT_NODES: usize = 400;
pub const DEFAULT_DT_DIVISOR: usize = 64;
pub const DEFAULT_MODES: usize = 8;

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let mut flags = cli.flags;
        if let Some(path) = flags.config.clone() {
            flags = flags.or(load_config(&path)?);
        }
        let command = cli.command;
        let tau = flags
            .tau
            .as_deref()
            .map(parse_scalar)
            .transpose()?
            .unwrap_or(DEFAULT_TAU);
        let omega0 = flags
            .omega0
            .as_deref()
            .map(parse_scalar)
            .transpose()?
            .unwrap_or(DEFAULT_OMEGA0);
        let h = flags.h.unwrap_or(DEFAULT_H);
        let needs_k = matches!(
            command,
            Command::Poles | Command::Simulate | Command::Compare | Command::Expansion
        );
        let k_input = match (&flags.k, needs_k) {
            (Some(k), _) => k.clone(),
            (None, true) => bail!("this command requires --k"),
            (None, false) => "0".to_string(),
        };
        let k = if needs_k {
            parse_k(&k_input, tau, omega0)?
        } else {
            0.0
        };
        let params = SystemParams::new(k, tau, omega0, h)?;

        let region = flags.region.as_deref().map(parse_region).transpose()?;
        let branches = flags.branches.as_deref().map(parse_branches).transpose()?;
        if command == Command::Poles && region.is_none() && branches.is_none() {
            bail!("poles requires --region or --branches");
        }
        let mode = match flags.mode.as_deref() {
            Some(m) => m.parse::<StabilityMode>()?,
            None => StabilityMode::Nishi,
        };
        let tau_grid = match flags.tau_grid.as_deref() {
            Some(s) => parse_grid(s, "--tau-grid")?,
            None => (0.1, 6.0, 200),
        };
        let k_grid = match flags.k_grid.as_deref() {
            Some(s) => parse_grid(s, "--k-grid")?,
            None => (-3.0, 3.0, 200),
        };
        if let Some(t) = flags.t_end {
            if !(t > 0.0 && t.is_finite()) {
                bail!("--T must be positive, got {t}");
            }
        }
        if flags.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        let modes = flags.modes.unwrap_or(DEFAULT_MODES);
        if modes == 0 {
            bail!("--modes must be at least 1");
        }
        Ok(RunConfig {
            command,
            params,
            k_input,
            region,
            branches,
            nodes: flags.nodes.unwrap_or(DEFAULT_NODES),
            dt_divisor: flags.dt_divisor.unwrap_or(DEFAULT_DT_DIVISOR),
            t_end: flags.t_end,
            out: flags.out,
            format: flags.format.unwrap_or(Format::Csv),
            jobs: flags.jobs,
            tau_grid,
            k_grid,
            mode,
            modes,
            window_start: flags.window_start,
        })
    }
}
