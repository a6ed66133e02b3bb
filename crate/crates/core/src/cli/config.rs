//! Flag parsing and config resolution.
//!
//! Precedence is flags, then the JSON file given by `--config`, then
//! built-in defaults. The seed additionally falls back to the
//! `OTA_INVERSE_SEED` environment variable before its default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{DofMode, Fading};
use crate::experiments::DEFAULT_GRID;
use crate::models::ModelKind;

pub const SEED_ENV: &str = "OTA_INVERSE_SEED";
pub const DEFAULT_SEED: u64 = 7;
const ANALYSIS_GRID: [usize; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Debug, Parser)]
#[command(name = "ota-inverse", version, about = "Inverse solvability and security of over-the-air FL models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo estimate of the expected condition number
    Estimate(Flags),
    /// Compare estimates with the closed-form solvability bound
    Solvability(Flags),
    /// Compare legitimate and eavesdropper condition numbers
    Security(Flags),
    /// Legitimate vs. eavesdropper sweep over the number of users
    Fig1(Flags),
    /// Empirical vs. exact approximation-error probability
    Concentration(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Solvability(_) => "solvability",
            Command::Security(_) => "security",
            Command::Fig1(_) => "fig1",
            Command::Concentration(_) => "concentration",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Estimate(f)
            | Command::Solvability(f)
            | Command::Security(f)
            | Command::Fig1(f)
            | Command::Concentration(f) => f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Shared,
    PerUser,
}

impl ModelArg {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelArg::Shared => ModelKind::SharedA,
            ModelArg::PerUser => ModelKind::PerUserB,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingArg {
    Identity,
    Gaussian,
}

impl From<FadingArg> for Fading {
    fn from(f: FadingArg) -> Self {
        match f {
            FadingArg::Identity => Fading::Identity,
            FadingArg::Gaussian => Fading::Gaussian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofArg {
    PaperD,
    PhysicalS,
}

impl From<DofArg> for DofMode {
    fn from(d: DofArg) -> Self {
        match d {
            DofArg::PaperD => DofMode::PaperD,
            DofArg::PhysicalS => DofMode::PhysicalS,
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// JSON file with defaults for any of the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum)]
    pub fading: Option<FadingArg>,
    /// Parameter-vector length
    #[arg(long)]
    pub d: Option<usize>,
    /// Receiver endpoints
    #[arg(long)]
    pub s: Option<usize>,
    /// Single user count
    #[arg(long = "M", conflicts_with = "m_grid")]
    pub m: Option<usize>,
    /// Comma-separated user counts
    #[arg(long = "M-grid")]
    pub m_grid: Option<String>,
    /// Power coefficients: one value for all users or a comma list
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    #[arg(long = "sigma-gamma", allow_hyphen_values = true)]
    pub sigma_gamma: Option<f64>,
    /// Sparsification threshold
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV files
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub dof: Option<DofArg>,
    /// CSV with one user's update per row
    #[arg(long = "grads-file")]
    pub grads_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumberOrList<T> {
    One(T),
    Many(Vec<T>),
    Text(String),
}

/// Contents of a `--config` file. Keys mirror the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<ModelArg>,
    fading: Option<FadingArg>,
    d: Option<usize>,
    s: Option<usize>,
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "M_grid")]
    m_grid: Option<NumberOrList<usize>>,
    alphas: Option<NumberOrList<f64>>,
    sigma_gamma: Option<f64>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dof: Option<DofArg>,
    grads_file: Option<PathBuf>,
}

/// Fully resolved and validated settings for one subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub model: ModelArg,
    pub fading: FadingArg,
    pub d: usize,
    pub s: usize,
    pub grid: Vec<usize>,
    pub alphas: Vec<f64>,
    pub sigma_gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub dof: DofArg,
    pub grads_file: Option<PathBuf>,
}

struct Defaults {
    dims: Option<(usize, usize)>,
    grid: &'static [usize],
    trials: usize,
    dof: DofArg,
}

fn defaults_for(subcommand: &str) -> Defaults {
    match subcommand {
        "estimate" => Defaults {
            dims: None,
            grid: &ANALYSIS_GRID,
            trials: 200,
            dof: DofArg::PaperD,
        },
        "fig1" => Defaults {
            dims: Some((100, 25)),
            grid: &DEFAULT_GRID,
            trials: 10,
            dof: DofArg::PaperD,
        },
        "concentration" => Defaults {
            dims: Some((100, 50)),
            grid: &DEFAULT_GRID,
            trials: 2000,
            dof: DofArg::PaperD,
        },
        _ => Defaults {
            dims: Some((100, 25)),
            grid: &ANALYSIS_GRID,
            trials: 200,
            dof: DofArg::PaperD,
        },
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str, errors: &mut Vec<String>) -> Option<Vec<T>> {
    let parsed: Result<Vec<T>, _> = text.split(',').map(|t| t.trim().parse::<T>()).collect();
    match parsed {
        Ok(v) if !v.is_empty() => Some(v),
        _ => {
            errors.push(format!("{what}: cannot parse {text:?} as a comma-separated list"));
            None
        }
    }
}

fn list_from_file<T: std::str::FromStr>(v: NumberOrList<T>, what: &str, errors: &mut Vec<String>) -> Option<Vec<T>> {
    match v {
        NumberOrList::One(x) => Some(vec![x]),
        NumberOrList::Many(xs) => Some(xs),
        NumberOrList::Text(t) => parse_list(&t, what, errors),
    }
}

fn load_file(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("--config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("--config {}: {e}", path.display()))
}

impl RunConfig {
    /// Merges flags, config file, environment seed and defaults, then
    /// validates. All problems are reported together.
    pub fn resolve(command: &Command, env_seed: Option<&str>) -> Result<Self, Vec<String>> {
        let name = command.name();
        let flags = command.flags();
        let defaults = defaults_for(name);
        let mut errors = Vec::new();

        let file = match &flags.config {
            Some(path) => load_file(path).unwrap_or_else(|e| {
                errors.push(e);
                FileConfig::default()
            }),
            None => FileConfig::default(),
        };

        let mut dim = |flag: Option<usize>, file: Option<usize>, default: Option<usize>, name: &str| {
            match flag.or(file).or(default) {
                Some(0) => {
                    errors.push(format!("--{name} must be at least 1"));
                    0
                }
                Some(v) => v,
                None => {
                    errors.push(format!("missing required flag --{name}"));
                    0
                }
            }
        };
        let d = dim(flags.d, file.d, defaults.dims.map(|x| x.0), "d");
        let s = dim(flags.s, file.s, defaults.dims.map(|x| x.1), "s");

        let grid = if let Some(m) = flags.m {
            Some(vec![m])
        } else if let Some(g) = &flags.m_grid {
            parse_list(g, "--M-grid", &mut errors)
        } else if let Some(m) = file.m {
            Some(vec![m])
        } else if let Some(g) = file.m_grid {
            list_from_file(g, "M_grid", &mut errors)
        } else {
            Some(defaults.grid.to_vec())
        };
        let grid = grid.unwrap_or_default();
        if !grid.is_empty() && (grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1])) {
            errors.push(format!("user counts must be positive and strictly increasing, got {grid:?}"));
        }

        let alphas = match (&flags.alphas, file.alphas) {
            (Some(a), _) => parse_list(a, "--alphas", &mut errors),
            (None, Some(a)) => list_from_file(a, "alphas", &mut errors),
            (None, None) => Some(vec![1.0]),
        }
        .unwrap_or_default();
        if alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            errors.push(format!("--alphas must all be positive, got {alphas:?}"));
        }
        if alphas.len() > 1 && grid.iter().any(|&m| m != alphas.len()) {
            errors.push(format!(
                "--alphas lists {} values but the user counts are {grid:?}; give one value or one per user",
                alphas.len()
            ));
        }

        let sigma_gamma = flags.sigma_gamma.or(file.sigma_gamma).unwrap_or(0.1);
        if !(sigma_gamma >= 0.0) || !sigma_gamma.is_finite() {
            errors.push(format!("--sigma-gamma must be >= 0, got {sigma_gamma}"));
        }
        let delta = flags.delta.or(file.delta).unwrap_or(0.1);
        if !(delta > 0.0) || !delta.is_finite() {
            errors.push(format!("--delta must be positive, got {delta}"));
        }
        let epsilon = flags.epsilon.or(file.epsilon).unwrap_or(2.0);
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            errors.push(format!("--epsilon must be positive, got {epsilon}"));
        }
        let trials = flags.trials.or(file.trials).unwrap_or(defaults.trials);
        let min_trials = if name == "concentration" { 1 } else { 2 };
        if trials < min_trials {
            errors.push(format!("--trials must be at least {min_trials}, got {trials}"));
        }

        let seed = match (flags.seed.or(file.seed), env_seed) {
            (Some(seed), _) => seed,
            (None, Some(text)) => text.trim().parse().unwrap_or_else(|_| {
                errors.push(format!("{SEED_ENV}={text:?} is not an unsigned 64-bit integer"));
                0
            }),
            (None, None) => DEFAULT_SEED,
        };

        let model = flags.model.or(file.model).unwrap_or(ModelArg::PerUser);
        if d > 0 && s > 0 {
            if model == ModelArg::PerUser && s > d && name != "fig1" {
                errors.push(format!("per-user model needs s <= d, got s = {s}, d = {d}"));
            }
            if name == "fig1" && s > d {
                errors.push(format!("fig1 needs s <= d, got s = {s}, d = {d}"));
            }
            if name == "concentration" && s > d {
                errors.push(format!("concentration needs s <= d, got s = {s}, d = {d}"));
            }
            if let Some(&m) = grid.first() {
                if s > m * d {
                    errors.push(format!("s = {s} exceeds M*d = {} at M = {m}", m * d));
                }
            }
        }

        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(Self {
            subcommand: name,
            model,
            fading: flags.fading.or(file.fading).unwrap_or(FadingArg::Gaussian),
            d,
            s,
            grid,
            alphas,
            sigma_gamma,
            delta,
            epsilon,
            trials,
            seed,
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            dof: flags.dof.or(file.dof).unwrap_or(defaults.dof),
            grads_file: flags.grads_file.clone().or(file.grads_file),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        let mut full = vec!["ota-inverse"];
        full.extend_from_slice(args);
        Cli::try_parse_from(full).unwrap().command
    }

    #[test]
    fn missing_dims_listed_together() {
        let cmd = parse(&["estimate", "--M", "4"]);
        let errs = RunConfig::resolve(&cmd, None).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("--d")));
        assert!(errs.iter().any(|e| e.contains("--s")));
    }

    #[test]
    fn zero_s_rejected() {
        let cmd = parse(&["estimate", "--d", "100", "--s", "0"]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
    }

    #[test]
    fn desk_defaults() {
        let cfg = RunConfig::resolve(&parse(&["fig1"]), None).unwrap();
        assert_eq!((cfg.d, cfg.s, cfg.trials), (100, 25, 10));
        assert_eq!(cfg.grid, DEFAULT_GRID.to_vec());
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn seed_precedence() {
        let cmd = parse(&["fig1", "--seed", "3"]);
        assert_eq!(RunConfig::resolve(&cmd, Some("9")).unwrap().seed, 3);
        let cmd = parse(&["fig1"]);
        assert_eq!(RunConfig::resolve(&cmd, Some("9")).unwrap().seed, 9);
        assert!(RunConfig::resolve(&cmd, Some("nine")).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"d": 64, "s": 8, "M_grid": [1, 3], "alphas": 2.0, "seed": 11, "model": "shared", "dof": "physical-s"}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = RunConfig::resolve(&parse(&["solvability", "--config", p, "--s", "4"]), Some("5")).unwrap();
        assert_eq!((cfg.d, cfg.s), (64, 4));
        assert_eq!(cfg.grid, vec![1, 3]);
        assert_eq!(cfg.alphas, vec![2.0]);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.model, ModelArg::Shared);
        assert_eq!(cfg.dof, DofArg::PhysicalS);
    }

    #[test]
    fn unknown_file_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"dd": 64}"#).unwrap();
        let cmd = parse(&["fig1", "--config", path.to_str().unwrap()]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
    }

    #[test]
    fn grid_and_alpha_checks() {
        let cmd = parse(&["solvability", "--M-grid", "4,2"]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
        let cmd = parse(&["solvability", "--M-grid", "1,x"]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
        let cmd = parse(&["solvability", "--M", "3", "--alphas", "1,2,3"]);
        assert_eq!(RunConfig::resolve(&cmd, None).unwrap().alphas, vec![1.0, 2.0, 3.0]);
        let cmd = parse(&["solvability", "--M-grid", "1,3", "--alphas", "1,2,3"]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
        let cmd = parse(&["solvability", "--alphas", "-1"]);
        assert!(RunConfig::resolve(&cmd, None).is_err());
    }

    #[test]
    fn several_errors_are_aggregated() {
        let cmd = parse(&["estimate", "--s", "0", "--delta", "-1", "--trials", "1"]);
        let errs = RunConfig::resolve(&cmd, None).unwrap_err();
        assert!(errs.len() >= 4, "{errs:?}");
    }
}
