use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Flags shared by every subcommand. Any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON config file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// White-noise visibility of the simulated state, in [0, 1]
    #[arg(long, global = true, value_name = "V")]
    pub visibility: Option<f64>,
    /// Monte Carlo trials for error bars
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<usize>,
    /// Coincidence rate in counts per second
    #[arg(long, global = true, value_name = "R")]
    pub rate: Option<f64>,
    /// Integration time per setting in seconds
    #[arg(long, global = true, value_name = "T")]
    pub time: Option<f64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Leave the generation time out of reports
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    visibility: Option<f64>,
    rate: Option<f64>,
    integration_time: Option<f64>,
    monte_carlo_trials: Option<usize>,
    out: Option<PathBuf>,
    no_timestamp: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub visibility: f64,
    pub rate: f64,
    pub integration_time: f64,
    pub monte_carlo_trials: usize,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub timestamp: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            visibility: 1.0,
            rate: 0.66,
            integration_time: 1800.0,
            monte_carlo_trials: 1000,
            out: PathBuf::from("results"),
            timestamp: true,
        }
    }
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => load(path)?,
            None => ConfigFile::default(),
        };
        let d = RunConfig::default();
        let cfg = RunConfig {
            seed: args.seed.or(file.seed).unwrap_or(d.seed),
            visibility: args.visibility.or(file.visibility).unwrap_or(d.visibility),
            rate: args.rate.or(file.rate).unwrap_or(d.rate),
            integration_time: args
                .time
                .or(file.integration_time)
                .unwrap_or(d.integration_time),
            monte_carlo_trials: args
                .trials
                .or(file.monte_carlo_trials)
                .unwrap_or(d.monte_carlo_trials),
            out: args.out.clone().or(file.out).unwrap_or(d.out),
            timestamp: !(args.no_timestamp || file.no_timestamp.unwrap_or(false)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !(0.0..=1.0).contains(&self.visibility) {
            bail!("visibility {} is outside [0, 1]", self.visibility);
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            bail!("rate {} must be positive", self.rate);
        }
        if !(self.integration_time > 0.0 && self.integration_time.is_finite()) {
            bail!(
                "integration time {} must be positive",
                self.integration_time
            );
        }
        if self.monte_carlo_trials == 0 {
            bail!("at least one Monte Carlo trial is needed");
        }
        Ok(())
    }
}

fn load(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("could not read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}
