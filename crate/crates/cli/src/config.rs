use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use homext::energy::EnergyParams;
use homext::snowflake::{ChoiceOracle, Letter, SnowflakeSpec};
use homext::MonotoneMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Build the dyadic extension mesh and draw source and image.
    Extend,
    /// Weighted energy of the extension, per generation.
    Energy,
    /// Snowflake curve with Hölder and quasisymmetry measurements.
    Snowflake,
    /// Run every property suite and report pass/fail.
    Verify,
    /// Term-by-term series bound.
    Bound,
}

#[derive(Debug, Parser)]
#[command(name = "homext", version, about = "Dyadic extensions, weighted energies and snowflake curves")]
pub struct Cli {
    pub command: Option<Command>,
    /// JSON file holding a full run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mesh depth J; the generation for `snowflake`.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Energy exponent p; the snowflake parameter for `snowflake`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Weight exponent β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Emit log lines as JSON.
    #[arg(long)]
    pub json_logs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub p: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnowflakeConfig {
    pub p: f64,
    #[serde(default = "default_oracle")]
    pub oracle: ChoiceOracle,
    #[serde(default = "default_generation")]
    pub generation: usize,
    #[serde(default)]
    pub straight_letters: Option<[Letter; 4]>,
}

fn default_oracle() -> ChoiceOracle {
    ChoiceOracle::AllBump
}

fn default_generation() -> usize {
    5
}

impl Default for SnowflakeConfig {
    fn default() -> Self {
        SnowflakeConfig {
            p: 1.0 / 3.0,
            oracle: default_oracle(),
            generation: default_generation(),
            straight_letters: None,
        }
    }
}

/// A run configuration as read from JSON; every field but `command` has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_phi")]
    pub phi: MonotoneMap,
    #[serde(default = "default_energy")]
    pub energy: EnergyConfig,
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default)]
    pub snowflake: SnowflakeConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_phi() -> MonotoneMap {
    MonotoneMap::identity()
}

fn default_energy() -> EnergyConfig {
    EnergyConfig { p: 1.0, beta: 0.5 }
}

fn default_depth() -> u32 {
    8
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            phi: default_phi(),
            energy: default_energy(),
            depth: default_depth(),
            snowflake: SnowflakeConfig::default(),
            out: None,
            seed: 0,
        }
    }
}

/// Largest accepted mesh depth; `2^J` cells per generation are kept in memory.
pub const MAX_DEPTH: u32 = 20;
/// Largest accepted snowflake generation; the state JSON grows like `4^n`.
pub const MAX_GENERATION: usize = 8;

/// A configuration that passed every range check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub command: Command,
    pub phi: MonotoneMap,
    pub energy: EnergyParams,
    pub depth: u32,
    pub snowflake: SnowflakeSpec,
    pub generation: usize,
    pub out: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl Cli {
    /// Merges the config file (if any) with the flags, flags taking
    /// precedence, and validates the result.
    pub fn resolve(&self) -> Result<ValidatedConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = self.command {
            cfg.command = Some(c);
        }
        let command = cfg.command.ok_or_else(|| ConfigError("no command given".into()))?;
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if command == Command::Snowflake {
            if let Some(p) = self.p {
                cfg.snowflake.p = p;
            }
            if let Some(d) = self.depth {
                cfg.snowflake.generation = d as usize;
            }
        } else {
            if let Some(p) = self.p {
                cfg.energy.p = p;
            }
            if let Some(d) = self.depth {
                cfg.depth = d;
            }
        }
        if let Some(beta) = self.beta {
            cfg.energy.beta = beta;
        }
        cfg.command = Some(command);
        validate(cfg)
    }
}

pub fn validate(cfg: RunConfig) -> Result<ValidatedConfig, ConfigError> {
    let command = cfg.command.ok_or_else(|| ConfigError("no command given".into()))?;
    cfg.phi.validate().map_err(invalid)?;
    let energy = EnergyParams::new(cfg.energy.p, cfg.energy.beta).map_err(invalid)?;
    if cfg.depth > MAX_DEPTH {
        return Err(ConfigError(format!("depth {} above {MAX_DEPTH}", cfg.depth)));
    }
    if cfg.snowflake.generation > MAX_GENERATION {
        return Err(ConfigError(format!(
            "snowflake generation {} above {MAX_GENERATION}",
            cfg.snowflake.generation
        )));
    }
    let mut spec = SnowflakeSpec::new(cfg.snowflake.p, cfg.snowflake.oracle).map_err(invalid)?;
    if let Some(letters) = cfg.snowflake.straight_letters {
        spec.straight_letters = letters;
        spec.validate().map_err(invalid)?;
    }
    let out = cfg
        .out
        .unwrap_or_else(|| PathBuf::from("homext-out").join(format!("{command:?}").to_lowercase()));
    Ok(ValidatedConfig {
        command,
        phi: cfg.phi,
        energy,
        depth: cfg.depth,
        snowflake: spec,
        generation: cfg.snowflake.generation,
        out,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("homext").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_fill_defaults() {
        let v = cli(&["energy", "--p", "1.5", "--beta", "0.3", "--depth", "6"]).resolve().unwrap();
        assert_eq!((v.energy.p(), v.energy.beta(), v.depth), (1.5, 0.3, 6));
        assert_eq!(v.phi, MonotoneMap::identity());
    }

    #[test]
    fn snowflake_flags_target_the_curve() {
        let v = cli(&["snowflake", "--p", "0.3", "--depth", "4"]).resolve().unwrap();
        assert_eq!((v.snowflake.p, v.generation), (0.3, 4));
        assert_eq!(v.energy.p(), 1.0);
    }

    #[test]
    fn ranges_enforced() {
        assert!(cli(&["energy", "--p", "2"]).resolve().is_err());
        assert!(cli(&["energy", "--p", "1.9", "--beta", "0.6"]).resolve().is_err());
        assert!(cli(&["snowflake", "--p", "0.5"]).resolve().is_err());
        assert!(cli(&["snowflake", "--p", "0.2"]).resolve().is_err());
        assert!(cli(&["extend", "--depth", "40"]).resolve().is_err());
        assert!(cli(&[]).resolve().is_err());
    }

    #[test]
    fn config_json_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"command":"snowflake","phi":{"type":"cantor","params":{"theta":0.25}},
                "snowflake":{"p":0.3,"oracle":{"kind":"seeded","seed":4,"bump_probability":0.5}}}"#,
        )
        .unwrap();
        let v = validate(cfg).unwrap();
        assert_eq!(v.command, Command::Snowflake);
        assert_eq!(v.generation, 5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }
}
