//! Run configuration: a TOML file with one table per section, dotted
//! command-line overrides and the `RQ_SEED` environment variable.

use std::path::{Path, PathBuf};

use rq_core::agent::{Hyperparams, NetConfig};
use rq_core::env::{EnvConfig, RewardCoeffs, TaskConfig};
use rq_core::eval::PerturbGrid;
use rq_core::sim::QuadParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "RQ_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sim: QuadParams,
    pub task: TaskConfig,
    pub reward: RewardCoeffs,
    pub hp: Hyperparams,
    pub net: NetConfig,
    pub grid: PerturbGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs"),
            sim: QuadParams::default(),
            task: TaskConfig::default(),
            reward: RewardCoeffs::default(),
            hp: Hyperparams::default(),
            net: NetConfig::default(),
            grid: PerturbGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            quad: self.sim.clone(),
            task: self.task.clone(),
            reward: self.reward.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env().validate()?;
        self.hp.validate()?;
        self.net.validate()?;
        self.grid.validate()?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::Config("output_dir: must not be empty".into()));
        }
        Ok(())
    }

    /// Resolved snapshot; parsing it back yields the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration is always representable in TOML")
    }
}

/// Parses a command-line value as a TOML literal, falling back to a bare
/// string (so `--hp.algorithm ddpg` needs no quotes).
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("{key}: malformed key")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Builds the configuration: defaults, then the file, then `RQ_SEED`, then
/// the overrides in order.
pub fn resolve(
    file: Option<&Path>,
    env_seed: Option<&str>,
    overrides: &[(String, String)],
) -> Result<RunConfig> {
    let (mut table, origin) = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let table = text
                .parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (table, path.display().to_string())
        }
        None => (toml::Table::new(), "defaults".to_owned()),
    };
    if let Some(seed) = env_seed {
        let seed: i64 = seed.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{SEED_ENV}: `{seed}` is not a non-negative integer"
            ))
        })?;
        set_dotted(&mut table, "seed", toml::Value::Integer(seed))?;
    }
    for (k, v) in overrides {
        set_dotted(&mut table, k, parse_value(v))?;
    }
    let cfg: RunConfig = RunConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Config(format!("{origin}: {}", e.to_string().trim())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// `(dotted key, raw value)` pairs.
pub type Overrides = Vec<(String, String)>;

/// Splits `--section.key value` and `--section.key=value` pairs out of the
/// argument list; everything else is returned for the regular parser.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_owned())),
            None => (body, None),
        };
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::Config(format!("--{key}: missing value")))?,
        };
        overrides.push((key.to_owned(), value));
    }
    Ok((rest, overrides))
}
