//! Run configuration: TOML files plus dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordination::{Algo, NetworkConfig};
use crate::envs::{EnvConfig, ENV_NAMES};
use crate::error::{McgError, Result};
use crate::graph::TopologyKind;
use crate::mcg::MetaPathConfig;
use crate::numerics::Activation;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McgSection {
    pub length: usize,
    pub channels: usize,
    pub edge_threshold: f64,
    pub bypass: bool,
    pub activation: Activation,
    /// Static input graphs when the environment supplies none.
    pub topologies: Vec<TopologyKind>,
}

impl Default for McgSection {
    fn default() -> Self {
        let d = MetaPathConfig::default();
        McgSection {
            length: d.length,
            channels: d.channels,
            edge_threshold: d.edge_threshold,
            bypass: false,
            activation: Activation::Relu,
            topologies: vec![TopologyKind::Full, TopologyKind::Cycle],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub embed_dim: usize,
    pub hidden: usize,
    /// Coordination graph used by DCG.
    pub dcg_topology: TopologyKind,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            embed_dim: 32,
            hidden: 32,
            dcg_topology: TopologyKind::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub algo: Option<Algo>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub mcg: McgSection,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_run_id() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: default_run_id(),
            algo: None,
            seeds: default_seeds(),
            out: default_out(),
            env: EnvConfig::default(),
            network: NetworkSection::default(),
            mcg: McgSection::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML text, applies `key=value` overrides, then validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| McgError::Config(format!("invalid config: {}", e.message())))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| McgError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| McgError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| McgError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        match self.env.name.as_deref() {
            None => return Err(McgError::Config("missing key `env.name`".into())),
            Some(n) if !ENV_NAMES.contains(&n) => {
                return Err(McgError::Config(format!(
                    "unknown value `{n}` for key `env.name` (expected one of {})",
                    ENV_NAMES.join(", ")
                )))
            }
            _ => {}
        }
        if self.algo.is_none() {
            return Err(McgError::Config("missing key `algo`".into()));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return Err(McgError::Config("`run_id` must be a plain directory name".into()));
        }
        if self.seeds.is_empty() {
            return Err(McgError::Config("`seeds` must not be empty".into()));
        }
        if self.network.embed_dim == 0 || self.network.hidden == 0 {
            return Err(McgError::Config("`network.embed_dim` and `network.hidden` must be positive".into()));
        }
        if self.mcg.topologies.is_empty() {
            return Err(McgError::Config("`mcg.topologies` must not be empty".into()));
        }
        self.meta_path().validate()?;
        self.train.validate()
    }

    pub fn algo(&self) -> Algo {
        self.algo.expect("validated config has an algo")
    }

    pub fn env_name(&self) -> &str {
        self.env.name.as_deref().expect("validated config has an env name")
    }

    pub fn meta_path(&self) -> MetaPathConfig {
        MetaPathConfig {
            length: self.mcg.length,
            channels: self.mcg.channels,
            edge_threshold: self.mcg.edge_threshold,
        }
    }

    /// Network settings; agent, action and observation sizes are filled in
    /// from the environment when training starts.
    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            algo: self.algo(),
            n_agents: 0,
            n_actions: 0,
            obs_dim: 0,
            embed_dim: self.network.embed_dim,
            hidden: self.network.hidden,
            mcg: self.meta_path(),
            mcg_bypass: self.mcg.bypass,
            activation: self.mcg.activation,
            topologies: self.mcg.topologies.clone(),
            dynamic_layers: None,
            dcg_topology: self.network.dcg_topology,
        }
    }
}

/// Parses a comma-separated seed list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Result<Vec<u64>> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| McgError::Config(format!("invalid seed `{t}`")))
        })
        .collect();
    let seeds = seeds?;
    if seeds.is_empty() {
        return Err(McgError::Config("empty seed list".into()));
    }
    Ok(seeds)
}

/// Sets a dotted key, creating intermediate tables. The value is read as a
/// TOML literal, falling back to a bare string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| McgError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(McgError::Config(format!("invalid override key `{key}`")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = root;
    for (depth, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| McgError::Config(format!("key `{}` is not a table", parts[..depth].join("."))))?;
        if depth + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("key has at least one part")
}
