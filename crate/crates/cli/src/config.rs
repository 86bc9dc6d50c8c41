//! JSON configuration files, one shape per subcommand.
//!
//! Every file carries `schema_version` and rejects unknown fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rucb_core::harness::{default_b_grid, default_lineup, ProtocolConfig, DEFAULT_FRACTIONS};
use rucb_core::simenv::{ClusterSpec, CorpusSpec};
use rucb_core::{PolicySpec, RiskConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub corpus: CorpusSpec,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            schema_version: SCHEMA_VERSION,
            corpus: CorpusSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub schema_version: u32,
    /// Corpus directory, relative to the config file.
    pub corpus: PathBuf,
    pub policy: PolicySpec,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub risk: Option<RiskConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_replications() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareFile {
    pub schema_version: u32,
    pub corpus: PathBuf,
    #[serde(default = "default_lineup")]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub risk: Option<RiskConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBFile {
    pub schema_version: u32,
    #[serde(default)]
    pub clusters: ClusterSpec,
    #[serde(default = "default_b_grid")]
    pub grid: Vec<f64>,
}

fn default_eps_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn default_tolerance() -> f64 {
    0.005
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEpsFile {
    pub schema_version: u32,
    pub corpus: PathBuf,
    #[serde(default = "default_eps_grid")]
    pub grid: Vec<f64>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_one")]
    pub replications: usize,
    /// Grid points within this CTR distance of the best form the plateau.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_fractions() -> Vec<f64> {
    DEFAULT_FRACTIONS.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsityFile {
    pub schema_version: u32,
    pub corpus: PathBuf,
    #[serde(default = "default_lineup")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

versioned!(
    CorpusConfig,
    RunFile,
    CompareFile,
    SweepBFile,
    SweepEpsFile,
    SparsityFile
);

/// Reads and parses `path`, checking the schema version.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let value: T = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    if value.schema_version() != SCHEMA_VERSION {
        bail!(
            "invalid config {}: `schema_version` is {}, expected {}",
            path.display(),
            value.schema_version(),
            SCHEMA_VERSION
        );
    }
    Ok(value)
}

/// Resolves a path from a config file against the file's directory.
pub fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config.parent().map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
}

/// SHA-256 of the effective configuration's compact JSON.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(json))
}
