use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::demos::RandomizationMode;
use crate::envs::{EnvConfig, TaskId};
use crate::error::{Error, Result};
use crate::replay::HerConfig;

/// Agent combinations compared in the component ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    DdpgDemoHer,
    DdpgHer,
    DdpgDemo,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::DdpgDemoHer, Variant::DdpgHer, Variant::DdpgDemo];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DdpgDemoHer => "ddpg_demo_her",
            Variant::DdpgHer => "ddpg_her",
            Variant::DdpgDemo => "ddpg_demo",
        }
    }

    /// `(lambda_q, lambda_bc, n_demo, her_k)`. This is the only place these
    /// settings are tied to a variant.
    pub fn settings(self) -> (f64, f64, usize, usize) {
        match self {
            Variant::DdpgDemoHer => (0.001, 0.0078, 32, 4),
            Variant::DdpgHer => (1.0, 0.0, 0, 4),
            Variant::DdpgDemo => (0.001, 0.0078, 32, 0),
        }
    }

    pub fn apply(self, agent: &mut AgentConfig) {
        let (lambda_q, lambda_bc, n_demo, k) = self.settings();
        agent.lambda_q = lambda_q;
        agent.lambda_bc = lambda_bc;
        agent.n_demo = n_demo;
        agent.her = HerConfig { k };
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub tasks: Vec<TaskId>,
    pub modes: Vec<RandomizationMode>,
    pub episodes: usize,
    pub epochs: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            tasks: TaskId::ALL.to_vec(),
            modes: RandomizationMode::ALL.to_vec(),
            episodes: 100,
            epochs: 3,
        }
    }
}

/// Everything an experiment command needs. Loaded from TOML; every field
/// has a default, so an empty file is a valid Diagonal run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskId,
    pub variant: Variant,
    /// One training run per seed.
    pub seeds: Vec<u64>,
    /// Seed for the study, demo generation and recording.
    pub seed: u64,
    pub epochs: usize,
    /// Write a policy checkpoint every this many epochs (0: final only).
    pub checkpoint_every: usize,
    /// Demonstrations to load instead of generating them from the script.
    pub demo_file: Option<PathBuf>,
    /// Observation sizes visited by the ablation.
    pub ablate_points: Vec<usize>,
    pub out: Option<PathBuf>,
    pub env: EnvConfig,
    /// Loss weights, demo count and HER ratio are overwritten by `variant`.
    pub agent: AgentConfig,
    pub study: StudyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskId::DiagonalFold,
            variant: Variant::DdpgDemoHer,
            seeds: vec![0, 1, 2],
            seed: 0,
            epochs: 150,
            checkpoint_every: 10,
            demo_file: None,
            ablate_points: vec![4, 8, 12],
            out: None,
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Agent settings with the variant applied.
    pub fn agent_config(&self) -> AgentConfig {
        let mut agent = self.agent.clone();
        self.variant.apply(&mut agent);
        agent
    }

    pub fn validate(&self) -> Result<()> {
        self.agent_config().validate()?;
        self.env.physics.validate()?;
        if ![4, 8, 12].contains(&self.env.n_points) || self.ablate_points.iter().any(|n| ![4, 8, 12].contains(n)) {
            return Err(Error::Config("n_points must be 4, 8 or 12".into()));
        }
        if self.seeds.is_empty() || self.epochs == 0 {
            return Err(Error::Config("need at least one seed and one epoch".into()));
        }
        if self.study.episodes == 0 || self.study.epochs == 0 {
            return Err(Error::Config("study needs episodes and epochs".into()));
        }
        Ok(())
    }

    /// SHA-256 over everything that determines a training curve: the
    /// resolved config (output path excluded) and the demo file contents.
    pub fn fingerprint(&self) -> Result<String> {
        let mut resolved = self.clone();
        resolved.agent = self.agent_config();
        resolved.out = None;
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&resolved)?);
        if let Some(path) = &self.demo_file {
            hasher.update(std::fs::read(path)?);
        }
        Ok(hex::encode(hasher.finalize()))
    }
}
