//! Goal-conditioned DDPG with target networks, hindsight replay, and a
//! Q-filtered behavior-cloning term on demonstration transitions.

mod normalizer;
mod policy;
mod train;
mod update;

pub use normalizer::Normalizer;
pub use policy::{read_policy, write_policy, Policy};
pub use train::{write_train_csv_row, TrainStats, Trainer, TRAIN_CSV_HEADER};
pub use update::{actor_loss_and_grads, actor_update, bc_loss, critic_update, td_targets, ActorStats, CriticStats};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mlp_init, Activation, AdamConfig, AdamState, ParamSet};
use crate::replay::HerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Exploration noise standard deviation, action units.
    pub exploration_std: f64,
    /// Weight of the policy-gradient term.
    pub lambda_q: f64,
    /// Weight of the behavior-cloning term.
    pub lambda_bc: f64,
    pub batch_size: usize,
    /// Demonstration transitions per batch.
    pub n_demo: usize,
    pub her: HerConfig,
    pub hidden: Vec<usize>,
    pub updates_per_epoch: usize,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub buffer_episodes: usize,
    pub demo_episodes: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            tau: 0.05,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            exploration_std: 0.2,
            lambda_q: 0.001,
            lambda_bc: 0.0078,
            batch_size: 256,
            n_demo: 32,
            her: HerConfig::default(),
            hidden: vec![256, 256, 256],
            updates_per_epoch: 40,
            train_episodes: 20,
            test_episodes: 10,
            buffer_episodes: 1000,
            demo_episodes: 20,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if !(self.lambda_q >= 0.0 && self.lambda_bc >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) || !(self.exploration_std >= 0.0) {
            return bad("learning rates must be positive and exploration std non-negative");
        }
        if self.batch_size == 0 || self.n_demo > self.batch_size {
            return bad("need 0 <= n_demo <= batch_size and a non-empty batch");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.test_episodes == 0 || self.buffer_episodes == 0 {
            return bad("need at least one test episode and buffer slot");
        }
        if self.n_demo > 0 && self.demo_episodes == 0 {
            return bad("demo sampling needs demonstration episodes");
        }
        Ok(())
    }

    pub fn uses_demos(&self) -> bool {
        self.n_demo > 0 || self.lambda_bc > 0.0
    }

    /// Bounds of any discounted return of rewards in {-1, 0}.
    pub fn return_bounds(&self) -> (f64, f64) {
        if self.gamma < 1.0 {
            (-1.0 / (1.0 - self.gamma), 0.0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        }
    }
}

/// Online and target actor/critic, their optimizers, and the observation
/// normalizer shared by all four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNets {
    pub actor: ParamSet,
    pub critic: ParamSet,
    pub target_actor: ParamSet,
    pub target_critic: ParamSet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub normalizer: Normalizer,
}

impl AgentNets {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![obs_dim + action_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = mlp_init(&actor_sizes, Activation::Relu, Activation::Tanh, rng)?;
        let critic = mlp_init(&critic_sizes, Activation::Relu, Activation::Identity, rng)?;
        Ok(Self {
            actor_opt: AdamState::new(&actor, AdamConfig::default()),
            critic_opt: AdamState::new(&critic, AdamConfig::default()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            normalizer: Normalizer::new(obs_dim),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }
}

/// Policy action for one observation: the actor output plus i.i.d. Gaussian
/// noise when exploring, clipped to `[-1, 1]`.
pub fn select_action<R: Rng + ?Sized>(
    nets: &AgentNets,
    obs: &[f64],
    std: f64,
    rng: &mut R,
    explore: bool,
) -> Result<Vec<f64>> {
    if obs.len() != nets.obs_dim() {
        return Err(Error::Shape(format!(
            "observation has {} reals, actor expects {}",
            obs.len(),
            nets.obs_dim()
        )));
    }
    let (mut a, _) = nets.actor.forward(&nets.normalizer.normalize(obs))?;
    if explore && std > 0.0 {
        let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
        for v in &mut a {
            *v += normal.sample(rng);
        }
    }
    for v in &mut a {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(a)
}
