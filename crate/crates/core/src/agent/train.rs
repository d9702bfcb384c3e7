use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{actor_update, critic_update, select_action, AgentConfig, AgentNets};
use crate::envs::{ClothEnv, EnvConfig, TaskId};
use crate::error::{Error, Result};
use crate::numerics::soft_update;
use crate::replay::{record_episode, sample_her_batch, EpisodeBuffer, EpisodeTrajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epoch: usize,
    /// Mean final-step success over the test episodes.
    pub success_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Share of demonstration rows that passed the Q-filter.
    pub filter_pass_rate: f64,
    /// Exploration episodes collected so far.
    pub episodes: usize,
}

pub const TRAIN_CSV_HEADER: &str = "epoch,success_rate,critic_loss,actor_loss,filter_pass_rate,episodes";

pub fn write_train_csv_row<W: Write>(mut out: W, s: &TrainStats) -> Result<()> {
    writeln!(
        out,
        "{},{:.4},{:.6e},{:.6e},{:.4},{}",
        s.epoch, s.success_rate, s.critic_loss, s.actor_loss, s.filter_pass_rate, s.episodes
    )?;
    Ok(())
}

/// One training run: env, networks, buffers and random streams. Exploration
/// and updates draw from one stream, test episodes from another, so the
/// test goals are the same whatever the learner does.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: AgentConfig,
    pub env: ClothEnv,
    pub nets: AgentNets,
    pub main: EpisodeBuffer,
    pub demos: EpisodeBuffer,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    epoch: usize,
    episodes: usize,
}

impl Trainer {
    pub fn new(task: TaskId, env_config: EnvConfig, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = ClothEnv::new(task, env_config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eval_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_7E57);
        let nets = AgentNets::new(env.observation_dim(), env.spec().action_dims, &config.hidden, &mut rng)?;
        Ok(Self {
            main: EpisodeBuffer::new(config.buffer_episodes),
            demos: EpisodeBuffer::fixed(config.demo_episodes.max(1)),
            config,
            env,
            nets,
            rng,
            eval_rng,
            epoch: 0,
            episodes: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Adds demonstrations to the fixed demo buffer. An empty buffer grows to
    /// fit a demo file larger than `demo_episodes`.
    pub fn load_demos(&mut self, demos: Vec<EpisodeTrajectory>) -> Result<()> {
        if self.demos.is_empty() && demos.len() > self.demos.capacity() {
            self.demos = EpisodeBuffer::fixed(demos.len());
        }
        for d in demos {
            if d.obs_dim() != self.nets.obs_dim() || d.action_dim() != self.nets.action_dim() {
                return Err(Error::Shape("demonstration layout does not match the task".into()));
            }
            self.observe_for_normalizer(&d)?;
            self.demos.store_episode(d)?;
        }
        self.nets.normalizer.recompute();
        Ok(())
    }

    /// Feeds an episode's observations to the normalizer, plus one copy of
    /// each with its goal replaced by a later achieved goal, mirroring what
    /// relabeled batches look like.
    fn observe_for_normalizer(&mut self, ep: &EpisodeTrajectory) -> Result<()> {
        let span = ep.goal_offset..ep.goal_offset + ep.goal.len();
        for (t, obs) in ep.observations.iter().enumerate() {
            self.nets.normalizer.update(obs)?;
            if t < ep.len() {
                let f = self.rng.random_range(t..ep.len());
                let mut copy = obs.clone();
                copy[span.clone()].copy_from_slice(&ep.achieved[f + 1]);
                self.nets.normalizer.update(&copy)?;
            }
        }
        Ok(())
    }

    /// One epoch: exploration episodes, gradient updates, then noise-free
    /// test episodes.
    pub fn train_cycle(&mut self) -> Result<TrainStats> {
        if self.config.uses_demos() && self.config.n_demo > 0 && self.demos.is_empty() {
            return Err(Error::Contract("demonstration buffer must be filled before training".into()));
        }
        for _ in 0..self.config.train_episodes {
            let std = self.config.exploration_std;
            let nets = &self.nets;
            let (traj, _) = record_episode(&mut self.env, self.episodes, &mut self.rng, |_, obs, rng| {
                select_action(nets, obs, std, rng, true)
            })?;
            self.observe_for_normalizer(&traj)?;
            self.main.store_episode(traj)?;
            self.episodes += 1;
        }
        self.nets.normalizer.recompute();

        let (mut closs, mut aloss) = (0.0, 0.0);
        let (mut demo_rows, mut passed) = (0usize, 0usize);
        let updates = if self.main.is_empty() { 0 } else { self.config.updates_per_epoch };
        for _ in 0..updates {
            let batch = sample_her_batch(
                &self.main,
                &self.demos,
                self.config.batch_size,
                self.config.n_demo,
                self.config.her,
                &mut self.rng,
            )?;
            closs += critic_update(&mut self.nets, &batch, &self.config)?.loss;
            let a = actor_update(&mut self.nets, &batch, &self.config)?;
            aloss += a.loss;
            demo_rows += a.n_demo;
            passed += a.filter_passed;
            soft_update(&mut self.nets.target_actor, &self.nets.actor, self.config.tau)?;
            soft_update(&mut self.nets.target_critic, &self.nets.critic, self.config.tau)?;
        }
        let success_rate = self.evaluate(self.config.test_episodes)?;
        let n = updates.max(1) as f64;
        let stats = TrainStats {
            epoch: self.epoch,
            success_rate,
            critic_loss: closs / n,
            actor_loss: aloss / n,
            filter_pass_rate: if demo_rows == 0 { 0.0 } else { passed as f64 / demo_rows as f64 },
            episodes: self.episodes,
        };
        self.epoch += 1;
        Ok(stats)
    }

    /// Mean final-step success of the noise-free policy.
    pub fn evaluate(&mut self, episodes: usize) -> Result<f64> {
        let mut successes = 0;
        for i in 0..episodes {
            let nets = &self.nets;
            let (_, log) = record_episode(&mut self.env, i, &mut self.eval_rng, |_, obs, rng| {
                select_action(nets, obs, 0.0, rng, false)
            })?;
            successes += log.final_success as usize;
        }
        Ok(successes as f64 / episodes as f64)
    }
}
