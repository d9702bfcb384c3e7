//! Episode storage and hindsight goal relabeling.

mod file;
mod her;
mod record;

pub use file::{read_demos, write_demos, DemoFileHeader, DEMO_FILE_VERSION};
pub use her::{relabel, sample_her_batch, Batch, HerConfig};
pub use record::record_episode;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One environment step. `achieved` is the achieved goal of the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub goal: Vec<f64>,
    pub achieved: Vec<f64>,
    pub done: bool,
}

/// A full episode stored compactly: `T + 1` observations and achieved goals
/// (index 0 is the reset state) and `T` actions and rewards. The desired goal
/// is also embedded in every observation at `goal_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub achieved: Vec<Vec<f64>>,
    pub goal: Vec<f64>,
    pub goal_offset: usize,
    /// Success radius used to recompute rewards under new goals.
    pub threshold: f64,
}

impl EpisodeTrajectory {
    /// Builds a trajectory from its transitions and the achieved goal of the
    /// reset state, checking chaining and goal constancy.
    pub fn from_transitions(
        transitions: &[Transition],
        initial_achieved: Vec<f64>,
        goal_offset: usize,
        threshold: f64,
    ) -> Result<Self> {
        let first = transitions
            .first()
            .ok_or_else(|| Error::Validation("episode has no transitions".into()))?;
        let goal = first.goal.clone();
        let mut observations = vec![first.obs.clone()];
        let mut achieved = vec![initial_achieved];
        let mut actions = Vec::with_capacity(transitions.len());
        let mut rewards = Vec::with_capacity(transitions.len());
        for (t, tr) in transitions.iter().enumerate() {
            if tr.obs != observations[t] {
                return Err(Error::Validation(format!(
                    "observation at step {t} does not continue the previous next_obs"
                )));
            }
            if tr.goal != goal {
                return Err(Error::Validation(format!("desired goal changes at step {t}")));
            }
            observations.push(tr.next_obs.clone());
            achieved.push(tr.achieved.clone());
            actions.push(tr.action.clone());
            rewards.push(tr.reward);
        }
        let traj = Self {
            observations,
            actions,
            rewards,
            achieved,
            goal,
            goal_offset,
            threshold,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn transition(&self, t: usize) -> Transition {
        Transition {
            obs: self.observations[t].clone(),
            action: self.actions[t].clone(),
            reward: self.rewards[t],
            next_obs: self.observations[t + 1].clone(),
            goal: self.goal.clone(),
            achieved: self.achieved[t + 1].clone(),
            done: t + 1 == self.len(),
        }
    }

    /// Whether the final step met the goal.
    pub fn final_success(&self) -> bool {
        self.rewards.last() == Some(&0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.actions.len();
        if t == 0 {
            return Err(Error::Validation("episode has no transitions".into()));
        }
        if self.observations.len() != t + 1 || self.achieved.len() != t + 1 || self.rewards.len() != t {
            return Err(Error::Validation("inconsistent per-step array lengths".into()));
        }
        let (od, ad, gd) = (self.obs_dim(), self.action_dim(), self.goal.len());
        if gd == 0 || self.goal_offset + gd > od {
            return Err(Error::Validation("goal does not fit in the observation".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Validation("threshold must be positive".into()));
        }
        for (i, o) in self.observations.iter().enumerate() {
            if o.len() != od {
                return Err(Error::Validation(format!("observation {i} has the wrong length")));
            }
            if o[self.goal_offset..self.goal_offset + gd] != self.goal[..] {
                return Err(Error::Validation(format!("observation {i} carries a different goal")));
            }
        }
        if self.actions.iter().any(|a| a.len() != ad) {
            return Err(Error::Validation("actions have differing lengths".into()));
        }
        if self.achieved.iter().any(|g| g.len() != gd) {
            return Err(Error::Validation("achieved goals have the wrong length".into()));
        }
        if self.rewards.iter().any(|&r| r != 0.0 && r != -1.0) {
            return Err(Error::Validation("rewards must be 0 or -1".into()));
        }
        Ok(())
    }
}

/// Episode store with FIFO eviction, or a fixed store that refuses to grow
/// past capacity (demonstrations).
#[derive(Debug, Clone)]
pub struct EpisodeBuffer {
    capacity: usize,
    evict: bool,
    episodes: VecDeque<EpisodeTrajectory>,
    /// Prefix sums of episode lengths, for uniform transition sampling.
    cumulative: Vec<usize>,
}

impl EpisodeBuffer {
    pub fn new(capacity: usize) -> Self {
        Self::with_policy(capacity, true)
    }

    pub fn fixed(capacity: usize) -> Self {
        Self::with_policy(capacity, false)
    }

    fn with_policy(capacity: usize, evict: bool) -> Self {
        Self {
            capacity: capacity.max(1),
            evict,
            episodes: VecDeque::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn n_transitions(&self) -> usize {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeTrajectory> {
        self.episodes.iter()
    }

    pub fn episode(&self, i: usize) -> Option<&EpisodeTrajectory> {
        self.episodes.get(i)
    }

    pub fn store_episode(&mut self, episode: EpisodeTrajectory) -> Result<()> {
        episode.validate()?;
        if let Some(first) = self.episodes.front() {
            if first.obs_dim() != episode.obs_dim() || first.action_dim() != episode.action_dim() {
                return Err(Error::Validation("episode layout differs from buffer contents".into()));
            }
        }
        if self.episodes.len() == self.capacity {
            if !self.evict {
                return Err(Error::Contract(format!(
                    "fixed buffer already holds {} episodes",
                    self.capacity
                )));
            }
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.cumulative.clear();
        let mut total = 0;
        for e in &self.episodes {
            total += e.len();
            self.cumulative.push(total);
        }
        Ok(())
    }

    /// Maps a flat transition index to (episode, step).
    pub fn locate(&self, flat: usize) -> Result<(usize, usize)> {
        if flat >= self.n_transitions() {
            return Err(Error::Index(format!(
                "transition {flat} of {}",
                self.n_transitions()
            )));
        }
        let ep = self.cumulative.partition_point(|&c| c <= flat);
        let start = if ep == 0 { 0 } else { self.cumulative[ep - 1] };
        Ok((ep, flat - start))
    }
}
