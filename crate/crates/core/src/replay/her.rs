use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodeBuffer, EpisodeTrajectory, Transition};
use crate::envs;
use crate::error::{Error, Result};

/// "Future" relabeling: each sampled transition gets a goal achieved later in
/// its episode with probability `k / (k + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HerConfig {
    pub k: usize,
}

impl Default for HerConfig {
    fn default() -> Self {
        Self { k: 4 }
    }
}

impl HerConfig {
    pub fn relabel_probability(&self) -> f64 {
        self.k as f64 / (self.k as f64 + 1.0)
    }
}

/// Transition `t` with its goal replaced by the achieved goal stored after
/// step `future` (so `future == t` yields the transition's own outcome).
pub fn relabel(traj: &EpisodeTrajectory, t: usize, future: usize) -> Result<Transition> {
    if t > future || future >= traj.len() {
        return Err(Error::Index(format!(
            "relabel needs t <= future < {}, got t={t}, future={future}",
            traj.len()
        )));
    }
    let new_goal = &traj.achieved[future + 1];
    let mut tr = traj.transition(t);
    let span = traj.goal_offset..traj.goal_offset + new_goal.len();
    tr.obs[span.clone()].copy_from_slice(new_goal);
    tr.next_obs[span].copy_from_slice(new_goal);
    tr.reward = envs::reward(&tr.achieved, new_goal, traj.threshold)?;
    tr.goal = new_goal.clone();
    Ok(tr)
}

/// Training minibatch, one row per transition. The first
/// `len() - n_demo` rows come from the main buffer, the rest from the
/// demonstration buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Vec<bool>,
    pub is_demo: Vec<bool>,
    pub relabeled: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn n_demo(&self) -> usize {
        self.is_demo.iter().filter(|&&d| d).count()
    }
}

pub fn sample_her_batch<R: Rng + ?Sized>(
    main: &EpisodeBuffer,
    demos: &EpisodeBuffer,
    batch_size: usize,
    n_demo: usize,
    her: HerConfig,
    rng: &mut R,
) -> Result<Batch> {
    if n_demo > batch_size {
        return Err(Error::Contract(format!(
            "n_demo {n_demo} exceeds batch size {batch_size}"
        )));
    }
    let n_main = batch_size - n_demo;
    if n_main > 0 && main.is_empty() {
        return Err(Error::EmptyBuffer("main replay buffer".into()));
    }
    if n_demo > 0 && demos.is_empty() {
        return Err(Error::EmptyBuffer("demonstration buffer".into()));
    }
    let reference = main.episode(0).or_else(|| demos.episode(0)).ok_or_else(|| {
        Error::EmptyBuffer("both buffers are empty".into())
    })?;
    let (od, ad) = (reference.obs_dim(), reference.action_dim());
    if let (Some(a), Some(b)) = (main.episode(0), demos.episode(0)) {
        if n_demo > 0 && (a.obs_dim() != b.obs_dim() || a.action_dim() != b.action_dim()) {
            return Err(Error::Shape("main and demo episodes have different layouts".into()));
        }
    }
    let p = her.relabel_probability();
    let mut batch = Batch {
        obs: Array2::zeros((batch_size, od)),
        actions: Array2::zeros((batch_size, ad)),
        rewards: Array1::zeros(batch_size),
        next_obs: Array2::zeros((batch_size, od)),
        done: Vec::with_capacity(batch_size),
        is_demo: Vec::with_capacity(batch_size),
        relabeled: Vec::with_capacity(batch_size),
    };
    for row in 0..batch_size {
        let (buffer, is_demo) = if row < n_main { (main, false) } else { (demos, true) };
        let (ep, t) = buffer.locate(rng.random_range(0..buffer.n_transitions()))?;
        let traj = buffer.episode(ep).expect("located episode exists");
        let relabeled = her.k > 0 && rng.random::<f64>() < p;
        let tr = if relabeled {
            let future = rng.random_range(t..traj.len());
            relabel(traj, t, future)?
        } else {
            traj.transition(t)
        };
        batch.obs.row_mut(row).assign(&Array1::from(tr.obs));
        batch.actions.row_mut(row).assign(&Array1::from(tr.action));
        batch.next_obs.row_mut(row).assign(&Array1::from(tr.next_obs));
        batch.rewards[row] = tr.reward;
        batch.done.push(tr.done);
        batch.is_demo.push(is_demo);
        batch.relabeled.push(relabeled);
    }
    Ok(batch)
}
