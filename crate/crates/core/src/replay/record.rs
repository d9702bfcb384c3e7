use rand::Rng;

use super::{EpisodeTrajectory, Transition};
use crate::envs::{ClothEnv, EpisodeLog};
use crate::error::Result;

/// Resets `env` and runs one full episode, asking `policy` for each action
/// given the env and the current observation.
pub fn record_episode<R, F>(
    env: &mut ClothEnv,
    episode: usize,
    rng: &mut R,
    mut policy: F,
) -> Result<(EpisodeTrajectory, EpisodeLog)>
where
    R: Rng + ?Sized,
    F: FnMut(&ClothEnv, &[f64], &mut R) -> Result<Vec<f64>>,
{
    let mut obs = env.reset(rng)?;
    let initial_achieved = env.achieved_goal().0;
    let goal = env.goal().0.clone();
    let mut transitions = Vec::with_capacity(env.spec().horizon);
    let mut final_success;
    loop {
        let action = policy(env, &obs, rng)?;
        let r = env.step(&action)?;
        final_success = r.is_success;
        let done = r.info.done;
        transitions.push(Transition {
            obs: std::mem::replace(&mut obs, r.observation.clone()),
            action,
            reward: r.reward,
            next_obs: r.observation,
            goal: goal.clone(),
            achieved: r.achieved.0,
            done,
        });
        if done {
            break;
        }
    }
    let traj = EpisodeTrajectory::from_transitions(
        &transitions,
        initial_achieved,
        env.goal_offset(),
        env.spec().threshold,
    )?;
    Ok((traj, EpisodeLog::from_env(episode, env, final_success)))
}
