use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_action_noise, make_script, randomize, scripted_action, RandomizationMode, ScriptProgress, WaypointScript};
use crate::envs::{ClothEnv, EnvConfig, EpisodeLog, TaskId};
use crate::error::{Error, Result};
use crate::replay::{record_episode, EpisodeTrajectory};

/// Blown-up demonstrations are regenerated at most this many times in total.
const MAX_DEMO_RETRIES: usize = 100;

/// Runs `script` for one episode, with optional per-step action noise.
pub fn run_script_episode<R: Rng + ?Sized>(
    env: &mut ClothEnv,
    script: &WaypointScript,
    noise_std: f64,
    episode: usize,
    rng: &mut R,
) -> Result<(EpisodeTrajectory, EpisodeLog)> {
    let mut progress = ScriptProgress::default();
    record_episode(env, episode, rng, |env, _obs, rng| {
        let mut a = scripted_action(env, script, &mut progress);
        add_action_noise(&mut a, noise_std, rng);
        Ok(a)
    })
}

/// Noisy rollouts of the unrandomized script. Imperfect episodes are kept;
/// episodes that blow up are discarded and redrawn.
pub fn generate_demos<R: Rng + ?Sized>(
    config: &EnvConfig,
    task: TaskId,
    n_episodes: usize,
    rng: &mut R,
) -> Result<Vec<EpisodeTrajectory>> {
    if n_episodes == 0 {
        return Err(Error::Config("need at least one demonstration episode".into()));
    }
    let script = make_script(task);
    let mut env = ClothEnv::new(task, config.clone())?;
    let mut demos = Vec::with_capacity(n_episodes);
    let mut retries = 0;
    while demos.len() < n_episodes {
        match run_script_episode(&mut env, &script, super::DEMO_NOISE_STD, demos.len(), rng) {
            Ok((traj, _)) => demos.push(traj),
            Err(e @ Error::BlowUp { .. }) => {
                log::warn!("demo episode {} discarded: {e}", demos.len());
                retries += 1;
                if retries > MAX_DEMO_RETRIES {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(demos)
}

/// Per-episode seed derived from a master seed, so results do not depend on
/// execution order.
pub fn study_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value.
    let mut z = master
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub task: TaskId,
    pub mode: RandomizationMode,
    /// Success rate of each epoch.
    pub epochs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across epochs.
    pub std: f64,
    pub blow_ups: usize,
}

/// Noise-free scripted rollouts under a randomization mode: `n_epochs`
/// epochs of `n_episodes` episodes, each with its own derived seed. An
/// episode counts as a success if the goal holds at its final step; blown-up
/// episodes count as failures.
pub fn run_randomization_study(
    config: &EnvConfig,
    task: TaskId,
    mode: RandomizationMode,
    n_episodes: usize,
    n_epochs: usize,
    master_seed: u64,
) -> Result<StudyResult> {
    if n_episodes == 0 || n_epochs == 0 {
        return Err(Error::Config("study needs at least one epoch and one episode".into()));
    }
    let script = make_script(task);
    let mut env = ClothEnv::new(task, config.clone())?;
    let mut epochs = Vec::with_capacity(n_epochs);
    let mut blow_ups = 0;
    for epoch in 0..n_epochs {
        let mut successes = 0usize;
        for ep in 0..n_episodes {
            let index = (epoch * n_episodes + ep) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(study_seed(master_seed, index));
            let s = randomize(&script, mode, &mut rng);
            match run_script_episode(&mut env, &s, 0.0, ep, &mut rng) {
                Ok((_, log)) => successes += log.final_success as usize,
                Err(Error::BlowUp { node, step }) => {
                    log::warn!("{task}/{mode} episode {index}: blow-up at node {node}, substep {step}");
                    blow_ups += 1;
                }
                Err(e) => return Err(e),
            }
        }
        epochs.push(successes as f64 / n_episodes as f64);
    }
    let mean = epochs.iter().sum::<f64>() / n_epochs as f64;
    let std = (epochs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n_epochs as f64).sqrt();
    Ok(StudyResult {
        task,
        mode,
        epochs,
        mean,
        std,
        blow_ups,
    })
}

pub const STUDY_CSV_HEADER: &str =
    "mode,diagonal_mean,diagonal_std,sideways_mean,sideways_std,place_mean,place_std";

/// Wide table: one row per mode that has results, a mean and std column
/// pair per task (empty where that task was not run).
pub fn write_study_csv<W: Write>(mut out: W, results: &[StudyResult]) -> Result<()> {
    writeln!(out, "{STUDY_CSV_HEADER}")?;
    for mode in RandomizationMode::ALL {
        if !results.iter().any(|r| r.mode == mode) {
            continue;
        }
        let mut row = mode.name().to_string();
        for task in TaskId::ALL {
            match results.iter().find(|r| r.mode == mode && r.task == task) {
                Some(r) => row.push_str(&format!(",{:.4},{:.4}", r.mean, r.std)),
                None => row.push_str(",,"),
            }
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
