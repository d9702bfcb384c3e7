//! Experiment drivers: training runs with per-seed and median curves,
//! demonstration generation, the dynamics randomization study, the
//! observation-size ablation and rollout recording.

mod config;

pub use config::{ExperimentConfig, StudyConfig, Variant};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{read_policy, write_policy, write_train_csv_row, Policy, TrainStats, Trainer, TRAIN_CSV_HEADER};
use crate::clothsim::{write_rollout, RolloutRecord};
use crate::demos::{
    generate_demos, make_script, run_randomization_study, scripted_action, study_seed, write_study_csv,
    ScriptProgress, StudyResult,
};
use crate::envs::{ClothEnv, EpisodeLog, EpisodeLogWriter};
use crate::error::{Error, Result};
use crate::replay::{read_demos, write_demos, EpisodeTrajectory};

/// Epochs averaged for the "final" success figure.
pub const FINAL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub curve_file: PathBuf,
    /// Mean test success over the last `FINAL_WINDOW` epochs; `None` when
    /// the run failed.
    pub final_success: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub variant: String,
    pub n_points: usize,
    pub observation_dim: usize,
    pub fingerprint: String,
    pub epochs: usize,
    pub seeds: Vec<SeedReport>,
    /// Per-epoch median over the seeds that completed.
    pub median_curve: Vec<f64>,
    /// Mean of the median curve over the last `FINAL_WINDOW` epochs.
    pub final_median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean of the last `window` entries (all of them if fewer).
pub fn final_mean(curve: &[f64], window: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(window)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Demonstrations for a run: loaded from the configured file, or generated
/// from the committed script with a seed-derived stream.
fn demos_for(config: &ExperimentConfig, seed: u64) -> Result<Vec<EpisodeTrajectory>> {
    if let Some(path) = &config.demo_file {
        let (header, demos) = read_demos(BufReader::new(File::open(path)?))?;
        if header.task != config.task.name() || header.n_points != config.env.n_points {
            return Err(Error::Config(format!(
                "demo file is for {}/{} points, run is {}/{}",
                header.task,
                header.n_points,
                config.task,
                config.env.n_points
            )));
        }
        return Ok(demos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(study_seed(seed, u64::MAX));
    generate_demos(&config.env, config.task, config.agent.demo_episodes, &mut rng)
}

/// Trains one seed, writing its curve CSV and policy checkpoints under
/// `out`. Returns the per-epoch stats.
pub fn train_seed(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<TrainStats>> {
    let agent = config.agent_config();
    let mut trainer = Trainer::new(config.task, config.env.clone(), agent.clone(), seed)?;
    if agent.uses_demos() {
        trainer.load_demos(demos_for(config, seed)?)?;
    }
    let mut csv = create(&out.join(format!("curve_seed{seed}.csv")))?;
    writeln!(csv, "{TRAIN_CSV_HEADER}")?;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let stats = trainer.train_cycle()?;
        write_train_csv_row(&mut csv, &stats)?;
        csv.flush()?;
        log::info!(
            "{} {} seed {seed} epoch {epoch}: success {:.2} critic {:.4} filter {:.2}",
            config.task,
            config.variant,
            stats.success_rate,
            stats.critic_loss,
            stats.filter_pass_rate
        );
        let last = epoch + 1 == config.epochs;
        if last || (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
            let path = out.join(format!("policy_seed{seed}_epoch{epoch:03}.bin"));
            let mut f = create(&path)?;
            write_policy(&mut f, &Policy::from_nets(&trainer.nets))?;
            f.flush()?;
        }
        history.push(stats);
    }
    Ok(history)
}

/// Runs every configured seed and writes per-seed curves, the median curve
/// and `report.json`. A failing seed is recorded in the report and does not
/// stop the others; the command fails only if every seed does.
pub fn cmd_train(config: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let mut curves = Vec::new();
    let mut seeds = Vec::new();
    let mut last_error = None;
    for &seed in &config.seeds {
        let curve_file = PathBuf::from(format!("curve_seed{seed}.csv"));
        match train_seed(config, seed, out) {
            Ok(history) => {
                let curve: Vec<f64> = history.iter().map(|s| s.success_rate).collect();
                seeds.push(SeedReport {
                    seed,
                    curve_file,
                    final_success: Some(final_mean(&curve, FINAL_WINDOW)),
                    error: None,
                });
                curves.push(curve);
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                seeds.push(SeedReport {
                    seed,
                    curve_file,
                    final_success: None,
                    error: Some(e.to_string()),
                });
                last_error = Some(e);
            }
        }
    }
    if curves.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::Config("no seeds".into())));
    }
    let median_curve: Vec<f64> = (0..config.epochs)
        .map(|e| median(&curves.iter().map(|c| c[e]).collect::<Vec<_>>()))
        .collect();
    let mut csv = create(&out.join("curve_median.csv"))?;
    writeln!(csv, "epoch,median_success")?;
    for (e, m) in median_curve.iter().enumerate() {
        writeln!(csv, "{e},{m:.4}")?;
    }
    csv.flush()?;
    let env = ClothEnv::new(config.task, config.env.clone())?;
    let report = RunReport {
        task: config.task.name().into(),
        variant: config.variant.name().into(),
        n_points: config.env.n_points,
        observation_dim: env.observation_dim(),
        fingerprint: config.fingerprint()?,
        epochs: config.epochs,
        seeds,
        final_median: final_mean(&median_curve, FINAL_WINDOW),
        median_curve,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Generates `n` noisy scripted demonstrations and writes them to `path`.
pub fn cmd_demo_gen(config: &ExperimentConfig, n: usize, seed: u64, path: &Path) -> Result<Vec<EpisodeTrajectory>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demos = generate_demos(&config.env, config.task, n, &mut rng)?;
    let mut out = create(path)?;
    write_demos(&mut out, config.task.name(), config.env.n_points, &demos)?;
    out.flush()?;
    Ok(demos)
}

/// Randomization study over the configured tasks and modes; writes the
/// table to `out/study.csv`.
pub fn cmd_study_dynamics(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<StudyResult>> {
    config.validate()?;
    let study = &config.study;
    let mut results = Vec::new();
    for &task in &study.tasks {
        for &mode in &study.modes {
            let r = run_randomization_study(&config.env, task, mode, study.episodes, study.epochs, seed)?;
            log::info!("{task} {mode}: {:.3} +- {:.3}", r.mean, r.std);
            results.push(r);
        }
    }
    let mut csv = create(&out.join("study.csv"))?;
    write_study_csv(&mut csv, &results)?;
    csv.flush()?;
    Ok(results)
}

/// Trains the configured variant once per observation size, each into
/// `out/points_<n>`.
pub fn cmd_ablate_obs(config: &ExperimentConfig, points: &[usize], out: &Path) -> Result<Vec<RunReport>> {
    let mut reports = Vec::new();
    for &n in points {
        let mut c = config.clone();
        c.env.n_points = n;
        let report = cmd_train(&c, &out.join(format!("points_{n}")))?;
        log::info!("{n} points: observation {} reals, final median {:.3}", report.observation_dim, report.final_median);
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub task: String,
    pub source: String,
    pub episodes: usize,
    pub steps: usize,
    pub successes: usize,
    pub success_rate: f64,
}

/// Replays a policy checkpoint (or the committed script when `checkpoint`
/// is `None`) without noise, writing every step to `out/rollout.jsonl`, the
/// episode log to `out/episodes.csv` and `out/summary.json`.
pub fn cmd_record(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    episodes: usize,
    seed: u64,
    out: &Path,
) -> Result<RecordSummary> {
    config.validate()?;
    let policy = checkpoint
        .map(|p| read_policy(BufReader::new(File::open(p)?)))
        .transpose()?;
    let script = make_script(config.task);
    let mut env = ClothEnv::new(config.task, config.env.clone())?;
    if let Some(p) = &policy {
        if p.actor.input_dim() != env.observation_dim() {
            return Err(Error::Shape(format!(
                "checkpoint expects {} observation reals, task gives {}",
                p.actor.input_dim(),
                env.observation_dim()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rollout = create(&out.join("rollout.jsonl"))?;
    let mut log = EpisodeLogWriter::new(create(&out.join("episodes.csv"))?)?;
    let (mut successes, mut steps) = (0, 0);
    for ep in 0..episodes {
        let mut obs = env.reset(&mut rng)?;
        let mut progress = ScriptProgress::default();
        let mut records = Vec::with_capacity(env.spec().horizon);
        let success = loop {
            let action = match &policy {
                Some(p) => p.act(&obs)?,
                None => scripted_action(&env, &script, &mut progress),
            };
            let r = env.step(&action)?;
            records.push(RolloutRecord::capture(ep, r.info.t, env.state()));
            if r.info.done {
                break r.is_success;
            }
            obs = r.observation;
        };
        write_rollout(&mut rollout, &records)?;
        steps += records.len();
        successes += success as usize;
        log.write(&EpisodeLog::from_env(ep, &env, success))?;
    }
    rollout.flush()?;
    log.into_inner().flush()?;
    let summary = RecordSummary {
        task: config.task.name().into(),
        source: checkpoint.map_or("script".into(), |p| p.display().to_string()),
        episodes,
        steps,
        successes,
        success_rate: if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 },
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
