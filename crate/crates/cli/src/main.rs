use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynacloth::harness::{self, ExperimentConfig};
use dynacloth::Error;

/// Dynamic cloth manipulation experiments.
///
/// Log verbosity is set with RUST_LOG (default: info).
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed. For `train` and `ablate-obs` the seed list becomes
    /// seed, seed+1, ... with the configured length.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (file for `demo-gen`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured variant once per seed.
    Train(Common),
    /// Write scripted demonstrations with action noise.
    DemoGen {
        #[command(flatten)]
        common: Common,
        /// Number of demonstrations (default: agent.demo_episodes).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Success of the scripts under speed and trajectory randomization.
    StudyDynamics(Common),
    /// Train with 4, 8 and 12 observed points.
    AblateObs(Common),
    /// Replay a policy checkpoint, or the task script, and dump every step.
    Record {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint; the task script is replayed when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        let n = config.seeds.len() as u64;
        config.seeds = (seed..seed + n).collect();
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(common) => {
            let (config, out) = load(&common)?;
            print_json(&harness::cmd_train(&config, &out)?)
        }
        Command::DemoGen { common, n } => {
            let (config, out) = load(&common)?;
            let n = n.unwrap_or(config.agent.demo_episodes);
            let path = if out.extension().is_some() { out } else { out.join("demos.jsonl") };
            let demos = harness::cmd_demo_gen(&config, n, config.seed, &path)?;
            let successes = demos.iter().filter(|d| d.final_success()).count();
            log::info!("wrote {} demonstrations to {}", demos.len(), path.display());
            println!("{}", serde_json::json!({ "file": path, "episodes": demos.len(), "successes": successes }));
            Ok(())
        }
        Command::StudyDynamics(common) => {
            let (config, out) = load(&common)?;
            harness::cmd_study_dynamics(&config, config.seed, &out)?;
            print!("{}", std::fs::read_to_string(out.join("study.csv"))?);
            Ok(())
        }
        Command::AblateObs(common) => {
            let (config, out) = load(&common)?;
            let points = config.ablate_points.clone();
            print_json(&harness::cmd_ablate_obs(&config, &points, &out)?)
        }
        Command::Record { common, checkpoint, episodes } => {
            let (config, out) = load(&common)?;
            print_json(&harness::cmd_record(&config, checkpoint.as_deref(), episodes, config.seed, &out)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
