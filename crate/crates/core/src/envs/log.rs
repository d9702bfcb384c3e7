use std::io::Write;

use super::ClothEnv;
use crate::error::Result;

/// Column order of episode logs. `min_dist_1` is empty for single-vertex
/// tasks.
pub const EPISODE_LOG_HEADER: &str =
    "episode,final_success,anytime_success,min_dist_0,min_dist_1,steps";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub final_success: bool,
    pub anytime_success: bool,
    /// Closest approach of each tracked vertex to its target.
    pub min_distances: Vec<f64>,
    pub steps: usize,
}

impl EpisodeLog {
    /// Summary of the episode the env has just run. `final_success` is the
    /// success flag of the last step.
    pub fn from_env(episode: usize, env: &ClothEnv, final_success: bool) -> Self {
        Self {
            episode,
            final_success,
            anytime_success: env.ever_succeeded(),
            min_distances: env.min_distances().to_vec(),
            steps: env.t(),
        }
    }

    pub fn csv_row(&self) -> String {
        let d = |i: usize| {
            self.min_distances
                .get(i)
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default()
        };
        format!(
            "{},{},{},{},{},{}",
            self.episode,
            self.final_success as u8,
            self.anytime_success as u8,
            d(0),
            d(1),
            self.steps
        )
    }
}

pub struct EpisodeLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EpisodeLogWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{EPISODE_LOG_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, log: &EpisodeLog) -> Result<()> {
        writeln!(self.out, "{}", log.csv_row())?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
