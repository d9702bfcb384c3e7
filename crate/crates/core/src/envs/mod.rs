//! Goal-conditioned cloth tasks with sparse rewards.
//!
//! Cloth frame: the grid's columns run along +x and rows along +y (or down
//! -z for the hanging cloth). Corner slots are numbered
//! `0 = (row 0, col 0)`, `1 = (row 0, last col)`, `2 = (last row, col 0)`,
//! `3 = (last row, last col)`.

mod env;
mod log;
mod task;

pub use env::{observation_points, ClothEnv, EnvConfig, StepInfo, StepResult};
pub use log::{EpisodeLog, EpisodeLogWriter, EPISODE_LOG_HEADER};
pub use task::{TaskId, TaskSpec};

use serde::{Deserialize, Serialize};

use crate::clothsim::Vec3;
use crate::error::{Error, Result};

/// Target positions, one per tracked vertex, flattened as `[x, y, z, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal(pub Vec<f64>);

impl Goal {
    pub fn from_points(points: &[Vec3]) -> Self {
        Goal(points.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn point(&self, i: usize) -> Vec3 {
        Vec3::new(self.0[3 * i], self.0[3 * i + 1], self.0[3 * i + 2])
    }

    pub fn n_points(&self) -> usize {
        self.0.len() / 3
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance of each tracked vertex to its target.
pub fn goal_distances(achieved: &[f64], desired: &[f64]) -> Result<Vec<f64>> {
    if achieved.len() != desired.len() || !achieved.len().is_multiple_of(3) || achieved.is_empty() {
        return Err(Error::Shape(format!(
            "goal layouts differ: {} vs {} reals",
            achieved.len(),
            desired.len()
        )));
    }
    Ok(achieved
        .chunks_exact(3)
        .zip(desired.chunks_exact(3))
        .map(|(a, d)| {
            let dx = a[0] - d[0];
            let dy = a[1] - d[1];
            let dz = a[2] - d[2];
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect())
}

/// Success iff every tracked vertex lies in the closed ball of radius
/// `threshold` around its target.
pub fn is_success(achieved: &[f64], desired: &[f64], threshold: f64) -> Result<bool> {
    Ok(goal_distances(achieved, desired)?
        .iter()
        .all(|&d| d <= threshold))
}

/// Sparse reward: 0 on success, -1 otherwise.
pub fn reward(achieved: &[f64], desired: &[f64], threshold: f64) -> Result<f64> {
    Ok(if is_success(achieved, desired, threshold)? {
        0.0
    } else {
        -1.0
    })
}
