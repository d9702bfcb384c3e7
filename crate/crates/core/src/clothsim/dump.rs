//! JSON-lines rollout dumps: one record per control step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SimState;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub episode: usize,
    pub step: usize,
    pub time: f64,
    pub positions: Vec<[f64; 3]>,
    pub manipulators: Vec<[f64; 3]>,
    pub grasped: Vec<Option<usize>>,
}

impl RolloutRecord {
    pub fn capture(episode: usize, step: usize, state: &SimState) -> Self {
        Self {
            episode,
            step,
            time: state.time,
            positions: state.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            manipulators: state
                .manipulators
                .iter()
                .map(|m| [m.position.x, m.position.y, m.position.z])
                .collect(),
            grasped: state.manipulators.iter().map(|m| m.grasped).collect(),
        }
    }
}

pub fn write_rollout<W: Write>(mut out: W, records: &[RolloutRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_rollout<R: BufRead>(input: R) -> Result<Vec<RolloutRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
