//! Demonstration files: JSON lines, a header record followed by one
//! trajectory per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::EpisodeTrajectory;
use crate::error::{Error, Result};

pub const DEMO_FILE_VERSION: u32 = 1;
const DEMO_FILE_FORMAT: &str = "dynacloth-demos";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoFileHeader {
    pub format: String,
    pub version: u32,
    pub task: String,
    pub n_points: usize,
    pub episodes: usize,
}

impl DemoFileHeader {
    pub fn new(task: &str, n_points: usize, episodes: usize) -> Self {
        Self {
            format: DEMO_FILE_FORMAT.into(),
            version: DEMO_FILE_VERSION,
            task: task.into(),
            n_points,
            episodes,
        }
    }
}

pub fn write_demos<W: Write>(
    mut out: W,
    task: &str,
    n_points: usize,
    episodes: &[EpisodeTrajectory],
) -> Result<()> {
    serde_json::to_writer(&mut out, &DemoFileHeader::new(task, n_points, episodes.len()))?;
    out.write_all(b"\n")?;
    for e in episodes {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_demos<R: BufRead>(input: R) -> Result<(DemoFileHeader, Vec<EpisodeTrajectory>)> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty demo file".into()))??;
    let header: DemoFileHeader = serde_json::from_str(&first)?;
    if header.format != DEMO_FILE_FORMAT {
        return Err(Error::Format(format!("unexpected format tag {:?}", header.format)));
    }
    if header.version != DEMO_FILE_VERSION {
        return Err(Error::Format(format!("unsupported demo file version {}", header.version)));
    }
    let mut episodes = Vec::with_capacity(header.episodes);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EpisodeTrajectory = serde_json::from_str(&line)?;
        e.validate()?;
        episodes.push(e);
    }
    if episodes.len() != header.episodes {
        return Err(Error::Format(format!(
            "header announces {} episodes, file has {}",
            header.episodes,
            episodes.len()
        )));
    }
    Ok((header, episodes))
}
