use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    #[serde(alias = "diagonal")]
    DiagonalFold,
    #[serde(alias = "sideways")]
    SidewaysFold,
    #[serde(alias = "place")]
    PlaceOnTable,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::DiagonalFold, TaskId::SidewaysFold, TaskId::PlaceOnTable];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::DiagonalFold => "diagonal",
            TaskId::SidewaysFold => "sideways",
            TaskId::PlaceOnTable => "place",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" | "diagonal_fold" => Ok(TaskId::DiagonalFold),
            "sideways" | "sideways_fold" => Ok(TaskId::SidewaysFold),
            "place" | "place_on_table" => Ok(TaskId::PlaceOnTable),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Immutable task definition. Lengths are in cloth units (cm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    /// Episode length in control steps.
    pub horizon: usize,
    /// Success radius around each target.
    pub threshold: f64,
    /// Corner slots whose positions form the achieved goal.
    pub tracked_corners: Vec<usize>,
    /// Corner slot each manipulator starts at (and, for Place, holds).
    pub start_corners: Vec<usize>,
    /// Where each tracked corner should end up, as a corner slot of the
    /// reset cloth (Diagonal and Sideways).
    pub destination_corners: Vec<usize>,
    pub action_dims: usize,
    /// Radius of the goal sampling region around each destination.
    pub goal_radius: f64,
    /// Distance-from-edge range for Place targets.
    pub place_distance: (f64, f64),
    /// Cloth origin is jittered by up to this much along x and y.
    pub placement_bound: f64,
    /// Manipulator start height above its corner.
    pub manipulator_lift: f64,
}

impl TaskSpec {
    pub fn new(id: TaskId) -> Self {
        match id {
            TaskId::DiagonalFold => Self {
                id,
                horizon: 200,
                threshold: 10.0,
                tracked_corners: vec![0],
                start_corners: vec![0],
                destination_corners: vec![3],
                action_dims: 4,
                goal_radius: 10.0,
                place_distance: (15.0, 45.0),
                placement_bound: 10.0,
                manipulator_lift: 2.0,
            },
            TaskId::SidewaysFold => Self {
                id,
                horizon: 300,
                threshold: 10.0,
                tracked_corners: vec![0, 1],
                start_corners: vec![0],
                destination_corners: vec![2, 3],
                action_dims: 4,
                goal_radius: 10.0,
                place_distance: (15.0, 45.0),
                placement_bound: 10.0,
                manipulator_lift: 2.0,
            },
            TaskId::PlaceOnTable => Self {
                id,
                horizon: 500,
                threshold: 20.0,
                tracked_corners: vec![2, 3],
                start_corners: vec![0, 1],
                destination_corners: vec![],
                action_dims: 3,
                goal_radius: 10.0,
                place_distance: (15.0, 45.0),
                placement_bound: 10.0,
                manipulator_lift: 0.0,
            },
        }
    }

    pub fn n_manipulators(&self) -> usize {
        self.start_corners.len()
    }

    pub fn goal_dims(&self) -> usize {
        3 * self.tracked_corners.len()
    }

    pub fn has_grip(&self) -> bool {
        self.action_dims == 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || !(self.threshold > 0.0) {
            return Err(Error::Config("horizon and threshold must be positive".into()));
        }
        if self.tracked_corners.is_empty() || self.tracked_corners.iter().any(|&c| c > 3) {
            return Err(Error::Config("tracked vertices must be corner slots 0..=3".into()));
        }
        if !(3..=4).contains(&self.action_dims) {
            return Err(Error::Config(format!("action dims must be 3 or 4, got {}", self.action_dims)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_table() {
        let d = TaskSpec::new(TaskId::DiagonalFold);
        let s = TaskSpec::new(TaskId::SidewaysFold);
        let p = TaskSpec::new(TaskId::PlaceOnTable);
        assert_eq!((d.horizon, s.horizon, p.horizon), (200, 300, 500));
        assert_eq!((d.threshold, s.threshold, p.threshold), (10.0, 10.0, 20.0));
        assert_eq!((d.goal_dims(), s.goal_dims(), p.goal_dims()), (3, 6, 6));
        assert_eq!((d.action_dims, s.action_dims, p.action_dims), (4, 4, 3));
        assert_eq!((d.n_manipulators(), s.n_manipulators(), p.n_manipulators()), (1, 1, 2));
        for t in [d, s, p] {
            t.validate().unwrap();
        }
    }

    #[test]
    fn parse_names() {
        for id in TaskId::ALL {
            assert_eq!(id.name().parse::<TaskId>().unwrap(), id);
        }
        assert!("fold".parse::<TaskId>().is_err());
    }
}
