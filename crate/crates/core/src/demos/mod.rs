//! Scripted waypoint controllers, demonstration generation and the
//! speed/trajectory randomization study.

mod study;

pub use study::{
    generate_demos, run_randomization_study, run_script_episode, study_seed, write_study_csv,
    StudyResult, STUDY_CSV_HEADER,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clothsim::Vec3;
use crate::envs::{ClothEnv, TaskId};
use crate::error::{Error, Result};

/// A waypoint counts as reached within this distance.
pub const WAYPOINT_TOLERANCE: f64 = 2.0;
/// Trajectory randomization offsets interior waypoints by up to this much
/// per axis.
pub const TRAJECTORY_JITTER: f64 = 20.0;
/// Speed randomization scales segment speeds by a factor in this range.
pub const SPEED_RANGE: (f64, f64) = (0.5, 1.5);
/// Demonstration noise: standard deviation in action units (10% of the
/// half-range). Each draw is clipped to twice this.
pub const DEMO_NOISE_STD: f64 = 0.1;

/// What a waypoint offset is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Corner slot 0 of the cloth at reset.
    Cloth,
    /// The given point of the episode goal.
    Goal(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub anchor: Anchor,
    pub offset: [f64; 3],
    /// Speed along the segment ending at this waypoint, units/s.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointScript {
    pub task: TaskId,
    /// Grip turns on once the waypoint with this index is being targeted.
    #[serde(default)]
    pub grasp_before: usize,
    /// Grip turns off once every waypoint up to this index has been reached.
    #[serde(default)]
    pub release_after: Option<usize>,
    #[serde(rename = "waypoint")]
    pub waypoints: Vec<Waypoint>,
}

impl WaypointScript {
    pub fn from_toml(text: &str) -> Result<Self> {
        let script: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("script: {e}")))?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::Config("a script needs at least two waypoints".into()));
        }
        if let Some(w) = self.waypoints.iter().find(|w| !(w.speed > 0.0) || !w.speed.is_finite()) {
            return Err(Error::Config(format!("waypoint speed must be positive, got {}", w.speed)));
        }
        if self.grasp_before >= self.waypoints.len() {
            return Err(Error::Config("grasp_before past the last waypoint".into()));
        }
        if let Some(r) = self.release_after {
            if r < self.grasp_before || r >= self.waypoints.len() {
                return Err(Error::Config("release_after out of range".into()));
            }
        }
        Ok(())
    }

    /// World position of waypoint `i` for the env's current episode.
    pub fn target(&self, env: &ClothEnv, i: usize) -> Vec3 {
        let w = &self.waypoints[i];
        let base = match w.anchor {
            Anchor::Cloth => env.reset_corners()[0],
            Anchor::Goal(k) => env.goal().point(k),
        };
        base + Vec3::from(w.offset)
    }
}

/// The committed hand-authored script for a task.
pub fn make_script(task: TaskId) -> WaypointScript {
    let text = match task {
        TaskId::DiagonalFold => include_str!("../../scripts/diagonal.toml"),
        TaskId::SidewaysFold => include_str!("../../scripts/sideways.toml"),
        TaskId::PlaceOnTable => include_str!("../../scripts/place.toml"),
    };
    let script = WaypointScript::from_toml(text).expect("committed scripts are valid");
    debug_assert_eq!(script.task, task);
    script
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizationMode {
    None,
    Speed,
    Trajectory,
    #[serde(rename = "speed+trajectory")]
    SpeedPlusTrajectory,
}

impl RandomizationMode {
    pub const ALL: [RandomizationMode; 4] = [
        RandomizationMode::None,
        RandomizationMode::Speed,
        RandomizationMode::Trajectory,
        RandomizationMode::SpeedPlusTrajectory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RandomizationMode::None => "none",
            RandomizationMode::Speed => "speed",
            RandomizationMode::Trajectory => "trajectory",
            RandomizationMode::SpeedPlusTrajectory => "speed+trajectory",
        }
    }

    fn speed(self) -> bool {
        matches!(self, RandomizationMode::Speed | RandomizationMode::SpeedPlusTrajectory)
    }

    fn trajectory(self) -> bool {
        matches!(
            self,
            RandomizationMode::Trajectory | RandomizationMode::SpeedPlusTrajectory
        )
    }
}

impl fmt::Display for RandomizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RandomizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown randomization mode {s:?}")))
    }
}

/// Perturbed copy of `script`. Speed mode scales every segment speed by an
/// independent factor from `SPEED_RANGE`; trajectory mode shifts each
/// interior waypoint by up to `TRAJECTORY_JITTER` per axis. The first and
/// last waypoints never move.
pub fn randomize<R: Rng + ?Sized>(
    script: &WaypointScript,
    mode: RandomizationMode,
    rng: &mut R,
) -> WaypointScript {
    let mut out = script.clone();
    let n = out.waypoints.len();
    if mode.speed() {
        for w in &mut out.waypoints {
            w.speed *= rng.random_range(SPEED_RANGE.0..SPEED_RANGE.1);
        }
    }
    if mode.trajectory() {
        for w in &mut out.waypoints[1..n - 1] {
            for o in &mut w.offset {
                *o += rng.random_range(-TRAJECTORY_JITTER..=TRAJECTORY_JITTER);
            }
        }
    }
    out
}

/// Execution state of a script within one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScriptProgress {
    /// Index of the waypoint currently targeted.
    pub waypoint: usize,
}

/// Noise-free scripted action: a proportional velocity command toward the
/// current waypoint, capped at the segment speed and normalized by the
/// manipulator's max speed, plus the grip flag when the task has one.
pub fn scripted_action(
    env: &ClothEnv,
    script: &WaypointScript,
    progress: &mut ScriptProgress,
) -> Vec<f64> {
    let last = script.waypoints.len() - 1;
    let pos = env.state().manipulators[0].position;
    while progress.waypoint < last
        && (script.target(env, progress.waypoint) - pos).norm() <= WAYPOINT_TOLERANCE
    {
        progress.waypoint += 1;
    }
    let i = progress.waypoint;
    let physics = &env.config().physics;
    let gain = 0.5 / physics.control_dt();
    let d = script.target(env, i) - pos;
    let dist = d.norm();
    let v = if dist > 0.0 {
        d * (script.waypoints[i].speed.min(gain * dist) / dist)
    } else {
        Vec3::zeros()
    };
    let mut action: Vec<f64> = (v / physics.max_speed)
        .iter()
        .map(|c| c.clamp(-1.0, 1.0))
        .collect();
    if env.spec().has_grip() {
        let reached_last = i == last && dist <= WAYPOINT_TOLERANCE;
        let released = script.release_after.is_some_and(|r| i > r || (r == last && reached_last));
        let grip = i >= script.grasp_before && !released;
        action.push(if grip { 1.0 } else { -1.0 });
    }
    action
}

/// Adds clipped zero-mean Gaussian noise of standard deviation `std` to
/// every component and re-clips to `[-1, 1]`.
pub fn add_action_noise<R: Rng + ?Sized>(action: &mut [f64], std: f64, rng: &mut R) {
    if std <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("positive std");
    for a in action {
        let n: f64 = normal.sample(rng);
        *a = (*a + n.clamp(-2.0 * std, 2.0 * std)).clamp(-1.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clothsim::HalfSpace;
    use crate::envs::EnvConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(task: TaskId) -> ClothEnv {
        let mut e = ClothEnv::new(task, EnvConfig::default()).unwrap();
        e.reset(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        e
    }

    #[test]
    fn committed_scripts_parse() {
        for task in TaskId::ALL {
            let s = make_script(task);
            assert_eq!(s.task, task);
            assert!(s.waypoints.len() >= 2);
        }
    }

    #[test]
    fn diagonal_starts_within_grasp_radius() {
        let e = env(TaskId::DiagonalFold);
        let s = make_script(TaskId::DiagonalFold);
        let corner = e.state().positions[e.mesh().corners()[0]];
        assert!((s.target(&e, 0) - corner).norm() <= e.config().physics.grasp_radius);
        assert_eq!(s.grasp_before, 0);
    }

    #[test]
    fn sideways_waypoints_inside_workspace() {
        let e = env(TaskId::SidewaysFold);
        let s = make_script(TaskId::SidewaysFold);
        let HalfSpace { limit, .. } = e.workspace().half_spaces[0];
        for i in 0..s.waypoints.len() {
            assert!(e.workspace().contains(&s.target(&e, i)), "waypoint {i} beyond x={limit}");
        }
    }

    #[test]
    fn place_waypoints_stay_off_table() {
        let e = env(TaskId::PlaceOnTable);
        let s = make_script(TaskId::PlaceOnTable);
        for i in 0..s.waypoints.len() {
            assert!(e.workspace().contains(&s.target(&e, i)));
        }
    }

    #[test]
    fn invalid_scripts_rejected() {
        let one = "task = \"diagonal_fold\"\n[[waypoint]]\nanchor = \"cloth\"\noffset = [0.0, 0.0, 0.0]\nspeed = 1.0\n";
        assert!(WaypointScript::from_toml(one).is_err());
        let mut s = make_script(TaskId::DiagonalFold);
        s.waypoints[1].speed = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn anchors_parse() {
        let text = "task = \"sideways_fold\"\n\
            [[waypoint]]\nanchor = \"cloth\"\noffset = [1.0, 2.0, 3.0]\nspeed = 5.0\n\
            [[waypoint]]\nanchor = { goal = 1 }\noffset = [0.0, 0.0, 4.0]\nspeed = 6.0\n";
        let s = WaypointScript::from_toml(text).unwrap();
        assert_eq!(s.waypoints[0].anchor, Anchor::Cloth);
        assert_eq!(s.waypoints[1].anchor, Anchor::Goal(1));
        let e = env(TaskId::SidewaysFold);
        assert_eq!(s.target(&e, 1), e.goal().point(1) + Vec3::new(0.0, 0.0, 4.0));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in RandomizationMode::ALL {
            assert_eq!(m.name().parse::<RandomizationMode>().unwrap(), m);
        }
    }

    #[test]
    fn none_mode_is_identity() {
        let s = make_script(TaskId::SidewaysFold);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(randomize(&s, RandomizationMode::None, &mut rng), s);
    }

    #[test]
    fn trajectory_mode_keeps_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for task in TaskId::ALL {
            let s = make_script(task);
            for _ in 0..20 {
                let r = randomize(&s, RandomizationMode::Trajectory, &mut rng);
                let n = s.waypoints.len();
                assert_eq!(r.waypoints[0], s.waypoints[0]);
                assert_eq!(r.waypoints[n - 1], s.waypoints[n - 1]);
                for (a, b) in r.waypoints.iter().zip(&s.waypoints) {
                    assert_eq!(a.speed, b.speed);
                    for k in 0..3 {
                        assert!((a.offset[k] - b.offset[k]).abs() <= TRAJECTORY_JITTER);
                    }
                }
            }
        }
    }

    #[test]
    fn speed_mode_keeps_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = make_script(TaskId::PlaceOnTable);
        let r = randomize(&s, RandomizationMode::Speed, &mut rng);
        let mut changed = false;
        for (a, b) in r.waypoints.iter().zip(&s.waypoints) {
            assert_eq!(a.offset, b.offset);
            assert_eq!(a.anchor, b.anchor);
            let f = a.speed / b.speed;
            assert!((SPEED_RANGE.0..=SPEED_RANGE.1).contains(&f));
            changed |= a.speed != b.speed;
        }
        assert!(changed);
    }

    #[test]
    fn far_waypoint_command_points_at_it() {
        let e = env(TaskId::DiagonalFold);
        let mut s = make_script(TaskId::DiagonalFold);
        s.waypoints[0].offset = [80.0, -30.0, 40.0];
        let mut p = ScriptProgress::default();
        let a = scripted_action(&e, &s, &mut p);
        let d = (s.target(&e, 0) - e.state().manipulators[0].position).normalize();
        let cmd = Vec3::new(a[0], a[1], a[2]).normalize();
        assert!((cmd - d).norm() < 1e-12);
        assert_eq!(p.waypoint, 0);
    }

    #[test]
    fn reached_waypoint_advances() {
        let e = env(TaskId::DiagonalFold);
        let mut s = make_script(TaskId::DiagonalFold);
        let m = e.state().manipulators[0].position - e.reset_corners()[0];
        s.waypoints[0].offset = [m.x, m.y, m.z + 1.0];
        let mut p = ScriptProgress::default();
        scripted_action(&e, &s, &mut p);
        assert_eq!(p.waypoint, 1);
    }

    #[test]
    fn noise_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let mut a = [0.0, 0.5, -0.3];
            add_action_noise(&mut a, DEMO_NOISE_STD, &mut rng);
            for (x, y) in a.iter().zip([0.0, 0.5, -0.3]) {
                assert!((x - y).abs() <= 0.1 * 2.0 + 1e-12);
            }
        }
    }
}
