use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{goal_distances, is_success, Goal, TaskId, TaskSpec};
use crate::clothsim::{
    build_cloth, sim_step, Axis, ClothMesh, HalfSpace, Manipulator, Placement, SimConfig,
    SimState, StepEvents, TableGeom, Vec3, Workspace,
};
use crate::error::{Error, Result};

/// Height of the top cloth edge above the table for the hanging cloth.
const HANG_HEIGHT: f64 = 40.0;
/// Horizontal standoff range of the hanging cloth from the table edge.
const HANG_STANDOFF: (f64, f64) = (2.0, 8.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Observed cloth points: 4, 8 or 12.
    pub n_points: usize,
    /// Nodes per cloth side.
    pub mesh_size: usize,
    pub side_length: f64,
    pub total_mass: f64,
    pub physics: SimConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_points: 8,
            mesh_size: 9,
            side_length: 100.0,
            total_mass: 0.2,
            physics: SimConfig::default(),
        }
    }
}

/// Observed node indices, in observation order: the four corners; then the
/// four edge midpoints (8 points); or instead the eight edge one-third
/// points (12 points).
pub fn observation_points(mesh: &ClothMesh, n_points: usize) -> Result<Vec<usize>> {
    let (lr, lc) = (mesh.n_rows - 1, mesh.n_cols - 1);
    let frac = |last: usize, num: usize, den: usize| ((last * num) as f64 / den as f64).round() as usize;
    let mut pts = mesh.corners().to_vec();
    match n_points {
        4 => {}
        8 => {
            let (mr, mc) = (frac(lr, 1, 2), frac(lc, 1, 2));
            pts.extend([
                mesh.index(0, mc),
                mesh.index(mr, 0),
                mesh.index(mr, lc),
                mesh.index(lr, mc),
            ]);
        }
        12 => {
            let (r1, r2) = (frac(lr, 1, 3), frac(lr, 2, 3));
            let (c1, c2) = (frac(lc, 1, 3), frac(lc, 2, 3));
            pts.extend([
                mesh.index(0, c1),
                mesh.index(0, c2),
                mesh.index(r1, 0),
                mesh.index(r2, 0),
                mesh.index(r1, lc),
                mesh.index(r2, lc),
                mesh.index(lr, c1),
                mesh.index(lr, c2),
            ]);
        }
        n => {
            return Err(Error::Config(format!(
                "observation point count must be 4, 8 or 12, got {n}"
            )))
        }
    }
    Ok(pts)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// Control step index after this step (1..=T).
    pub t: usize,
    pub done: bool,
    pub events: StepEvents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub is_success: bool,
    pub achieved: Goal,
    pub info: StepInfo,
}

/// One task instance. Observation layout:
/// `[cloth points (pos, vel) x n_points, manipulator pos, manipulator vel,
/// goal, grasp flag]`.
#[derive(Debug, Clone)]
pub struct ClothEnv {
    spec: TaskSpec,
    config: EnvConfig,
    mesh: ClothMesh,
    table: TableGeom,
    points: Vec<usize>,
    workspace: Workspace,
    state: SimState,
    /// Corner positions right after reset; the cloth reference frame.
    reset_corners: [Vec3; 4],
    goal: Goal,
    t: usize,
    min_distances: Vec<f64>,
    ever_succeeded: bool,
    scratch: Vec<Vec3>,
}

impl ClothEnv {
    pub fn new(task: TaskId, config: EnvConfig) -> Result<Self> {
        Self::with_spec(TaskSpec::new(task), config)
    }

    pub fn with_spec(spec: TaskSpec, config: EnvConfig) -> Result<Self> {
        spec.validate()?;
        config.physics.validate()?;
        let placement = match spec.id {
            TaskId::PlaceOnTable => Placement::hanging(Vec3::zeros()),
            _ => Placement::flat(Vec3::zeros()),
        };
        let (mesh, state) = build_cloth(
            config.mesh_size,
            config.mesh_size,
            config.side_length,
            config.total_mass,
            &placement,
        )?;
        let points = observation_points(&mesh, config.n_points)?;
        let reach = 1.5 * config.side_length;
        let table = match spec.id {
            TaskId::PlaceOnTable => {
                TableGeom::new(0.0, -reach, config.side_length + reach, -reach, 0.0)?
            }
            _ => TableGeom::new(
                0.0,
                -reach,
                config.side_length + reach,
                -reach,
                config.side_length + reach,
            )?,
        };
        let reset_corners = mesh.corners().map(|c| state.positions[c]);
        let goal = Goal(vec![0.0; spec.goal_dims()]);
        let n_tracked = spec.tracked_corners.len();
        Ok(Self {
            spec,
            config,
            mesh,
            table,
            points,
            workspace: Workspace::unbounded(),
            state,
            reset_corners,
            goal,
            t: 0,
            min_distances: vec![f64::INFINITY; n_tracked],
            ever_succeeded: false,
            scratch: Vec::new(),
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn mesh(&self) -> &ClothMesh {
        &self.mesh
    }

    pub fn table(&self) -> &TableGeom {
        &self.table
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn reset_corners(&self) -> &[Vec3; 4] {
        &self.reset_corners
    }

    pub fn observation_dim(&self) -> usize {
        6 * self.points.len() + 6 + self.spec.goal_dims() + 1
    }

    /// Offset of the goal block inside the observation.
    pub fn goal_offset(&self) -> usize {
        6 * self.points.len() + 6
    }

    pub fn min_distances(&self) -> &[f64] {
        &self.min_distances
    }

    pub fn ever_succeeded(&self) -> bool {
        self.ever_succeeded
    }

    /// Starts a new episode: places a flat cloth at a random pose inside the
    /// placement bound, parks the manipulator(s) at their start corner(s)
    /// and samples a fresh goal.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let b = self.spec.placement_bound;
        let jitter_x = rng.random_range(-b..=b);
        let origin = match self.spec.id {
            TaskId::PlaceOnTable => {
                let standoff = rng.random_range(HANG_STANDOFF.0..=HANG_STANDOFF.1);
                Vec3::new(jitter_x, standoff, self.table.height + HANG_HEIGHT)
            }
            _ => {
                let jitter_y = rng.random_range(-b..=b);
                Vec3::new(jitter_x, jitter_y, self.table.height)
            }
        };
        let positions = self.mesh.rest_positions.iter().map(|p| p + origin).collect();
        self.state = SimState {
            positions,
            velocities: vec![Vec3::zeros(); self.mesh.node_count()],
            manipulators: Vec::new(),
            time: 0.0,
            substep_count: 0,
        };
        let corners = self.mesh.corners();
        self.reset_corners = corners.map(|c| self.state.positions[c]);
        let lift = Vec3::new(0.0, 0.0, self.spec.manipulator_lift);
        for &slot in &self.spec.start_corners {
            self.state
                .manipulators
                .push(Manipulator::at(self.reset_corners[slot] + lift));
        }
        // The grasped node follows the manipulator and skips table contact,
        // so the manipulator itself may not enter the table top.
        let floor = HalfSpace::at_least(Axis::Z, self.table.height);
        self.workspace = match self.spec.id {
            TaskId::DiagonalFold => Workspace { half_spaces: vec![floor] },
            TaskId::SidewaysFold => Workspace {
                half_spaces: vec![
                    HalfSpace::at_most(Axis::X, origin.x + 0.5 * self.config.side_length),
                    floor,
                ],
            },
            TaskId::PlaceOnTable => Workspace {
                half_spaces: vec![HalfSpace::at_least(Axis::Y, self.table.max_y)],
            },
        };
        if self.spec.id == TaskId::PlaceOnTable {
            for (k, &slot) in self.spec.start_corners.iter().enumerate() {
                self.state.bind(k, corners[slot]);
            }
        }
        self.goal = self.sample_goal(rng);
        self.t = 0;
        self.min_distances = vec![f64::INFINITY; self.spec.tracked_corners.len()];
        self.ever_succeeded = false;
        Ok(self.observe())
    }

    /// Draws a goal relative to the current reset pose.
    ///
    /// Diagonal: a point on the cloth diagonal within `goal_radius` of the
    /// opposite corner. Sideways: the two destination corners shifted by one
    /// common horizontal offset drawn uniformly from the disc of radius
    /// `goal_radius`. Place: two points on the table top at the same
    /// distance `d ~ U(place_distance)` from the edge, one under each
    /// hanging corner, so their connecting segment is parallel to the edge.
    pub fn sample_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Goal {
        let spec = &self.spec;
        let r = spec.goal_radius;
        match spec.id {
            TaskId::DiagonalFold => {
                let from = self.reset_corners[spec.start_corners[0]];
                let to = self.reset_corners[spec.destination_corners[0]];
                let dir = (to - from).normalize();
                let s = rng.random_range(-r..=r);
                Goal::from_points(&[to + dir * s])
            }
            TaskId::SidewaysFold => {
                let (rho, theta): (f64, f64) = (
                    r * rng.random::<f64>().sqrt(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                );
                let offset = Vec3::new(rho * theta.cos(), rho * theta.sin(), 0.0);
                let pts: Vec<Vec3> = spec
                    .destination_corners
                    .iter()
                    .map(|&c| self.reset_corners[c] + offset)
                    .collect();
                Goal::from_points(&pts)
            }
            TaskId::PlaceOnTable => {
                let (lo, hi) = spec.place_distance;
                let d = rng.random_range(lo..=hi);
                let y = self.table.max_y - d;
                let pts: Vec<Vec3> = spec
                    .tracked_corners
                    .iter()
                    .map(|&c| Vec3::new(self.reset_corners[c].x, y, self.table.height))
                    .collect();
                Goal::from_points(&pts)
            }
        }
    }

    /// Overrides the episode goal (tests and scripted studies).
    pub fn set_goal(&mut self, goal: Goal) -> Result<()> {
        if goal.dims() != self.spec.goal_dims() {
            return Err(Error::Shape(format!(
                "goal has {} reals, task expects {}",
                goal.dims(),
                self.spec.goal_dims()
            )));
        }
        self.goal = goal;
        Ok(())
    }

    /// The goal this state satisfies: current tracked-corner positions.
    pub fn achieved_goal(&self) -> Goal {
        let corners = self.mesh.corners();
        let pts: Vec<Vec3> = self
            .spec
            .tracked_corners
            .iter()
            .map(|&c| self.state.positions[corners[c]])
            .collect();
        Goal::from_points(&pts)
    }

    pub fn observe(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.observation_dim());
        for &i in &self.points {
            obs.extend(self.state.positions[i].iter());
            obs.extend(self.state.velocities[i].iter());
        }
        let m = &self.state.manipulators[0];
        obs.extend(m.position.iter());
        obs.extend(m.velocity.iter());
        obs.extend(self.goal.as_slice());
        obs.push(if m.grasped.is_some() { 1.0 } else { 0.0 });
        obs
    }

    /// Applies one action: `action[0..3]` scaled by the max speed is the
    /// velocity command (broadcast to every manipulator) and `action[3]`,
    /// when present, requests a grasp if positive and a release otherwise.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != self.spec.action_dims {
            return Err(Error::Shape(format!(
                "action has {} components, task expects {}",
                action.len(),
                self.spec.action_dims
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("non-finite action".into()));
        }
        if self.t >= self.spec.horizon {
            return Err(Error::Contract("episode already finished; call reset".into()));
        }
        let a: Vec<f64> = action.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let vmax = self.config.physics.max_speed;
        let command = Vec3::new(a[0], a[1], a[2]) * vmax;
        let grip = if self.spec.has_grip() {
            Some(a[3] > 0.0)
        } else {
            None
        };
        let events = sim_step(
            &mut self.state,
            &command,
            grip,
            &self.mesh,
            &self.config.physics,
            &self.table,
            &self.workspace,
            &mut self.scratch,
        )?;
        self.t += 1;
        let achieved = self.achieved_goal();
        let dists = goal_distances(achieved.as_slice(), self.goal.as_slice())?;
        for (m, d) in self.min_distances.iter_mut().zip(&dists) {
            *m = m.min(*d);
        }
        let success = is_success(achieved.as_slice(), self.goal.as_slice(), self.spec.threshold)?;
        self.ever_succeeded |= success;
        Ok(StepResult {
            observation: self.observe(),
            reward: if success { 0.0 } else { -1.0 },
            is_success: success,
            achieved,
            info: StepInfo {
                t: self.t,
                done: self.t == self.spec.horizon,
                events,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::reward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(task: TaskId, n_points: usize) -> ClothEnv {
        ClothEnv::new(
            task,
            EnvConfig {
                n_points,
                ..EnvConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn observation_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cases = [
            (TaskId::DiagonalFold, 4, 34),
            (TaskId::DiagonalFold, 8, 58),
            (TaskId::DiagonalFold, 12, 82),
            (TaskId::SidewaysFold, 4, 37),
            (TaskId::SidewaysFold, 8, 61),
            (TaskId::SidewaysFold, 12, 85),
            (TaskId::PlaceOnTable, 4, 37),
            (TaskId::PlaceOnTable, 8, 61),
            (TaskId::PlaceOnTable, 12, 85),
        ];
        for (task, n, len) in cases {
            let mut e = env(task, n);
            let obs = e.reset(&mut rng).unwrap();
            assert_eq!(obs.len(), len, "{task} with {n} points");
            assert_eq!(e.observation_dim(), len);
            assert_eq!(6 * n + 6 + e.spec().goal_dims() + 1, len);
        }
    }

    #[test]
    fn invalid_point_count_rejected() {
        let r = ClothEnv::new(
            TaskId::DiagonalFold,
            EnvConfig {
                n_points: 6,
                ..EnvConfig::default()
            },
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn point_sets_on_nine_by_nine() {
        let e = env(TaskId::DiagonalFold, 4);
        let m = e.mesh();
        assert_eq!(observation_points(m, 4).unwrap(), vec![0, 8, 72, 80]);
        assert_eq!(observation_points(m, 8).unwrap()[4..], [4, 36, 44, 76]);
        assert_eq!(
            observation_points(m, 12).unwrap()[4..],
            [3, 5, 27, 45, 35, 53, 75, 77]
        );
    }

    #[test]
    fn reset_is_deterministic() {
        for task in TaskId::ALL {
            let mut a = env(task, 8);
            let mut b = env(task, 8);
            let oa = a.reset(&mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            let ob = b.reset(&mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            assert_eq!(oa, ob);
            assert_eq!(a.state(), b.state());
            assert_eq!(a.goal(), b.goal());
        }
    }

    #[test]
    fn diagonal_corner_within_grasp_reach() {
        let mut e = env(TaskId::DiagonalFold, 8);
        for seed in 0..20 {
            e.reset(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let corner = e.state().positions[e.mesh().corners()[0]];
            let d = (e.state().manipulators[0].position - corner).norm();
            assert!(d <= e.config().physics.grasp_radius);
            // Nothing else is as close.
            for (i, p) in e.state().positions.iter().enumerate() {
                if i != 0 {
                    assert!((e.state().manipulators[0].position - p).norm() > d);
                }
            }
        }
    }

    #[test]
    fn place_reset_pre_grasps_and_hangs() {
        let mut e = env(TaskId::PlaceOnTable, 8);
        e.reset(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = e.mesh().corners();
        let s = e.state();
        assert_eq!(s.manipulators[0].grasped, Some(c[0]));
        assert_eq!(s.manipulators[1].grasped, Some(c[1]));
        assert!(s.positions[c[2]].z < e.table().height);
        assert!(s.positions[c[3]].z < e.table().height);
        assert!(!e.table().contains_xy(&s.positions[c[2]]));
    }

    #[test]
    fn achieved_goal_at_reset_is_start_corner() {
        let mut e = env(TaskId::DiagonalFold, 4);
        e.reset(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let start = e.reset_corners()[0];
        assert_eq!(e.achieved_goal(), Goal::from_points(&[start]));
        let m = e.achieved_goal();
        assert!(is_success(m.as_slice(), m.as_slice(), 1e-6).unwrap());
        // Tracked vertex exactly at goal.
        e.set_goal(m.clone()).unwrap();
        assert_eq!(e.achieved_goal(), *e.goal());
    }

    #[test]
    fn goal_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for task in TaskId::ALL {
            let mut e = env(task, 4);
            for i in 0..1000 {
                if i % 100 == 0 {
                    e.reset(&mut rng).unwrap();
                }
                let g = e.sample_goal(&mut rng);
                let rc = *e.reset_corners();
                let spec = e.spec().clone();
                match task {
                    TaskId::DiagonalFold => {
                        let (a, d) = (rc[0], rc[3]);
                        let p = g.point(0);
                        assert!((p - d).norm() <= spec.goal_radius + 1e-9);
                        let cross = (d - a).cross(&(p - a)).norm() / (d - a).norm();
                        assert!(cross < 1e-9, "off-diagonal by {cross}");
                    }
                    TaskId::SidewaysFold => {
                        for (k, &c) in spec.destination_corners.iter().enumerate() {
                            assert!((g.point(k) - rc[c]).norm() <= spec.goal_radius + 1e-9);
                        }
                    }
                    TaskId::PlaceOnTable => {
                        let (p0, p1) = (g.point(0), g.point(1));
                        assert_eq!(p0.y, p1.y);
                        let d = e.table().max_y - p0.y;
                        assert!(d >= spec.place_distance.0 && d <= spec.place_distance.1);
                        assert_eq!(p0.z, e.table().height);
                        assert!(((p1.x - p0.x) - e.config().side_length).abs() < 1e-9);
                        assert!(e.table().contains_xy(&p0) && e.table().contains_xy(&p1));
                    }
                }
            }
        }
    }

    #[test]
    fn idle_episode_runs_exactly_horizon_and_fails() {
        for task in TaskId::ALL {
            let mut e = env(task, 4);
            e.reset(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            let action = vec![0.0; e.spec().action_dims];
            let mut steps = 0;
            loop {
                let r = e.step(&action).unwrap();
                steps += 1;
                assert_eq!(r.reward, -1.0);
                assert_eq!(
                    r.reward,
                    reward(r.achieved.as_slice(), e.goal().as_slice(), e.spec().threshold).unwrap()
                );
                if r.info.done {
                    break;
                }
            }
            assert_eq!(steps, e.spec().horizon);
            assert!(matches!(e.step(&action), Err(Error::Contract(_))));
        }
    }

    #[test]
    fn sideways_far_half_is_out_of_reach() {
        let mut e = env(TaskId::SidewaysFold, 8);
        e.reset(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let limit = e.workspace().half_spaces[0].limit;
        let mut clamped = false;
        for _ in 0..60 {
            let r = e.step(&[1.0, 0.0, 0.0, 0.0]).unwrap();
            clamped |= r.info.events.clamped;
        }
        assert!(clamped);
        assert_eq!(e.state().manipulators[0].position.x, limit);
        assert_eq!(e.state().manipulators[0].velocity.x, 0.0);
    }

    #[test]
    fn place_manipulators_move_together() {
        let mut e = env(TaskId::PlaceOnTable, 8);
        e.reset(&mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for k in 0..50 {
            let a = [(k as f64 * 0.1).sin(), -0.8, 0.5];
            e.step(&a).unwrap();
            let m = &e.state().manipulators;
            assert_eq!(m[0].velocity, m[1].velocity);
            assert!(m[0].position.y >= e.table().max_y);
        }
    }

    #[test]
    fn wrong_action_width_rejected() {
        let mut e = env(TaskId::PlaceOnTable, 4);
        e.reset(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(e.step(&[0.0; 4]), Err(Error::Shape(_))));
    }
}
