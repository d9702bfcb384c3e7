use serde::{Deserialize, Serialize};

use super::{SimState, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Axis-aligned half-space `p[axis] <= limit` (`upper`) or `p[axis] >= limit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub axis: Axis,
    pub limit: f64,
    pub upper: bool,
}

impl HalfSpace {
    pub fn at_most(axis: Axis, limit: f64) -> Self {
        Self {
            axis,
            limit,
            upper: true,
        }
    }

    pub fn at_least(axis: Axis, limit: f64) -> Self {
        Self {
            axis,
            limit,
            upper: false,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let c = p[self.axis.index()];
        if self.upper {
            c <= self.limit
        } else {
            c >= self.limit
        }
    }
}

/// Intersection of half-spaces; empty means unbounded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub half_spaces: Vec<HalfSpace>,
}

impl Workspace {
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.half_spaces.iter().all(|h| h.contains(p))
    }

    /// Clamps `p` into the workspace; returns which axes were clamped.
    pub fn clamp(&self, p: &mut Vec3) -> [bool; 3] {
        let mut clamped = [false; 3];
        for h in &self.half_spaces {
            let i = h.axis.index();
            let outside = if h.upper { p[i] > h.limit } else { p[i] < h.limit };
            if outside {
                p[i] = h.limit;
                clamped[i] = true;
            }
        }
        clamped
    }
}

/// Moves every manipulator with the same commanded velocity for `dt`.
///
/// The command is first scaled down to `max_speed` if longer. Positions are
/// then clamped into `workspace`; a clamped axis reports zero velocity.
/// Returns true if any axis of any manipulator was clamped.
pub fn command_manipulator(
    state: &mut SimState,
    target_velocity: &Vec3,
    workspace: &Workspace,
    max_speed: f64,
    dt: f64,
) -> bool {
    let speed = target_velocity.norm();
    let v = if speed > max_speed {
        target_velocity * (max_speed / speed)
    } else {
        *target_velocity
    };
    let mut any = false;
    for m in &mut state.manipulators {
        let mut p = m.position + v * dt;
        let clamped = workspace.clamp(&mut p);
        let mut realized = v;
        for (i, &c) in clamped.iter().enumerate() {
            if c {
                realized[i] = 0.0;
                any = true;
            }
        }
        m.position = p;
        m.velocity = realized;
    }
    any
}

/// Binds the nearest free node within `grasp_radius` to manipulator `which`.
/// Ties go to the lowest node index. Returns the bound node, if any.
pub fn try_grasp(state: &mut SimState, which: usize, grasp_radius: f64) -> Option<usize> {
    if let Some(node) = state.manipulators[which].grasped {
        return Some(node);
    }
    let p = state.manipulators[which].position;
    let r2 = grasp_radius * grasp_radius;
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in state.positions.iter().enumerate() {
        let d2 = (x - p).norm_squared();
        if d2 > r2 || state.is_grasped(i) {
            continue;
        }
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    let (node, _) = best?;
    state.bind(which, node);
    Some(node)
}

pub fn release(state: &mut SimState, which: usize) -> Option<usize> {
    state.manipulators[which].grasped.take()
}
