use super::{
    accumulate_forces, command_manipulator, integrate, release, resolve_table_contact, try_grasp,
    ClothMesh, SimConfig, SimState, TableGeom, Vec3, Workspace,
};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    /// (manipulator, node) bindings created during this control step.
    pub grasped: Vec<(usize, usize)>,
    /// (manipulator, node) bindings dropped during this control step.
    pub released: Vec<(usize, usize)>,
    /// A grasp was requested but no node was in reach.
    pub grasp_failed: bool,
    /// The manipulator command hit a workspace boundary.
    pub clamped: bool,
    pub singular_springs: usize,
}

fn enforce_grasps(state: &mut SimState) {
    for k in 0..state.manipulators.len() {
        if let Some(node) = state.manipulators[k].grasped {
            state.positions[node] = state.manipulators[k].position;
            state.velocities[node] = state.manipulators[k].velocity;
        }
    }
}

/// Advances one control step (`config.substeps` physics substeps).
///
/// Each substep moves the manipulators, applies the grip request
/// (`Some(true)` grasps if unbound, `Some(false)` releases, `None` leaves
/// bindings alone), accumulates forces, integrates, resolves table contact
/// and finally re-binds grasped nodes onto their manipulators.
#[allow(clippy::too_many_arguments)]
pub fn sim_step(
    state: &mut SimState,
    manip_command: &Vec3,
    grip: Option<bool>,
    mesh: &ClothMesh,
    config: &SimConfig,
    table: &TableGeom,
    workspace: &Workspace,
    scratch: &mut Vec<Vec3>,
) -> Result<StepEvents> {
    let mut events = StepEvents::default();
    for _ in 0..config.substeps {
        events.clamped |=
            command_manipulator(state, manip_command, workspace, config.max_speed, config.dt);
        match grip {
            Some(true) => {
                for k in 0..state.manipulators.len() {
                    if state.manipulators[k].grasped.is_none() {
                        match try_grasp(state, k, config.grasp_radius) {
                            Some(node) => events.grasped.push((k, node)),
                            None => events.grasp_failed = true,
                        }
                    }
                }
            }
            Some(false) => {
                for k in 0..state.manipulators.len() {
                    if let Some(node) = release(state, k) {
                        events.released.push((k, node));
                    }
                }
            }
            None => {}
        }
        enforce_grasps(state);
        let report = accumulate_forces(state, mesh, config, scratch)?;
        events.singular_springs += report.singular_springs.len();
        integrate(state, scratch, config.dt, mesh)?;
        resolve_table_contact(state, table, config.friction, config.gravity, config.dt);
        enforce_grasps(state);
    }
    // A failed attempt that later succeeded within the same step is not a failure.
    if !events.grasped.is_empty() {
        events.grasp_failed = false;
    }
    Ok(events)
}
