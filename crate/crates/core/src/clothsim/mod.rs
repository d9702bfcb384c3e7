//! Mass-spring cloth simulation.
//!
//! The cloth is a regular grid of point masses triangulated into a mesh and
//! connected by structural, shear and bend springs. One or two point
//! manipulators can bind ("grasp") a single node each. Forces are spring
//! forces, gravity and a global velocity damping; the table is a rigid box
//! handled by position projection with a Coulomb-style velocity friction.
//!
//! Units: 1 unit = 1 cm, time in seconds.

mod contact;
mod dump;
mod forces;
mod manipulator;
mod mesh;
mod step;

pub use contact::{resolve_table_contact, ContactReport, TableGeom};
pub use dump::{read_rollout, write_rollout, RolloutRecord};
pub use forces::{accumulate_forces, integrate, spring_force, ForceReport, SpringForce};
pub use manipulator::{command_manipulator, release, try_grasp, Axis, HalfSpace, Workspace};
pub use mesh::{build_cloth, ClothMesh, Placement, Spring, SpringKind};
pub use step::{sim_step, StepEvents};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manipulator {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Node currently bound to this manipulator.
    pub grasped: Option<usize>,
}

impl Manipulator {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            grasped: None,
        }
    }
}

/// Full simulator state. Positions in units, velocities in units/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub manipulators: Vec<Manipulator>,
    pub time: f64,
    /// Substeps executed since the state was built.
    pub substep_count: u64,
}

impl SimState {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_grasped(&self, node: usize) -> bool {
        self.manipulators.iter().any(|m| m.grasped == Some(node))
    }

    /// Binds `node` to manipulator `which` and snaps the node onto it.
    pub fn bind(&mut self, which: usize, node: usize) {
        let m = &mut self.manipulators[which];
        m.grasped = Some(node);
        self.positions[node] = m.position;
        self.velocities[node] = m.velocity;
    }

    pub fn kinetic_energy(&self, node_mass: f64) -> f64 {
        self.velocities
            .iter()
            .map(|v| 0.5 * node_mass * v.norm_squared())
            .sum()
    }

    pub fn check_consistent(&self, mesh: &ClothMesh) -> Result<()> {
        let n = mesh.node_count();
        if self.positions.len() != n || self.velocities.len() != n {
            return Err(Error::Shape(format!(
                "state has {} positions / {} velocities, mesh has {} nodes",
                self.positions.len(),
                self.velocities.len(),
                n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// units/s^2
    pub gravity: f64,
    /// force/units
    pub structural_stiffness: f64,
    pub shear_stiffness: f64,
    pub bend_stiffness: f64,
    /// force*s/units, along the spring axis
    pub spring_damping: f64,
    /// 1/s; applied as -c*m*v per node
    pub velocity_damping: f64,
    /// substep length, s
    pub dt: f64,
    pub substeps: usize,
    pub friction: f64,
    pub grasp_radius: f64,
    /// units/s
    pub max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gravity: 981.0,
            structural_stiffness: 120.0,
            shear_stiffness: 120.0,
            bend_stiffness: 12.0,
            spring_damping: 0.08,
            velocity_damping: 0.4,
            dt: 0.002,
            substeps: 10,
            friction: 0.5,
            grasp_radius: 5.0,
            max_speed: 150.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gravity,
            self.structural_stiffness,
            self.shear_stiffness,
            self.bend_stiffness,
            self.spring_damping,
            self.velocity_damping,
            self.dt,
            self.friction,
            self.grasp_radius,
            self.max_speed,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("simulation parameters must be finite".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be >= 1".into()));
        }
        if self.structural_stiffness < 0.0 || self.shear_stiffness < 0.0 || self.bend_stiffness < 0.0
        {
            return Err(Error::Config("stiffness must be >= 0".into()));
        }
        if self.friction < 0.0 {
            return Err(Error::Config("friction must be >= 0".into()));
        }
        if self.spring_damping < 0.0 || self.velocity_damping < 0.0 {
            return Err(Error::Config("damping must be >= 0".into()));
        }
        if self.grasp_radius < 0.0 || self.max_speed <= 0.0 {
            return Err(Error::Config(
                "grasp radius must be >= 0 and max speed > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn stiffness(&self, kind: SpringKind) -> f64 {
        match kind {
            SpringKind::Structural => self.structural_stiffness,
            SpringKind::Shear => self.shear_stiffness,
            SpringKind::Bend => self.bend_stiffness,
        }
    }

    /// Length of one control step in seconds.
    pub fn control_dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }
}
