use serde::{Deserialize, Serialize};

use super::{SimState, Vec3};
use crate::error::{Error, Result};

/// Rigid table: a box whose top face sits at `height` over the rectangle
/// `[min_x, max_x] x [min_y, max_y]` and which extends downwards without bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGeom {
    pub height: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl TableGeom {
    pub fn new(height: f64, min_x: f64, max_x: f64, min_y: f64, max_y: f64) -> Result<Self> {
        if !(min_x < max_x && min_y < max_y) {
            return Err(Error::Config("table extent is degenerate".into()));
        }
        Ok(Self {
            height,
            min_x,
            max_x,
            min_y,
            max_y,
        })
    }

    pub fn contains_xy(&self, p: &Vec3) -> bool {
        p.x > self.min_x && p.x < self.max_x && p.y > self.min_y && p.y < self.max_y
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactReport {
    pub top_contacts: usize,
    pub side_contacts: usize,
}

/// Projects nodes that ended up inside the table box back to its surface.
///
/// The exit face is the one with the smallest penetration depth, so nodes
/// arriving from above land on the top while nodes pulled in sideways below
/// the top are pushed out of the nearest side. The normal velocity is
/// zeroed if it points into the table. The tangential velocity is scaled by
/// `max(0, 1 - mu_eff)` with `mu_eff = mu |dv_n| / |v_t|`, where `dv_n` is
/// the normal velocity removed by the projection plus the per-substep
/// gravity load `g dt` on the top face. Grasped nodes are skipped.
pub fn resolve_table_contact(
    state: &mut SimState,
    table: &TableGeom,
    friction: f64,
    gravity: f64,
    dt: f64,
) -> ContactReport {
    let mut report = ContactReport::default();
    for i in 0..state.positions.len() {
        let p = state.positions[i];
        if !(p.z < table.height && table.contains_xy(&p)) || state.is_grasped(i) {
            continue;
        }
        let faces = [
            (table.height - p.z, Vec3::z()),
            (p.x - table.min_x, -Vec3::x()),
            (table.max_x - p.x, Vec3::x()),
            (p.y - table.min_y, -Vec3::y()),
            (table.max_y - p.y, Vec3::y()),
        ];
        let (k, &(depth, normal)) = faces
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("five faces");
        let top = k == 0;
        let mut proj = p + normal * depth;
        // Land exactly on the face plane.
        match k {
            0 => proj.z = table.height,
            1 => proj.x = table.min_x,
            2 => proj.x = table.max_x,
            3 => proj.y = table.min_y,
            _ => proj.y = table.max_y,
        }
        state.positions[i] = proj;

        let v = state.velocities[i];
        let vn = v.dot(&normal);
        let removed = if vn < 0.0 { -vn } else { 0.0 };
        let mut v_t = v - normal * vn;
        let load = removed + if top { gravity * dt } else { 0.0 };
        let vt_norm = v_t.norm();
        if vt_norm > 0.0 {
            let mu_eff = friction * load / vt_norm;
            v_t *= (1.0 - mu_eff).max(0.0);
        }
        state.velocities[i] = v_t + normal * vn.max(0.0);
        if top {
            report.top_contacts += 1;
        } else {
            report.side_contacts += 1;
        }
    }
    report
}
