use serde::{Deserialize, Serialize};

use super::{Manipulator, SimState, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpringKind {
    Structural,
    Shear,
    Bend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub a: usize,
    pub b: usize,
    pub rest_length: f64,
    pub kind: SpringKind,
}

/// Where the grid is laid out: node `(row, col)` sits at
/// `origin + col * spacing * col_axis + row * spacing * row_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub origin: Vec3,
    pub col_axis: Vec3,
    pub row_axis: Vec3,
}

impl Placement {
    /// Flat on a horizontal plane, columns along +x and rows along +y.
    pub fn flat(origin: Vec3) -> Self {
        Self {
            origin,
            col_axis: Vec3::x(),
            row_axis: Vec3::y(),
        }
    }

    /// Vertical sheet, columns along +x and rows hanging down along -z.
    pub fn hanging(origin: Vec3) -> Self {
        Self {
            origin,
            col_axis: Vec3::x(),
            row_axis: -Vec3::z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClothMesh {
    pub n_rows: usize,
    pub n_cols: usize,
    pub side_length: f64,
    pub rest_positions: Vec<Vec3>,
    pub node_mass: f64,
    pub triangles: Vec<[usize; 3]>,
    pub springs: Vec<Spring>,
}

impl ClothMesh {
    pub fn node_count(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    /// Corner node indices in the order (0,0), (0,last), (last,0), (last,last).
    pub fn corners(&self) -> [usize; 4] {
        let (r, c) = (self.n_rows - 1, self.n_cols - 1);
        [
            self.index(0, 0),
            self.index(0, c),
            self.index(r, 0),
            self.index(r, c),
        ]
    }

    pub fn total_mass(&self) -> f64 {
        self.node_mass * self.node_count() as f64
    }
}

/// Builds a flat, force-free square cloth of `n_rows x n_cols` nodes.
///
/// Structural springs join grid neighbours, shear springs cross every cell
/// diagonal and bend springs skip one node along rows and columns. Every
/// rest length is the initial endpoint distance.
pub fn build_cloth(
    n_rows: usize,
    n_cols: usize,
    side_length: f64,
    total_mass: f64,
    placement: &Placement,
) -> Result<(ClothMesh, SimState)> {
    if n_rows < 2 || n_cols < 2 {
        return Err(Error::Config(format!(
            "cloth grid must be at least 2x2, got {n_rows}x{n_cols}"
        )));
    }
    if !(side_length > 0.0 && side_length.is_finite()) {
        return Err(Error::Config(format!(
            "side length must be positive, got {side_length}"
        )));
    }
    if !(total_mass > 0.0 && total_mass.is_finite()) {
        return Err(Error::Config(format!(
            "total mass must be positive, got {total_mass}"
        )));
    }
    let col_step = side_length / (n_cols - 1) as f64;
    let row_step = side_length / (n_rows - 1) as f64;
    let idx = |r: usize, c: usize| r * n_cols + c;

    let mut positions = Vec::with_capacity(n_rows * n_cols);
    for r in 0..n_rows {
        for c in 0..n_cols {
            positions.push(
                placement.origin
                    + placement.col_axis * (c as f64 * col_step)
                    + placement.row_axis * (r as f64 * row_step),
            );
        }
    }

    let mut springs = Vec::new();
    let mut add = |a: usize, b: usize, kind: SpringKind| {
        let rest_length = (positions[b] - positions[a]).norm();
        springs.push(Spring {
            a,
            b,
            rest_length,
            kind,
        });
    };
    for r in 0..n_rows {
        for c in 0..n_cols {
            if c + 1 < n_cols {
                add(idx(r, c), idx(r, c + 1), SpringKind::Structural);
            }
            if r + 1 < n_rows {
                add(idx(r, c), idx(r + 1, c), SpringKind::Structural);
            }
        }
    }
    for r in 0..n_rows - 1 {
        for c in 0..n_cols - 1 {
            add(idx(r, c), idx(r + 1, c + 1), SpringKind::Shear);
            add(idx(r, c + 1), idx(r + 1, c), SpringKind::Shear);
        }
    }
    for r in 0..n_rows {
        for c in 0..n_cols {
            if c + 2 < n_cols {
                add(idx(r, c), idx(r, c + 2), SpringKind::Bend);
            }
            if r + 2 < n_rows {
                add(idx(r, c), idx(r + 2, c), SpringKind::Bend);
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * (n_rows - 1) * (n_cols - 1));
    for r in 0..n_rows - 1 {
        for c in 0..n_cols - 1 {
            triangles.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
            triangles.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
        }
    }

    let node_count = n_rows * n_cols;
    let mesh = ClothMesh {
        n_rows,
        n_cols,
        side_length,
        rest_positions: positions.clone(),
        node_mass: total_mass / node_count as f64,
        triangles,
        springs,
    };
    let state = SimState {
        positions,
        velocities: vec![Vec3::zeros(); node_count],
        manipulators: Vec::<Manipulator>::new(),
        time: 0.0,
        substep_count: 0,
    };
    Ok((mesh, state))
}
