use super::{ClothMesh, SimConfig, SimState, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringForce {
    pub on_a: Vec3,
    pub on_b: Vec3,
    /// Endpoints coincided; the force direction is undefined and zero was returned.
    pub singular: bool,
}

/// Damped Hooke spring between `a` and `b`.
///
/// The signed magnitude `k (|d| - rest) + c (v_b - v_a) . d_hat` acts along
/// `d_hat = (b - a) / |d|`, pulling the endpoints together when stretched.
pub fn spring_force(
    pos_a: &Vec3,
    pos_b: &Vec3,
    vel_a: &Vec3,
    vel_b: &Vec3,
    rest_length: f64,
    stiffness: f64,
    damping: f64,
) -> SpringForce {
    let d = pos_b - pos_a;
    let len = d.norm();
    if len <= f64::EPSILON * rest_length.max(1.0) {
        return SpringForce {
            on_a: Vec3::zeros(),
            on_b: Vec3::zeros(),
            singular: true,
        };
    }
    let dir = d / len;
    let magnitude = stiffness * (len - rest_length) + damping * (vel_b - vel_a).dot(&dir);
    let on_a = dir * magnitude;
    SpringForce {
        on_a,
        on_b: -on_a,
        singular: false,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForceReport {
    /// Springs whose endpoints coincided this evaluation.
    pub singular_springs: Vec<usize>,
}

/// Per-node force: springs, gravity `(0, 0, -g m)` and velocity damping
/// `-c m v`. Table contact is resolved separately by projection.
pub fn accumulate_forces(
    state: &SimState,
    mesh: &ClothMesh,
    config: &SimConfig,
    forces: &mut Vec<Vec3>,
) -> Result<ForceReport> {
    state.check_consistent(mesh)?;
    let m = mesh.node_mass;
    forces.clear();
    forces.extend(
        state
            .velocities
            .iter()
            .map(|v| Vec3::new(0.0, 0.0, -config.gravity * m) - v * (config.velocity_damping * m)),
    );
    let mut report = ForceReport::default();
    add_spring_forces(state, mesh, config, forces, &mut report);
    Ok(report)
}

pub(crate) fn add_spring_forces(
    state: &SimState,
    mesh: &ClothMesh,
    config: &SimConfig,
    forces: &mut [Vec3],
    report: &mut ForceReport,
) {
    let (x, v) = (&state.positions, &state.velocities);
    for (i, s) in mesh.springs.iter().enumerate() {
        let f = spring_force(
            &x[s.a],
            &x[s.b],
            &v[s.a],
            &v[s.b],
            s.rest_length,
            config.stiffness(s.kind),
            config.spring_damping,
        );
        if f.singular {
            report.singular_springs.push(i);
        }
        forces[s.a] += f.on_a;
        forces[s.b] += f.on_b;
    }
}

/// Semi-implicit Euler: `v += f/m dt`, then `x += v dt`. Grasped nodes are
/// kinematic and left untouched.
pub fn integrate(state: &mut SimState, forces: &[Vec3], dt: f64, mesh: &ClothMesh) -> Result<()> {
    state.check_consistent(mesh)?;
    if forces.len() != state.node_count() {
        return Err(Error::Shape(format!(
            "{} forces for {} nodes",
            forces.len(),
            state.node_count()
        )));
    }
    let inv_m = 1.0 / mesh.node_mass;
    let step = state.substep_count;
    for i in 0..state.positions.len() {
        if state.is_grasped(i) {
            continue;
        }
        state.velocities[i] += forces[i] * (inv_m * dt);
        let v = state.velocities[i];
        state.positions[i] += v * dt;
        if !(state.positions[i].iter().all(|c| c.is_finite()) && v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::BlowUp { node: i, step });
        }
    }
    state.time += dt;
    state.substep_count += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clothsim::{build_cloth, Manipulator, Placement};
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn spring_at_rest_is_force_free() {
        let f = spring_force(&v(0., 0., 0.), &v(3., 4., 0.), &Vec3::zeros(), &Vec3::zeros(), 5.0, 10.0, 1.0);
        assert_eq!(f.on_a, Vec3::zeros());
        assert_eq!(f.on_b, Vec3::zeros());
        assert!(!f.singular);
    }

    #[test]
    fn stretched_spring_follows_hooke() {
        let f = spring_force(&v(0., 0., 0.), &v(0., 0., 12.5), &Vec3::zeros(), &Vec3::zeros(), 10.0, 4.0, 0.0);
        assert!((f.on_a - v(0., 0., 10.0)).norm() < 1e-12);
        assert!((f.on_b - v(0., 0., -10.0)).norm() < 1e-12);
    }

    #[test]
    fn coincident_endpoints_flagged() {
        let p = v(1., 2., 3.);
        let f = spring_force(&p, &p, &Vec3::zeros(), &v(1., 0., 0.), 1.0, 10.0, 1.0);
        assert!(f.singular);
        assert_eq!(f.on_a, Vec3::zeros());
    }

    proptest! {
        #[test]
        fn newtons_third_law(
            a in prop::array::uniform3(-50.0f64..50.0),
            b in prop::array::uniform3(-50.0f64..50.0),
            va in prop::array::uniform3(-100.0f64..100.0),
            vb in prop::array::uniform3(-100.0f64..100.0),
            rest in 0.1f64..30.0,
            k in 0.0f64..500.0,
            c in 0.0f64..2.0,
        ) {
            let f = spring_force(&Vec3::from(a), &Vec3::from(b), &Vec3::from(va), &Vec3::from(vb), rest, k, c);
            prop_assert_eq!(f.on_a + f.on_b, Vec3::zeros());
        }
    }

    #[test]
    fn free_space_flat_cloth_feels_only_gravity() {
        let (mesh, state) = build_cloth(9, 9, 100.0, 0.2, &Placement::flat(v(0., 0., 50.))).unwrap();
        let cfg = SimConfig::default();
        let mut forces = Vec::new();
        accumulate_forces(&state, &mesh, &cfg, &mut forces).unwrap();
        let g = v(0., 0., -cfg.gravity * mesh.node_mass);
        for f in &forces {
            assert!((f - g).norm() < 1e-12);
        }
    }

    #[test]
    fn single_spring_matches_unit_operation() {
        let (mesh, mut state) = build_cloth(2, 2, 10.0, 1.0, &Placement::flat(Vec3::zeros())).unwrap();
        let cfg = SimConfig {
            gravity: 0.0,
            velocity_damping: 0.0,
            shear_stiffness: 0.0,
            ..SimConfig::default()
        };
        // Stretch node 1 along x: only springs touching node 1 load up.
        state.positions[1] += v(2.0, 0.0, 0.0);
        state.velocities[1] = v(0.5, 0.0, 0.0);
        let mut forces = Vec::new();
        accumulate_forces(&state, &mesh, &cfg, &mut forces).unwrap();
        let mut expected = vec![Vec3::zeros(); 4];
        for s in &mesh.springs {
            let f = spring_force(
                &state.positions[s.a],
                &state.positions[s.b],
                &state.velocities[s.a],
                &state.velocities[s.b],
                s.rest_length,
                cfg.stiffness(s.kind),
                cfg.spring_damping,
            );
            expected[s.a] += f.on_a;
            expected[s.b] += f.on_b;
        }
        let s01 = spring_force(
            &state.positions[0],
            &state.positions[1],
            &state.velocities[0],
            &state.velocities[1],
            10.0,
            cfg.structural_stiffness,
            cfg.spring_damping,
        );
        // Node 0 only touches the stretched (0,1) spring and an unstretched one.
        assert!((forces[0] - s01.on_a).norm() < 1e-12);
        for i in 0..4 {
            assert!((forces[i] - expected[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn internal_forces_cancel() {
        let (mesh, mut state) = build_cloth(9, 9, 100.0, 0.2, &Placement::flat(Vec3::zeros())).unwrap();
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..state.node_count() {
            state.positions[i] += v(next(), next(), next()) * 8.0;
            state.velocities[i] = v(next(), next(), next()) * 40.0;
        }
        let cfg = SimConfig::default();
        let mut forces = vec![Vec3::zeros(); state.node_count()];
        let mut report = ForceReport::default();
        add_spring_forces(&state, &mesh, &cfg, &mut forces, &mut report);
        let net: Vec3 = forces.iter().sum();
        assert!(net.norm() <= 1e-9, "net spring force {net:?}");
    }

    #[test]
    fn zero_force_integration_is_drift() {
        let (mesh, mut state) = build_cloth(2, 2, 10.0, 1.0, &Placement::flat(Vec3::zeros())).unwrap();
        let vel = v(1.0, -2.0, 0.5);
        state.velocities = vec![vel; 4];
        let before = state.positions.clone();
        integrate(&mut state, &vec![Vec3::zeros(); 4], 0.01, &mesh).unwrap();
        for i in 0..4 {
            assert!((state.positions[i] - before[i] - vel * 0.01).norm() < 1e-15);
        }
    }

    #[test]
    fn discrete_free_fall() {
        let (mesh, mut state) = build_cloth(2, 2, 10.0, 1.0, &Placement::flat(Vec3::zeros())).unwrap();
        let g = 981.0;
        let dt = 0.002;
        let n = 250;
        let forces = vec![v(0., 0., -g * mesh.node_mass); 4];
        for _ in 0..n {
            integrate(&mut state, &forces, dt, &mesh).unwrap();
        }
        // v_n = -g n dt; x_n = -g dt^2 n (n+1) / 2 for semi-implicit Euler.
        let vz = -g * n as f64 * dt;
        let z = -g * dt * dt * (n * (n + 1)) as f64 / 2.0;
        for i in 0..4 {
            assert!((state.velocities[i].z - vz).abs() < 1e-9);
            assert!((state.positions[i].z - z).abs() < 1e-9);
        }
    }

    #[test]
    fn grasped_node_is_kinematic() {
        let (mesh, mut state) = build_cloth(2, 2, 10.0, 1.0, &Placement::flat(Vec3::zeros())).unwrap();
        state.manipulators.push(Manipulator::at(Vec3::zeros()));
        state.bind(0, 0);
        let forces = vec![v(5., 5., 5.); 4];
        integrate(&mut state, &forces, 0.01, &mesh).unwrap();
        assert_eq!(state.positions[0], Vec3::zeros());
        assert_ne!(state.positions[1], mesh.rest_positions[1]);
    }

    #[test]
    fn non_finite_state_reports_blow_up() {
        let (mesh, mut state) = build_cloth(2, 2, 10.0, 1.0, &Placement::flat(Vec3::zeros())).unwrap();
        let mut forces = vec![Vec3::zeros(); 4];
        forces[2] = v(f64::INFINITY, 0., 0.);
        let err = integrate(&mut state, &forces, 0.01, &mesh).unwrap_err();
        assert!(matches!(err, Error::BlowUp { node: 2, step: 0 }));
    }
}
