//! Hill-climbing search over a script's interior waypoints and speeds,
//! scored by unrandomized success rate. Used to author the committed
//! scripts; prints the best script as TOML.
//!
//! cargo run --release --example tune_script -- <task> <iterations> [episodes] [seed]

use dynacloth::demos::{make_script, run_script_episode, study_seed, WaypointScript};
use dynacloth::envs::{goal_distances, ClothEnv, EnvConfig, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn score(env: &mut ClothEnv, script: &WaypointScript, n: usize, seed: u64) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(study_seed(seed, i as u64));
        match run_script_episode(env, script, 0.0, i, &mut rng) {
            Ok((traj, log)) => {
                let d = goal_distances(traj.achieved.last().unwrap(), &traj.goal).unwrap();
                let worst = d.iter().cloned().fold(0.0, f64::max);
                total += log.final_success as u8 as f64 - 0.002 * worst;
            }
            Err(_) => total -= 1.0,
        }
    }
    total / n as f64
}

fn main() -> dynacloth::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task: TaskId = args[1].parse()?;
    let iters: usize = args[2].parse().unwrap();
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut env = ClothEnv::new(task, EnvConfig::default())?;
    let vmax = env.config().physics.max_speed;
    let mut best = match args.get(5) {
        Some(path) => WaypointScript::from_toml(&std::fs::read_to_string(path)?)?,
        None => make_script(task),
    };
    let mut best_score = score(&mut env, &best, n, seed);
    eprintln!("start {best_score:.3}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = best.waypoints.len() - 1;
    for it in 0..iters {
        let mut cand = best.clone();
        let step = if rng.random::<f64>() < 0.5 { 3.0 } else { 10.0 };
        for (i, w) in cand.waypoints.iter_mut().enumerate() {
            if i == 0 {
                continue;
            }
            // Place moves both hands together; sideways shifts only
            // misalign the cloth with its goal.
            let first_axis = if task == TaskId::PlaceOnTable { 1 } else { 0 };
            for o in &mut w.offset[first_axis..] {
                if rng.random::<f64>() < 0.4 {
                    *o += rng.random_range(-step..step);
                }
            }
            if i == last && task != TaskId::PlaceOnTable {
                // Keep the final point well inside the success radius.
                w.offset[0] = w.offset[0].clamp(-4.0, 4.0);
                w.offset[1] = w.offset[1].clamp(-4.0, 4.0);
                w.offset[2] = w.offset[2].clamp(1.0, 5.0);
            }
            if rng.random::<f64>() < 0.3 {
                w.speed = (w.speed * rng.random_range(0.8..1.25)).clamp(20.0, vmax);
            }
        }
        let s = score(&mut env, &cand, n, seed);
        if s >= best_score {
            if s > best_score {
                eprintln!("iter {it}: {s:.3}");
            }
            best = cand;
            best_score = s;
        }
    }
    println!("# score {best_score:.3}");
    println!("{}", toml::to_string(&best).unwrap());
    Ok(())
}
