//! Quick scripted-rollout diagnostics: success rate and final tracked-vertex
//! distances per randomization mode.
//!
//! cargo run --release --example script_study -- <task> [episodes] [seed]

use dynacloth::demos::{make_script, randomize, run_script_episode, study_seed, RandomizationMode};
use dynacloth::envs::{goal_distances, ClothEnv, EnvConfig, TaskId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dynacloth::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task: TaskId = args.get(1).map(String::as_str).unwrap_or("diagonal").parse()?;
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let script = match args.get(4) {
        Some(path) => dynacloth::demos::WaypointScript::from_toml(&std::fs::read_to_string(path)?)?,
        None => make_script(task),
    };
    let mut env = ClothEnv::new(task, EnvConfig::default())?;
    for mode in RandomizationMode::ALL {
        let mut ok = 0;
        let mut dists = Vec::new();
        let mut offsets: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(study_seed(seed, i as u64));
            let s = randomize(&script, mode, &mut rng);
            match run_script_episode(&mut env, &s, 0.0, i, &mut rng) {
                Ok((traj, log)) => {
                    ok += log.final_success as usize;
                    dists.push(goal_distances(traj.achieved.last().unwrap(), &traj.goal)?);
                    let off: Vec<f64> = traj.achieved.last().unwrap().iter().zip(&traj.goal).map(|(a, g)| a - g).collect();
                    offsets.push(off);
                }
                Err(e) => println!("episode {i}: {e}"),
            }
        }
        let k = dists.first().map_or(0, Vec::len);
        let means: Vec<String> = (0..k)
            .map(|j| format!("{:.1}", dists.iter().map(|d| d[j]).sum::<f64>() / dists.len() as f64))
            .collect();
        println!(
            "{task:>9} {mode:>17}: success {:.2}  mean final dist [{}]",
            ok as f64 / n as f64,
            means.join(", ")
        );
        if mode == RandomizationMode::None {
            let m = offsets.first().map_or(0, Vec::len);
            let mean_off: Vec<String> = (0..m)
                .map(|j| format!("{:.1}", offsets.iter().map(|d| d[j]).sum::<f64>() / offsets.len() as f64))
                .collect();
            println!("    mean final offset [{}]", mean_off.join(", "));
            for o in offsets.iter().take(8) {
                let v: Vec<String> = o.iter().map(|x| format!("{x:.1}")).collect();
                println!("    [{}]", v.join(", "));
            }
        }
    }
    Ok(())
}
