//! Prints manipulator and tracked-corner positions every 10 steps of one
//! noise-free scripted episode.
//!
//! cargo run --release --example trace_script -- <task> [seed] [script.toml]

use dynacloth::demos::{make_script, scripted_action, ScriptProgress, WaypointScript};
use dynacloth::envs::{ClothEnv, EnvConfig, TaskId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dynacloth::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let task: TaskId = args.get(1).map(String::as_str).unwrap_or("diagonal").parse()?;
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let script = match args.get(3) {
        Some(path) => WaypointScript::from_toml(&std::fs::read_to_string(path)?)?,
        None => make_script(task),
    };
    let mut env = ClothEnv::new(task, EnvConfig::default())?;
    env.reset(&mut ChaCha8Rng::seed_from_u64(seed))?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:7.1}")).collect::<Vec<_>>().join(" ");
    println!("goal {}", fmt(&env.goal().0));
    let mut progress = ScriptProgress::default();
    loop {
        let action = scripted_action(&env, &script, &mut progress);
        let r = env.step(&action)?;
        if r.info.t % 10 == 0 || r.info.done {
            let m = env.state().manipulators[0].position;
            println!(
                "{:4} wp {} hand {} corners {}",
                r.info.t,
                progress.waypoint,
                fmt(&[m.x, m.y, m.z]),
                fmt(&r.achieved.0)
            );
        }
        if r.info.done {
            println!("success {}", r.is_success);
            return Ok(());
        }
    }
}
