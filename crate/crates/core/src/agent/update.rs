use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::{AgentConfig, AgentNets};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, Gradients};
use crate::replay::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticStats {
    pub loss: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorStats {
    pub loss: f64,
    /// Mean Q of the policy's own actions.
    pub mean_q: f64,
    pub bc_loss: f64,
    /// Demonstration rows in the batch, and how many passed the Q-filter.
    pub n_demo: usize,
    pub filter_passed: usize,
}

fn join(obs: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), obs.view(), actions.view()]
}

fn ensure_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is {v}")))
    }
}

/// Clamped TD targets `r + gamma * Q'(s', pi'(s'))` for every row.
pub fn td_targets(nets: &AgentNets, batch: &Batch, config: &AgentConfig) -> Result<Array1<f64>> {
    let next = nets.normalizer.normalize_batch(batch.next_obs.view())?;
    let next_a = nets.target_actor.predict_batch(next.view())?;
    let next_q = nets.target_critic.predict_batch(join(&next, &next_a).view())?;
    let (lo, hi) = config.return_bounds();
    Ok(batch
        .rewards
        .iter()
        .zip(next_q.column(0))
        .map(|(r, q)| (r + config.gamma * q).clamp(lo, hi))
        .collect())
}

/// One Adam step on the critic's mean squared TD error.
pub fn critic_update(nets: &mut AgentNets, batch: &Batch, config: &AgentConfig) -> Result<CriticStats> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer("empty training batch".into()));
    }
    let y = td_targets(nets, batch, config)?;
    let obs = nets.normalizer.normalize_batch(batch.obs.view())?;
    let trace = nets.critic.forward_batch(join(&obs, &batch.actions).view())?;
    let q = trace.output().column(0).to_owned();
    let n = batch.len() as f64;
    let err = &q - &y;
    let loss = ensure_finite("critic loss", err.mapv(|e| e * e).sum() / n)?;
    let grad = (err * (2.0 / n)).insert_axis(Axis(1));
    let (grads, _) = nets.critic.backward_batch(&trace, grad.view())?;
    adam_step(&mut nets.critic, &grads, &mut nets.critic_opt, config.critic_lr)?;
    Ok(CriticStats {
        loss,
        mean_q: q.mean().unwrap_or(0.0),
    })
}

/// Behavior-cloning loss over demonstration rows:
/// `sum ||pi(o) - a||^2` restricted to rows whose demo action the critic
/// rates strictly above the policy's action. Returns the loss and the
/// filter mask.
pub fn bc_loss(nets: &AgentNets, demo: &Batch) -> Result<(f64, Vec<bool>)> {
    if demo.is_demo.iter().any(|d| !d) {
        return Err(Error::Contract("bc_loss given non-demonstration transitions".into()));
    }
    let obs = nets.normalizer.normalize_batch(demo.obs.view())?;
    let pi = nets.actor.predict_batch(obs.view())?;
    let mask = q_filter(nets, &obs, &pi, &demo.actions)?;
    let loss = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (&pi.row(i) - &demo.actions.row(i)).mapv(|d| d * d).sum())
        .sum();
    Ok((loss, mask))
}

fn q_filter(nets: &AgentNets, obs: &Array2<f64>, pi: &Array2<f64>, demo_actions: &Array2<f64>) -> Result<Vec<bool>> {
    let q_demo = nets.critic.predict_batch(join(obs, demo_actions).view())?;
    let q_pi = nets.critic.predict_batch(join(obs, pi).view())?;
    Ok(q_demo
        .column(0)
        .iter()
        .zip(q_pi.column(0))
        .map(|(d, p)| d > p)
        .collect())
}

/// Combined actor loss `lambda_q * (-mean Q(s, pi(o))) + lambda_bc * L_BC`
/// and its gradient with respect to the actor parameters. L_BC covers only
/// the demonstration rows of the batch.
pub fn actor_loss_and_grads(
    nets: &AgentNets,
    batch: &Batch,
    lambda_q: f64,
    lambda_bc: f64,
) -> Result<(ActorStats, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer("empty training batch".into()));
    }
    let n = batch.len();
    let act_dim = nets.action_dim();
    let obs = nets.normalizer.normalize_batch(batch.obs.view())?;
    let actor_trace = nets.actor.forward_batch(obs.view())?;
    let pi = actor_trace.output().clone();
    let critic_trace = nets.critic.forward_batch(join(&obs, &pi).view())?;
    let q_pi = critic_trace.output().column(0).to_owned();
    let mean_q = q_pi.mean().unwrap_or(0.0);

    let dq = Array2::from_elem((n, 1), -lambda_q / n as f64);
    let (_, d_input) = nets.critic.backward_batch(&critic_trace, dq.view())?;
    let mut d_pi = d_input.slice(s![.., d_input.ncols() - act_dim..]).to_owned();

    let demo_rows: Vec<usize> = (0..n).filter(|&i| batch.is_demo[i]).collect();
    let mut bc = 0.0;
    let mut passed = 0;
    if !demo_rows.is_empty() && lambda_bc > 0.0 {
        let obs_d = obs.select(Axis(0), &demo_rows);
        let pi_d = pi.select(Axis(0), &demo_rows);
        let act_d = batch.actions.select(Axis(0), &demo_rows);
        let mask = q_filter(nets, &obs_d, &pi_d, &act_d)?;
        for (k, &row) in demo_rows.iter().enumerate() {
            if !mask[k] {
                continue;
            }
            passed += 1;
            let gap = &pi.row(row) - &batch.actions.row(row);
            bc += gap.mapv(|d| d * d).sum();
            let mut g = d_pi.row_mut(row);
            g.scaled_add(2.0 * lambda_bc, &gap);
        }
    } else if !demo_rows.is_empty() {
        let obs_d = obs.select(Axis(0), &demo_rows);
        let pi_d = pi.select(Axis(0), &demo_rows);
        let act_d = batch.actions.select(Axis(0), &demo_rows);
        passed = q_filter(nets, &obs_d, &pi_d, &act_d)?.iter().filter(|&&m| m).count();
    }
    let loss = ensure_finite("actor loss", -lambda_q * mean_q + lambda_bc * bc)?;
    let (grads, _) = nets.actor.backward_batch(&actor_trace, d_pi.view())?;
    Ok((
        ActorStats {
            loss,
            mean_q,
            bc_loss: bc,
            n_demo: demo_rows.len(),
            filter_passed: passed,
        },
        grads,
    ))
}

/// One Adam step on the actor; the critic is left untouched.
pub fn actor_update(nets: &mut AgentNets, batch: &Batch, config: &AgentConfig) -> Result<ActorStats> {
    let (stats, grads) = actor_loss_and_grads(nets, batch, config.lambda_q, config.lambda_bc)?;
    adam_step(&mut nets.actor, &grads, &mut nets.actor_opt, config.actor_lr)?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Dense, ParamSet};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch_from(obs: Array2<f64>, actions: Array2<f64>, rewards: Vec<f64>, demo: Vec<bool>) -> Batch {
        let n = rewards.len();
        Batch {
            next_obs: obs.clone(),
            obs,
            actions,
            rewards: Array1::from(rewards),
            done: vec![false; n],
            is_demo: demo,
            relabeled: vec![false; n],
        }
    }

    fn random_batch(nets: &AgentNets, n: usize, n_demo: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let od = nets.obs_dim();
        let ad = nets.action_dim();
        let obs = Array2::from_shape_fn((n, od), |_| rng.random_range(-2.0..2.0));
        let next = Array2::from_shape_fn((n, od), |_| rng.random_range(-2.0..2.0));
        let actions = Array2::from_shape_fn((n, ad), |_| rng.random_range(-1.0..1.0));
        let rewards = (0..n).map(|_| if rng.random::<bool>() { 0.0 } else { -1.0 }).collect();
        let mut b = batch_from(obs, actions, rewards, (0..n).map(|i| i >= n - n_demo).collect());
        b.next_obs = next;
        b
    }

    /// Critic whose Q is `w . action` (observation ignored), built from
    /// identity-activation layers so orderings are known in closed form.
    fn linear_critic(obs_dim: usize, w: &[f64]) -> ParamSet {
        let mut weights = Array2::zeros((1, obs_dim + w.len()));
        for (j, v) in w.iter().enumerate() {
            weights[[0, obs_dim + j]] = *v;
        }
        ParamSet::from_layers(
            vec![Dense { weights, bias: Array1::zeros(1) }],
            Activation::Identity,
            Activation::Identity,
        )
        .unwrap()
    }

    /// Actor that outputs the constant `tanh(c)`.
    fn constant_actor(obs_dim: usize, c: &[f64]) -> ParamSet {
        ParamSet::from_layers(
            vec![Dense {
                weights: Array2::zeros((c.len(), obs_dim)),
                bias: Array1::from(c.to_vec()),
            }],
            Activation::Relu,
            Activation::Tanh,
        )
        .unwrap()
    }

    fn tiny_nets(actor: ParamSet, critic: ParamSet) -> AgentNets {
        let mut n = AgentNets::new(actor.input_dim(), actor.output_dim(), &[4], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        n.target_actor = actor.clone();
        n.target_critic = critic.clone();
        n.actor_opt = crate::numerics::AdamState::new(&actor, Default::default());
        n.critic_opt = crate::numerics::AdamState::new(&critic, Default::default());
        n.actor = actor;
        n.critic = critic;
        n
    }

    #[test]
    fn q_filter_truth_table() {
        // Q = a0. Policy outputs tanh(0.5) = 0.4621.
        let nets = tiny_nets(constant_actor(2, &[0.5]), linear_critic(2, &[1.0]));
        let pi = 0.5f64.tanh();
        let obs = Array2::zeros((4, 2));
        let actions = array![[0.9], [pi], [0.1], [-1.0]];
        let demo = batch_from(obs, actions, vec![-1.0; 4], vec![true; 4]);
        let (loss, mask) = bc_loss(&nets, &demo).unwrap();
        // Strictly better only; equal Q does not pass.
        assert_eq!(mask, vec![true, false, false, false]);
        assert!((loss - (pi - 0.9).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn filter_blocks_everything_when_policy_dominates() {
        let nets = tiny_nets(constant_actor(2, &[3.0]), linear_critic(2, &[1.0]));
        let obs = Array2::zeros((3, 2));
        let demo = batch_from(obs, array![[-0.5], [0.2], [0.9]], vec![-1.0; 3], vec![true; 3]);
        let (loss, mask) = bc_loss(&nets, &demo).unwrap();
        assert_eq!(loss, 0.0);
        assert!(mask.iter().all(|m| !m));
    }

    #[test]
    fn perfect_imitation_has_zero_bc_loss() {
        let nets = tiny_nets(constant_actor(2, &[0.3, -0.2]), linear_critic(2, &[-1.0, 1.0]));
        let pi = [0.3f64.tanh(), (-0.2f64).tanh()];
        let obs = Array2::zeros((2, 2));
        let actions = array![[pi[0], pi[1]], [pi[0], pi[1]]];
        let demo = batch_from(obs, actions, vec![-1.0; 2], vec![true; 2]);
        assert_eq!(bc_loss(&nets, &demo).unwrap().0, 0.0);
    }

    #[test]
    fn bc_loss_rejects_non_demo_rows() {
        let nets = tiny_nets(constant_actor(2, &[0.0]), linear_critic(2, &[1.0]));
        let b = batch_from(Array2::zeros((2, 2)), Array2::zeros((2, 1)), vec![-1.0; 2], vec![true, false]);
        assert!(matches!(bc_loss(&nets, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn td_targets_respect_return_bounds() {
        let config = AgentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = AgentNets::new(5, 2, &[8], &mut rng).unwrap();
        let (lo, hi) = config.return_bounds();
        for scale in [1e-3, 1.0, 1e3, -1e3] {
            nets.target_critic.scale_output_layer(scale);
            let b = random_batch(&nets, 64, 0, 5);
            for y in td_targets(&nets, &b, &config).unwrap() {
                assert!(y >= lo && y <= hi, "target {y}");
            }
        }
        assert!((lo + 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_critic_zero_reward_gives_zero_loss() {
        let config = AgentConfig::default();
        let mut nets = AgentNets::new(3, 1, &[4], &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for net in [&mut nets.critic, &mut nets.target_critic] {
            for l in &mut net.layers {
                l.weights.fill(0.0);
                l.bias.fill(0.0);
            }
        }
        let mut b = random_batch(&nets, 16, 0, 6);
        b.rewards.fill(0.0);
        let stats = critic_update(&mut nets, &b, &config).unwrap();
        assert_eq!(stats.loss, 0.0);
    }

    #[test]
    fn single_transition_td_error_by_hand() {
        // Critic Q = 2*a0 + 0.5; target actor outputs tanh(0.2); reward -1.
        let config = AgentConfig { gamma: 0.9, ..AgentConfig::default() };
        let mut critic = linear_critic(1, &[2.0]);
        critic.layers[0].bias[0] = 0.5;
        let mut nets = tiny_nets(constant_actor(1, &[0.2]), critic);
        // Target critic Q' = -3 for every input.
        nets.target_critic.layers[0].weights.fill(0.0);
        nets.target_critic.layers[0].bias[0] = -3.0;
        let b = batch_from(array![[0.0]], array![[0.25]], vec![-1.0], vec![false]);
        let y = -1.0 + 0.9 * -3.0;
        let q = 2.0 * 0.25 + 0.5;
        assert_eq!(td_targets(&nets, &b, &config).unwrap()[0], y);
        let stats = critic_update(&mut nets, &b, &config).unwrap();
        assert!((stats.loss - (q - y) * (q - y)).abs() < 1e-12);
    }

    #[test]
    fn actor_update_leaves_critic() {
        let config = AgentConfig::default();
        let mut nets = AgentNets::new(6, 2, &[8, 8], &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = random_batch(&nets, 32, 4, 8);
        let critic = nets.critic.clone();
        let actor = nets.actor.clone();
        actor_update(&mut nets, &b, &config).unwrap();
        assert_eq!(nets.critic, critic);
        assert_ne!(nets.actor, actor);
    }

    #[test]
    fn no_demo_weight_is_plain_policy_gradient() {
        // With lambda_bc = 0 the demo flags must not matter.
        let nets = AgentNets::new(6, 2, &[8], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut b = random_batch(&nets, 32, 8, 10);
        let (sa, ga) = actor_loss_and_grads(&nets, &b, 1.0, 0.0).unwrap();
        b.is_demo.fill(false);
        let (sb, gb) = actor_loss_and_grads(&nets, &b, 1.0, 0.0).unwrap();
        assert_eq!(sa.loss, sb.loss);
        assert_eq!(ga, gb);
    }

    #[test]
    fn zero_q_weight_and_perfect_demos_give_zero_gradient() {
        let nets = AgentNets::new(4, 2, &[8], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mut b = random_batch(&nets, 8, 8, 12);
        let obs = nets.normalizer.normalize_batch(b.obs.view()).unwrap();
        b.actions = nets.actor.predict_batch(obs.view()).unwrap();
        let (stats, grads) = actor_loss_and_grads(&nets, &b, 0.0, 1.0).unwrap();
        assert_eq!(stats.loss, 0.0);
        assert!(grads.iter().all(|g| g.weights.iter().chain(g.bias.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20 {
            let mut nets = AgentNets::new(5, 2, &[6, 5], &mut rng).unwrap();
            // Nonzero biases keep pre-activations off the ReLU kink at 0,
            // where a central difference sees the mean one-sided slope.
            for net in [&mut nets.actor, &mut nets.critic] {
                for layer in &mut net.layers {
                    layer.bias.mapv_inplace(|_| rng.random_range(-0.3..0.3));
                }
            }
            let b = random_batch(&nets, 12, 4, 100 + trial);
            let (l1, l2) = (0.7, 0.3);
            let (_, grads) = actor_loss_and_grads(&nets, &b, l1, l2).unwrap();
            let loss_at = |n: &AgentNets| actor_loss_and_grads(n, &b, l1, l2).unwrap().0.loss;
            let h = 1e-6;
            for l in 0..nets.actor.depth() {
                let (rows, cols) = nets.actor.layers[l].weights.dim();
                for (r, c) in [(0, 0), (rows - 1, cols - 1), (rows / 2, cols / 2)] {
                    let mut plus = nets.clone();
                    plus.actor.layers[l].weights[[r, c]] += h;
                    let mut minus = nets.clone();
                    minus.actor.layers[l].weights[[r, c]] -= h;
                    let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                    let an = grads[l].weights[[r, c]];
                    let tol = 1e-6 + 1e-4 * fd.abs().max(an.abs());
                    assert!((fd - an).abs() <= tol, "layer {l} ({r},{c}): fd {fd} vs {an}");
                }
                let mut plus = nets.clone();
                plus.actor.layers[l].bias[0] += h;
                let mut minus = nets.clone();
                minus.actor.layers[l].bias[0] -= h;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let an = grads[l].bias[0];
                assert!((fd - an).abs() <= 1e-6 + 1e-4 * fd.abs().max(an.abs()), "layer {l} bias: fd {fd} vs {an}");
            }
        }
    }
}
