//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use dynacloth::numerics::{mlp_init, Activation, ParamSet};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random network: 1 to 3 hidden layers of width 1 to 8, random
/// activations, and non-zero biases so no pre-activation starts on a ReLU
/// kink.
pub fn random_net(rng: &mut ChaCha8Rng) -> ParamSet {
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=6)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=8));
    }
    sizes.push(rng.random_range(1..=4));
    let acts = [Activation::Relu, Activation::Tanh, Activation::Identity];
    let hidden = acts[rng.random_range(0..3)];
    let output = acts[rng.random_range(0..3)];
    let mut net = mlp_init(&sizes, hidden, output, rng).unwrap();
    for l in &mut net.layers {
        l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    net
}

/// Loss `sum(c * net(x))` over a random batch, with fixed random `c`.
struct LinearLoss {
    x: Array2<f64>,
    c: Array2<f64>,
}

impl LinearLoss {
    fn value(&self, net: &ParamSet) -> f64 {
        let y = net.predict_batch(self.x.view()).unwrap();
        (&y * &self.c).sum()
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative disagreement between backprop and central differences
/// over every parameter and input of one random network.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_net(&mut rng);
    let batch = rng.random_range(1..=4);
    let x = Array2::from_shape_fn((batch, net.input_dim()), |_| rng.random_range(-2.0..2.0));
    let c = Array2::from_shape_fn((batch, net.output_dim()), |_| rng.random_range(-1.0..1.0));
    let loss = LinearLoss { x, c };
    let trace = net.forward_batch(loss.x.view()).unwrap();
    let (grads, gx) = net.backward_batch(&trace, loss.c.view()).unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for l in 0..net.depth() {
        let (rows, cols) = net.layers[l].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut p = net.clone();
                p.layers[l].weights[[i, j]] += h;
                let up = loss.value(&p);
                p.layers[l].weights[[i, j]] -= 2.0 * h;
                let down = loss.value(&p);
                worst = worst.max(rel_err((up - down) / (2.0 * h), grads[l].weights[[i, j]]));
            }
            let mut p = net.clone();
            p.layers[l].bias[i] += h;
            let up = loss.value(&p);
            p.layers[l].bias[i] -= 2.0 * h;
            let down = loss.value(&p);
            worst = worst.max(rel_err((up - down) / (2.0 * h), grads[l].bias[i]));
        }
    }
    for r in 0..batch {
        for j in 0..net.input_dim() {
            let mut probe = LinearLoss { x: loss.x.clone(), c: loss.c.clone() };
            probe.x[[r, j]] += h;
            let up = probe.value(&net);
            probe.x[[r, j]] -= 2.0 * h;
            let down = probe.value(&net);
            worst = worst.max(rel_err((up - down) / (2.0 * h), gx[[r, j]]));
        }
    }
    worst
}
