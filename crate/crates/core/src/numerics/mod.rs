//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Everything here is 64-bit. Batched tensors are row-major `(batch, features)`
//! and layer weights have shape `(out, in)`, so a layer computes
//! `z = x W^T + b` followed by its activation. Gradients are of a scalar loss
//! `L` that the caller defines by passing `dL/d(output)`; batch reduction
//! (sum vs. mean) is the caller's choice.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_params, write_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    /// Bounded squash onto (-1, 1).
    Tanh,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Tanh => z.mapv(f64::tanh),
        }
    }

    /// Multiplies `grad` in place by the activation derivative at `z`,
    /// where `a = f(z)` is the cached output.
    fn backprop(self, grad: &mut Array2<f64>, z: &Array2<f64>, a: &Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.zip_mut_with(z, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(a, |g, &a| *g *= 1.0 - a * a),
        }
    }
}

/// Weights and bias of one affine layer; also used for gradients and
/// optimizer moments, which share the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layer_sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    pub layers: Vec<Dense>,
}

pub type Gradients = Vec<Dense>;

/// Cached pre-activations and activations of one batched forward pass.
/// `inputs[l]` is the input to layer `l`; `pre[l]` its pre-activation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Uniform fan-in initialisation: weights of a layer with `n` inputs are
/// drawn from `U(-1/sqrt(n), 1/sqrt(n))`, biases start at zero.
pub fn mlp_init<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    hidden: Activation,
    output: Activation,
    rng: &mut R,
) -> Result<ParamSet> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least an input and an output size, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
            Dense {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(ParamSet {
        layer_sizes: layer_sizes.to_vec(),
        hidden,
        output,
        layers,
    })
}

impl ParamSet {
    pub fn from_layers(
        layers: Vec<Dense>,
        hidden: Activation,
        output: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        let mut sizes = vec![layers[0].weights.ncols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != *sizes.last().unwrap() || l.bias.len() != l.weights.nrows() {
                return Err(Error::Shape(format!("layer {i} does not chain")));
            }
            sizes.push(l.weights.nrows());
        }
        if sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(Self {
            layer_sizes: sizes,
            hidden,
            output,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Dense::all_finite)
    }

    pub fn zero_grads(&self) -> Gradients {
        self.layers.iter().map(Dense::zeros_like).collect()
    }

    /// Multiplies the last layer's weights by `factor` (small initial actions).
    pub fn scale_output_layer(&mut self, factor: f64) {
        if let Some(last) = self.layers.last_mut() {
            last.weights *= factor;
        }
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn same_shape(&self, other: &ParamSet) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    /// Batched forward pass over rows of `input`.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<ForwardTrace> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.depth());
        let mut pre = Vec::with_capacity(self.depth());
        let mut x = input.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights.t()) + &layer.bias;
            let a = self.activation_of(l).apply(&z);
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(ForwardTrace {
            inputs,
            pre,
            output: x,
        })
    }

    /// Forward pass without keeping the trace.
    pub fn predict_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut x = input.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights.t()) + &layer.bias;
            x = self.activation_of(l).apply(&z);
        }
        Ok(x)
    }

    /// Backpropagates `output_grad = dL/d(output)` through a trace produced
    /// by [`ParamSet::forward_batch`] on these parameters. Returns the
    /// parameter gradients and `dL/d(input)`.
    pub fn backward_batch(
        &self,
        trace: &ForwardTrace,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if trace.depth() != self.depth() {
            return Err(Error::Shape(format!(
                "trace has {} layers, network has {}",
                trace.depth(),
                self.depth()
            )));
        }
        if output_grad.dim() != trace.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.dim(),
                trace.output.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.depth());
        let mut g = output_grad.to_owned();
        for l in (0..self.depth()).rev() {
            let post = if l + 1 == self.depth() {
                &trace.output
            } else {
                &trace.inputs[l + 1]
            };
            self.activation_of(l).backprop(&mut g, &trace.pre[l], post);
            let dw = g.t().dot(&trace.inputs[l]);
            let db = g.sum_axis(Axis(0));
            let gx = g.dot(&self.layers[l].weights);
            grads.push(Dense {
                weights: dw,
                bias: db,
            });
            g = gx;
        }
        grads.reverse();
        Ok((grads, g))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let trace = self.forward_batch(x)?;
        Ok((trace.output.row(0).to_vec(), trace))
    }

    /// Single-sample backward pass.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (grads, gx) = self.backward_batch(trace, g)?;
        Ok((grads, gx.row(0).to_vec()))
    }
}

/// `target <- (1 - tau) target + tau online`, elementwise.
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
    }
    if !target.same_shape(online) {
        return Err(Error::Shape(format!(
            "target {:?} vs online {:?}",
            target.layer_sizes, online.layer_sizes
        )));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        t.weights
            .zip_mut_with(&o.weights, |t, &o| *t = (1.0 - tau) * *t + tau * o);
        t.bias
            .zip_mut_with(&o.bias, |t, &o| *t = (1.0 - tau) * *t + tau * o);
    }
    Ok(())
}

/// Elementwise `acc += scale * g`.
pub fn add_scaled(acc: &mut Gradients, g: &Gradients, scale: f64) {
    for (a, g) in acc.iter_mut().zip(g) {
        a.weights.scaled_add(scale, &g.weights);
        a.bias.scaled_add(scale, &g.bias);
    }
}

/// Largest absolute parameter difference between two same-shaped networks.
pub fn max_abs_diff(a: &ParamSet, b: &ParamSet) -> f64 {
    a.layers
        .iter()
        .zip(&b.layers)
        .flat_map(|(x, y)| {
            x.weights
                .iter()
                .zip(y.weights.iter())
                .chain(x.bias.iter().zip(y.bias.iter()))
                .map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}
