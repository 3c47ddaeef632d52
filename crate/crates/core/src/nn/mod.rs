//! Small dense networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer: the row-major
//! `outputs x inputs` weight matrix followed by the bias. Gradients use the
//! same layout, which lets [`Adam`] and polyak averaging work on plain slices.

mod adam;
mod checkpoint;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{LayerRecord, NetCheckpoint};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    Softmax,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
            Activation::Softmax => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Linear,
            3 => Activation::Softmax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward network of affine layers with per-layer activations.
#[derive(Debug)]
pub struct DenseNet {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
    // changes whenever the parameters do; tapes remember it
    stamp: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        Self {
            shapes: self.shapes.clone(),
            offsets: self.offsets.clone(),
            params: self.params.clone(),
            stamp: self.stamp,
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.shapes == other.shapes && self.params == other.params
    }
}

/// Activations cached by [`DenseNet::forward`].
#[derive(Debug, Clone)]
pub struct Tape {
    stamp: u64,
    // activations[0] is the input, activations[l + 1] the output of layer l
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape has an input")
    }
}

/// Parameter gradients in the network's flat layout plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            params: vec![0.0; net.parameter_count()],
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn clear(&mut self) {
        self.params.iter_mut().for_each(|g| *g = 0.0);
        self.input.iter_mut().for_each(|g| *g = 0.0);
    }
}

impl DenseNet {
    /// Chains `sizes[0] -> sizes[1] -> ... -> sizes[last]`.
    ///
    /// Hidden layers use `hidden`, the last layer `output`. Relu layers get
    /// Kaiming-uniform weights, all others Xavier-uniform; biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let shapes: Vec<LayerShape> = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| LayerShape {
                inputs: w[0],
                outputs: w[1],
                activation: if l + 2 == sizes.len() { output } else { hidden },
            })
            .collect();
        let mut net = Self::zeros(shapes)?;
        for l in 0..net.shapes.len() {
            let s = net.shapes[l];
            let bound = match s.activation {
                Activation::Relu => (6.0 / s.inputs as f64).sqrt(),
                _ => (6.0 / (s.inputs + s.outputs) as f64).sqrt(),
            };
            let start = net.offsets[l];
            for w in &mut net.params[start..start + s.inputs * s.outputs] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// All-zero parameters.
    pub fn zeros(shapes: Vec<LayerShape>) -> Result<Self> {
        let total = validate_shapes(&shapes)?;
        Self::from_parts(shapes, vec![0.0; total])
    }

    pub fn from_parts(shapes: Vec<LayerShape>, params: Vec<f64>) -> Result<Self> {
        let total = validate_shapes(&shapes)?;
        if params.len() != total {
            return Err(Error::ShapeMismatch {
                expected: total,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut acc = 0;
        for s in &shapes {
            offsets.push(acc);
            acc += s.param_count();
        }
        Ok(Self {
            shapes,
            offsets,
            params,
            stamp: fresh_stamp(),
        })
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameters; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.stamp = fresh_stamp();
        &mut self.params
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        let start = self.offsets[layer];
        &self.params[start..start + s.inputs * s.outputs]
    }

    pub fn layer_bias(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        let start = self.offsets[layer] + s.inputs * s.outputs;
        &self.params[start..start + s.outputs]
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.shapes.len() + 1);
        activations.push(input.to_vec());
        for l in 0..self.shapes.len() {
            let next = self.layer_forward(l, &activations[l]);
            activations.push(next);
        }
        let output = activations[activations.len() - 1].clone();
        Ok((
            output,
            Tape {
                stamp: self.stamp,
                activations,
            },
        ))
    }

    /// Forward pass without keeping a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in 0..self.shapes.len() {
            x = self.layer_forward(l, &x);
        }
        Ok(x)
    }

    pub fn backward(&self, tape: &Tape, output_gradient: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(tape, output_gradient, &mut grads)?;
        Ok(grads)
    }

    /// Adds the parameter gradients to `grads.params` and overwrites `grads.input`.
    pub fn backward_into(&self, tape: &Tape, output_gradient: &[f64], grads: &mut Gradients) -> Result<()> {
        if grads.params.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                actual: grads.params.len(),
            });
        }
        let input = self.propagate(tape, output_gradient, Some(&mut grads.params))?;
        grads.input = input;
        Ok(())
    }

    /// Gradient with respect to the input only.
    pub fn input_gradient(&self, tape: &Tape, output_gradient: &[f64]) -> Result<Vec<f64>> {
        self.propagate(tape, output_gradient, None)
    }

    fn propagate(&self, tape: &Tape, output_gradient: &[f64], mut param_grads: Option<&mut Vec<f64>>) -> Result<Vec<f64>> {
        if tape.stamp != self.stamp || tape.activations.len() != self.shapes.len() + 1 {
            return Err(Error::StaleTape);
        }
        if output_gradient.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: output_gradient.len(),
            });
        }
        let mut upstream = output_gradient.to_vec();
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            let out = &tape.activations[l + 1];
            let inp = &tape.activations[l];
            let delta = activation_backward(s.activation, out, &upstream);

            let w_start = self.offsets[l];
            let b_start = w_start + s.inputs * s.outputs;
            if let Some(pg) = param_grads.as_deref_mut() {
                for o in 0..s.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut pg[w_start + o * s.inputs..w_start + (o + 1) * s.inputs];
                    for (g, x) in row.iter_mut().zip(inp) {
                        *g += d * x;
                    }
                    pg[b_start + o] += d;
                }
            }
            let weights = &self.params[w_start..b_start];
            let mut down = vec![0.0; s.inputs];
            for o in 0..s.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (g, w) in down.iter_mut().zip(&weights[o * s.inputs..(o + 1) * s.inputs]) {
                    *g += d * w;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// `self <- tau * source + (1 - tau) * self`; `tau = 1` copies exactly.
    pub fn polyak_from(&mut self, source: &DenseNet, tau: f64) -> Result<()> {
        if source.shapes != self.shapes {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                actual: source.params.len(),
            });
        }
        if tau == 1.0 {
            self.params.copy_from_slice(&source.params);
        } else {
            for (t, s) in self.params.iter_mut().zip(&source.params) {
                *t = tau * s + (1.0 - tau) * *t;
            }
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let s = self.shapes[l];
        let weights = self.layer_weights(l);
        let bias = self.layer_bias(l);
        let mut z: Vec<f64> = (0..s.outputs)
            .map(|o| {
                bias[o]
                    + weights[o * s.inputs..(o + 1) * s.inputs]
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect();
        match s.activation {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Linear => {}
            Activation::Softmax => softmax_in_place(&mut z),
        }
        z
    }
}

fn validate_shapes(shapes: &[LayerShape]) -> Result<usize> {
    if shapes.is_empty() {
        return Err(Error::InvalidConfig("network needs at least one layer".into()));
    }
    for (i, s) in shapes.iter().enumerate() {
        if s.inputs == 0 || s.outputs == 0 {
            return Err(Error::InvalidConfig(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && shapes[i - 1].outputs != s.inputs {
            return Err(Error::InvalidConfig(format!(
                "layer {i} expects {} inputs but previous layer emits {}",
                s.inputs,
                shapes[i - 1].outputs
            )));
        }
    }
    Ok(shapes.iter().map(LayerShape::param_count).sum())
}

fn activation_backward(act: Activation, out: &[f64], upstream: &[f64]) -> Vec<f64> {
    match act {
        Activation::Linear => upstream.to_vec(),
        Activation::Relu => out
            .iter()
            .zip(upstream)
            .map(|(y, g)| if *y > 0.0 { *g } else { 0.0 })
            .collect(),
        Activation::Tanh => out.iter().zip(upstream).map(|(y, g)| g * (1.0 - y * y)).collect(),
        Activation::Softmax => softmax_backward(out, upstream),
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Max-subtracted softmax onto the probability simplex.
pub fn softmax(logits: &[f64]) -> Result<WeightVector> {
    if logits.is_empty() {
        return Err(Error::InvalidWeights("empty logits".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut z = logits.to_vec();
    softmax_in_place(&mut z);
    WeightVector::new(z)
}

/// Vector-Jacobian product of softmax: given `s = softmax(z)` and `g = dL/ds`,
/// returns `dL/dz = s ⊙ (g - s·g)`.
pub fn softmax_backward(s: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
    s.iter().zip(g).map(|(si, gi)| si * (gi - dot)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_linear(w: f64, b: f64) -> DenseNet {
        DenseNet::from_parts(
            vec![LayerShape {
                inputs: 1,
                outputs: 1,
                activation: Activation::Linear,
            }],
            vec![w, b],
        )
        .unwrap()
    }

    #[test]
    fn zero_net_gives_zero() {
        let net = DenseNet::zeros(vec![
            LayerShape {
                inputs: 3,
                outputs: 4,
                activation: Activation::Linear,
            },
            LayerShape {
                inputs: 4,
                outputs: 2,
                activation: Activation::Linear,
            },
        ])
        .unwrap();
        let (out, _) = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn affine_hand_case() {
        let net = single_linear(2.0, 1.0);
        let (out, tape) = net.forward(&[3.0]).unwrap();
        assert_eq!(out, vec![7.0]);
        let g = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(g.params, vec![3.0, 1.0]);
        assert_eq!(g.input, vec![2.0]);
        let zero = net.backward(&tape, &[0.0]).unwrap();
        assert!(zero.params.iter().chain(&zero.input).all(|v| *v == 0.0));
    }

    #[test]
    fn forward_errors() {
        let net = single_linear(1.0, 0.0);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(net.forward(&[f64::INFINITY]), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn stale_tape_rejected() {
        let mut net = single_linear(1.0, 0.0);
        let (_, tape) = net.forward(&[1.0]).unwrap();
        net.params_mut()[0] = 2.0;
        assert!(matches!(net.backward(&tape, &[1.0]), Err(Error::StaleTape)));
        let other = single_linear(1.0, 0.0);
        assert!(matches!(other.backward(&tape, &[1.0]), Err(Error::StaleTape)));
    }

    #[test]
    fn softmax_cases() {
        let u = softmax(&[0.3; 5]).unwrap();
        assert!(u.as_slice().iter().all(|w| (w - 0.2).abs() < 1e-15));
        let s = softmax(&[1000.0, 0.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1] < 1e-300);
        assert!(matches!(softmax(&[f64::NAN]), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn polyak_full_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseNet::new(&[3, 5, 2], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        let mut b = DenseNet::new(&[3, 5, 2], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        b.polyak_from(&a, 1.0).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn init_is_seeded() {
        let make = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DenseNet::new(&[4, 8, 3], Activation::Tanh, Activation::Linear, &mut rng).unwrap()
        };
        assert_eq!(make(1), make(1));
        assert_ne!(make(1), make(2));
        let net = make(1);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(net.layer_weights(0).iter().all(|w| w.abs() <= bound));
        assert!(net.layer_bias(0).iter().all(|b| *b == 0.0));
    }
}
