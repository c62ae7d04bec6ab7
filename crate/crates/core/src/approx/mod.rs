//! Small fully connected networks with hand-written reverse-mode gradients.
//!
//! Hidden layers use ReLU; the output layer is either affine or logistic.
//! Weights are stored row-major as `outputs × inputs`.

mod adam;
mod checkpoint;
mod gradcheck;

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_nets, encode_nets, load_nets, save_nets, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, max_relative_error, numerical_gradients};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("input has length {found}, network expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("output gradient has length {found}, network produces {expected}")]
    OutputDim { expected: usize, found: usize },
    #[error("forward cache does not belong to this network")]
    StaleCache,
    #[error("gradients do not match the parameter shapes")]
    GradientShape,
    #[error("non-finite {0}; parameters left untouched")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum OutputActivation {
    Identity = 0,
    Logistic = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    inputs: usize,
    outputs: usize,
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

impl<S: Scalar> Layer<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![S::zero(); inputs * outputs], biases: vec![S::zero(); outputs] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inputs, self.outputs)
    }

    #[inline]
    pub fn weight(&self, output: usize, input: usize) -> S {
        self.weights[output * self.inputs + input]
    }

    #[inline]
    pub fn weight_mut(&mut self, output: usize, input: usize) -> &mut S {
        &mut self.weights[output * self.inputs + input]
    }

    fn affine(&self, x: &[S]) -> Vec<S> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }
}

/// Parameters of one feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<S> {
    layers: Vec<Layer<S>>,
    output: OutputActivation,
}

fn check_shapes(shapes: &[(usize, usize)]) -> Result<(), ApproxError> {
    if shapes.is_empty() {
        return Err(ApproxError::Shape("no layers".into()));
    }
    if let Some(&(i, o)) = shapes.iter().find(|&&(i, o)| i == 0 || o == 0) {
        return Err(ApproxError::Shape(format!("layer ({i}, {o}) has a zero dimension")));
    }
    for (k, pair) in shapes.windows(2).enumerate() {
        if pair[0].1 != pair[1].0 {
            return Err(ApproxError::Shape(format!(
                "layer {k} outputs {} but layer {} expects {}",
                pair[0].1,
                k + 1,
                pair[1].0
            )));
        }
    }
    Ok(())
}

impl<S: Scalar> MlpParams<S> {
    pub fn zeros(shapes: &[(usize, usize)], output: OutputActivation) -> Result<Self, ApproxError> {
        check_shapes(shapes)?;
        Ok(Self { layers: shapes.iter().map(|&(i, o)| Layer::zeros(i, o)).collect(), output })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(shapes: &[(usize, usize)], output: OutputActivation, rng: &mut R) -> Result<Self, ApproxError> {
        let mut net = Self::zeros(shapes, output)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = S::lit(rng.random_range(-limit..=limit));
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer<S>>, output: OutputActivation) -> Result<Self, ApproxError> {
        let shapes: Vec<_> = layers.iter().map(Layer::shape).collect();
        check_shapes(&shapes)?;
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(ApproxError::Shape("parameter storage does not match layer shape".into()));
            }
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(Layer::shape).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[S]) -> Result<(Vec<S>, ForwardCache<S>), ApproxError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&h);
            let a = if l < last { relu(&z) } else { self.activate_output(&z) };
            inputs.push(std::mem::replace(&mut h, a));
            pre.push(z);
        }
        let cache = ForwardCache { shapes: self.shapes(), inputs, pre, output: h.clone() };
        Ok((h, cache))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: &[S]) -> Result<Vec<S>, ApproxError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&h);
            h = if l < last { relu(&z) } else { self.activate_output(&z) };
        }
        Ok(h)
    }

    /// Gradients of a scalar loss with output gradient `dy`, for every
    /// parameter and for the input.
    pub fn backward(&self, cache: &ForwardCache<S>, dy: &[S]) -> Result<(Gradients<S>, Vec<S>), ApproxError> {
        let mut grads = Gradients::zeros_like(self);
        let dx = self.backward_accumulate(cache, dy, &mut grads)?;
        Ok((grads, dx))
    }

    /// As [`MlpParams::backward`] but adds into `grads`, for minibatch sums.
    pub fn backward_accumulate(&self, cache: &ForwardCache<S>, dy: &[S], grads: &mut Gradients<S>) -> Result<Vec<S>, ApproxError> {
        if !grads.matches(self) {
            return Err(ApproxError::GradientShape);
        }
        self.backprop(cache, dy, Some(grads))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn backward_input(&self, cache: &ForwardCache<S>, dy: &[S]) -> Result<Vec<S>, ApproxError> {
        self.backprop(cache, dy, None)
    }

    fn backprop(&self, cache: &ForwardCache<S>, dy: &[S], mut grads: Option<&mut Gradients<S>>) -> Result<Vec<S>, ApproxError> {
        if cache.shapes.len() != self.layers.len() || cache.shapes.iter().zip(&self.layers).any(|(s, l)| *s != l.shape()) {
            return Err(ApproxError::StaleCache);
        }
        if dy.len() != self.output_dim() {
            return Err(ApproxError::OutputDim { expected: self.output_dim(), found: dy.len() });
        }
        let last = self.layers.len() - 1;
        let mut delta: Vec<S> = match self.output {
            OutputActivation::Identity => dy.to_vec(),
            OutputActivation::Logistic => {
                dy.iter().zip(&cache.output).map(|(&g, &s)| g * s * (S::one() - s)).collect()
            }
        };
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            if l < last {
                for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if z <= S::zero() {
                        *d = S::zero();
                    }
                }
            }
            let input = &cache.inputs[l];
            let mut dx = vec![S::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if let Some(g) = grads.as_deref_mut() {
                    g.layers[l].biases[o] += d;
                }
                if d == S::zero() {
                    continue;
                }
                let row = o * layer.inputs;
                let w_row = &layer.weights[row..row + layer.inputs];
                for (acc, &w) in dx.iter_mut().zip(w_row) {
                    *acc += w * d;
                }
                if let Some(g) = grads.as_deref_mut() {
                    let g_row = &mut g.layers[l].weights[row..row + layer.inputs];
                    for (acc, &xi) in g_row.iter_mut().zip(input) {
                        *acc += d * xi;
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// `self ← tau·online + (1 − tau)·self`, parameter by parameter.
    pub fn soft_update_from(&mut self, online: &MlpParams<S>, tau: S) {
        debug_assert_eq!(self.shapes(), online.shapes());
        let keep = S::one() - tau;
        for (t, &o) in self.params_mut().zip(online.params()) {
            *t = tau * o + keep * *t;
        }
    }

    fn check_input(&self, x: &[S]) -> Result<(), ApproxError> {
        if x.len() != self.input_dim() {
            return Err(ApproxError::InputDim { expected: self.input_dim(), found: x.len() });
        }
        Ok(())
    }

    fn activate_output(&self, z: &[S]) -> Vec<S> {
        match self.output {
            OutputActivation::Identity => z.to_vec(),
            OutputActivation::Logistic => z.iter().map(|&v| v.logistic()).collect(),
        }
    }
}

fn relu<S: Scalar>(z: &[S]) -> Vec<S> {
    z.iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect()
}

/// Intermediates of one forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    shapes: Vec<(usize, usize)>,
    inputs: Vec<Vec<S>>,
    pre: Vec<Vec<S>>,
    output: Vec<S>,
}

impl<S> ForwardCache<S> {
    /// Pre-activations per layer, input side first.
    pub fn pre_activations(&self) -> &[Vec<S>] {
        &self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<S> {
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

/// Per-parameter tensors mirroring an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<LayerGrad<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(params: &MlpParams<S>) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![S::zero(); l.weights.len()], biases: vec![S::zero(); l.biases.len()] })
                .collect(),
        }
    }

    pub fn matches(&self, params: &MlpParams<S>) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }

    pub fn values(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: S) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.values_mut().for_each(|v| *v = S::zero());
    }
}
