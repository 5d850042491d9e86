//! MLP classifier head with a 2-logit output, and the two loss forms.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::math;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, got {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
}

/// Dense layer, `weight` row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn from_parts(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self, NeuralError> {
        if weight.len() != inputs * outputs {
            return Err(NeuralError::Shape {
                what: "layer weight",
                expected: inputs * outputs,
                found: weight.len(),
            });
        }
        if bias.len() != outputs {
            return Err(NeuralError::Shape {
                what: "layer bias",
                expected: outputs,
                found: bias.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| math::dot(row, x) + b)
            .collect()
    }
}

/// Hidden layers with ReLU followed by a linear 2-logit output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

fn widths(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(2);
    w
}

impl MlpParams {
    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let layers = widths(input, hidden)
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Self { layers }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut params = Self::zeros(input, hidden);
        for layer in &mut params.layers {
            let bound = math::sqrt(6.0 / (layer.inputs + layer.outputs) as f64);
            for w in &mut layer.weight {
                *w = rng.random_range(-bound..=bound);
            }
        }
        params
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NeuralError> {
        let Some(last) = layers.last() else {
            return Err(NeuralError::Shape {
                what: "layer count",
                expected: 1,
                found: 0,
            });
        };
        if last.outputs != 2 {
            return Err(NeuralError::Shape {
                what: "output width",
                expected: 2,
                found: last.outputs,
            });
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NeuralError::Shape {
                    what: "layer chaining",
                    expected: pair[0].outputs,
                    found: pair[1].inputs,
                });
            }
        }
        if layers
            .iter()
            .any(|l| l.weight.iter().chain(&l.bias).any(|v| !v.is_finite()))
        {
            return Err(NeuralError::NonFinite("mlp parameters"));
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }
}

/// Inputs to every layer, kept for the backward pass. `inputs[0]` is the
/// feature vector; later entries are post-ReLU hidden activations.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
}

pub fn mlp_forward(x: &[f64], params: &MlpParams) -> Result<([f64; 2], ForwardCache), NeuralError> {
    if x.len() != params.input_dim() {
        return Err(NeuralError::Shape {
            what: "mlp input",
            expected: params.input_dim(),
            found: x.len(),
        });
    }
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    inputs.push(x.to_vec());
    for layer in &params.layers[..last] {
        let mut z = layer.apply(inputs.last().expect("non-empty"));
        for v in &mut z {
            *v = v.max(0.0);
        }
        inputs.push(z);
    }
    let out = params.layers[last].apply(inputs.last().expect("non-empty"));
    Ok(([out[0], out[1]], ForwardCache { inputs }))
}

/// Gradient buffers shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }
}

/// Reverse pass: adds parameter gradients into `grads` and returns the
/// gradient with respect to the input features.
pub fn mlp_backward(params: &MlpParams, cache: &ForwardCache, dlogits: [f64; 2], grads: &mut MlpGrads) -> Vec<f64> {
    let mut upstream = dlogits.to_vec();
    for (idx, layer) in params.layers.iter().enumerate().rev() {
        let input = &cache.inputs[idx];
        let grad = &mut grads.layers[idx];
        for (o, &u) in upstream.iter().enumerate() {
            grad.bias[o] += u;
            if u == 0.0 {
                continue;
            }
            let row = &mut grad.weight[o * layer.inputs..(o + 1) * layer.inputs];
            for (slot, &xi) in row.iter_mut().zip(input) {
                *slot += u * xi;
            }
        }
        let mut down = vec![0.0; layer.inputs];
        for (o, &u) in upstream.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            let row = &layer.weight[o * layer.inputs..(o + 1) * layer.inputs];
            for (slot, &w) in down.iter_mut().zip(row) {
                *slot += u * w;
            }
        }
        if idx > 0 {
            // ReLU: the cached input is the post-activation, positive iff the
            // pre-activation was; the derivative at 0 is taken as 0.
            for (d, &a) in down.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        upstream = down;
    }
    upstream
}

/// Two-way softmax.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let d = logits[1] - logits[0];
    [math::sigmoid(-d), math::sigmoid(d)]
}

fn check_label(y: u8) -> Result<usize, NeuralError> {
    if y > 1 {
        Err(NeuralError::InvalidLabel(y))
    } else {
        Ok(usize::from(y))
    }
}

/// `-log softmax(logits)[y]`.
pub fn softmax_ce(logits: [f64; 2], y: u8) -> Result<f64, NeuralError> {
    let y = check_label(y)?;
    if !logits.iter().all(|z| z.is_finite()) {
        return Err(NeuralError::NonFinite("logits"));
    }
    // log(e^a + e^b) - z_y with the max subtracted: d >= 0 branch factors out e^d.
    let d = logits[1 - y] - logits[y];
    Ok(if d > 0.0 {
        d + math::ln_1p(math::exp(-d))
    } else {
        math::ln_1p(math::exp(d))
    })
}

/// d softmax_ce / d logits = softmax - onehot(y).
pub fn softmax_ce_grad(logits: [f64; 2], y: u8) -> Result<[f64; 2], NeuralError> {
    let y = check_label(y)?;
    let mut p = softmax(logits);
    p[y] -= 1.0;
    Ok(p)
}

/// Summed binary cross-entropy and its per-example mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BceLoss {
    pub sum: f64,
    pub mean: f64,
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `sum_i -(y log p + (1 - y) log(1 - p))` with `p` clipped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(p_hats: &[f64], ys: &[u8]) -> Result<BceLoss, NeuralError> {
    if p_hats.len() != ys.len() {
        return Err(NeuralError::Shape {
            what: "bce labels",
            expected: p_hats.len(),
            found: ys.len(),
        });
    }
    let mut sum = 0.0;
    for (&p, &y) in p_hats.iter().zip(ys) {
        check_label(y)?;
        if p.is_nan() {
            return Err(NeuralError::NonFinite("probabilities"));
        }
        let p = clip(p);
        sum -= if y == 1 { math::ln(p) } else { math::ln(1.0 - p) };
    }
    let mean = if ys.is_empty() { 0.0 } else { sum / ys.len() as f64 };
    Ok(BceLoss { sum, mean })
}

/// Derivative of the single-example binary cross-entropy with respect to `p`.
/// Zero where clipping is active.
pub fn bce_grad(p: f64, y: u8) -> Result<f64, NeuralError> {
    check_label(y)?;
    if clip(p) != p {
        return Ok(0.0);
    }
    Ok(if y == 1 { -1.0 / p } else { 1.0 / (1.0 - p) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logits: [f64; 2],
    pub p_hat: f64,
    pub label_hat: u8,
}

impl Prediction {
    pub fn from_logits(logits: [f64; 2], threshold: f64) -> Self {
        let p_hat = softmax(logits)[1];
        Self {
            logits,
            p_hat,
            label_hat: u8::from(p_hat >= threshold),
        }
    }
}
