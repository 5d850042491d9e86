//! A full classifier: optional bilinear fusion parameters feeding the MLP head.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::EmbeddingRecord;
use crate::fusion::{self, BilinearParams, FusionConfig, FusionError};
use crate::math;
use crate::neural::{self, MlpGrads, MlpParams, NeuralError, Prediction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("record {id:?} has no label")]
    MissingLabel { id: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    fusion: FusionConfig,
    bilinear: Option<BilinearParams>,
    mlp: MlpParams,
}

impl Model {
    /// Seeded initialization; the bilinear tensor is drawn before the MLP.
    pub fn init(fusion: FusionConfig, hidden: &[usize], seed: u64) -> Result<Self, ModelError> {
        fusion.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bilinear = fusion
            .mode
            .uses_bilinear()
            .then(|| BilinearParams::init(fusion.bilinear_dim, fusion.d_m, fusion.d_h, &mut rng));
        let mlp = MlpParams::init(fusion.feature_dim(), hidden, &mut rng);
        Ok(Self { fusion, bilinear, mlp })
    }

    pub fn zeros(fusion: FusionConfig, hidden: &[usize]) -> Result<Self, ModelError> {
        fusion.validate()?;
        let bilinear = fusion
            .mode
            .uses_bilinear()
            .then(|| BilinearParams::zeros(fusion.bilinear_dim, fusion.d_m, fusion.d_h));
        Ok(Self {
            fusion,
            bilinear,
            mlp: MlpParams::zeros(fusion.feature_dim(), hidden),
        })
    }

    pub fn from_parts(
        fusion: FusionConfig,
        bilinear: Option<BilinearParams>,
        mlp: MlpParams,
    ) -> Result<Self, ModelError> {
        fusion.validate()?;
        if fusion.mode.uses_bilinear() != bilinear.is_some() {
            return Err(ModelError::Inconsistent("bilinear parameters do not match fusion mode"));
        }
        if let Some(b) = &bilinear {
            if (b.out_dim(), b.d_m(), b.d_h()) != (fusion.bilinear_dim, fusion.d_m, fusion.d_h) {
                return Err(ModelError::Inconsistent("bilinear shape does not match fusion config"));
            }
        }
        if mlp.input_dim() != fusion.feature_dim() {
            return Err(ModelError::Inconsistent("mlp input width does not match feature_dim"));
        }
        Ok(Self { fusion, bilinear, mlp })
    }

    pub fn fusion(&self) -> &FusionConfig {
        &self.fusion
    }

    pub fn bilinear(&self) -> Option<&BilinearParams> {
        self.bilinear.as_ref()
    }

    pub fn mlp(&self) -> &MlpParams {
        &self.mlp
    }

    pub fn features(&self, record: &EmbeddingRecord) -> Result<Vec<f64>, FusionError> {
        fusion::assemble(record, &self.fusion, self.bilinear.as_ref())
    }

    pub fn logits(&self, record: &EmbeddingRecord) -> Result<[f64; 2], ModelError> {
        let x = self.features(record)?;
        Ok(neural::mlp_forward(&x, &self.mlp)?.0)
    }

    pub fn predict(&self, record: &EmbeddingRecord, threshold: f64) -> Result<Prediction, ModelError> {
        Ok(Prediction::from_logits(self.logits(record)?, threshold))
    }

    /// Every parameter buffer, in checkpoint order: bilinear weight and bias
    /// (if present), then each MLP layer's weight and bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if let Some(b) = &self.bilinear {
            out.push(&b.weight);
            out.push(&b.bias);
        }
        for layer in self.mlp.layers() {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(b) = &mut self.bilinear {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        for layer in self.mlp.layers_mut() {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

/// Gradient buffers laid out like [`Model::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub bilinear_weight: Vec<f64>,
    pub bilinear_bias: Vec<f64>,
    pub mlp: MlpGrads,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let (w, b) = match &model.bilinear {
            Some(p) => (vec![0.0; p.weight.len()], vec![0.0; p.bias.len()]),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            bilinear_weight: w,
            bilinear_bias: b,
            mlp: MlpGrads::zeros_like(&model.mlp),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        if !self.bilinear_bias.is_empty() {
            out.push(&self.bilinear_weight);
            out.push(&self.bilinear_bias);
        }
        for layer in &self.mlp.layers {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if !self.bilinear_bias.is_empty() {
            out.push(&mut self.bilinear_weight);
            out.push(&mut self.bilinear_bias);
        }
        for layer in &mut self.mlp.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum())
    }
}

/// Softmax cross-entropy of one labeled record; gradients are added into `grads`.
pub fn example_backward(model: &Model, record: &EmbeddingRecord, grads: &mut Gradients) -> Result<f64, ModelError> {
    let y = record
        .label
        .ok_or_else(|| ModelError::MissingLabel { id: record.id.clone() })?;
    let x = model.features(record)?;
    let (logits, cache) = neural::mlp_forward(&x, &model.mlp)?;
    let loss = neural::softmax_ce(logits, y)?;
    let dlogits = neural::softmax_ce_grad(logits, y)?;
    let dx = neural::mlp_backward(&model.mlp, &cache, dlogits, &mut grads.mlp);
    if let Some(params) = &model.bilinear {
        let cfg = &model.fusion;
        let offset = cfg.d_m + cfg.d_h;
        let g = &dx[offset..offset + cfg.bilinear_dim];
        let cap = record.cap.as_deref().expect("assemble checked the cap channel");
        fusion::bilinear_param_grads_into(
            &record.mm,
            cap,
            params,
            g,
            &mut grads.bilinear_weight,
            &mut grads.bilinear_bias,
        );
    }
    Ok(loss)
}

/// Summed loss and exact gradients over a batch of labeled records.
pub fn backward(model: &Model, batch: &[&EmbeddingRecord]) -> Result<(f64, Gradients), ModelError> {
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for record in batch {
        loss += example_backward(model, record, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Feature-level form: summed loss and MLP gradients for precomputed feature rows.
pub fn mlp_batch_backward(
    features: &[Vec<f64>],
    labels: &[u8],
    mlp: &MlpParams,
) -> Result<(f64, MlpGrads), ModelError> {
    if features.len() != labels.len() {
        return Err(NeuralError::Shape {
            what: "batch labels",
            expected: features.len(),
            found: labels.len(),
        }
        .into());
    }
    let mut grads = MlpGrads::zeros_like(mlp);
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let (logits, cache) = neural::mlp_forward(x, mlp)?;
        loss += neural::softmax_ce(logits, y)?;
        neural::mlp_backward(mlp, &cache, neural::softmax_ce_grad(logits, y)?, &mut grads);
    }
    Ok((loss, grads))
}
