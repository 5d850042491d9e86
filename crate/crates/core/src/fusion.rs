//! Per-record feature assembly for the five architecture variants.
//!
//! Layout of the fused vector, by mode:
//!
//! | mode           | layout                                   |
//! |----------------|------------------------------------------|
//! | `mm_only`      | `[mm]`                                   |
//! | `cap_concat`   | `[mm ; cap]`                             |
//! | `cap_bilinear` | `[mm ; cap ; bilinear(mm, cap)]`         |
//! | `senti`        | `[mm ; senti]`                           |
//! | `combined`     | `[mm ; cap ; bilinear(mm, cap) ; senti]` |
//!
//! where `senti = [s_t ; s_v ; s_t + s_v]`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ChannelKind, EmbeddingRecord};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    MmOnly,
    CapConcat,
    CapBilinear,
    Senti,
    Combined,
}

impl FusionMode {
    pub const ALL: [FusionMode; 5] = [
        FusionMode::MmOnly,
        FusionMode::CapConcat,
        FusionMode::CapBilinear,
        FusionMode::Senti,
        FusionMode::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::MmOnly => "mm_only",
            FusionMode::CapConcat => "cap_concat",
            FusionMode::CapBilinear => "cap_bilinear",
            FusionMode::Senti => "senti",
            FusionMode::Combined => "combined",
        }
    }

    pub fn uses_caption(self) -> bool {
        matches!(
            self,
            FusionMode::CapConcat | FusionMode::CapBilinear | FusionMode::Combined
        )
    }

    pub fn uses_bilinear(self) -> bool {
        matches!(self, FusionMode::CapBilinear | FusionMode::Combined)
    }

    pub fn uses_sentiment(self) -> bool {
        matches!(self, FusionMode::Senti | FusionMode::Combined)
    }

    /// Channels a record must carry for this mode.
    pub fn required_channels(self) -> Vec<ChannelKind> {
        let mut out = vec![ChannelKind::Mm];
        if self.uses_caption() {
            out.push(ChannelKind::Cap);
        }
        if self.uses_sentiment() {
            out.push(ChannelKind::SentiT);
            out.push(ChannelKind::SentiV);
        }
        out
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub d_m: usize,
    pub d_h: usize,
    pub bilinear_dim: usize,
    pub k: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::MmOnly,
            d_m: 768,
            d_h: 768,
            bilinear_dim: 768,
            k: 3,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let fields = [
            ("d_m", self.d_m),
            ("d_h", self.d_h),
            ("bilinear_dim", self.bilinear_dim),
            ("k", self.k),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(FusionError::Config { field: name });
            }
        }
        Ok(())
    }

    /// Length of the vector [`assemble`] produces under this config.
    pub fn feature_dim(&self) -> usize {
        let mut dim = self.d_m;
        if self.mode.uses_caption() {
            dim += self.d_h;
        }
        if self.mode.uses_bilinear() {
            dim += self.bilinear_dim;
        }
        if self.mode.uses_sentiment() {
            dim += 3 * self.k;
        }
        dim
    }
}

/// Free-function form of [`FusionConfig::feature_dim`].
pub fn feature_dim(config: &FusionConfig) -> usize {
    config.feature_dim()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FusionError {
    #[error("shape mismatch in {what}: expected {expected}, got {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("record {id:?} is missing channel {channel}")]
    MissingChannel {
        id: alloc::string::String,
        channel: ChannelKind,
    },
    #[error("invalid fusion config: {field}")]
    Config { field: &'static str },
    #[error("bilinear parameters must be supplied exactly when the mode is cap_bilinear or combined")]
    BilinearParams,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), FusionError> {
    if expected == found {
        Ok(())
    } else {
        Err(FusionError::Shape { what, expected, found })
    }
}

/// Third-order weight tensor `M` of shape `(out_dim, d_m, d_h)` plus bias.
///
/// `weight[(i * d_m + j) * d_h + k]` is `M[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearParams {
    out_dim: usize,
    d_m: usize,
    d_h: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl BilinearParams {
    pub fn zeros(out_dim: usize, d_m: usize, d_h: usize) -> Self {
        Self {
            out_dim,
            d_m,
            d_h,
            weight: vec![0.0; out_dim * d_m * d_h],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn from_parts(
        out_dim: usize,
        d_m: usize,
        d_h: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, FusionError> {
        check_len("bilinear weight", out_dim * d_m * d_h, weight.len())?;
        check_len("bilinear bias", out_dim, bias.len())?;
        Ok(Self {
            out_dim,
            d_m,
            d_h,
            weight,
            bias,
        })
    }

    /// Uniform init in `±sqrt(6 / (d_m + d_h)) / sqrt(out_dim)`, zero bias.
    pub fn init<R: Rng + ?Sized>(out_dim: usize, d_m: usize, d_h: usize, rng: &mut R) -> Self {
        let bound = math::sqrt(6.0 / (d_m + d_h) as f64) / math::sqrt(out_dim as f64);
        let mut params = Self::zeros(out_dim, d_m, d_h);
        for w in &mut params.weight {
            *w = rng.random_range(-bound..=bound);
        }
        params
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weight[(i * self.d_m + j) * self.d_h + k]
    }

    fn check_inputs(&self, m: &[f64], h: &[f64]) -> Result<(), FusionError> {
        check_len("bilinear m", self.d_m, m.len())?;
        check_len("bilinear h", self.d_h, h.len())
    }
}

/// `out[i] = sum_{j,k} m[j] * M[i][j][k] * h[k] + b[i]`.
pub fn bilinear_fuse(m: &[f64], h: &[f64], params: &BilinearParams) -> Result<Vec<f64>, FusionError> {
    params.check_inputs(m, h)?;
    let mut out = params.bias.clone();
    let block = params.d_m * params.d_h;
    for (i, slot) in out.iter_mut().enumerate() {
        let slab = &params.weight[i * block..(i + 1) * block];
        let mut acc = 0.0;
        for (j, &mj) in m.iter().enumerate() {
            let row = &slab[j * params.d_h..(j + 1) * params.d_h];
            acc += mj * math::dot(row, h);
        }
        *slot += acc;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearGrads {
    pub m: Vec<f64>,
    pub h: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of `<g, bilinear_fuse(m, h)>` with respect to every input.
pub fn bilinear_backward(
    m: &[f64],
    h: &[f64],
    params: &BilinearParams,
    g: &[f64],
) -> Result<BilinearGrads, FusionError> {
    params.check_inputs(m, h)?;
    check_len("bilinear upstream gradient", params.out_dim, g.len())?;
    let (d_m, d_h) = (params.d_m, params.d_h);
    let mut grads = BilinearGrads {
        m: vec![0.0; d_m],
        h: vec![0.0; d_h],
        weight: vec![0.0; params.weight.len()],
        bias: g.to_vec(),
    };
    for (i, &gi) in g.iter().enumerate() {
        let block = i * d_m * d_h;
        for (j, &mj) in m.iter().enumerate() {
            let row = &params.weight[block + j * d_h..block + (j + 1) * d_h];
            let grad_row = &mut grads.weight[block + j * d_h..block + (j + 1) * d_h];
            let gm = gi * mj;
            let mut acc = 0.0;
            for k in 0..d_h {
                grad_row[k] = gm * h[k];
                acc += row[k] * h[k];
                grads.h[k] += gm * row[k];
            }
            grads.m[j] += gi * acc;
        }
    }
    Ok(grads)
}

/// Accumulates only the parameter gradients (`dM`, `db`) into existing buffers.
/// Used by the trainer, which never needs input gradients.
pub(crate) fn bilinear_param_grads_into(
    m: &[f64],
    h: &[f64],
    params: &BilinearParams,
    g: &[f64],
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
) {
    let (d_m, d_h) = (params.d_m, params.d_h);
    for (i, &gi) in g.iter().enumerate() {
        bias_grad[i] += gi;
        if gi == 0.0 {
            continue;
        }
        let block = i * d_m * d_h;
        for (j, &mj) in m.iter().enumerate() {
            let gm = gi * mj;
            let grad_row = &mut weight_grad[block + j * d_h..block + (j + 1) * d_h];
            for (slot, &hk) in grad_row.iter_mut().zip(h) {
                *slot += gm * hk;
            }
        }
    }
}

/// `[s_t ; s_v ; s_t + s_v]`.
pub fn sentiment_feature(s_t: &[f64], s_v: &[f64]) -> Result<Vec<f64>, FusionError> {
    check_len("visual sentiment", s_t.len(), s_v.len())?;
    let mut out = Vec::with_capacity(3 * s_t.len());
    out.extend_from_slice(s_t);
    out.extend_from_slice(s_v);
    out.extend(s_t.iter().zip(s_v).map(|(a, b)| a + b));
    Ok(out)
}

fn require(record: &EmbeddingRecord, channel: ChannelKind) -> Result<&[f64], FusionError> {
    record.channel(channel).ok_or_else(|| FusionError::MissingChannel {
        id: record.id.clone(),
        channel,
    })
}

/// Builds the fused feature vector of one record.
pub fn assemble(
    record: &EmbeddingRecord,
    config: &FusionConfig,
    params: Option<&BilinearParams>,
) -> Result<Vec<f64>, FusionError> {
    let mode = config.mode;
    if mode.uses_bilinear() != params.is_some() {
        return Err(FusionError::BilinearParams);
    }
    let mm = require(record, ChannelKind::Mm)?;
    check_len("mm channel", config.d_m, mm.len())?;
    let mut out = Vec::with_capacity(config.feature_dim());
    out.extend_from_slice(mm);
    if mode.uses_caption() {
        let cap = require(record, ChannelKind::Cap)?;
        check_len("cap channel", config.d_h, cap.len())?;
        out.extend_from_slice(cap);
        if let Some(params) = params {
            check_len("bilinear output", config.bilinear_dim, params.out_dim)?;
            out.extend(bilinear_fuse(mm, cap, params)?);
        }
    }
    if mode.uses_sentiment() {
        let s_t = require(record, ChannelKind::SentiT)?;
        let s_v = require(record, ChannelKind::SentiV)?;
        check_len("senti_t channel", config.k, s_t.len())?;
        out.extend(sentiment_feature(s_t, s_v)?);
    }
    Ok(out)
}
