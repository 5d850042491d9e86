//! `MFM1` model checkpoints.
//!
//! ```text
//! magic "MFM1" | version u32 | mode u32 | d_m u64 | d_h u64 | bilinear_dim u64 | k u64 | tensors u32
//! per tensor: ndim u32 | dims ndim * u64 | payload prod(dims) * f64
//! ```
//!
//! Tensors come in [`Model::param_slices`] order: the bilinear weight
//! `(bilinear_dim, d_m, d_h)` and bias when the mode has them, then each MLP
//! layer's weight `(outputs, inputs)` and bias. Hidden widths are recovered
//! from the layer shapes. All integers and floats are little-endian.

use memefuse_core::fusion::{BilinearParams, FusionConfig, FusionMode};
use memefuse_core::neural::{Layer, MlpParams};
use memefuse_core::{Model, ModelError};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MFM1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic {0:?}, expected \"MFM1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown fusion mode code {0}")]
    UnknownMode(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("tensor {index}: {reason}")]
    Tensor { index: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn mode_code(mode: FusionMode) -> u32 {
    FusionMode::ALL
        .iter()
        .position(|&m| m == mode)
        .expect("mode listed in ALL") as u32
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn tensor(&mut self, dims: &[usize], data: &[f64]) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.u32(dims.len() as u32);
        for &d in dims {
            self.u64(d as u64);
        }
        for v in data {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode(model: &Model) -> Vec<u8> {
    let fusion = model.fusion();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(&MAGIC);
    w.u32(VERSION);
    w.u32(mode_code(fusion.mode));
    for v in [fusion.d_m, fusion.d_h, fusion.bilinear_dim, fusion.k] {
        w.u64(v as u64);
    }
    let layers = model.mlp().layers();
    let tensors = 2 * layers.len() + if model.bilinear().is_some() { 2 } else { 0 };
    w.u32(tensors as u32);
    if let Some(b) = model.bilinear() {
        w.tensor(&[b.out_dim(), b.d_m(), b.d_h()], &b.weight);
        w.tensor(&[b.out_dim()], &b.bias);
    }
    for layer in layers {
        w.tensor(&[layer.outputs(), layer.inputs()], &layer.weight);
        w.tensor(&[layer.outputs()], &layer.bias);
    }
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, CheckpointError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| CheckpointError::Truncated(self.bytes.len()))
    }

    fn tensor(&mut self, index: usize) -> Result<(Vec<usize>, Vec<f64>), CheckpointError> {
        let ndim = self.u32()? as usize;
        if ndim > 3 {
            return Err(CheckpointError::Tensor {
                index,
                reason: format!("{ndim} dimensions"),
            });
        }
        let dims = (0..ndim).map(|_| self.usize()).collect::<Result<Vec<_>, _>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let data: Vec<f64> = self
            .take(len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::Tensor {
                index,
                reason: "non-finite value".into(),
            });
        }
        Ok((dims, data))
    }
}

fn expect_rank(index: usize, dims: &[usize], rank: usize) -> Result<(), CheckpointError> {
    if dims.len() == rank {
        Ok(())
    } else {
        Err(CheckpointError::Tensor {
            index,
            reason: format!("expected rank {rank}, found {}", dims.len()),
        })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let code = r.u32()?;
    let mode = *FusionMode::ALL
        .get(code as usize)
        .ok_or(CheckpointError::UnknownMode(code))?;
    let fusion = FusionConfig {
        mode,
        d_m: r.usize()?,
        d_h: r.usize()?,
        bilinear_dim: r.usize()?,
        k: r.usize()?,
    };
    let count = r.u32()? as usize;
    let mut next = 0;

    let bilinear = if mode.uses_bilinear() {
        let (wd, weight) = r.tensor(0)?;
        expect_rank(0, &wd, 3)?;
        let (bd, bias) = r.tensor(1)?;
        expect_rank(1, &bd, 1)?;
        next = 2;
        Some(BilinearParams::from_parts(wd[0], wd[1], wd[2], weight, bias).map_err(ModelError::from)?)
    } else {
        None
    };

    if count < next || !(count - next).is_multiple_of(2) {
        return Err(CheckpointError::Tensor {
            index: count,
            reason: format!("tensor count {count} does not fit mode {mode}"),
        });
    }
    let mut layers = Vec::new();
    while next < count {
        let (wd, weight) = r.tensor(next)?;
        expect_rank(next, &wd, 2)?;
        let (bd, bias) = r.tensor(next + 1)?;
        expect_rank(next + 1, &bd, 1)?;
        let layer = Layer::from_parts(wd[1], wd[0], weight, bias).map_err(ModelError::from)?;
        layers.push(layer);
        next += 2;
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    let mlp = MlpParams::from_layers(layers).map_err(ModelError::from)?;
    Ok(Model::from_parts(fusion, bilinear, mlp)?)
}
