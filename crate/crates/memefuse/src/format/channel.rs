//! `MFE1` channel files: a 20-byte header followed by row-major `f32` rows.
//!
//! ```text
//! 0   magic   "MFE1"
//! 4   version u32 = 1
//! 8   dim     u32
//! 12  count   u64
//! 20  rows    count * dim * f32
//! ```
//!
//! Everything is little-endian.

use memefuse_core::Channel;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MFE1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelFormatError {
    #[error("row {row}: expected {expected} values, found {found}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: non-finite value")]
    NonFinite { row: usize, col: usize },
    #[error("bad magic {0:?}, expected \"MFE1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported channel file version {0}")]
    UnsupportedVersion(u32),
    #[error("file is {actual} bytes, header implies {expected}")]
    Length { expected: u128, actual: usize },
    #[error("dim must be positive")]
    ZeroDim,
    #[error("dim {0} does not fit the u32 header field")]
    DimTooLarge(usize),
}

/// Encodes `rows`, each of which must hold `dim` finite values.
pub fn write_channel<I, R>(rows: I, dim: usize) -> Result<Vec<u8>, ChannelFormatError>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f32]>,
{
    let dim32 = u32::try_from(dim).map_err(|_| ChannelFormatError::DimTooLarge(dim))?;
    if dim == 0 {
        return Err(ChannelFormatError::ZeroDim);
    }
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    let mut count: u64 = 0;
    for (row, values) in rows.into_iter().enumerate() {
        let values = values.as_ref();
        if values.len() != dim {
            return Err(ChannelFormatError::DimensionMismatch {
                row,
                expected: dim,
                found: values.len(),
            });
        }
        for (col, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ChannelFormatError::NonFinite { row, col });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
        count += 1;
    }
    out[12..20].copy_from_slice(&count.to_le_bytes());
    Ok(out)
}

pub fn encode(channel: &Channel) -> Result<Vec<u8>, ChannelFormatError> {
    write_channel(channel.rows(), channel.dim())
}

/// Decodes and validates a channel file.
pub fn read_channel(bytes: &[u8]) -> Result<Channel, ChannelFormatError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(ChannelFormatError::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(ChannelFormatError::Length {
            expected: HEADER_LEN as u128,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(ChannelFormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(ChannelFormatError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(ChannelFormatError::ZeroDim);
    }
    let expected = HEADER_LEN as u128 + 4 * dim as u128 * u128::from(count);
    if expected != bytes.len() as u128 {
        return Err(ChannelFormatError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(ChannelFormatError::NonFinite {
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(Channel::from_flat(dim, data).expect("length checked against header"))
}
