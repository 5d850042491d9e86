//! In-memory dataset representation: manifest entries, decoded channels and
//! the validated records assembled from them.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Partition a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named embedding channel. Each channel is stored in its own file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Joint image-text representation from the multimodal encoder.
    #[serde(rename = "mm")]
    Mm,
    /// Encoded machine-generated caption of the image.
    #[serde(rename = "cap")]
    Cap,
    /// Text sentiment logits.
    #[serde(rename = "senti_t")]
    SentiT,
    /// Visual sentiment logits.
    #[serde(rename = "senti_v")]
    SentiV,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::Mm,
        ChannelKind::Cap,
        ChannelKind::SentiT,
        ChannelKind::SentiV,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Mm => "mm",
            ChannelKind::Cap => "cap",
            ChannelKind::SentiT => "senti_t",
            ChannelKind::SentiV => "senti_v",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ChannelKind::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A decoded channel: `len()` rows of `dim()` single-precision floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dim: usize,
    data: Vec<f32>,
}

impl Channel {
    /// Wraps row-major data. Returns `None` if `dim` is zero or does not
    /// divide the data length.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Option<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return None;
        }
        Some(Self { dim, data })
    }

    /// An empty channel of the given dimensionality.
    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "channel dim must be positive");
        Self { dim, data: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dim, "row width does not match channel dim");
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> Option<&[f32]> {
        let start = i.checked_mul(self.dim)?;
        self.data.get(start..start + self.dim)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }
}

/// The decoded channel files of one dataset.
pub type ChannelSet = BTreeMap<ChannelKind, Channel>;

/// One line of the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub label: Option<u8>,
    pub split: Split,
    pub channels: BTreeMap<ChannelKind, u64>,
}

/// One meme's channels, widened to `f64` for arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub mm: Vec<f64>,
    pub cap: Option<Vec<f64>>,
    pub senti_t: Option<Vec<f64>>,
    pub senti_v: Option<Vec<f64>>,
    pub label: Option<u8>,
    pub split: Split,
}

impl EmbeddingRecord {
    pub fn channel(&self, kind: ChannelKind) -> Option<&[f64]> {
        match kind {
            ChannelKind::Mm => Some(&self.mm),
            ChannelKind::Cap => self.cap.as_deref(),
            ChannelKind::SentiT => self.senti_t.as_deref(),
            ChannelKind::SentiV => self.senti_v.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("entry {id:?}: duplicate id")]
    DuplicateId { id: String },
    #[error("entry {id:?}: missing label in {split} split")]
    MissingLabel { id: String, split: Split },
    #[error("entry {id:?}: label {label} is not 0 or 1")]
    InvalidLabel { id: String, label: u8 },
    #[error("entry {id:?}: required channel {channel} not referenced")]
    MissingMm { id: String, channel: ChannelKind },
    #[error("entry {id:?}: channel {channel} has no channel file")]
    MissingChannelFile { id: String, channel: ChannelKind },
    #[error("entry {id:?}: channel {channel} row {index} out of range (count {count})")]
    DanglingIndex {
        id: String,
        channel: ChannelKind,
        index: u64,
        count: usize,
    },
    #[error("entry {id:?}: channel {channel} row {index} holds a non-finite value")]
    NonFinite {
        id: String,
        channel: ChannelKind,
        index: u64,
    },
}

/// Validated records plus the per-channel dimensionalities they were read with.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<EmbeddingRecord>,
    dims: BTreeMap<ChannelKind, usize>,
}

impl Dataset {
    /// Resolves every manifest entry against the decoded channels.
    ///
    /// Fails on the first entry that violates a record invariant; the error
    /// names that entry.
    pub fn from_parts(entries: &[ManifestEntry], channels: &ChannelSet) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        let mut records = Vec::with_capacity(entries.len());
        for entry in entries {
            if !seen.insert(entry.id.as_str()) {
                return Err(DatasetError::DuplicateId { id: entry.id.clone() });
            }
            match entry.label {
                None if entry.split != Split::Test => {
                    return Err(DatasetError::MissingLabel {
                        id: entry.id.clone(),
                        split: entry.split,
                    })
                }
                Some(label) if label > 1 => {
                    return Err(DatasetError::InvalidLabel {
                        id: entry.id.clone(),
                        label,
                    })
                }
                _ => {}
            }
            if !entry.channels.contains_key(&ChannelKind::Mm) {
                return Err(DatasetError::MissingMm {
                    id: entry.id.clone(),
                    channel: ChannelKind::Mm,
                });
            }
            let mut resolved: BTreeMap<ChannelKind, Vec<f64>> = BTreeMap::new();
            for (&kind, &index) in &entry.channels {
                let channel = channels.get(&kind).ok_or_else(|| DatasetError::MissingChannelFile {
                    id: entry.id.clone(),
                    channel: kind,
                })?;
                let row = usize::try_from(index)
                    .ok()
                    .and_then(|i| channel.row(i))
                    .ok_or_else(|| DatasetError::DanglingIndex {
                        id: entry.id.clone(),
                        channel: kind,
                        index,
                        count: channel.len(),
                    })?;
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(DatasetError::NonFinite {
                        id: entry.id.clone(),
                        channel: kind,
                        index,
                    });
                }
                resolved.insert(kind, row.iter().map(|&v| f64::from(v)).collect());
            }
            records.push(EmbeddingRecord {
                id: entry.id.clone(),
                mm: resolved.remove(&ChannelKind::Mm).unwrap_or_default(),
                cap: resolved.remove(&ChannelKind::Cap),
                senti_t: resolved.remove(&ChannelKind::SentiT),
                senti_v: resolved.remove(&ChannelKind::SentiV),
                label: entry.label,
                split: entry.split,
            });
        }
        let dims = channels.iter().map(|(&k, c)| (k, c.dim())).collect();
        Ok(Self { records, dims })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    /// Records of one split, in manifest order.
    pub fn split(&self, split: Split) -> Vec<&EmbeddingRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    /// Dimensionality declared by the channel file header, if the channel is present.
    pub fn dim(&self, kind: ChannelKind) -> Option<usize> {
        self.dims.get(&kind).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
