//! Dataset directories on disk.
//!
//! A dataset directory holds `manifest.jsonl`, one `<channel>.mfe` file per
//! channel present (`mm.mfe`, `cap.mfe`, `senti_t.mfe`, `senti_v.mfe`) and
//! optionally `tags.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use memefuse_core::synth::{self, Composition, MemeType, SynthDataset};
use memefuse_core::{ChannelKind, ChannelSet, Dataset, DatasetError, ManifestEntry};
use thiserror::Error;

use crate::format::channel::{self, ChannelFormatError};
use crate::format::manifest::{self, ManifestError};
use crate::format::tags::{self, TagsError};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TAGS_FILE: &str = "tags.csv";

pub fn channel_file_name(kind: ChannelKind) -> String {
    format!("{kind}.mfe")
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Channel {
        path: PathBuf,
        #[source]
        source: ChannelFormatError,
    },
    #[error("{}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: ManifestError,
    },
    #[error("{}: {source}", path.display())]
    Tags {
        path: PathBuf,
        #[source]
        source: TagsError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

fn read(path: &Path) -> Result<Vec<u8>, StoreError> {
    fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Explicit locations of a manifest and its channel files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub manifest: PathBuf,
    pub channels: BTreeMap<ChannelKind, PathBuf>,
    pub tags: Option<PathBuf>,
}

impl DatasetPaths {
    /// The standard layout of `dir`, listing only channel files that exist.
    pub fn in_dir(dir: &Path) -> Self {
        let channels = ChannelKind::ALL
            .into_iter()
            .map(|k| (k, dir.join(channel_file_name(k))))
            .filter(|(_, p)| p.is_file())
            .collect();
        let tags = Some(dir.join(TAGS_FILE)).filter(|p| p.is_file());
        Self {
            manifest: dir.join(MANIFEST_FILE),
            channels,
            tags,
        }
    }
}

pub fn read_channels(paths: &BTreeMap<ChannelKind, PathBuf>) -> Result<ChannelSet, StoreError> {
    paths
        .iter()
        .map(|(&kind, path)| {
            let ch = channel::read_channel(&read(path)?).map_err(|source| StoreError::Channel {
                path: path.clone(),
                source,
            })?;
            Ok((kind, ch))
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, StoreError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    manifest::parse(&text).map_err(|source| StoreError::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_tags(path: &Path) -> Result<Vec<(String, MemeType)>, StoreError> {
    let bytes = read(path)?;
    tags::parse(&String::from_utf8_lossy(&bytes)).map_err(|source| StoreError::Tags {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a dataset from explicit paths.
pub fn load_dataset(manifest: &Path, channels: &BTreeMap<ChannelKind, PathBuf>) -> Result<Dataset, StoreError> {
    let entries = read_manifest(manifest)?;
    let set = read_channels(channels)?;
    Ok(Dataset::from_parts(&entries, &set)?)
}

pub fn load_dataset_dir(dir: &Path) -> Result<Dataset, StoreError> {
    let paths = DatasetPaths::in_dir(dir);
    load_dataset(&paths.manifest, &paths.channels)
}

/// Writes the standard layout into `dir`, creating it if needed.
pub fn write_dataset_dir(
    dir: &Path,
    entries: &[ManifestEntry],
    channels: &ChannelSet,
    tags: Option<&[(String, MemeType)]>,
) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (&kind, ch) in channels {
        let path = dir.join(channel_file_name(kind));
        let bytes = channel::encode(ch).map_err(|source| StoreError::Channel {
            path: path.clone(),
            source,
        })?;
        write(&path, &bytes)?;
    }
    write(&dir.join(MANIFEST_FILE), manifest::render(entries).as_bytes())?;
    if let Some(tags) = tags {
        write(&dir.join(TAGS_FILE), tags::render(tags).as_bytes())?;
    }
    Ok(())
}

pub fn write_synth(dir: &Path, ds: &SynthDataset) -> Result<(), StoreError> {
    write_dataset_dir(dir, &ds.entries, &ds.channels, Some(&ds.tags))
}

/// What `inspect` reports about a valid dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inspection {
    pub channels: BTreeMap<ChannelKind, (usize, usize)>,
    pub composition: Composition,
    pub tagged: bool,
}

/// Fully validates a dataset and summarizes it.
pub fn inspect(paths: &DatasetPaths) -> Result<Inspection, StoreError> {
    let entries = read_manifest(&paths.manifest)?;
    let set = read_channels(&paths.channels)?;
    Dataset::from_parts(&entries, &set)?;
    let tags = match &paths.tags {
        Some(p) => read_tags(p)?,
        None => Vec::new(),
    };
    Ok(Inspection {
        channels: set.iter().map(|(&k, c)| (k, (c.dim(), c.len()))).collect(),
        composition: synth::describe(&entries, &tags),
        tagged: paths.tags.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use memefuse_core::{Channel, Split, SynthConfig};

    fn entry(id: &str, label: Option<u8>, split: Split, rows: &[(ChannelKind, u64)]) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            label,
            split,
            channels: rows.iter().copied().collect(),
        }
    }

    #[test]
    fn three_entries_two_channels() {
        let dir = tempfile::tempdir().unwrap();
        let mm = Channel::from_flat(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cap = Channel::from_flat(1, vec![0.5, -0.5]).unwrap();
        let entries = vec![
            entry(
                "a",
                Some(0),
                Split::Train,
                &[(ChannelKind::Mm, 0), (ChannelKind::Cap, 1)],
            ),
            entry("b", Some(1), Split::Val, &[(ChannelKind::Mm, 1)]),
            entry("c", None, Split::Test, &[(ChannelKind::Mm, 2), (ChannelKind::Cap, 0)]),
        ];
        let set: ChannelSet = [(ChannelKind::Mm, mm), (ChannelKind::Cap, cap)].into();
        write_dataset_dir(dir.path(), &entries, &set, None).unwrap();
        let ds = load_dataset_dir(dir.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records()[0].cap.as_deref(), Some(&[-0.5][..]));
        assert_eq!(ds.records()[2].mm, vec![5.0, 6.0]);
    }

    #[test]
    fn dangling_row_names_the_entry() {
        let dir = tempfile::tempdir().unwrap();
        let mm = Channel::from_flat(1, vec![1.0, 2.0, 3.0]).unwrap();
        let entries = vec![
            entry("ok", Some(0), Split::Train, &[(ChannelKind::Mm, 0)]),
            entry("far", Some(1), Split::Train, &[(ChannelKind::Mm, 5)]),
        ];
        write_dataset_dir(dir.path(), &entries, &[(ChannelKind::Mm, mm)].into(), None).unwrap();
        let err = load_dataset_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("\"far\"") && err.contains("mm"), "{err}");
    }

    #[test]
    fn synthetic_dataset_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n: 20,
            d_m: 6,
            d_h: 5,
            ..SynthConfig::default()
        };
        let ds = memefuse_core::synth::generate(&cfg).unwrap();
        write_synth(dir.path(), &ds).unwrap();
        let loaded = load_dataset_dir(dir.path()).unwrap();
        let expected = ds.to_dataset().unwrap();
        assert_eq!(loaded.records(), expected.records());
        for (kind, ch) in &ds.channels {
            let back = read_channels(&[(*kind, dir.path().join(channel_file_name(*kind)))].into()).unwrap();
            let a: Vec<u32> = back[kind].as_flat().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = ch.as_flat().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        let summary = inspect(&DatasetPaths::in_dir(dir.path())).unwrap();
        assert!(summary.tagged);
        assert_eq!(summary.composition.total, 20);
        assert_eq!(summary.channels[&ChannelKind::Cap], (5, 20));
    }
}
