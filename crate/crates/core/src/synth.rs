//! Seeded synthetic datasets with planted benign-confounder structure.
//!
//! Every record is built from two latent unit vectors in an 8-dimensional
//! space: `w`, the view of the meme that the multimodal encoder captures, and
//! `u`, the actual image content that a captioner would describe. The `mm`
//! channel is a fixed random linear embedding of `w`; the `cap` channel is a
//! different fixed embedding of `u`. Both get isotropic Gaussian noise.
//!
//! | type                      | label | `w` cluster | `u`                         |
//! |---------------------------|-------|-------------|-----------------------------|
//! | `multimodal_hate`         | 1     | scene       | `w` tilted along the hidden-context axis |
//! | `unimodal_hate`           | 1     | slur        | unrelated image cluster     |
//! | `benign_text_confounder`  | 0     | scene       | `w` itself                  |
//! | `benign_image_confounder` | 0     | swapped     | `w` itself                  |
//! | `random_benign`           | 0     | random      | unrelated image cluster     |
//!
//! Multimodal hate and benign text confounders draw `w` from the same
//! distribution, so no function of `mm` alone separates them. The caption
//! shows whether the image carries the hidden context. With zero noise the
//! label is a linear function of the latent pair, so a linear probe on
//! `[mm ; cap]` is exact.
//!
//! Sentiment logits follow label-conditioned (text, image) polarity patterns
//! with probability `senti_signal`, and uniformly random polarities otherwise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Channel, ChannelKind, ChannelSet, Dataset, DatasetError, ManifestEntry, Split};
use crate::math;

pub const LATENT_DIM: usize = 8;

const AXIS_SCENE: usize = 0;
const AXIS_SLUR: usize = 1;
const AXIS_SWAPPED: usize = 2;
const AXIS_RANDOM: usize = 3;
const AXIS_UNRELATED_IMAGE: usize = 4;
const AXIS_CONTEXT: usize = 5;
/// Axes cluster spread may move along; the slur and context axes stay clean.
const SPREAD_AXES: [usize; 6] = [0, 2, 3, 4, 6, 7];
const CLUSTER_SPREAD: f64 = 0.2;
const CONTEXT_TILT: f64 = 1.5;
const SENTI_MARGIN: f64 = 2.0;
const SENTI_JITTER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemeType {
    MultimodalHate,
    UnimodalHate,
    BenignTextConfounder,
    BenignImageConfounder,
    RandomBenign,
}

impl MemeType {
    pub const ALL: [MemeType; 5] = [
        MemeType::MultimodalHate,
        MemeType::UnimodalHate,
        MemeType::BenignTextConfounder,
        MemeType::BenignImageConfounder,
        MemeType::RandomBenign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemeType::MultimodalHate => "multimodal_hate",
            MemeType::UnimodalHate => "unimodal_hate",
            MemeType::BenignTextConfounder => "benign_text_confounder",
            MemeType::BenignImageConfounder => "benign_image_confounder",
            MemeType::RandomBenign => "random_benign",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MemeType::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn label(self) -> u8 {
        u8::from(matches!(self, MemeType::MultimodalHate | MemeType::UnimodalHate))
    }
}

impl fmt::Display for MemeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mix {
    pub multimodal_hate: f64,
    pub unimodal_hate: f64,
    pub benign_text_confounder: f64,
    pub benign_image_confounder: f64,
    pub random_benign: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Self {
            multimodal_hate: 0.4,
            unimodal_hate: 0.1,
            benign_text_confounder: 0.2,
            benign_image_confounder: 0.2,
            random_benign: 0.1,
        }
    }
}

impl Mix {
    fn weights(&self) -> [f64; 5] {
        [
            self.multimodal_hate,
            self.unimodal_hate,
            self.benign_text_confounder,
            self.benign_image_confounder,
            self.random_benign,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.85,
            val: 0.05,
            test: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub d_m: usize,
    pub d_h: usize,
    pub k: usize,
    pub mix: Mix,
    pub noise_sigma: f64,
    /// Probability that a record's sentiment pattern reflects its label.
    pub senti_signal: f64,
    pub split: SplitFractions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            seed: 0,
            d_m: 768,
            d_h: 768,
            k: 3,
            mix: Mix::default(),
            noise_sigma: 0.1,
            senti_signal: 0.8,
            split: SplitFractions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

const SUM_TOLERANCE: f64 = 1e-9;

fn check_distribution(field: &'static str, weights: &[f64]) -> Result<(), SynthError> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(SynthError::Config {
            field,
            reason: "entries must be finite and non-negative".into(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(SynthError::Config {
            field,
            reason: format!("proportions sum to {sum}, expected 1"),
        });
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n < 20 {
            return Err(SynthError::Config {
                field: "n",
                reason: format!("{} is below the minimum of 20", self.n),
            });
        }
        for (field, v) in [("d_m", self.d_m), ("d_h", self.d_h), ("k", self.k)] {
            if v == 0 {
                return Err(SynthError::Config {
                    field,
                    reason: "must be positive".into(),
                });
            }
        }
        check_distribution("mix", &self.mix.weights())?;
        check_distribution("split", &[self.split.train, self.split.val, self.split.test])?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::Config {
                field: "noise_sigma",
                reason: "must be finite and non-negative".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.senti_signal) {
            return Err(SynthError::Config {
                field: "senti_signal",
                reason: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `total` over `weights` (which sum to 1).
/// Ties in the remainder go to the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    // The 1e-9 nudge absorbs representation error such as 0.85 * 1000 = 849.999...
    let mut counts: Vec<usize> = exact.iter().map(|x| libm::floor(x + 1e-9) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub entries: Vec<ManifestEntry>,
    pub channels: ChannelSet,
    /// `(id, type)` in manifest order.
    pub tags: Vec<(String, MemeType)>,
}

impl SynthDataset {
    pub fn to_dataset(&self) -> Result<Dataset, DatasetError> {
        Dataset::from_parts(&self.entries, &self.channels)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normalize(v: &mut [f64]) {
    let n = math::norm(v);
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn axis(i: usize) -> [f64; LATENT_DIM] {
    let mut v = [0.0; LATENT_DIM];
    v[i] = 1.0;
    v
}

/// Unit vector near `axis(center)`, displaced by exactly `CLUSTER_SPREAD`
/// along a random direction in the spread subspace.
fn cluster(rng: &mut ChaCha8Rng, center: usize) -> [f64; LATENT_DIM] {
    let mut dir = [0.0; LATENT_DIM];
    for &a in &SPREAD_AXES {
        dir[a] = gaussian(rng);
    }
    normalize(&mut dir);
    let mut v = axis(center);
    for (x, d) in v.iter_mut().zip(dir) {
        *x += CLUSTER_SPREAD * d;
    }
    normalize(&mut v);
    v
}

fn latents(rng: &mut ChaCha8Rng, ty: MemeType) -> ([f64; LATENT_DIM], [f64; LATENT_DIM]) {
    match ty {
        MemeType::MultimodalHate => {
            let w = cluster(rng, AXIS_SCENE);
            let mut u = w;
            u[AXIS_CONTEXT] += CONTEXT_TILT;
            normalize(&mut u);
            (w, u)
        }
        MemeType::BenignTextConfounder => {
            let w = cluster(rng, AXIS_SCENE);
            (w, w)
        }
        MemeType::UnimodalHate => (cluster(rng, AXIS_SLUR), cluster(rng, AXIS_UNRELATED_IMAGE)),
        MemeType::BenignImageConfounder => {
            let w = cluster(rng, AXIS_SWAPPED);
            (w, w)
        }
        MemeType::RandomBenign => (cluster(rng, AXIS_RANDOM), cluster(rng, AXIS_UNRELATED_IMAGE)),
    }
}

/// Random `rows x LATENT_DIM` embedding with standard normal entries.
fn embedding(rng: &mut ChaCha8Rng, rows: usize) -> Vec<[f64; LATENT_DIM]> {
    (0..rows).map(|_| core::array::from_fn(|_| gaussian(rng))).collect()
}

fn embed(rng: &mut ChaCha8Rng, matrix: &[[f64; LATENT_DIM]], z: &[f64; LATENT_DIM], sigma: f64) -> Vec<f32> {
    matrix
        .iter()
        .map(|row| {
            let clean = math::dot(row, z);
            (clean + sigma * gaussian(rng)) as f32
        })
        .collect()
}

/// Polarity classes: 0 negative, `k - 1` positive, `k / 2` neutral when `k >= 3`.
fn sentiment_pattern(rng: &mut ChaCha8Rng, label: u8, k: usize, signal: f64) -> (usize, usize) {
    let neg = 0;
    let pos = k - 1;
    let neu = if k >= 3 { k / 2 } else { pos };
    if rng.random::<f64>() >= signal {
        return (rng.random_range(0..k), rng.random_range(0..k));
    }
    let r: f64 = rng.random();
    match (label, r) {
        // Ironic pairing, both negative, negative text on a positive image.
        (1, r) if r < 0.5 => (pos, neg),
        (1, r) if r < 0.75 => (neg, neg),
        (1, _) => (neg, pos),
        (_, r) if r < 0.5 => (pos, pos),
        (_, r) if r < 0.75 => (neu, pos),
        _ => (neg, neg),
    }
}

fn sentiment_logits(rng: &mut ChaCha8Rng, class: usize, k: usize) -> Vec<f32> {
    (0..k)
        .map(|c| {
            let base = if c == class { SENTI_MARGIN } else { 0.0 };
            (base + SENTI_JITTER * gaussian(rng)) as f32
        })
        .collect()
}

/// Deterministic dataset from `config`; identical configs give identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mm_embedding = embedding(&mut rng, config.d_m);
    let cap_embedding = embedding(&mut rng, config.d_h);

    let counts = apportion(config.n, &config.mix.weights());
    let mut types: Vec<MemeType> = MemeType::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(&t, &c)| core::iter::repeat_n(t, c))
        .collect();
    types.shuffle(&mut rng);

    // Per-class apportionment across splits keeps each split's label ratio
    // within one record of the global ratio.
    let fractions = [config.split.train, config.split.val, config.split.test];
    let sizes = apportion(config.n, &fractions);
    let positives: Vec<usize> = (0..types.len()).filter(|&i| types[i].label() == 1).collect();
    let negatives: Vec<usize> = (0..types.len()).filter(|&i| types[i].label() == 0).collect();
    let size_weights: Vec<f64> = sizes.iter().map(|&s| s as f64 / config.n as f64).collect();
    let pos_per_split = apportion(positives.len(), &size_weights);
    let mut splits = vec![Split::Train; config.n];
    for (mut pool, per_split) in [
        (positives.clone(), pos_per_split.clone()),
        (
            negatives,
            sizes.iter().zip(&pos_per_split).map(|(s, p)| s - p).collect(),
        ),
    ] {
        pool.shuffle(&mut rng);
        let mut it = pool.into_iter();
        for (split, count) in Split::ALL.into_iter().zip(per_split) {
            for idx in it.by_ref().take(count) {
                splits[idx] = split;
            }
        }
    }

    let mut mm = Channel::empty(config.d_m);
    let mut cap = Channel::empty(config.d_h);
    let mut senti_t = Channel::empty(config.k);
    let mut senti_v = Channel::empty(config.k);
    let mut entries = Vec::with_capacity(config.n);
    let mut tags = Vec::with_capacity(config.n);
    for (i, &ty) in types.iter().enumerate() {
        let (w, u) = latents(&mut rng, ty);
        mm.push_row(&embed(&mut rng, &mm_embedding, &w, config.noise_sigma));
        cap.push_row(&embed(&mut rng, &cap_embedding, &u, config.noise_sigma));
        let (text_class, image_class) = sentiment_pattern(&mut rng, ty.label(), config.k, config.senti_signal);
        senti_t.push_row(&sentiment_logits(&mut rng, text_class, config.k));
        senti_v.push_row(&sentiment_logits(&mut rng, image_class, config.k));

        let id = format!("synth-{i:06}");
        let row = i as u64;
        entries.push(ManifestEntry {
            id: id.clone(),
            label: Some(ty.label()),
            split: splits[i],
            channels: ChannelKind::ALL.into_iter().map(|c| (c, row)).collect(),
        });
        tags.push((id, ty));
    }

    let mut channels = ChannelSet::new();
    channels.insert(ChannelKind::Mm, mm);
    channels.insert(ChannelKind::Cap, cap);
    channels.insert(ChannelKind::SentiT, senti_t);
    channels.insert(ChannelKind::SentiV, senti_v);
    Ok(SynthDataset {
        entries,
        channels,
        tags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitCounts {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Composition {
    pub total: usize,
    pub by_type: BTreeMap<MemeType, usize>,
    pub by_split: BTreeMap<Split, SplitCounts>,
    pub by_type_and_split: BTreeMap<(MemeType, Split), usize>,
}

/// Counts per meme type and per split. Entries without a tag count toward
/// their split but no type.
pub fn describe(entries: &[ManifestEntry], tags: &[(String, MemeType)]) -> Composition {
    let tag_of: BTreeMap<&str, MemeType> = tags.iter().map(|(id, t)| (id.as_str(), *t)).collect();
    let mut out = Composition {
        total: entries.len(),
        ..Composition::default()
    };
    for e in entries {
        let counts = out.by_split.entry(e.split).or_default();
        counts.total += 1;
        match e.label {
            Some(1) => counts.positive += 1,
            Some(_) => counts.negative += 1,
            None => counts.unlabeled += 1,
        }
        if let Some(&t) = tag_of.get(e.id.as_str()) {
            *out.by_type.entry(t).or_default() += 1;
            *out.by_type_and_split.entry((t, e.split)).or_default() += 1;
        }
    }
    out
}
