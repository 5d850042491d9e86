//! Late-fusion classification of hateful memes over precomputed embeddings.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the numeric side:
//! dataset validation, feature fusion (concatenation, bilinear interaction,
//! sentiment logits), the MLP head with hand-written backpropagation,
//! training, metrics and a synthetic confounder generator. File formats and
//! the command line live in the `memefuse` crate.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod fusion;
pub mod math;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod optim;
pub mod synth;
pub mod train;

pub use dataset::{Channel, ChannelKind, ChannelSet, Dataset, DatasetError, EmbeddingRecord, ManifestEntry, Split};
pub use fusion::{BilinearParams, FusionConfig, FusionError, FusionMode};
pub use metrics::{EvalReport, MetricError};
pub use model::{Gradients, Model, ModelError};
pub use neural::{MlpParams, Prediction};
pub use optim::OptimizerKind;
pub use synth::{MemeType, SynthConfig, SynthDataset, SynthError};
pub use train::{EpochLog, Executor, Sequential, TrainConfig, TrainError, TrainLog};
