//! Batch aggregation (BAGG) for text classification with augmented data.
//!
//! Augmented texts derived from one original form a *group*. Under BAGG the
//! class distributions predicted for every member of a group are pooled into
//! a single prediction and the loss is computed once per original
//! observation, instead of once per text as in standard augmentation.
//!
//! Module map:
//!
//! - [`textproc`]: tokenizer, vocabulary, integer encoding
//! - [`augment`]: EDA operations, back-translation, augmentation plans and cache
//! - [`dataset`]: grouped observations, JSONL ingestion, stratified sampling and splits
//! - [`model`]: compact encoder, softmax head, pooling, both losses, gradient checks
//! - [`trainer`]: minibatch optimisation in baseline / standard / bagg modes
//! - [`bench`]: repeated-split experiment harness, reports, charts, correlation study

pub mod augment;
pub mod bench;
pub mod dataset;
mod error;
pub mod model;
pub mod seed;
pub mod textproc;
pub mod trainer;

pub use error::{Error, Result};
