//! Core library for screening infant leg-movement recordings.
//!
//! The pipeline turns day-long wearable-sensor feature tables into a
//! typically-developing (TD) versus at-risk (AR) classification: CSV ingest
//! and validation, awake-time normalization, age banding, feature selection,
//! six from-scratch learners, leave-one-out evaluation with exact-rational
//! metric tables, a weighted-random chance baseline, hyperparameter grids,
//! and a majority-vote ensemble.
//!
//! Everything is deterministic given a seed: refitting on the same data with
//! the same configuration reproduces the same models, reports, and exported
//! artifacts byte for byte.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod learners;
pub mod seeds;
pub mod select;
pub mod synth;

pub use data::{AgeBand, ClassWeights, Dataset, FeatureKind, FeatureSchema, Label, RecordId, SampleRecord};
pub use error::{Error, Result};
