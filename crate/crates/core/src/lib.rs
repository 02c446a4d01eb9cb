//! Weak supervision for pairwise preference data.
//!
//! The pipeline extends a small labeled set of response pairs with weakly
//! labeled ones:
//!
//! 1. [`corpus`] loads JSONL pairs and splits them into evaluation,
//!    labeled baseline and weak sets;
//! 2. [`features`] and [`sentiment`] score each response with cheap text
//!    heuristics, and [`stats`] compares chosen against rejected responses;
//! 3. [`lfs`] turns heuristic comparisons into votes, [`labelmodel`]
//!    denoises the votes into probabilistic labels and filters them by
//!    confidence;
//! 4. [`evalharness`] scores every stage against gold labels, and
//!    [`pipeline`] chains the stages in memory.
//!
//! Batch operations run on rayon when the `parallel` feature is enabled
//! (the default); results do not depend on the execution mode.

pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod features;
pub mod labelmodel;
pub mod lfs;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sentiment;
pub mod stats;
pub mod synth;

pub use corpus::{Preference, Sample, SplitResult, WeaklyLabeledSample};
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureExtractor, FeatureVector};
pub use labelmodel::{LabelModelHyper, LabelModelParams, WeakPrediction};
pub use lfs::{LabelMatrix, LabelingFunctions, LfSpec, Vote};
pub use par::Execution;

/// Version of the dataset and hidden-gold JSONL layouts.
pub const DATASET_FORMAT_VERSION: u32 = 1;
