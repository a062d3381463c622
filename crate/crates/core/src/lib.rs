//! Sentence complexity features, eye-tracking metrics and the regression
//! and probing analyses that relate them.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`] and [`lexicon`] load parsed sentences and word frequencies;
//! - [`complexity`] turns a sentence into nine complexity features;
//! - [`gaze`] aggregates fixation logs into sentence-level reading metrics;
//! - [`embed`] reads sentence embeddings produced by an external model;
//! - [`regress`] and [`evalx`] fit and score regressors under
//!   cross-validation;
//! - [`probe`] asks how well frozen embeddings encode each feature;
//! - [`scramble`] builds the word-order control corpus;
//! - [`experiment`] runs a whole configured analysis and writes a report
//!   bundle.

pub mod complexity;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod evalx;
pub mod experiment;
pub mod gaze;
pub mod lexicon;
pub mod matrix;
pub mod probe;
pub mod regress;
pub mod scramble;
pub mod synth;

pub use complexity::{
    profile, subset, ComplexityConfig, ComplexityProfile, FeatureGroup, SyntacticFeatures,
    FEATURE_NAMES,
};
pub use corpus::{Document, Sentence, Token, Upos};
pub use embed::EmbeddingSet;
pub use error::{Error, Result};
pub use evalx::{ScorePair, CorrelationMatrix};
pub use gaze::{Fixation, GazeMetrics, Metric, MetricScaler, ScaledDataset};
pub use lexicon::FrequencyLexicon;
pub use matrix::Matrix;
pub use probe::{ProbeConfig, ProbeMode, ProbeReport};
pub use regress::{FoldPlan, HeadParams, LinearModel, MultiHeadModel, SvrParams};
