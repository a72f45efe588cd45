//! Toolkit for multi-label speech emotion recognition benchmarks.
//!
//! Turns per-rater annotations into training labels, builds
//! speaker-independent folds, scores prediction files with threshold
//! macro-F1, trains a small class-balanced downstream head, and relabels
//! typed descriptions through a chat-completion model.

pub mod aggregation;
pub mod corpus;
pub mod partitioning;
pub mod evaluation;
pub mod scoring;
pub mod trainer;
pub mod relabel;
