//! Highlight detection for long interview and focus-group transcripts.
//!
//! The crate covers the whole pipeline: corpus ingestion and synthetic data,
//! superclip reduction and length-drift correction, bag-of-n-gram and
//! embedding features, gradient-boosted trees and LSTM classifiers with
//! seven-fold ensembling, fragment sampling over whole documents, and
//! sentence-level evaluation.

pub mod corpus;
pub mod dataset;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod interval;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
