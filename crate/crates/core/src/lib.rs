//! Stereotype flagging for generated persona text.
//!
//! Generated narratives and chat replies are split into sentences, each
//! sentence is classified by a three-member ensemble, and non-neutral
//! sentences are returned as flags with confidences and explanations. The
//! crate also builds the training corpus, serves the pipeline over HTTP, and
//! compares grounded against ungrounded generation with a paired t-test.

pub mod classifier;
pub mod dataset;
pub mod ensemble;
pub mod eval;
pub mod error;
pub mod generation;
pub mod label;
pub mod persona;
pub mod segment;
pub mod service;

pub use error::{Error, GenerationError, Result};
pub use label::{Dataset, LabeledExample, ProbDist, Provenance, StereotypeLabel, Theme};
