//! Probing toolkit for the scalar semantics of adverbs in pretrained language models.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! * [`lexicon`] holds the target adverbs, their scale categories and gold orderings.
//! * [`extraction`] pulls sentence-final `ADV ADJ.` phrases out of a comment corpus.
//! * [`dataset`] turns extracted items and templates into masked, entailment and NLI datasets.
//! * [`gateway`] is the uniform interface over masked LMs, embedders, NLI classifiers and
//!   remote completion APIs.
//! * [`ranking`] recovers scale orderings from contextual embeddings (SIM, DIFF, AdjDIFF).
//! * [`probes`] runs the MLM, entailment, NLI and remote evaluations.
//! * [`metrics`] has the ranking statistics shared by everything above.
//! * [`report`] renders tables and heatmaps and orchestrates configured runs.
//!
//! Heavy loops go through [`par::Exec`], which dispatches onto rayon when the `parallel`
//! feature is enabled and falls back to plain iterators otherwise.

pub mod dataset;
pub mod error;
pub mod extraction;
pub mod gateway;
pub mod io;
pub mod lexicon;
pub mod metrics;
pub mod par;
pub mod probes;
pub mod ranking;
pub mod report;

pub use error::{Error, Result};
pub use lexicon::{Lexicon, ScaleCategory, ScalarAdverb};
pub use par::Exec;

/// Literal mask placeholder used in every stored dataset.
pub const MASK: &str = "[MASK]";
