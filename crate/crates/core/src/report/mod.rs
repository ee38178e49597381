//! Tables, heatmaps and configured end-to-end runs.

pub mod config;
pub mod heatmap;
pub mod run;
pub mod tables;

pub use config::{ProbeKind, RunConfig};
pub use heatmap::{pixel_hash, render_heatmap, save_heatmap};
pub use run::{run, FailureManifest, FileDigest, Manifest, RunOutcome};
pub use tables::{render_tables, write_tables, Table};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::CoverageReport;
use crate::probes::nli::NliProbeResult;
use crate::probes::{EntailmentAggregates, MlmAggregates};
use crate::ranking::{Method, RankingResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("table {0}")]
    Table(String),
    #[error("image encoding failed: {0}")]
    Image(String),
    #[error("confusion matrix has no observations")]
    EmptyConfusion,
    #[error("run failed during {stage}: {message}")]
    Stage { stage: String, message: String },
}

/// WITH_NEG and NO_NEG aggregates for one answer source over the same items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentSection {
    pub source: String,
    pub items: usize,
    pub with_neg: EntailmentAggregates,
    pub no_neg: EntailmentAggregates,
}

/// Everything a run measured. Holds no timestamps, so it is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub model: String,
    pub model_notes: Vec<String>,
    pub config_hash: String,
    pub coverage: Option<CoverageReport>,
    pub mlm: Option<MlmAggregates>,
    pub ranking: Vec<RankingResult>,
    /// Pairwise accuracy pooled over categories, per method.
    pub ranking_overall: Vec<(Method, Option<f64>)>,
    pub entailment: Vec<EntailmentSection>,
    pub nli: Option<NliProbeResult>,
}

impl ProbeReport {
    pub fn empty(model: impl Into<String>) -> Self {
        ProbeReport {
            model: model.into(),
            model_notes: Vec::new(),
            config_hash: String::new(),
            coverage: None,
            mlm: None,
            ranking: Vec::new(),
            ranking_overall: Vec::new(),
            entailment: Vec::new(),
            nli: None,
        }
    }
}
