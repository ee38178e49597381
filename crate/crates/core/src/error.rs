use thiserror::Error;

use crate::dataset::DatasetError;
use crate::extraction::ExtractionError;
use crate::gateway::GatewayError;
use crate::lexicon::LexiconError;
use crate::metrics::MetricError;
use crate::probes::ProbeError;
use crate::ranking::RankingError;
use crate::report::ReportError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for callers that drive more than one stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}
