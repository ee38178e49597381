//! The evaluations: masked-adverb prediction, scalar entailment completion (model, random
//! baseline and remote API), and NLI classification of the sentence-pair adaptation.
//!
//! Every probe emits one record per input item, in input order, and aggregates computed
//! from those records alone, so results do not depend on how items were scheduled.

pub mod baseline;
pub mod entailment;
pub mod mlm;
pub mod nli;
pub mod remote;

pub use baseline::run_random_baseline;
pub use entailment::{
    classify_answer, classify_entailment_answer, run_entailment_probe, scan_answer,
    ClassCounts, Classification, EntailmentAggregates, EntailmentProbeOutput, EntailmentRecord,
    EntailmentVerdict, NegVariant,
};
pub use mlm::{run_mlm_probe, MlmAggregates, MlmProbeOutput, MlmRecord, MlmVerdict};
pub use nli::{run_nli_probe, NliProbeOutput, NliProbeResult, NliRecord};
pub use remote::{run_remote_probe, stratified_sample, DEFAULT_PROMPT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;
use crate::lexicon::Lexicon;
use crate::metrics::MetricError;

/// Column for answers outside the lexicon.
pub const OTHER: &str = "OTHER";

/// Completions scanned for a lexicon answer.
pub const SCAN_DEPTH: usize = 10;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid probe input: {0}")]
    Input(String),
}

/// Counts of target adverb (rows) against the first lexicon answer (columns).
///
/// Rows are the targets grouped by category in gold order; columns are the same targets,
/// then `not`, then [`OTHER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(lexicon: &Lexicon) -> Self {
        let rows: Vec<String> = lexicon.targets().iter().map(|a| a.surface.clone()).collect();
        let mut columns: Vec<String> = lexicon.answer_vocabulary().into_iter().map(String::from).collect();
        columns.push(OTHER.to_string());
        let counts = vec![vec![0; columns.len()]; rows.len()];
        ConfusionMatrix { rows, columns, counts }
    }

    /// Adds one observation; unknown rows are ignored, unknown answers land in OTHER.
    pub fn add(&mut self, target: &str, answer: &str) {
        let Some(r) = self.rows.iter().position(|x| x == target) else { return };
        let c = self
            .columns
            .iter()
            .position(|x| x == answer)
            .unwrap_or(self.columns.len() - 1);
        self.counts[r][c] += 1;
    }

    pub fn row_total(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_layout() {
        let lex = Lexicon::builtin();
        let mut m = ConfusionMatrix::new(&lex);
        assert_eq!(m.rows.len(), 24);
        assert_eq!(m.columns.len(), 26);
        assert_eq!(m.columns[24], "not");
        assert_eq!(m.columns[25], OTHER);
        assert_eq!(m.rows[0], "maybe");
        m.add("very", "very");
        m.add("very", "banana");
        m.add("banana", "very");
        let r = m.rows.iter().position(|x| x == "very").unwrap();
        assert_eq!(m.row_total(r), 2);
        assert_eq!(m.counts[r][25], 1);
        assert_eq!(m.total(), 2);
    }
}
