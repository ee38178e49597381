//! Dataset construction: masked MLM items with neutral baselines, template-generated
//! scalar entailment items and their NLI-pair adaptation.

pub mod entailment;
pub mod mlm;
pub mod nli;
pub mod pool;
pub mod templates;

pub use entailment::{
    correct_answers, expected_item_count, generate_entailment, Eligibility, EntailmentItem,
};
pub use mlm::{build_mlm_items, neutral_frame, MaskRejection, MaskedInstance, MlmBuild, Variant};
pub use nli::{to_nli, NliLabel, NliOutput, NliPair};
pub use pool::{AdjectivePool, FrequencyBin, PoolEntry, TableFrequency, WordFrequency};
pub use templates::{
    Condition, Direction, EntailmentTemplate, MaskPosition, PolarityFrame, TemplateSet,
};

use thiserror::Error;

use crate::lexicon::LexiconError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("templates line {line}: {message}")]
    TemplateParse { line: usize, message: String },
    #[error("template {id}: {message}")]
    Template { id: u32, message: String },
    #[error("invalid template set: {0}")]
    TemplateSet(String),
    #[error("adjective pool line {line}: {message}")]
    PoolParse { line: usize, message: String },
    #[error("invalid adjective pool: {0}")]
    Pool(String),
    #[error("invalid eligibility: {0}")]
    Eligibility(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_data_file(path: &std::path::Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}
