//! Uniform access to the models under test.
//!
//! Backends implement small capability traits ([`MaskedLanguageModel`],
//! [`ContextualEmbedder`], [`NliClassifier`], [`CausalLanguageModel`]); the gateway functions
//! on top of them handle mask placeholders, vocabulary normalization and candidate scoring so
//! the probes never see tokenizer conventions. A [`ModelHandle`] bundles whatever capabilities
//! one configured model offers.

pub mod config;
pub mod http;
pub mod mock;
pub mod planted;
pub mod remote;

mod scoring;

pub use config::{load_model, ModelConfig, ModelKind};
pub use scoring::{normalize_piece, CandidateScore, MaskQuery};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::NliLabel;
use crate::MASK;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("model `{model}` has no {capability} capability")]
    Capability { model: String, capability: &'static str },
    #[error("span {start}..{end} does not align with the tokenization: {message}")]
    Alignment {
        start: usize,
        end: usize,
        message: String,
    },
    #[error("model error: {0}")]
    Model(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("remote request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: String },
    #[error("response cache: {0}")]
    Cache(String),
    #[error("model configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub log_prob: f64,
}

/// Candidates for one mask slot, ordered by descending log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCompletions {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl RankedCompletions {
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.surface.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    MeanSubtokens,
    FirstSubtoken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelection {
    #[default]
    Last,
    MeanLastFour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    /// Layer index reported by the backend; -1 for the final layer, -4 for the mean of
    /// the last four.
    pub layer: i32,
    pub pooling: Pooling,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, layer: i32, pooling: Pooling) -> Result<Self, GatewayError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GatewayError::Model(format!("embedding entry {i} is not finite")));
        }
        Ok(EmbeddingVector { values, layer, pooling })
    }
}

/// Probabilities over ENTAILMENT, NEUTRAL, CONTRADICTION (in that order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub probs: [f64; 3],
}

impl NliVerdict {
    pub fn new(probs: [f64; 3]) -> Result<Self, GatewayError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(GatewayError::Model(format!(
                "NLI probabilities {probs:?} do not form a distribution"
            )));
        }
        Ok(NliVerdict { probs })
    }

    /// Labels sharing the highest probability, in label order.
    pub fn argmax_labels(&self) -> Vec<NliLabel> {
        let max = self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        NliLabel::ALL
            .into_iter()
            .filter(|l| self.probs[l.index()] == max)
            .collect()
    }
}

pub trait MaskedLanguageModel: Send + Sync {
    fn model_id(&self) -> &str;

    /// The tokenizer's own mask token; dataset placeholders are rewritten to it.
    fn mask_token(&self) -> &str {
        MASK
    }

    /// Log-probabilities of every vocabulary piece at the single mask position, as raw
    /// tokenizer pieces.
    fn vocab_log_probs(&self, text: &str) -> Result<Vec<(String, f64)>, GatewayError>;

    /// Raw pieces the tokenizer produces for `word` in word-initial position.
    fn tokenize_word(&self, word: &str) -> Result<Vec<String>, GatewayError>;

    /// Conditional log-probabilities of `pieces` when the mask is widened to
    /// `pieces.len()` masks and filled left to right.
    fn incremental_log_probs(&self, text: &str, pieces: &[String]) -> Result<Vec<f64>, GatewayError>;
}

pub trait ContextualEmbedder: Send + Sync {
    fn model_id(&self) -> &str;

    fn hidden_size(&self) -> usize;

    /// Pooled hidden state of the subtokens covering the character span `[start, end)`.
    fn embed_span(&self, text: &str, start: usize, end: usize) -> Result<EmbeddingVector, GatewayError>;
}

pub trait NliClassifier: Send + Sync {
    fn model_id(&self) -> &str;

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError>;
}

pub trait CausalLanguageModel: Send + Sync {
    fn model_id(&self) -> &str;

    fn sentence_log_prob(&self, text: &str) -> Result<f64, GatewayError>;
}

/// Scores a causal model on mask queries by substituting each candidate word and
/// normalizing the full-sentence log-likelihoods over the candidate set.
pub struct CausalMaskAdapter {
    model: Arc<dyn CausalLanguageModel>,
    candidates: Vec<String>,
}

impl CausalMaskAdapter {
    pub fn new(model: Arc<dyn CausalLanguageModel>, candidates: Vec<String>) -> Self {
        CausalMaskAdapter { model, candidates }
    }
}

impl MaskedLanguageModel for CausalMaskAdapter {
    fn model_id(&self) -> &str {
        self.model.model_id()
    }

    fn vocab_log_probs(&self, text: &str) -> Result<Vec<(String, f64)>, GatewayError> {
        let scores = self
            .candidates
            .iter()
            .map(|c| {
                let sentence = text.replacen(MASK, c, 1);
                Ok((c.clone(), self.model.sentence_log_prob(&sentence)?))
            })
            .collect::<Result<Vec<_>, GatewayError>>()?;
        Ok(log_softmax(scores))
    }

    fn tokenize_word(&self, word: &str) -> Result<Vec<String>, GatewayError> {
        Ok(vec![word.to_string()])
    }

    fn incremental_log_probs(&self, _text: &str, _pieces: &[String]) -> Result<Vec<f64>, GatewayError> {
        Err(GatewayError::Capability {
            model: self.model.model_id().to_string(),
            capability: "incremental unmasking",
        })
    }
}

/// Normalizes raw scores into log-probabilities.
pub fn log_softmax(scores: Vec<(String, f64)>) -> Vec<(String, f64)> {
    let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return scores;
    }
    let lse = max + scores.iter().map(|s| (s.1 - max).exp()).sum::<f64>().ln();
    scores.into_iter().map(|(w, s)| (w, s - lse)).collect()
}

/// One configured model and the capabilities it offers.
#[derive(Clone)]
pub struct ModelHandle {
    pub id: String,
    /// Free-form notes carried into report manifests (e.g. reconstruction caveats).
    pub notes: Vec<String>,
    pub batch_size: usize,
    pub mlm: Option<Arc<dyn MaskedLanguageModel>>,
    pub embedder: Option<Arc<dyn ContextualEmbedder>>,
    pub nli: Option<Arc<dyn NliClassifier>>,
    pub remote: Option<Arc<remote::RemoteCompleter>>,
}

impl std::fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelHandle")
            .field("id", &self.id)
            .field("mlm", &self.mlm.is_some())
            .field("embedder", &self.embedder.is_some())
            .field("nli", &self.nli.is_some())
            .field("remote", &self.remote.is_some())
            .finish()
    }
}

impl ModelHandle {
    pub fn new(id: impl Into<String>) -> Self {
        ModelHandle {
            id: id.into(),
            notes: Vec::new(),
            batch_size: 32,
            mlm: None,
            embedder: None,
            nli: None,
            remote: None,
        }
    }

    fn missing(&self, capability: &'static str) -> GatewayError {
        GatewayError::Capability {
            model: self.id.clone(),
            capability,
        }
    }

    pub fn mlm(&self) -> Result<&dyn MaskedLanguageModel, GatewayError> {
        self.mlm.as_deref().ok_or_else(|| self.missing("masked LM"))
    }

    pub fn embedder(&self) -> Result<&dyn ContextualEmbedder, GatewayError> {
        self.embedder.as_deref().ok_or_else(|| self.missing("embedding"))
    }

    pub fn nli(&self) -> Result<&dyn NliClassifier, GatewayError> {
        self.nli.as_deref().ok_or_else(|| self.missing("NLI"))
    }

    pub fn remote(&self) -> Result<&remote::RemoteCompleter, GatewayError> {
        self.remote.as_deref().ok_or_else(|| self.missing("remote completion"))
    }
}

/// Checks the single-mask precondition shared by every mask query.
pub fn check_single_mask(text: &str) -> Result<(), GatewayError> {
    match text.matches(MASK).count() {
        1 => Ok(()),
        0 => Err(GatewayError::Input(format!("no {MASK} in `{text}`"))),
        n => Err(GatewayError::Input(format!("{n} masks in `{text}`, expected one"))),
    }
}

/// Rewrites the dataset placeholder to the model's mask token.
pub fn to_model_text(model: &dyn MaskedLanguageModel, text: &str) -> Result<String, GatewayError> {
    check_single_mask(text)?;
    Ok(text.replacen(MASK, model.mask_token(), 1))
}

/// Normalized top-`k` single-token completions for one mask slot.
pub fn fill_mask_topk(
    model: &dyn MaskedLanguageModel,
    query_id: &str,
    text: &str,
    k: usize,
) -> Result<RankedCompletions, GatewayError> {
    let q = MaskQuery::run(model, text)?;
    Ok(q.top_k(query_id, k))
}

/// Log-probabilities of `candidates` in one mask slot.
pub fn score_candidates(
    model: &dyn MaskedLanguageModel,
    text: &str,
    candidates: &[&str],
) -> Result<Vec<CandidateScore>, GatewayError> {
    if candidates.is_empty() {
        return Err(GatewayError::Input("no candidates to score".into()));
    }
    let q = MaskQuery::run(model, text)?;
    candidates.iter().map(|c| q.score(model, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_validation_and_argmax() {
        assert!(NliVerdict::new([0.5, 0.5, 0.1]).is_err());
        let v = NliVerdict::new([0.4, 0.2, 0.4]).unwrap();
        assert_eq!(v.argmax_labels(), [NliLabel::Entailment, NliLabel::Contradiction]);
    }

    #[test]
    fn mask_count_is_checked() {
        assert!(check_single_mask("it is cold.").is_err());
        assert!(check_single_mask("[MASK] and [MASK]").is_err());
        assert!(check_single_mask("is [MASK] cold.").is_ok());
    }

    #[test]
    fn non_finite_embeddings_are_rejected() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN], -1, Pooling::MeanSubtokens).is_err());
    }

    #[test]
    fn handle_reports_missing_capability() {
        let h = ModelHandle::new("bare");
        let e = h.nli().err().unwrap().to_string();
        assert!(e.contains("bare") && e.contains("NLI"), "{e}");
    }

    #[test]
    fn log_softmax_sums_to_one() {
        let v = log_softmax(vec![("a".into(), 2.0), ("b".into(), 1.0), ("c".into(), -3.0)]);
        let s: f64 = v.iter().map(|x| x.1.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
