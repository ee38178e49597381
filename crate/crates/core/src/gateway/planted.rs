//! Synthetic embedder with the gold scale planted along one direction.
//!
//! Every lexicon target in adverb position maps to `c_cat + g * u`, where `c_cat` is a
//! per-category axis, `g` the adverb's gold rank and `u` an axis orthogonal to all
//! categories. A word directly after a target adverb maps to `b_word + g * u + w` with a
//! constant offset `w` orthogonal to `u`; any other word maps to its base vector `b_word`.
//! Under this construction cosine rankings against the top adverb or the top-minus-bottom
//! direction increase strictly with gold rank.

use sha2::{Digest, Sha256};

use super::{ContextualEmbedder, EmbeddingVector, GatewayError, Pooling};
use crate::lexicon::{Lexicon, ScaleCategory};

pub const PLANTED_DIM: usize = 16;
const SCALE_AXIS: usize = 3;
const OFFSET_AXIS: usize = 4;
const BASE_START: usize = 5;

pub struct PlantedEmbedder {
    id: String,
    lexicon: Lexicon,
}

impl PlantedEmbedder {
    pub fn new(lexicon: &Lexicon) -> Self {
        PlantedEmbedder {
            id: "planted".into(),
            lexicon: lexicon.clone(),
        }
    }

    fn target_rank(&self, word: &str) -> Option<(ScaleCategory, u32)> {
        let a = self.lexicon.get(word).filter(|a| a.is_target)?;
        Some((a.category?, a.gold_rank?))
    }

    /// Deterministic base vector of a word, living in the axes after the planted ones.
    pub fn base(word: &str) -> Vec<f64> {
        let digest = Sha256::digest(word.as_bytes());
        let mut v = vec![0.0; PLANTED_DIM];
        for (i, slot) in v.iter_mut().enumerate().skip(BASE_START) {
            // each entry in [0.25, 1.25) so the vector is never zero
            *slot = 0.25 + f64::from(digest[i]) / 256.0;
        }
        v
    }

    /// The vector planted for `word` when it follows `previous`.
    pub fn planted(&self, word: &str, previous: Option<&str>) -> Vec<f64> {
        let word = word.to_lowercase();
        if let Some((cat, g)) = self.target_rank(&word) {
            let mut v = vec![0.0; PLANTED_DIM];
            let axis = ScaleCategory::ALL.iter().position(|c| *c == cat).unwrap();
            v[axis] = 1.0;
            v[SCALE_AXIS] = f64::from(g);
            return v;
        }
        let mut v = PlantedEmbedder::base(&word);
        if let Some((_, g)) = previous.and_then(|p| self.target_rank(&p.to_lowercase())) {
            v[SCALE_AXIS] += f64::from(g);
            v[OFFSET_AXIS] += 1.0;
        }
        v
    }
}

impl ContextualEmbedder for PlantedEmbedder {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn hidden_size(&self) -> usize {
        PLANTED_DIM
    }

    fn embed_span(&self, text: &str, start: usize, end: usize) -> Result<EmbeddingVector, GatewayError> {
        let chars: Vec<char> = text.chars().collect();
        let misaligned = |message: &str| GatewayError::Alignment {
            start,
            end,
            message: message.to_string(),
        };
        if start >= end || end > chars.len() {
            return Err(misaligned("span is empty or outside the text"));
        }
        let at_start = start == 0 || chars[start - 1].is_whitespace();
        let at_end = end == chars.len() || chars[end].is_whitespace();
        let span: String = chars[start..end].iter().collect();
        if !at_start || !at_end || span.contains(char::is_whitespace) {
            return Err(misaligned("span must cover exactly one whitespace token"));
        }
        let before: String = chars[..start].iter().collect();
        let previous = before.split_whitespace().last();
        EmbeddingVector::new(self.planted(&span, previous), -1, Pooling::MeanSubtokens)
    }
}
