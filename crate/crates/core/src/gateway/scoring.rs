use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{to_model_text, Candidate, GatewayError, MaskedLanguageModel, RankedCompletions};
use crate::lexicon::normalize_surface;

/// Maps a raw vocabulary piece to the word it starts, or `None` for continuation pieces and
/// special tokens. Word-initial markers (`Ġ`, `▁`) are stripped and the result lowercased.
pub fn normalize_piece(piece: &str) -> Option<String> {
    if piece.starts_with("##") {
        return None;
    }
    let special = (piece.starts_with('<') && piece.ends_with('>'))
        || (piece.starts_with('[') && piece.ends_with(']') && piece.len() > 2);
    if special {
        return None;
    }
    let stripped = piece.trim_start_matches(['Ġ', '▁']);
    let s = normalize_surface(stripped);
    (!s.is_empty() && !s.contains(char::is_whitespace)).then_some(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub surface: String,
    /// Summed log-probability over the word's pieces.
    pub log_prob: f64,
    /// Rank among single-token words; for multi-token words, one plus the number of
    /// single-token words scoring above the per-piece mean.
    pub rank: usize,
    pub multi_token: bool,
    pub encodable: bool,
}

/// The normalized distribution at one mask slot.
#[derive(Debug, Clone)]
pub struct MaskQuery {
    model_text: String,
    candidates: Vec<Candidate>,
    index: HashMap<String, usize>,
}

impl MaskQuery {
    pub fn run(model: &dyn MaskedLanguageModel, text: &str) -> Result<MaskQuery, GatewayError> {
        let model_text = to_model_text(model, text)?;
        let raw = model.vocab_log_probs(&model_text)?;
        MaskQuery::from_raw(model_text, raw)
    }

    /// Builds the query from raw pieces. The raw distribution must sum to one.
    pub fn from_raw(model_text: String, raw: Vec<(String, f64)>) -> Result<MaskQuery, GatewayError> {
        let total: f64 = raw.iter().map(|(_, lp)| lp.exp()).sum();
        if raw.iter().any(|(_, lp)| lp.is_nan() || *lp > 1e-9) || (total - 1.0).abs() > 1e-4 {
            return Err(GatewayError::Model(format!(
                "vocabulary distribution sums to {total}, not 1"
            )));
        }
        let mut best: HashMap<String, f64> = HashMap::new();
        for (piece, lp) in raw {
            if let Some(w) = normalize_piece(&piece) {
                let e = best.entry(w).or_insert(f64::NEG_INFINITY);
                if lp > *e {
                    *e = lp;
                }
            }
        }
        let mut candidates: Vec<Candidate> = best
            .into_iter()
            .map(|(surface, log_prob)| Candidate { surface, log_prob })
            .collect();
        candidates.sort_by(|a, b| {
            b.log_prob
                .total_cmp(&a.log_prob)
                .then_with(|| a.surface.cmp(&b.surface))
        });
        let index = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.surface.clone(), i))
            .collect();
        Ok(MaskQuery {
            model_text,
            candidates,
            index,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn top_k(&self, query_id: &str, k: usize) -> RankedCompletions {
        RankedCompletions {
            query_id: query_id.to_string(),
            candidates: self.candidates.iter().take(k).cloned().collect(),
        }
    }

    /// Log-probability of a single-token word, if it is in the vocabulary.
    pub fn log_prob(&self, word: &str) -> Option<f64> {
        self.index
            .get(&normalize_surface(word))
            .map(|&i| self.candidates[i].log_prob)
    }

    fn unencodable(&self, surface: String, why: &str) -> CandidateScore {
        warn!("`{surface}` cannot be scored ({why}); using -inf");
        CandidateScore {
            surface,
            log_prob: f64::NEG_INFINITY,
            rank: self.candidates.len() + 1,
            multi_token: false,
            encodable: false,
        }
    }

    pub fn score(&self, model: &dyn MaskedLanguageModel, word: &str) -> Result<CandidateScore, GatewayError> {
        let surface = normalize_surface(word);
        let pieces = match model.tokenize_word(&surface) {
            Ok(p) if !p.is_empty() => p,
            Ok(_) => return Ok(self.unencodable(surface, "no pieces")),
            Err(e) => return Ok(self.unencodable(surface, &e.to_string())),
        };
        if pieces.len() == 1 {
            if normalize_piece(&pieces[0]).as_deref() != Some(surface.as_str()) {
                return Ok(self.unencodable(surface, "maps to a different piece"));
            }
            return Ok(match self.index.get(&surface) {
                Some(&i) => CandidateScore {
                    surface,
                    log_prob: self.candidates[i].log_prob,
                    rank: i + 1,
                    multi_token: false,
                    encodable: true,
                },
                None => self.unencodable(surface, "missing from the distribution"),
            });
        }
        let lps = model.incremental_log_probs(&self.model_text, &pieces)?;
        if lps.len() != pieces.len() {
            return Err(GatewayError::Model(format!(
                "{} log-probabilities for {} pieces",
                lps.len(),
                pieces.len()
            )));
        }
        let log_prob: f64 = lps.iter().sum();
        let per_piece = log_prob / pieces.len() as f64;
        let above = self.candidates.iter().filter(|c| c.log_prob > per_piece).count();
        Ok(CandidateScore {
            surface,
            log_prob,
            rank: above + 1,
            multi_token: true,
            encodable: true,
        })
    }
}
