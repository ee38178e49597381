//! Deterministic in-process models for tests, demos and the `mock` model name.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::remote::{BackendError, CompletionBackend};
use super::{
    log_softmax, CausalLanguageModel, GatewayError, MaskedLanguageModel, NliClassifier, NliVerdict,
};
use crate::dataset::NliLabel;
use crate::io::stable_key;
use crate::lexicon::Lexicon;

type LogitFn = dyn Fn(&str, &str) -> f64 + Send + Sync;

/// Words outside the lexicon that give the prior mock a realistic spread of non-adverb
/// completions.
const FILLER_WORDS: [(&str, f64); 12] = [
    ("so", 0.05),
    ("too", 0.04),
    ("also", 0.03),
    ("just", 0.05),
    ("still", 0.02),
    ("even", 0.02),
    ("more", 0.03),
    ("less", 0.01),
    ("only", 0.02),
    ("now", 0.02),
    ("that", 0.03),
    ("getting", 0.01),
];

/// Masked LM over a fixed vocabulary whose logits come from a closure of
/// `(text, word)`. Words outside the vocabulary tokenize into three-letter pieces
/// (`abc`, `##def`, ...) and get the probability they would have as a vocabulary item,
/// spread evenly across their pieces.
pub struct MockMlm {
    id: String,
    vocab: Vec<String>,
    vocab_set: HashSet<String>,
    logit: Box<LogitFn>,
}

impl MockMlm {
    pub fn new(
        id: impl Into<String>,
        vocab: Vec<String>,
        logit: impl Fn(&str, &str) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let vocab_set = vocab.iter().cloned().collect();
        MockMlm {
            id: id.into(),
            vocab,
            vocab_set,
            logit: Box::new(logit),
        }
    }

    /// Context-free mock whose preferences follow the lexicon's corpus frequencies.
    pub fn prior(lexicon: &Lexicon) -> Self {
        let mut table: HashMap<String, f64> = HashMap::new();
        let floor = lexicon
            .entries()
            .iter()
            .filter_map(|e| e.reddit_rel)
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        for e in lexicon.entries() {
            table.insert(e.surface.clone(), e.reddit_rel.unwrap_or(floor).ln());
        }
        for (w, f) in FILLER_WORDS {
            table.insert(w.to_string(), f.ln());
        }
        let mut vocab: Vec<String> = table.keys().cloned().collect();
        vocab.sort();
        MockMlm::new("mock", vocab, move |_, w| table[w])
    }

    /// Returns the logits table for a text.
    fn logits(&self, text: &str, extra: Option<&str>) -> Vec<(String, f64)> {
        self.vocab
            .iter()
            .map(String::as_str)
            .chain(extra)
            .map(|w| (w.to_string(), (self.logit)(text, w)))
            .collect()
    }
}

impl MaskedLanguageModel for MockMlm {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn vocab_log_probs(&self, text: &str) -> Result<Vec<(String, f64)>, GatewayError> {
        Ok(log_softmax(self.logits(text, None)))
    }

    fn tokenize_word(&self, word: &str) -> Result<Vec<String>, GatewayError> {
        if self.vocab_set.contains(word) {
            return Ok(vec![word.to_string()]);
        }
        if word.is_empty() || !word.chars().all(|c| c.is_alphabetic()) {
            return Err(GatewayError::Input(format!("cannot tokenize `{word}`")));
        }
        let chars: Vec<char> = word.chars().collect();
        Ok(chars
            .chunks(3)
            .enumerate()
            .map(|(i, c)| {
                let s: String = c.iter().collect();
                if i == 0 {
                    s
                } else {
                    format!("##{s}")
                }
            })
            .collect())
    }

    fn incremental_log_probs(&self, text: &str, pieces: &[String]) -> Result<Vec<f64>, GatewayError> {
        let word: String = pieces.iter().map(|p| p.trim_start_matches("##")).collect();
        let probs = log_softmax(self.logits(text, Some(&word)));
        let lp = probs.last().map(|p| p.1).unwrap_or(f64::NEG_INFINITY);
        Ok(vec![lp / pieces.len() as f64; pieces.len()])
    }
}

/// Returns the same verdict for every pair.
pub struct UniformNli {
    pub id: String,
}

impl NliClassifier for UniformNli {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(GatewayError::Input("empty NLI sentence".into()));
        }
        NliVerdict::new([1.0 / 3.0; 3])
    }
}

/// Answers from a fixed table of labelled pairs; identical sentences entail each other.
/// Unknown pairs get NEUTRAL.
pub struct OracleNli {
    pub id: String,
    table: HashMap<(String, String), NliLabel>,
}

impl OracleNli {
    pub fn new(id: impl Into<String>, pairs: impl IntoIterator<Item = (String, String, NliLabel)>) -> Self {
        OracleNli {
            id: id.into(),
            table: pairs.into_iter().map(|(p, h, l)| ((p, h), l)).collect(),
        }
    }
}

impl NliClassifier for OracleNli {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        let label = if premise == hypothesis {
            NliLabel::Entailment
        } else {
            self.table
                .get(&(premise.to_string(), hypothesis.to_string()))
                .copied()
                .unwrap_or(NliLabel::Neutral)
        };
        let mut probs = [0.0; 3];
        probs[label.index()] = 1.0;
        NliVerdict::new(probs)
    }
}

/// Causal model scoring sentences with a closure.
pub struct MockCausal {
    id: String,
    score: Box<dyn Fn(&str) -> f64 + Send + Sync>,
}

impl MockCausal {
    pub fn new(id: impl Into<String>, score: impl Fn(&str) -> f64 + Send + Sync + 'static) -> Self {
        MockCausal {
            id: id.into(),
            score: Box::new(score),
        }
    }
}

impl CausalLanguageModel for MockCausal {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn sentence_log_prob(&self, text: &str) -> Result<f64, GatewayError> {
        Ok((self.score)(text))
    }
}

/// Remote-completion stand-in: draws `n` words per prompt from the lexicon's corpus
/// frequencies, seeded by the prompt text.
pub struct PriorCompletions {
    words: Vec<(String, f64)>,
}

impl PriorCompletions {
    pub fn new(lexicon: &Lexicon) -> Self {
        let mut words: Vec<(String, f64)> = lexicon
            .entries()
            .iter()
            .filter_map(|e| e.reddit_rel.map(|f| (e.surface.clone(), f)))
            .collect();
        words.extend(FILLER_WORDS.iter().map(|(w, f)| (w.to_string(), *f)));
        PriorCompletions { words }
    }
}

impl CompletionBackend for PriorCompletions {
    fn complete(&self, prompt: &str, n: usize, model: &str) -> Result<Vec<String>, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_key(0, &format!("{model}\n{prompt}")));
        let total: f64 = self.words.iter().map(|w| w.1).sum();
        Ok((0..n)
            .map(|_| {
                let mut x = rng.random::<f64>() * total;
                for (w, f) in &self.words {
                    if x < *f {
                        return format!(" {w}");
                    }
                    x -= f;
                }
                format!(" {}", self.words.last().unwrap().0)
            })
            .collect())
    }
}
