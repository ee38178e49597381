//! Dependency-parse provider boundary.
//!
//! Extraction only needs part-of-speech tags, `advmod` attachments and sentence
//! boundaries. Two providers ship with the crate: [`HeuristicParser`], a rule-based
//! tagger good enough for `ADV ADJ.` detection, and [`PreparsedProvider`], which replays
//! parses produced by an external parser (e.g. exported spaCy docs).

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("parse precondition violated: empty text")]
    EmptyText,
    #[error("no parse available for text")]
    Missing,
    #[error("inconsistent parse: {0}")]
    Inconsistent(String),
    #[error("parse provider failure: {0}")]
    Provider(String),
}

/// One token with character offsets into the parsed text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedToken {
    pub text: String,
    /// Character (not byte) offset of the first character.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
    /// Universal POS tag (`ADJ`, `ADV`, `PUNCT`, ...).
    pub pos: String,
    /// Index of the syntactic head; the root points at itself.
    pub head: usize,
    pub dep: String,
    pub sent: usize,
}

pub trait ParseProvider: Send + Sync {
    fn parse(&self, text: &str) -> Result<Vec<ParsedToken>, ParseError>;
}

/// Checks the structural contract every provider must meet.
pub fn validate_parse(text: &str, tokens: &[ParsedToken]) -> Result<(), ParseError> {
    let n_chars = text.chars().count();
    let mut last_end = 0;
    let mut last_sent = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.start < last_end || t.end <= t.start || t.end > n_chars {
            return Err(ParseError::Inconsistent(format!(
                "token {i} has offsets {}..{}",
                t.start, t.end
            )));
        }
        if t.head >= tokens.len() {
            return Err(ParseError::Inconsistent(format!(
                "token {i} has head {} out of range",
                t.head
            )));
        }
        if t.sent < last_sent {
            return Err(ParseError::Inconsistent(format!(
                "sentence index decreases at token {i}"
            )));
        }
        last_end = t.end;
        last_sent = t.sent;
    }
    Ok(())
}

/// Replays parses keyed by exact comment text.
#[derive(Debug, Default, Clone)]
pub struct PreparsedProvider {
    docs: HashMap<String, Vec<ParsedToken>>,
}

#[derive(Debug, Deserialize)]
struct PreparsedRecord {
    text: String,
    tokens: Vec<ParsedToken>,
}

impl PreparsedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, text: impl Into<String>, tokens: Vec<ParsedToken>) {
        self.docs.insert(text.into(), tokens);
    }

    /// Loads JSONL records of the form `{"text": ..., "tokens": [...]}`.
    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let records: Vec<PreparsedRecord> = crate::io::read_jsonl(path)?;
        let mut p = Self::new();
        for r in records {
            p.insert(r.text, r.tokens);
        }
        Ok(p)
    }
}

impl ParseProvider for PreparsedProvider {
    fn parse(&self, text: &str) -> Result<Vec<ParsedToken>, ParseError> {
        if text.trim().is_empty() {
            return Err(ParseError::EmptyText);
        }
        self.docs.get(text).cloned().ok_or(ParseError::Missing)
    }
}

/// Rule-based tokenizer, sentence splitter and tagger.
///
/// Adverbs come from the lexicon plus a short list of common adverbs. A word following
/// an adverb is tagged `ADJ` when it is a known adjective, carries a strong adjectival
/// suffix, or sits in a copular frame (`is/are/seems ... ADV ___`) and is not a closed-class
/// word, an `-ly` adverb or a verb participle. Each adverb directly preceding an adjective
/// is attached to it as `advmod`.
#[derive(Debug, Clone)]
pub struct HeuristicParser {
    adverbs: HashSet<String>,
}

const COMMON_ADVERBS: &[&str] = &[
    "also", "just", "so", "too", "even", "still", "again", "almost", "rather", "fairly",
    "extremely", "incredibly", "totally", "absolutely", "super", "less", "more", "most",
    "least", "somewhat", "truly", "simply", "entirely", "highly", "mostly", "largely",
    "barely", "nearly", "utterly", "obviously", "clearly", "only", "now", "then", "there",
    "here", "ever", "once", "already", "seriously", "honestly", "literally", "genuinely",
];

const COPULAS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "'s", "'re", "'m", "isn't",
    "aren't", "wasn't", "weren't", "seems", "seem", "seemed", "looks", "look", "looked",
    "feels", "feel", "felt", "sounds", "sound", "sounded", "becomes", "become", "became",
    "gets", "get", "got", "getting", "remains", "remain", "remained", "stays", "stay",
    "stayed", "it's", "that's", "he's", "she's", "they're", "you're", "we're", "i'm",
    "what's", "there's", "appears", "appear", "appeared",
];

const CLOSED_CLASS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its",
    "our", "their", "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them",
    "and", "or", "but", "if", "because", "so", "of", "in", "on", "at", "to", "for", "with",
    "by", "from", "about", "as", "into", "than", "there", "here", "not", "no", "yes", "do",
    "does", "did", "done", "have", "has", "had", "will", "would", "can", "could", "should",
    "may", "might", "must", "shall", "what", "which", "who", "whom", "whose", "when",
    "where", "why", "how", "all", "some", "any", "each", "every", "much", "many", "more",
    "most", "less", "few", "well", "one", "two", "three", "someone", "something",
    "everyone", "everything", "nothing", "nobody", "anything", "anyone", "people", "thing",
    "things", "enough",
];

const KNOWN_ADJECTIVES: &[&str] = &[
    "able", "bad", "big", "black", "clear", "different", "early", "easy", "economic",
    "federal", "free", "full", "good", "hard", "high", "human", "important", "international",
    "large", "late", "little", "local", "low", "military", "national", "new", "old",
    "political", "possible", "public", "real", "recent", "right", "small", "social",
    "special", "strong", "white", "young", "wrong", "true", "false", "great", "nice",
    "cold", "hot", "warm", "cool", "happy", "sad", "angry", "funny", "stupid", "smart",
    "dumb", "crazy", "weird", "rare", "common", "cheap", "expensive", "rich", "poor",
    "safe", "dangerous", "racist", "sexist", "fair", "unfair", "likely", "unlikely",
    "empathetic", "exceptional", "interesting", "amazing", "boring", "annoying",
    "confusing", "disgusting", "surprising", "fascinating", "tired", "excited",
    "interested", "complicated", "naive", "corrupt", "wealthy", "healthy", "sick", "busy",
    "quiet", "loud", "dark", "bright", "clean", "dirty", "obvious", "aware", "afraid",
    "alive", "dead", "wise", "fine", "close", "far", "simple", "difficult", "honest",
    "legal", "illegal", "relevant", "accurate", "fake", "ridiculous", "absurd", "wild",
    "long", "short", "tall", "slow", "fast", "quick", "blue", "red", "green", "nuts",
    "sure", "ugly", "lovely", "friendly", "silly", "likely", "lonely", "costly", "elderly",
];

const STRONG_ADJ_SUFFIXES: &[&str] = &[
    "ous", "ful", "ive", "able", "ible", "less", "ic", "ical", "ish", "istic",
];

fn lists() -> &'static (HashSet<&'static str>, HashSet<&'static str>, HashSet<&'static str>) {
    static LISTS: OnceLock<(HashSet<&str>, HashSet<&str>, HashSet<&str>)> = OnceLock::new();
    LISTS.get_or_init(|| {
        (
            COPULAS.iter().copied().collect(),
            CLOSED_CLASS.iter().copied().collect(),
            KNOWN_ADJECTIVES.iter().copied().collect(),
        )
    })
}

impl HeuristicParser {
    pub fn new(lexicon: &Lexicon) -> Self {
        let mut adverbs: HashSet<String> = COMMON_ADVERBS.iter().map(|s| s.to_string()).collect();
        adverbs.extend(lexicon.entries().iter().map(|e| e.surface.clone()));
        HeuristicParser { adverbs }
    }

    fn is_adverb(&self, lower: &str) -> bool {
        self.adverbs.contains(lower)
            || (lower.ends_with("ly") && lower.len() > 4 && !lists().2.contains(lower))
    }

    fn is_adjective(&self, lower: &str, copular: bool) -> bool {
        let (_, closed, known) = lists();
        if known.contains(lower) {
            return true;
        }
        if closed.contains(lower) || self.adverbs.contains(lower) || lower.ends_with("ly") {
            return false;
        }
        if !lower.chars().all(|c| c.is_alphabetic() || c == '-') {
            return false;
        }
        if lower.ends_with("ing") || lower.ends_with("ed") || lower.ends_with("ment") {
            return false;
        }
        if STRONG_ADJ_SUFFIXES.iter().any(|s| lower.ends_with(s)) && lower.len() > 4 {
            return true;
        }
        // after `is ADV`, any remaining open-class word is read as a predicate adjective
        copular
    }
}

/// Splits into word and punctuation tokens with character offsets.
///
/// Words are runs of alphanumerics with internal apostrophes or hyphens. Runs of
/// `.`, `!`, `?` form a single token; any other punctuation character is its own token.
fn tokenize(text: &str) -> Vec<(String, usize, usize, bool)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    // (text, start, end, newline_before)
    let mut newline = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            if c == '\n' || c == '\r' {
                newline = true;
            }
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let joiner = (d == '\'' || d == '’' || d == '-')
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric();
                if d.is_alphanumeric() || joiner {
                    i += 1;
                } else {
                    break;
                }
            }
        } else if matches!(c, '.' | '!' | '?') {
            while i < chars.len() && matches!(chars[i], '.' | '!' | '?') {
                i += 1;
            }
        } else {
            i += 1;
        }
        out.push((chars[start..i].iter().collect(), start, i, newline));
        newline = false;
    }
    out
}

const ABBREVIATIONS: &[&str] = &["mr", "mrs", "ms", "dr", "prof", "st", "vs", "etc", "jr", "sr"];

pub(crate) fn is_terminal_punct(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| matches!(c, '.' | '!' | '?'))
}

impl ParseProvider for HeuristicParser {
    fn parse(&self, text: &str) -> Result<Vec<ParsedToken>, ParseError> {
        if text.trim().is_empty() {
            return Err(ParseError::EmptyText);
        }
        let (copulas, _, _) = lists();
        let raw = tokenize(text);
        let mut tokens: Vec<ParsedToken> = Vec::with_capacity(raw.len());
        let mut sent = 0;
        for (i, (tok, start, end, newline_before)) in raw.iter().enumerate() {
            if i > 0 {
                let prev = &raw[i - 1].0;
                let abbrev = i >= 2
                    && prev == "."
                    && ABBREVIATIONS.contains(&raw[i - 2].0.to_lowercase().as_str());
                if *newline_before || (is_terminal_punct(prev) && !abbrev) {
                    sent += 1;
                }
            }
            let pos = if tok.chars().all(|c| !c.is_alphanumeric()) {
                "PUNCT"
            } else {
                "X"
            };
            tokens.push(ParsedToken {
                text: tok.clone(),
                start: *start,
                end: *end,
                pos: pos.to_string(),
                head: i,
                dep: if pos == "PUNCT" { "punct" } else { "dep" }.to_string(),
                sent,
            });
        }
        // tag adverbs first, then adjectives that they can attach to
        for t in tokens.iter_mut() {
            if t.pos != "PUNCT" && self.is_adverb(&t.text.to_lowercase()) {
                t.pos = "ADV".to_string();
            }
        }
        for j in 0..tokens.len() {
            if tokens[j].pos == "PUNCT" {
                continue;
            }
            let lower = tokens[j].text.to_lowercase();
            let after_adverb = j >= 1 && tokens[j - 1].pos == "ADV" && tokens[j - 1].sent == tokens[j].sent;
            let copular = after_adverb
                && j >= 2
                && tokens[j - 2].sent == tokens[j].sent
                && copulas.contains(tokens[j - 2].text.to_lowercase().as_str());
            let adverb_pos_word = tokens[j].pos == "ADV";
            if adverb_pos_word {
                continue;
            }
            if after_adverb && self.is_adjective(&lower, copular) {
                tokens[j].pos = "ADJ".to_string();
                tokens[j - 1].head = j;
                tokens[j - 1].dep = "advmod".to_string();
            } else if lists().2.contains(lower.as_str()) {
                tokens[j].pos = "ADJ".to_string();
            }
        }
        validate_parse(text, &tokens)?;
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parser() -> HeuristicParser {
        HeuristicParser::new(&Lexicon::builtin())
    }

    #[test]
    fn tags_quite_as_modifier_of_empathetic() {
        let toks = parser().parse("Most I know are quite empathetic.").unwrap();
        let quite = toks.iter().position(|t| t.text == "quite").unwrap();
        let adj = toks.iter().position(|t| t.text == "empathetic").unwrap();
        assert_eq!(toks[quite].pos, "ADV");
        assert_eq!(toks[quite].dep, "advmod");
        assert_eq!(toks[quite].head, adj);
        assert_eq!(toks[adj].pos, "ADJ");
        assert_eq!(toks.last().unwrap().pos, "PUNCT");
    }

    #[test]
    fn empty_text_is_precondition_violation() {
        assert_eq!(parser().parse("   ").unwrap_err(), ParseError::EmptyText);
    }

    #[test]
    fn no_adverb_adjective_dependency() {
        let toks = parser().parse("We went to the store yesterday.").unwrap();
        assert!(toks.iter().all(|t| t.dep != "advmod"));
    }

    #[test]
    fn sentences_split_on_terminal_punctuation_and_newlines() {
        let toks = parser().parse("One two. Three four!\nFive six? Mr. Smith left").unwrap();
        let sents: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.sent)).collect();
        assert_eq!(sents[0], ("One", 0));
        assert_eq!(sents[3], ("Three", 1));
        assert_eq!(sents[6], ("Five", 2));
        assert_eq!(sents[9], ("Mr", 3));
        assert_eq!(sents[11], ("Smith", 3));
    }

    #[test]
    fn offsets_are_character_based() {
        let text = "Café is very nice.";
        let toks = parser().parse(text).unwrap();
        let very = toks.iter().find(|t| t.text == "very").unwrap();
        let chars: Vec<char> = text.chars().collect();
        let s: String = chars[very.start..very.end].iter().collect();
        assert_eq!(s, "very");
    }

    #[test]
    fn participles_and_verbs_are_not_adjectives() {
        let toks = parser().parse("The house was completely destroyed.").unwrap();
        assert!(toks.iter().all(|t| t.dep != "advmod"));
        let toks = parser().parse("I quite agree.").unwrap();
        assert!(toks.iter().all(|t| t.dep != "advmod"));
    }

    #[test]
    fn preparsed_replays_and_reports_missing() {
        let mut p = PreparsedProvider::new();
        let toks = parser().parse("It is very cold.").unwrap();
        p.insert("It is very cold.", toks.clone());
        assert_eq!(p.parse("It is very cold.").unwrap(), toks);
        assert_eq!(p.parse("Something else.").unwrap_err(), ParseError::Missing);
    }

    #[test]
    fn validation_rejects_bad_heads() {
        let mut toks = parser().parse("It is very cold.").unwrap();
        toks[0].head = 99;
        assert!(validate_parse("It is very cold.", &toks).is_err());
    }
}
