//! Extraction of naturalistic probe items: sentence-final `ADV ADJ.` phrases with a
//! bounded amount of preceding context.

mod parse;

pub use parse::{
    validate_parse, HeuristicParser, ParseError, ParseProvider, ParsedToken, PreparsedProvider,
};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, ScaleCategory};
use crate::par::Exec;
use parse::is_terminal_punct;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("invalid extraction options: {0}")]
    Options(String),
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusComment {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subreddit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

impl CorpusComment {
    /// Accepts `id` (string or number) plus `body` or `text`; `created_utc` is taken as
    /// the timestamp when `timestamp` is absent.
    pub fn from_json(value: &serde_json::Value) -> Option<CorpusComment> {
        let obj = value.as_object()?;
        let id = match obj.get("id")? {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            _ => return None,
        };
        let text = obj
            .get("body")
            .or_else(|| obj.get("text"))?
            .as_str()?
            .to_string();
        if text.trim().is_empty() || id.is_empty() {
            return None;
        }
        let subreddit = obj.get("subreddit").and_then(|v| v.as_str()).map(String::from);
        let timestamp = obj
            .get("timestamp")
            .or_else(|| obj.get("created_utc"))
            .and_then(|v| v.as_i64().or_else(|| v.as_str().and_then(|s| s.parse().ok())));
        Some(CorpusComment {
            id,
            text,
            subreddit,
            timestamp,
        })
    }
}

/// Reads a JSONL corpus; lines that are not valid comment objects are counted, not fatal.
pub fn read_corpus(reader: impl BufRead) -> Result<(Vec<CorpusComment>, usize), ExtractionError> {
    let mut comments = Vec::new();
    let mut malformed = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .as_ref()
            .and_then(CorpusComment::from_json)
        {
            Some(c) => comments.push(c),
            None => malformed += 1,
        }
    }
    Ok((comments, malformed))
}

/// One masked-adverb instance taken from the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbeItem {
    pub source_id: String,
    pub context: String,
    pub adverb: String,
    pub adjective: String,
    /// Character offsets of the adverb within `context`.
    pub mask_start: usize,
    pub mask_end: usize,
    pub word_count: usize,
}

impl ProbeItem {
    pub fn item_id(&self) -> String {
        format!("{}:{}", self.source_id, self.mask_start)
    }

    /// The adverb span as it appears in the context.
    pub fn span_text(&self) -> Option<String> {
        if self.mask_end <= self.mask_start {
            return None;
        }
        let s: String = self
            .context
            .chars()
            .skip(self.mask_start)
            .take(self.mask_end - self.mask_start)
            .collect();
        (s.chars().count() == self.mask_end - self.mask_start).then_some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOptions {
    pub min_words: usize,
    pub max_words: usize,
    pub max_sentences: usize,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            min_words: 10,
            max_words: 40,
            max_sentences: 2,
        }
    }
}

impl ExtractionOptions {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(ExtractionError::Options(format!(
                "word bounds {}..={} are empty",
                self.min_words, self.max_words
            )));
        }
        if self.max_sentences == 0 {
            return Err(ExtractionError::Options("max_sentences must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub comments: usize,
    pub malformed: usize,
    pub provider_failures: usize,
    /// Sentence-final target phrases found before word-bound filtering.
    pub candidates: usize,
    pub out_of_bounds: usize,
    pub duplicates: usize,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOutput {
    pub items: Vec<ProbeItem>,
    pub stats: ExtractionStats,
}

/// Whitespace word count.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn char_slice(chars: &[char], start: usize, end: usize) -> String {
    chars[start..end].iter().collect()
}

enum CommentOutcome {
    Failed,
    Parsed {
        items: Vec<ProbeItem>,
        candidates: usize,
        out_of_bounds: usize,
    },
}

fn extract_from_comment(
    comment: &CorpusComment,
    targets: &HashSet<String>,
    provider: &dyn ParseProvider,
    opts: &ExtractionOptions,
) -> CommentOutcome {
    let tokens = match provider
        .parse(&comment.text)
        .and_then(|t| validate_parse(&comment.text, &t).map(|_| t))
    {
        Ok(t) => t,
        Err(e) => {
            warn!("skipping comment {}: {e}", comment.id);
            return CommentOutcome::Failed;
        }
    };
    let chars: Vec<char> = comment.text.chars().collect();
    let mut items = Vec::new();
    let mut candidates = 0;
    let mut out_of_bounds = 0;

    for (i, adv) in tokens.iter().enumerate() {
        let lower = adv.text.to_lowercase();
        if adv.pos != "ADV" || adv.dep != "advmod" || !targets.contains(&lower) {
            continue;
        }
        let j = i + 1;
        let Some(adj) = tokens.get(j) else { continue };
        if adv.head != j || adj.pos != "ADJ" || adj.sent != adv.sent {
            continue;
        }
        // adjective followed only by terminal punctuation within its sentence
        let rest: Vec<&ParsedToken> = tokens[j + 1..]
            .iter()
            .take_while(|t| t.sent == adj.sent)
            .collect();
        if !rest.iter().all(|t| is_terminal_punct(&t.text)) {
            continue;
        }
        let sentence_ends_text = j + 1 + rest.len() == tokens.len();
        if rest.is_empty() && !sentence_ends_text {
            continue;
        }
        candidates += 1;
        let end = rest.last().map_or(adj.end, |t| t.end);

        let mut accepted = None;
        for k in (1..=opts.max_sentences).rev() {
            if k - 1 > adv.sent {
                continue;
            }
            let first_sent = adv.sent + 1 - k;
            let start = tokens
                .iter()
                .find(|t| t.sent == first_sent)
                .map(|t| t.start)
                .expect("sentence has at least one token");
            let context = char_slice(&chars, start, end);
            let wc = word_count(&context);
            if (opts.min_words..=opts.max_words).contains(&wc) {
                accepted = Some((start, context, wc));
                break;
            }
        }
        let Some((start, context, wc)) = accepted else {
            out_of_bounds += 1;
            continue;
        };
        items.push(ProbeItem {
            source_id: comment.id.clone(),
            context,
            adverb: lower,
            adjective: adj.text.to_lowercase(),
            mask_start: adv.start - start,
            mask_end: adv.end - start,
            word_count: wc,
        });
    }
    CommentOutcome::Parsed {
        items,
        candidates,
        out_of_bounds,
    }
}

/// Extracts probe items for the target adverbs of `lexicon`.
///
/// Comments are parsed independently (in parallel under [`Exec::Parallel`]); the output is
/// sorted by `(source_id, mask_start)` and exact duplicate contexts are dropped, keeping
/// the first in that order.
pub fn extract_items(
    comments: &[CorpusComment],
    lexicon: &Lexicon,
    provider: &dyn ParseProvider,
    opts: &ExtractionOptions,
    exec: Exec,
) -> Result<ExtractionOutput, ExtractionError> {
    let targets: HashSet<String> = lexicon
        .targets()
        .iter()
        .map(|a| a.surface.clone())
        .collect();
    extract_items_for(comments, &targets, provider, opts, exec)
}

/// As [`extract_items`] with an explicit target set (already lowercased).
pub fn extract_items_for(
    comments: &[CorpusComment],
    targets: &HashSet<String>,
    provider: &dyn ParseProvider,
    opts: &ExtractionOptions,
    exec: Exec,
) -> Result<ExtractionOutput, ExtractionError> {
    opts.validate()?;
    let outcomes = exec.map(comments, |c| extract_from_comment(c, targets, provider, opts));
    let mut stats = ExtractionStats {
        comments: comments.len(),
        ..Default::default()
    };
    let mut items = Vec::new();
    for o in outcomes {
        match o {
            CommentOutcome::Failed => stats.provider_failures += 1,
            CommentOutcome::Parsed {
                items: found,
                candidates,
                out_of_bounds,
            } => {
                stats.candidates += candidates;
                stats.out_of_bounds += out_of_bounds;
                items.extend(found);
            }
        }
    }
    // stable: items from one comment stay in sentence order
    items.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    let mut seen = HashSet::new();
    let before = items.len();
    items.retain(|it| seen.insert(it.context.clone()));
    stats.duplicates = before - items.len();
    stats.items = items.len();
    Ok(ExtractionOutput { items, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub adverb: String,
    pub category: ScaleCategory,
    pub distinct_adjectives: usize,
    pub below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub threshold: usize,
    pub rows: Vec<CoverageRow>,
}

pub const DEFAULT_COVERAGE_THRESHOLD: usize = 40;

/// Distinct adjectives per target adverb, flagged against `threshold`.
pub fn coverage_report(items: &[ProbeItem], lexicon: &Lexicon, threshold: usize) -> CoverageReport {
    let mut adjs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for it in items {
        adjs.entry(it.adverb.as_str())
            .or_default()
            .insert(it.adjective.as_str());
    }
    let rows = lexicon
        .targets()
        .into_iter()
        .map(|a| {
            let n = adjs.get(a.surface.as_str()).map_or(0, |s| s.len());
            CoverageRow {
                adverb: a.surface.clone(),
                category: a.category.expect("targets have categories"),
                distinct_adjectives: n,
                below_threshold: n < threshold,
            }
        })
        .collect();
    CoverageReport { threshold, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comment(id: &str, text: &str) -> CorpusComment {
        CorpusComment {
            id: id.into(),
            text: text.into(),
            subreddit: None,
            timestamp: None,
        }
    }

    fn run(comments: &[CorpusComment]) -> ExtractionOutput {
        let lex = Lexicon::builtin();
        let parser = HeuristicParser::new(&lex);
        extract_items(comments, &lex, &parser, &ExtractionOptions::default(), Exec::Sequential)
            .unwrap()
    }

    #[test]
    fn table_row_three() {
        let out = run(&[comment(
            "t3",
            "I have never met a baby boomer who said this. Most I know are quite empathetic.",
        )]);
        assert_eq!(out.items.len(), 1);
        let it = &out.items[0];
        assert_eq!(it.adverb, "quite");
        assert_eq!(it.adjective, "empathetic");
        assert_eq!(it.span_text().as_deref(), Some("quite"));
        assert_eq!(it.word_count, 16);
    }

    #[test]
    fn mid_sentence_phrase_is_skipped() {
        let out = run(&[comment(
            "m",
            "Honestly the whole debate last night was very boring to watch for most of us here.",
        )]);
        assert!(out.items.is_empty());
    }

    #[test]
    fn one_sentence_used_when_two_exceed_bound() {
        let long = "word ".repeat(35);
        let text = format!("{long}end. This debate over the new budget proposal is definitely exceptional.");
        let out = run(&[comment("x", &text)]);
        assert_eq!(out.items.len(), 1);
        assert!(out.items[0].context.starts_with("This debate"));
        assert_eq!(out.items[0].word_count, 10);
    }

    #[test]
    fn too_short_context_is_rejected() {
        let out = run(&[comment("s", "It is very cold.")]);
        assert!(out.items.is_empty());
        assert_eq!(out.stats.out_of_bounds, 1);
        assert_eq!(out.stats.candidates, 1);
    }

    #[test]
    fn duplicates_are_removed() {
        let text = "I have never met a baby boomer who said this. Most I know are quite empathetic.";
        let out = run(&[comment("b", text), comment("a", text)]);
        assert_eq!(out.items.len(), 1);
        assert_eq!(out.items[0].source_id, "a");
        assert_eq!(out.stats.duplicates, 1);
    }

    #[test]
    fn provider_failures_are_counted() {
        let provider = PreparsedProvider::new();
        let lex = Lexicon::builtin();
        let out = extract_items(
            &[comment("a", "Some text here.")],
            &lex,
            &provider,
            &ExtractionOptions::default(),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(out.stats.provider_failures, 1);
        assert!(out.items.is_empty());
    }

    #[test]
    fn corpus_reader_accepts_body_or_text_and_counts_malformed() {
        let data = concat!(
            "{\"id\": \"a\", \"body\": \"hello there\", \"subreddit\": \"politics\", \"created_utc\": 1420070400}\n",
            "{\"id\": 7, \"text\": \"numeric id\"}\n",
            "not json\n",
            "{\"id\": \"c\", \"body\": \"\"}\n",
            "{\"body\": \"missing id\"}\n",
        );
        let (comments, malformed) = read_corpus(data.as_bytes()).unwrap();
        assert_eq!(comments.len(), 2);
        assert_eq!(comments[0].timestamp, Some(1420070400));
        assert_eq!(comments[1].id, "7");
        assert_eq!(malformed, 3);
    }

    #[test]
    fn coverage_thresholds() {
        let lex = Lexicon::builtin();
        let empty = coverage_report(&[], &lex, 40);
        assert_eq!(empty.rows.len(), 24);
        assert!(empty.rows.iter().all(|r| r.distinct_adjectives == 0 && r.below_threshold));

        let items: Vec<ProbeItem> = (0..39)
            .map(|i| ProbeItem {
                source_id: i.to_string(),
                context: format!("context {i}"),
                adverb: "very".into(),
                adjective: format!("adj{i}"),
                mask_start: 0,
                mask_end: 4,
                word_count: 12,
            })
            .collect();
        let rep = coverage_report(&items, &lex, 40);
        let very = rep.rows.iter().find(|r| r.adverb == "very").unwrap();
        assert_eq!(very.distinct_adjectives, 39);
        assert!(very.below_threshold);
        let rep = coverage_report(&items, &lex, 39);
        assert!(!rep.rows.iter().find(|r| r.adverb == "very").unwrap().below_threshold);
    }

    #[test]
    fn options_are_validated() {
        let bad = ExtractionOptions {
            min_words: 20,
            max_words: 10,
            max_sentences: 2,
        };
        assert!(bad.validate().is_err());
    }
}
