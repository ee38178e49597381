//! Scale recovery from contextual embeddings: SIM, DIFF and AdjDIFF.
//!
//! Every query uses the frame `it is {adverb} {adjective} .` (and `it is {adjective} .`
//! for unmodified adjectives). Score ties in the predicted order are broken alphabetically,
//! never by gold position.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ContextualEmbedder, GatewayError};
use crate::lexicon::{Lexicon, ScaleCategory};
use crate::metrics::{ranking_metrics, MetricError, RankComparison, RankingMetrics};
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("cosine undefined: {0} is a zero vector")]
    UndefinedCosine(String),
    #[error("degenerate {0} reference: top and bottom embeddings coincide")]
    DegenerateReference(ScaleCategory),
    #[error("embedding length mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no frame adjectives supplied")]
    NoFrames,
    #[error("frame `{frame}`: {source}")]
    Frame {
        frame: String,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Sim,
    Diff,
    AdjDiff,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sim, Method::Diff, Method::AdjDiff];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sim => "SIM",
            Method::Diff => "DIFF",
            Method::AdjDiff => "ADJDIFF",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sim" => Ok(Method::Sim),
            "diff" => Ok(Method::Diff),
            "adjdiff" | "adj-diff" | "adj_diff" => Ok(Method::AdjDiff),
            other => Err(format!("unknown ranking method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub category: ScaleCategory,
    pub method: Method,
    pub scores: BTreeMap<String, f64>,
    /// Evaluated adverbs by descending score.
    pub predicted_order: Vec<String>,
    pub metrics: RankingMetrics,
}

pub fn cosine(a: &[f64], b: &[f64], what: &str) -> Result<f64, RankingError> {
    if a.len() != b.len() {
        return Err(RankingError::DimensionMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 {
        return Err(RankingError::UndefinedCosine(what.to_string()));
    }
    if nb == 0.0 {
        return Err(RankingError::UndefinedCosine("the reference".to_string()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Frame text with the character span of the word at `position` (0-based, after "it is").
fn frame(words: &[&str], position: usize) -> (String, usize, usize) {
    let mut text = String::from("it is");
    let mut span = (0, 0);
    for (i, w) in words.iter().enumerate() {
        text.push(' ');
        let start = text.chars().count();
        text.push_str(w);
        if i == position {
            span = (start, start + w.chars().count());
        }
    }
    text.push_str(" .");
    (text, span.0, span.1)
}

fn embed(
    embedder: &dyn ContextualEmbedder,
    words: &[&str],
    position: usize,
) -> Result<Vec<f64>, RankingError> {
    let (text, start, end) = frame(words, position);
    embedder
        .embed_span(&text, start, end)
        .map(|e| e.values)
        .map_err(|source| RankingError::Frame { frame: text, source })
}

/// Mean contextual embedding of `adverb` over the frames `it is {adverb} {adjective} .`.
/// Any failing frame fails the whole mean.
pub fn adverb_context_embedding(
    embedder: &dyn ContextualEmbedder,
    adverb: &str,
    frames: &[String],
) -> Result<Vec<f64>, RankingError> {
    if frames.is_empty() {
        return Err(RankingError::NoFrames);
    }
    let vs = frames
        .iter()
        .map(|adj| embed(embedder, &[adverb, adj], 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&vs))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingOptions {
    /// AdjDIFF: average the difference vectors and take one cosine instead of averaging
    /// per-frame cosines.
    pub adjdiff_mean_of_differences: bool,
}

pub struct Ranker<'a> {
    embedder: &'a dyn ContextualEmbedder,
    lexicon: &'a Lexicon,
    frames: &'a [String],
    pub options: RankingOptions,
    pub exec: Exec,
}

impl<'a> Ranker<'a> {
    pub fn new(embedder: &'a dyn ContextualEmbedder, lexicon: &'a Lexicon, frames: &'a [String]) -> Self {
        Ranker {
            embedder,
            lexicon,
            frames,
            options: RankingOptions::default(),
            exec: Exec::default(),
        }
    }

    fn adverbs(&self, cat: ScaleCategory) -> Vec<String> {
        self.lexicon
            .targets_in(cat)
            .iter()
            .map(|a| a.surface.clone())
            .collect()
    }

    fn context_embeddings(&self, adverbs: &[String]) -> Result<BTreeMap<String, Vec<f64>>, RankingError> {
        let vs = self
            .exec
            .map(adverbs, |a| adverb_context_embedding(self.embedder, a, self.frames));
        adverbs
            .iter()
            .cloned()
            .zip(vs)
            .map(|(a, v)| v.map(|v| (a, v)))
            .collect()
    }

    fn reference(&self, cat: ScaleCategory, emb: &BTreeMap<String, Vec<f64>>) -> Result<Vec<f64>, RankingError> {
        let scale = self.lexicon.scale(cat);
        let r = sub(&emb[&scale.top], &emb[&scale.bottom_nonneg]);
        if r.iter().all(|x| *x == 0.0) {
            return Err(RankingError::DegenerateReference(cat));
        }
        Ok(r)
    }

    fn finish(&self, cat: ScaleCategory, method: Method, scores: BTreeMap<String, f64>) -> Result<RankingResult, RankingError> {
        let mut predicted_order: Vec<String> = scores.keys().cloned().collect();
        predicted_order.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b)));
        let gold: BTreeMap<String, u32> = scores
            .keys()
            .map(|k| (k.clone(), self.lexicon.get(k).and_then(|a| a.gold_rank).unwrap_or(0)))
            .collect();
        let metrics = ranking_metrics(&RankComparison::new(&gold, &scores)?)?;
        Ok(RankingResult {
            category: cat,
            method,
            scores,
            predicted_order,
            metrics,
        })
    }

    /// Cosine with the top adverb, over every target of the category.
    pub fn rank_sim(&self, cat: ScaleCategory) -> Result<RankingResult, RankingError> {
        let adverbs = self.adverbs(cat);
        let emb = self.context_embeddings(&adverbs)?;
        let top = &emb[&self.lexicon.scale(cat).top];
        let scores = adverbs
            .iter()
            .map(|a| Ok((a.clone(), cosine(&emb[a], top, a)?)))
            .collect::<Result<_, RankingError>>()?;
        self.finish(cat, Method::Sim, scores)
    }

    fn non_reference(&self, cat: ScaleCategory) -> Vec<String> {
        let scale = self.lexicon.scale(cat);
        self.adverbs(cat)
            .into_iter()
            .filter(|a| *a != scale.top && *a != scale.bottom_nonneg)
            .collect()
    }

    /// Cosine with the top-minus-bottom direction; the two references are not scored.
    pub fn rank_diff(&self, cat: ScaleCategory) -> Result<RankingResult, RankingError> {
        let emb = self.context_embeddings(&self.adverbs(cat))?;
        let reference = self.reference(cat, &emb)?;
        let scores = self
            .non_reference(cat)
            .iter()
            .map(|a| Ok((a.clone(), cosine(&emb[a], &reference, a)?)))
            .collect::<Result<_, RankingError>>()?;
        self.finish(cat, Method::Diff, scores)
    }

    /// Shift of each frame adjective's embedding caused by the adverb, compared with the
    /// top-minus-bottom direction and averaged over frames.
    pub fn rank_adjdiff(&self, cat: ScaleCategory) -> Result<RankingResult, RankingError> {
        if self.frames.is_empty() {
            return Err(RankingError::NoFrames);
        }
        let emb = self.context_embeddings(&self.adverbs(cat))?;
        let reference = self.reference(cat, &emb)?;
        let plain = self
            .exec
            .map(self.frames, |adj| embed(self.embedder, &[adj], 0))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let evaluated = self.non_reference(cat);
        let per_adverb = self.exec.map(&evaluated, |a| -> Result<f64, RankingError> {
            let diffs = self
                .frames
                .iter()
                .zip(&plain)
                .map(|(adj, p)| Ok(sub(&embed(self.embedder, &[a, adj], 1)?, p)))
                .collect::<Result<Vec<_>, RankingError>>()?;
            if self.options.adjdiff_mean_of_differences {
                return cosine(&mean(&diffs), &reference, &format!("mean shift for `{a}`"));
            }
            let mut total = 0.0;
            for (d, adj) in diffs.iter().zip(self.frames) {
                total += cosine(d, &reference, &format!("shift of `{adj}` under `{a}`"))?;
            }
            Ok((total / diffs.len() as f64).clamp(-1.0, 1.0))
        });
        let scores = evaluated
            .into_iter()
            .zip(per_adverb)
            .map(|(a, s)| s.map(|s| (a, s)))
            .collect::<Result<_, _>>()?;
        self.finish(cat, Method::AdjDiff, scores)
    }

    pub fn rank(&self, method: Method, cat: ScaleCategory) -> Result<RankingResult, RankingError> {
        match method {
            Method::Sim => self.rank_sim(cat),
            Method::Diff => self.rank_diff(cat),
            Method::AdjDiff => self.rank_adjdiff(cat),
        }
    }

    /// One result per category, in display order.
    pub fn rank_all(&self, method: Method) -> Result<Vec<RankingResult>, RankingError> {
        ScaleCategory::ALL.iter().map(|&c| self.rank(method, c)).collect()
    }
}

/// Pair-weighted pooled pairwise accuracy over several categories: the number of agreeing
/// gold-ordered pairs summed over categories, divided by the number of such pairs.
pub fn overall_pairwise_accuracy(results: &[RankingResult], lexicon: &Lexicon) -> Option<f64> {
    let mut agree = 0.0;
    let mut total = 0.0;
    for r in results {
        let keys: Vec<&String> = r.scores.keys().collect();
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                let ga = lexicon.get(a)?.gold_rank?;
                let gb = lexicon.get(b)?.gold_rank?;
                if ga == gb {
                    continue;
                }
                total += 1.0;
                let (sa, sb) = (r.scores[*a], r.scores[*b]);
                if sa == sb {
                    agree += 0.5;
                } else if (sa > sb) == (ga > gb) {
                    agree += 1.0;
                }
            }
        }
    }
    (total > 0.0).then(|| agree / total)
}
