//! Ranking statistics: pairwise accuracy, Spearman's rho, Kendall's tau-b and MRR.
//!
//! Gold orderings arrive as rank groups (tied adverbs share a value); predictions are
//! real-valued scores. Pair statistics are computed with Knight's O(n log n) merge-sort
//! counting rather than by enumerating pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("need at least two keys, got {0}")]
    TooFewKeys(usize),
    #[error("gold and predicted key sets differ")]
    KeyMismatch,
    #[error("undefined metric: every gold pair is tied")]
    AllGoldTied,
    #[error("undefined metric: zero variance in {0} ranks")]
    ZeroVariance(&'static str),
    #[error("undefined metric: empty input")]
    Empty,
    #[error("rank {0} is not a positive integer")]
    InvalidRank(usize),
    #[error("score for `{0}` is not finite")]
    NonFinite(String),
}

/// Gold rank groups and predicted scores over the same keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub keys: Vec<String>,
    pub gold: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl RankComparison {
    pub fn new(
        gold: &BTreeMap<String, u32>,
        predicted: &BTreeMap<String, f64>,
    ) -> Result<Self, MetricError> {
        if gold.len() != predicted.len() || gold.keys().any(|k| !predicted.contains_key(k)) {
            return Err(MetricError::KeyMismatch);
        }
        let keys: Vec<String> = gold.keys().cloned().collect();
        let g = keys.iter().map(|k| f64::from(gold[k])).collect();
        let p = keys.iter().map(|k| predicted[k]).collect();
        RankComparison::from_parts(keys, g, p)
    }

    pub fn from_parts(
        keys: Vec<String>,
        gold: Vec<f64>,
        predicted: Vec<f64>,
    ) -> Result<Self, MetricError> {
        if keys.len() != gold.len() || keys.len() != predicted.len() {
            return Err(MetricError::KeyMismatch);
        }
        if keys.len() < 2 {
            return Err(MetricError::TooFewKeys(keys.len()));
        }
        if let Some(i) = gold
            .iter()
            .zip(&predicted)
            .position(|(g, p)| !g.is_finite() || !p.is_finite())
        {
            return Err(MetricError::NonFinite(keys[i].clone()));
        }
        Ok(RankComparison {
            keys,
            gold,
            predicted,
        })
    }

    /// Unlabelled construction for metric batches.
    pub fn unlabelled(gold: Vec<f64>, predicted: Vec<f64>) -> Result<Self, MetricError> {
        let keys = (0..gold.len()).map(|i| i.to_string()).collect();
        RankComparison::from_parts(keys, gold, predicted)
    }
}

/// Pair counts in Knight's notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// All pairs.
    pub n0: u64,
    /// Pairs tied on x (gold).
    pub n1: u64,
    /// Pairs tied on y (predicted).
    pub n2: u64,
    /// Pairs tied on both.
    pub n3: u64,
    pub concordant: u64,
    pub discordant: u64,
}

pub fn pair_counts(x: &[f64], y: &[f64]) -> PairCounts {
    // fold -0.0 into 0.0 so sorting and equality agree
    let x: Vec<f64> = x.iter().map(|v| v + 0.0).collect();
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let n0 = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let n1 = tie_pairs(idx.iter().map(|&i| x[i]));
    let n3 = tie_pairs_joint(idx.iter().map(|&i| (x[i], y[i])));

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);
    // ys is now sorted
    let n2 = tie_pairs(ys.iter().copied());
    let concordant = n0 + n3 - n1 - n2 - discordant;
    PairCounts {
        n0,
        n1,
        n2,
        n3,
        concordant,
        discordant,
    }
}

fn tie_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

fn tie_pairs_joint(sorted: impl Iterator<Item = (f64, f64)>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<(f64, f64)> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Fraction of gold-ordered pairs whose predicted scores agree in direction.
/// Predicted ties count one half.
pub fn pairwise_accuracy(cmp: &RankComparison) -> Result<f64, MetricError> {
    let c = pair_counts(&cmp.gold, &cmp.predicted);
    let eligible = c.n0 - c.n1;
    if eligible == 0 {
        return Err(MetricError::AllGoldTied);
    }
    let pred_only_ties = c.n2 - c.n3;
    Ok((c.concordant as f64 + 0.5 * pred_only_ties as f64) / eligible as f64)
}

/// Tau-b: (C - D) / sqrt((n0 - n1)(n0 - n2)).
pub fn kendall_tau_b(cmp: &RankComparison) -> Result<f64, MetricError> {
    let c = pair_counts(&cmp.gold, &cmp.predicted);
    if c.n0 == c.n1 {
        return Err(MetricError::ZeroVariance("gold"));
    }
    if c.n0 == c.n2 {
        return Err(MetricError::ZeroVariance("predicted"));
    }
    let num = c.concordant as f64 - c.discordant as f64;
    let den = (((c.n0 - c.n1) as f64) * ((c.n0 - c.n2) as f64)).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

/// Average (fractional) ranks, 1-based.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = v.iter().map(|x| x + 0.0).collect();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start..end hold one tie group, ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average-rank vectors.
pub fn spearman_rho(cmp: &RankComparison) -> Result<f64, MetricError> {
    let rg = average_ranks(&cmp.gold);
    let rp = average_ranks(&cmp.predicted);
    let n = rg.len() as f64;
    let mg = rg.iter().sum::<f64>() / n;
    let mp = rp.iter().sum::<f64>() / n;
    let (mut sgg, mut spp, mut sgp) = (0.0, 0.0, 0.0);
    for (g, p) in rg.iter().zip(&rp) {
        let (dg, dp) = (g - mg, p - mp);
        sgg += dg * dg;
        spp += dp * dp;
        sgp += dg * dp;
    }
    if sgg == 0.0 {
        return Err(MetricError::ZeroVariance("gold"));
    }
    if spp == 0.0 {
        return Err(MetricError::ZeroVariance("predicted"));
    }
    Ok((sgp / (sgg * spp).sqrt()).clamp(-1.0, 1.0))
}

pub fn mean_reciprocal_rank(ranks: &[usize]) -> Result<f64, MetricError> {
    if ranks.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for &r in ranks {
        if r == 0 {
            return Err(MetricError::InvalidRank(r));
        }
        sum += 1.0 / r as f64;
    }
    Ok(sum / ranks.len() as f64)
}

/// The three correlation statistics of one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub pairwise_accuracy: f64,
    pub spearman_rho: Option<f64>,
    pub kendall_tau_b: Option<f64>,
}

/// Computes all three; correlations are `None` when predicted scores have no variance.
pub fn ranking_metrics(cmp: &RankComparison) -> Result<RankingMetrics, MetricError> {
    let pairwise_accuracy = pairwise_accuracy(cmp)?;
    let defined = |r: Result<f64, MetricError>| match r {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::ZeroVariance("predicted")) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(RankingMetrics {
        pairwise_accuracy,
        spearman_rho: defined(spearman_rho(cmp))?,
        kendall_tau_b: defined(kendall_tau_b(cmp))?,
    })
}
