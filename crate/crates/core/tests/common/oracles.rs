//! Brute-force reference implementations: every pair enumerated, ranks found by counting.

use std::cmp::Ordering;

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap()
}

/// Gold-untied pairs; predicted agreement scores 1, predicted tie 1/2.
pub fn pairwise_accuracy(gold: &[f64], pred: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..gold.len() {
        for j in i + 1..gold.len() {
            let g = cmp(gold[i], gold[j]);
            if g == Ordering::Equal {
                continue;
            }
            den += 1.0;
            let p = cmp(pred[i], pred[j]);
            if p == g {
                num += 1.0;
            } else if p == Ordering::Equal {
                num += 0.5;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty, mut n0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            n0 += 1.0;
            let a = cmp(x[i], x[j]);
            let b = cmp(y[i], y[j]);
            if a == Ordering::Equal {
                tx += 1.0;
            }
            if b == Ordering::Equal {
                ty += 1.0;
            }
            if a != Ordering::Equal && b != Ordering::Equal {
                if a == b {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
    }
    let den = ((n0 - tx) * (n0 - ty)).sqrt();
    (den > 0.0).then(|| (c - d) / den)
}

/// 1-based rank with ties averaged: 1 + #smaller + (#equal - 1) / 2.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let eq = v.iter().filter(|b| *b == a).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

pub fn mrr(ranks: &[usize]) -> Option<f64> {
    (!ranks.is_empty()).then(|| ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}
