//! Sentence-pair adaptation of the entailment items for NLI classifiers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::entailment::{correct_answers, EntailmentItem};
use super::pool::FrequencyBin;
use super::templates::{Condition, Direction};
use crate::io::stable_key;
use crate::lexicon::{Lexicon, Relation, ScaleCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entailment => "ENTAILMENT",
            NliLabel::Neutral => "NEUTRAL",
            NliLabel::Contradiction => "CONTRADICTION",
        }
    }

    pub fn index(self) -> usize {
        match self {
            NliLabel::Entailment => 0,
            NliLabel::Neutral => 1,
            NliLabel::Contradiction => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliPair {
    pub pair_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub template_id: u32,
    pub bin: FrequencyBin,
    pub condition: Condition,
    pub category: ScaleCategory,
    pub premise_adverb: String,
    pub filler: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NliOutput {
    pub pairs: Vec<NliPair>,
    /// Items with no filler for either label.
    pub skipped_no_filler: usize,
    /// Items dropped so every (category, condition) group is exactly balanced.
    pub dropped_for_balance: usize,
    /// Items whose surface could not be split into two clauses.
    pub skipped_unsplittable: usize,
}

fn sentence(clause: &str) -> String {
    let clause = clause.trim().trim_end_matches('.').trim();
    let mut chars = clause.chars();
    match chars.next() {
        Some(c) => format!("{}{}.", c.to_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

/// Splits a filled template into (antecedent, consequent) sentences.
///
/// Handles the four connective shapes used by the templates: "If A, then B.", "B if A.",
/// "A so B." and "B because A.".
pub fn split_clauses(filled: &str) -> Option<(String, String)> {
    let body = filled.trim().trim_end_matches('.');
    let (a, b) = if let Some(rest) = body.strip_prefix("If ") {
        let (a, b) = rest.split_once(", then ")?;
        (a, b)
    } else if let Some((b, a)) = body.split_once(" because ") {
        (a, b)
    } else if let Some((b, a)) = body.split_once(" if ") {
        (a, b)
    } else if let Some((a, b)) = body.split_once(" so ") {
        (a, b)
    } else {
        return None;
    };
    if a.trim().is_empty() || b.trim().is_empty() {
        return None;
    }
    Some((sentence(a), sentence(b)))
}

/// Fillers of the item's category that make the statement wrong: strictly on the opposite
/// side of the premise. Ties are neither right nor wrong and never used.
fn wrong_fillers<'a>(item: &EntailmentItem, lexicon: &'a Lexicon) -> Vec<&'a str> {
    let wrong = match item.direction {
        Direction::Below => Relation::Above,
        Direction::Above => Relation::Below,
    };
    lexicon
        .targets_in(item.category)
        .into_iter()
        .filter(|a| !a.is_negation)
        .filter(|a| lexicon.compare(&a.surface, &item.premise).ok() == Some(wrong))
        .map(|a| a.surface.as_str())
        .collect()
}

/// Fills each item's mask with a correct adverb (ENTAILMENT) or a wrong one
/// (CONTRADICTION) so that every (category, condition) group is exactly balanced.
///
/// Within a group the items are shuffled with a seeded stream; items that admit only one
/// label are assigned first and the rest make up the difference. Output keeps input order.
pub fn to_nli(items: &[EntailmentItem], lexicon: &Lexicon, seed: u64) -> NliOutput {
    let mut out = NliOutput::default();
    struct Candidate<'a> {
        idx: usize,
        right: Vec<&'a str>,
        wrong: Vec<&'a str>,
    }
    let mut groups: BTreeMap<(ScaleCategory, Condition), Vec<Candidate>> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        if split_clauses(&item.surface).is_none() {
            out.skipped_unsplittable += 1;
            continue;
        }
        let right = correct_answers(item, lexicon);
        let wrong = wrong_fillers(item, lexicon);
        if right.is_empty() && wrong.is_empty() {
            out.skipped_no_filler += 1;
            continue;
        }
        groups
            .entry((item.category, item.condition))
            .or_default()
            .push(Candidate { idx, right, wrong });
    }

    let mut assigned: Vec<(usize, NliLabel, Vec<&str>)> = Vec::new();
    for ((cat, cond), mut cands) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_key(seed, &format!("nli-group:{cat}:{cond}")));
        cands.shuffle(&mut rng);
        let only_e = cands.iter().filter(|c| c.wrong.is_empty()).count();
        let only_c = cands.iter().filter(|c| c.right.is_empty()).count();
        let both = cands.len() - only_e - only_c;
        let k = (cands.len() / 2).min(only_e + both).min(only_c + both);
        let mut need_e = k - only_e.min(k);
        let mut need_c = k - only_c.min(k);
        let (mut n_e, mut n_c) = (0, 0);
        for c in &cands {
            let label = if c.wrong.is_empty() {
                n_e += 1;
                (n_e <= k).then_some(NliLabel::Entailment)
            } else if c.right.is_empty() {
                n_c += 1;
                (n_c <= k).then_some(NliLabel::Contradiction)
            } else if need_e > 0 {
                need_e -= 1;
                Some(NliLabel::Entailment)
            } else if need_c > 0 {
                need_c -= 1;
                Some(NliLabel::Contradiction)
            } else {
                None
            };
            match label {
                Some(NliLabel::Entailment) => assigned.push((c.idx, NliLabel::Entailment, c.right.clone())),
                Some(_) => assigned.push((c.idx, NliLabel::Contradiction, c.wrong.clone())),
                None => out.dropped_for_balance += 1,
            }
        }
    }
    assigned.sort_by_key(|a| a.0);

    for (idx, label, fillers) in assigned {
        let item = &items[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(stable_key(seed, &item.item_id));
        let filler = fillers[rng.random_range(0..fillers.len())];
        let filled = item.surface.replacen(crate::MASK, filler, 1);
        let (premise, hypothesis) =
            split_clauses(&filled).expect("surface was checked before filling");
        out.pairs.push(NliPair {
            pair_id: item.item_id.clone(),
            premise,
            hypothesis,
            label,
            template_id: item.template_id,
            bin: item.bin,
            condition: item.condition,
            category: item.category,
            premise_adverb: item.premise.clone(),
            filler: filler.to_string(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_entailment, AdjectivePool, Eligibility, TemplateSet};
    use crate::par::Exec;

    #[test]
    fn clause_shapes() {
        assert_eq!(
            split_clauses("If it is always cold, then it is at least sometimes cold."),
            Some(("It is always cold.".into(), "It is at least sometimes cold.".into()))
        );
        assert_eq!(
            split_clauses("It is at least sometimes cold if it is always cold."),
            Some(("It is always cold.".into(), "It is at least sometimes cold.".into()))
        );
        assert_eq!(
            split_clauses("It is always cold so it is at least sometimes cold."),
            Some(("It is always cold.".into(), "It is at least sometimes cold.".into()))
        );
        assert_eq!(
            split_clauses("It is not always cold because it is at most sometimes cold."),
            Some(("It is at most sometimes cold.".into(), "It is not always cold.".into()))
        );
        assert_eq!(split_clauses("It is cold."), None);
    }

    fn dataset() -> (Lexicon, Vec<EntailmentItem>) {
        let lex = Lexicon::builtin();
        let items = generate_entailment(
            &lex,
            &TemplateSet::builtin(),
            &AdjectivePool::builtin(),
            &Eligibility::standard(&lex),
            Exec::Parallel,
        )
        .unwrap();
        (lex, items)
    }

    #[test]
    fn balanced_per_group_and_labels_follow_gold() {
        let (lex, items) = dataset();
        let out = to_nli(&items, &lex, 7);
        let mut counts: BTreeMap<(ScaleCategory, Condition), [usize; 3]> = BTreeMap::new();
        for p in &out.pairs {
            counts.entry((p.category, p.condition)).or_default()[p.label.index()] += 1;
            let rel = lex.compare(&p.filler, &p.premise_adverb).unwrap();
            let dir = TemplateSet::builtin().get(p.template_id).unwrap().expected_direction();
            let right = matches!(
                (rel, dir),
                (Relation::Below, Direction::Below) | (Relation::Above, Direction::Above)
            );
            assert_eq!(right, p.label == NliLabel::Entailment, "{p:?}");
            assert!(!lex.is_negation(&p.filler));
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            assert_eq!(c[0], c[2]);
            assert_eq!(c[1], 0);
            assert!(c[0] > 0);
        }
        assert_eq!(
            out.pairs.len() + out.skipped_no_filler + out.dropped_for_balance + out.skipped_unsplittable,
            items.len()
        );
    }

    #[test]
    fn seeded_and_reproducible() {
        let (lex, items) = dataset();
        let a = to_nli(&items, &lex, 3);
        let b = to_nli(&items, &lex, 3);
        let c = to_nli(&items, &lex, 4);
        assert_eq!(a, b);
        assert_ne!(a.pairs, c.pairs);
    }
}
