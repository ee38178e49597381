use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::entailment::{aggregate_entailment, verdict_for_answer};
use super::{EntailmentProbeOutput, EntailmentRecord, NegVariant};
use crate::dataset::EntailmentItem;
use crate::io::stable_key;
use crate::lexicon::{Lexicon, NOT};
use crate::par::Exec;

/// Answers drawn uniformly for one item: the category's targets plus `not` under WITH_NEG,
/// the non-negated targets under NO_NEG.
pub fn baseline_pool<'a>(item: &EntailmentItem, lexicon: &'a Lexicon, variant: NegVariant) -> Vec<&'a str> {
    let mut pool: Vec<&str> = lexicon
        .targets_in(item.category)
        .into_iter()
        .filter(|a| variant == NegVariant::WithNeg || !a.is_negation)
        .map(|a| a.surface.as_str())
        .collect();
    if variant == NegVariant::WithNeg {
        pool.push(NOT);
    }
    pool
}

/// Seeded uniform guesses, one per item. Each item draws from its own generator keyed by
/// (seed, item id), so the result is independent of order and scheduling.
pub fn run_random_baseline(
    items: &[EntailmentItem],
    lexicon: &Lexicon,
    variant: NegVariant,
    seed: u64,
    exec: Exec,
) -> EntailmentProbeOutput {
    let records = exec.map(items, |item| {
        let pool = baseline_pool(item, lexicon, variant);
        let mut rng = ChaCha8Rng::seed_from_u64(stable_key(seed, &item.item_id));
        let answer = pool[rng.random_range(0..pool.len())].to_string();
        EntailmentRecord::Ok(verdict_for_answer(item, answer, lexicon, variant))
    });
    let aggregates = aggregate_entailment(items, &records, variant);
    EntailmentProbeOutput { records, aggregates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_entailment, AdjectivePool, Eligibility, TemplateSet};

    fn items() -> Vec<EntailmentItem> {
        let lex = Lexicon::builtin();
        generate_entailment(
            &lex,
            &TemplateSet::builtin(),
            &AdjectivePool::builtin(),
            &Eligibility::standard(&lex),
            Exec::default(),
        )
        .unwrap()
    }

    #[test]
    fn pools() {
        let lex = Lexicon::builtin();
        let it = &items()[0];
        assert_eq!(baseline_pool(it, &lex, NegVariant::WithNeg).len(), 9);
        let no = baseline_pool(it, &lex, NegVariant::NoNeg);
        assert!(!no.contains(&"not") && !no.contains(&"never"));
    }

    #[test]
    fn deterministic_and_order_free() {
        let lex = Lexicon::builtin();
        let its = items();
        let a = run_random_baseline(&its, &lex, NegVariant::WithNeg, 7, Exec::Sequential);
        let b = run_random_baseline(&its, &lex, NegVariant::WithNeg, 7, Exec::default());
        assert_eq!(a, b);
        let mut rev = its.clone();
        rev.reverse();
        let r = run_random_baseline(&rev, &lex, NegVariant::WithNeg, 7, Exec::Sequential);
        assert_eq!(a.aggregates.overall, r.aggregates.overall);
        let c = run_random_baseline(&its, &lex, NegVariant::WithNeg, 8, Exec::Sequential);
        assert_ne!(a.records, c.records);
    }
}
