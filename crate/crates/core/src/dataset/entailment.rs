use serde::{Deserialize, Serialize};

use super::pool::{AdjectivePool, FrequencyBin};
use super::templates::{Condition, Direction, EntailmentTemplate, MaskPosition, TemplateSet};
use super::DatasetError;
use crate::lexicon::{Lexicon, Relation, ScaleCategory};
use crate::par::Exec;
use crate::MASK;

/// Premise adverbs admitted in each condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eligibility {
    pub below: Vec<String>,
    pub above: Vec<String>,
}

impl Eligibility {
    /// Negations never serve as premises. BELOW drops the rank group of each category's
    /// non-negative bottom (a premise needs something strictly under it); ABOVE drops the
    /// top group.
    pub fn standard(lexicon: &Lexicon) -> Eligibility {
        let mut below = Vec::new();
        let mut above = Vec::new();
        for cat in ScaleCategory::ALL {
            let scale = lexicon.scale(cat);
            let bottom = scale.group_of(&scale.bottom_nonneg).unwrap_or(&[]);
            let top = scale.group_of(&scale.top).unwrap_or(&[]);
            for adv in lexicon.targets_in(cat) {
                if adv.is_negation {
                    continue;
                }
                if !bottom.contains(&adv.surface) {
                    below.push(adv.surface.clone());
                }
                if !top.contains(&adv.surface) {
                    above.push(adv.surface.clone());
                }
            }
        }
        Eligibility { below, above }
    }

    /// Explicit premise lists; every entry must be a non-negated target.
    pub fn custom(
        lexicon: &Lexicon,
        below: Vec<String>,
        above: Vec<String>,
    ) -> Result<Eligibility, DatasetError> {
        let check = |list: Vec<String>| -> Result<Vec<String>, DatasetError> {
            let mut out: Vec<String> = Vec::with_capacity(list.len());
            for s in list {
                let adv = lexicon.lookup(&s)?;
                if !adv.is_target || adv.is_negation {
                    return Err(DatasetError::Eligibility(format!(
                        "`{}` is not a non-negated target adverb",
                        adv.surface
                    )));
                }
                if out.contains(&adv.surface) {
                    return Err(DatasetError::Eligibility(format!("`{}` listed twice", adv.surface)));
                }
                out.push(adv.surface.clone());
            }
            Ok(out)
        };
        Ok(Eligibility {
            below: check(below)?,
            above: check(above)?,
        })
    }

    pub fn premises(&self, c: Condition) -> &[String] {
        match c {
            Condition::Below => &self.below,
            Condition::Above => &self.above,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentItem {
    pub item_id: String,
    pub template_id: u32,
    pub condition: Condition,
    pub category: ScaleCategory,
    pub premise: String,
    pub adjective: String,
    pub bin: FrequencyBin,
    pub surface: String,
    pub mask_position: MaskPosition,
    pub direction: Direction,
}

pub fn expected_item_count(templates: &TemplateSet, eligibility: &Eligibility, pool: &AdjectivePool) -> usize {
    templates
        .templates()
        .iter()
        .map(|t| eligibility.premises(t.condition).len() * pool.len())
        .sum()
}

fn items_for_template(
    t: &EntailmentTemplate,
    lexicon: &Lexicon,
    eligibility: &Eligibility,
    pool: &AdjectivePool,
) -> Result<Vec<EntailmentItem>, DatasetError> {
    let direction = t.expected_direction();
    let mut out = Vec::with_capacity(eligibility.premises(t.condition).len() * pool.len());
    for premise in eligibility.premises(t.condition) {
        let category = lexicon
            .lookup(premise)?
            .category
            .expect("eligible premises are targets");
        for e in pool.entries() {
            let surface = t.fill(premise, &e.adjective, MASK);
            if surface.matches(MASK).count() != 1 {
                return Err(DatasetError::Template {
                    id: t.id,
                    message: format!("instance with `{}` does not have exactly one mask", e.adjective),
                });
            }
            out.push(EntailmentItem {
                item_id: format!("t{}-{}-{}", t.id, premise, e.adjective),
                template_id: t.id,
                condition: t.condition,
                category,
                premise: premise.clone(),
                adjective: e.adjective.clone(),
                bin: e.bin,
                surface,
                mask_position: t.mask_position,
                direction,
            });
        }
    }
    Ok(out)
}

/// Every template × eligible premise × pool entry, ordered by template id, then premise in
/// lexicon order, then pool order. Templates are generated independently under `exec` and
/// concatenated in id order, so the output does not depend on the strategy.
pub fn generate_entailment(
    lexicon: &Lexicon,
    templates: &TemplateSet,
    pool: &AdjectivePool,
    eligibility: &Eligibility,
    exec: Exec,
) -> Result<Vec<EntailmentItem>, DatasetError> {
    let parts = exec.map(templates.templates(), |t| {
        items_for_template(t, lexicon, eligibility, pool)
    });
    let mut items = Vec::with_capacity(expected_item_count(templates, eligibility, pool));
    for p in parts {
        items.extend(p?);
    }
    Ok(items)
}

/// Non-negated adverbs of the item's category that lie strictly in the expected direction
/// from the premise.
pub fn correct_answers<'a>(item: &EntailmentItem, lexicon: &'a Lexicon) -> Vec<&'a str> {
    let want = match item.direction {
        Direction::Below => Relation::Below,
        Direction::Above => Relation::Above,
    };
    lexicon
        .targets_in(item.category)
        .into_iter()
        .filter(|a| !a.is_negation)
        .filter(|a| lexicon.compare(&a.surface, &item.premise).ok() == Some(want))
        .map(|a| a.surface.as_str())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_eligibility() {
        let lex = Lexicon::builtin();
        let el = Eligibility::standard(&lex);
        assert_eq!(el.below.len(), 17);
        assert_eq!(el.above.len(), 19);
        for bottom in ["sometimes", "maybe", "perhaps", "possibly", "slightly"] {
            assert!(!el.below.iter().any(|s| s == bottom), "{bottom}");
        }
        for top in ["always", "definitely", "completely"] {
            assert!(!el.above.iter().any(|s| s == top), "{top}");
        }
        for neg in ["never", "hardly"] {
            assert!(!el.below.iter().chain(&el.above).any(|s| s == neg));
        }
    }

    #[test]
    fn custom_eligibility_rejects_negations() {
        let lex = Lexicon::builtin();
        assert!(Eligibility::custom(&lex, vec!["never".into()], vec![]).is_err());
        assert!(Eligibility::custom(&lex, vec!["often".into(), "often".into()], vec![]).is_err());
        let el = Eligibility::custom(&lex, vec!["Often ".into()], vec!["very".into()]).unwrap();
        assert_eq!(el.below, ["often"]);
    }

    #[test]
    fn count_matches_product() {
        let lex = Lexicon::builtin();
        let templates = TemplateSet::builtin();
        let pool = AdjectivePool::builtin();
        let el = Eligibility::standard(&lex);
        let items = generate_entailment(&lex, &templates, &pool, &el, Exec::Sequential).unwrap();
        assert_eq!(items.len(), (17 + 19) * 8 * 160);
        assert_eq!(items.len(), expected_item_count(&templates, &el, &pool));
    }

    #[test]
    fn first_item_surface() {
        let lex = Lexicon::builtin();
        let el = Eligibility::custom(&lex, vec!["often".into()], vec![]).unwrap();
        let pool = AdjectivePool::from_entries(vec![super::super::PoolEntry {
            adjective: "cold".into(),
            bin: FrequencyBin::High,
            log_freq: Some(-8.5),
        }]);
        let items =
            generate_entailment(&lex, &TemplateSet::builtin(), &pool, &el, Exec::Sequential).unwrap();
        assert_eq!(items.len(), 8);
        assert_eq!(items[0].surface, "If it is often cold, then it is at least [MASK] cold.");
        assert_eq!(items[0].direction, Direction::Below);
        assert_eq!(correct_answers(&items[0], &lex), ["occasionally", "sometimes"]);
    }
}
