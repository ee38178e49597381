use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{OTHER, SCAN_DEPTH};
use crate::dataset::{Condition, Direction, EntailmentItem, FrequencyBin, MaskPosition};
use crate::gateway::{fill_mask_topk, MaskedLanguageModel, RankedCompletions};
use crate::lexicon::{Lexicon, Relation, ScaleCategory};
use crate::par::Exec;

/// Whether negated adverbs count as answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NegVariant {
    WithNeg,
    NoNeg,
}

impl NegVariant {
    pub const ALL: [NegVariant; 2] = [NegVariant::WithNeg, NegVariant::NoNeg];

    pub fn as_str(self) -> &'static str {
        match self {
            NegVariant::WithNeg => "WITH_NEG",
            NegVariant::NoNeg => "NO_NEG",
        }
    }
}

impl fmt::Display for NegVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NegVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "WITH_NEG" => Ok(NegVariant::WithNeg),
            "NO_NEG" => Ok(NegVariant::NoNeg),
            _ => Err(format!("unknown negation variant `{s}` (expected with-neg or no-neg)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Correct,
    Incorrect,
    Trivial,
    Negation,
    OffCategory,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Correct => "CORRECT",
            Classification::Incorrect => "INCORRECT",
            Classification::Trivial => "TRIVIAL",
            Classification::Negation => "NEGATION",
            Classification::OffCategory => "OFF_CATEGORY",
        }
    }
}

/// The first answer among the top completions: a target or `not`, skipping negations under
/// NO_NEG. `OTHER` when nothing qualifies.
pub fn scan_answer<'a>(
    surfaces: impl Iterator<Item = &'a str>,
    lexicon: &Lexicon,
    variant: NegVariant,
) -> String {
    let vocab = lexicon.answer_vocabulary();
    surfaces
        .take(SCAN_DEPTH)
        .filter(|s| vocab.contains(s))
        .find(|s| variant == NegVariant::WithNeg || !lexicon.is_negation(s))
        .map_or_else(|| OTHER.to_string(), String::from)
}

/// Classifies one answer against an item. Rules apply in order: unknown words are
/// off-category, then repeats of the premise (or a tied adverb) are trivial, then
/// negations, then other categories, then the gold direction decides.
pub fn classify_answer(
    item: &EntailmentItem,
    answer: &str,
    lexicon: &Lexicon,
    variant: NegVariant,
) -> Classification {
    let Some(adv) = lexicon.get(answer) else {
        return Classification::OffCategory;
    };
    if answer == item.premise || lexicon.compare(answer, &item.premise).ok() == Some(Relation::Tied) {
        return Classification::Trivial;
    }
    if adv.is_negation {
        return match variant {
            NegVariant::WithNeg => Classification::Negation,
            // not reachable through scan_answer, kept total for direct callers
            NegVariant::NoNeg => Classification::OffCategory,
        };
    }
    if adv.category != Some(item.category) {
        return Classification::OffCategory;
    }
    let want = match item.direction {
        Direction::Below => Relation::Below,
        Direction::Above => Relation::Above,
    };
    if lexicon.compare(answer, &item.premise).ok() == Some(want) {
        Classification::Correct
    } else {
        Classification::Incorrect
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentVerdict {
    pub item_id: String,
    pub variant: NegVariant,
    pub template_id: u32,
    pub condition: Condition,
    pub category: ScaleCategory,
    pub bin: FrequencyBin,
    pub mask_position: MaskPosition,
    pub premise: String,
    pub answer: String,
    pub classification: Classification,
}

pub fn classify_entailment_answer(
    item: &EntailmentItem,
    completions: &RankedCompletions,
    lexicon: &Lexicon,
    variant: NegVariant,
) -> EntailmentVerdict {
    verdict_for_answer(item, scan_answer(completions.surfaces(), lexicon, variant), lexicon, variant)
}

pub(crate) fn verdict_for_answer(
    item: &EntailmentItem,
    answer: String,
    lexicon: &Lexicon,
    variant: NegVariant,
) -> EntailmentVerdict {
    let classification = classify_answer(item, &answer, lexicon, variant);
    EntailmentVerdict {
        item_id: item.item_id.clone(),
        variant,
        template_id: item.template_id,
        condition: item.condition,
        category: item.category,
        bin: item.bin,
        mask_position: item.mask_position,
        premise: item.premise.clone(),
        answer,
        classification,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntailmentRecord {
    Ok(EntailmentVerdict),
    Failed {
        item_id: String,
        variant: NegVariant,
        error: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub correct: u64,
    pub incorrect: u64,
    pub trivial: u64,
    pub negation: u64,
    pub off_category: u64,
    pub failed: u64,
}

impl ClassCounts {
    pub fn add(&mut self, c: Classification) {
        match c {
            Classification::Correct => self.correct += 1,
            Classification::Incorrect => self.incorrect += 1,
            Classification::Trivial => self.trivial += 1,
            Classification::Negation => self.negation += 1,
            Classification::OffCategory => self.off_category += 1,
        }
    }

    /// Items with a classification (FAILED excluded).
    pub fn classified(&self) -> u64 {
        self.correct + self.incorrect + self.trivial + self.negation + self.off_category
    }

    /// CORRECT over CORRECT + INCORRECT + NEGATION.
    pub fn accuracy(&self) -> Option<f64> {
        let d = self.correct + self.incorrect + self.negation;
        (d > 0).then(|| self.correct as f64 / d as f64)
    }

    /// TRIVIAL over every classified item.
    pub fn trivial_rate(&self) -> Option<f64> {
        let d = self.classified();
        (d > 0).then(|| self.trivial as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    /// `bin_condition`, `template`, `mask_position` or `category`.
    pub dimension: String,
    pub key: String,
    pub counts: ClassCounts,
    pub accuracy: Option<f64>,
    pub trivial_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentAggregates {
    pub variant: NegVariant,
    pub overall: ClassCounts,
    pub accuracy: Option<f64>,
    pub trivial_rate: Option<f64>,
    pub breakdown: Vec<BreakdownRow>,
}

impl EntailmentAggregates {
    pub fn row(&self, dimension: &str, key: &str) -> Option<&BreakdownRow> {
        self.breakdown.iter().find(|r| r.dimension == dimension && r.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentProbeOutput {
    pub records: Vec<EntailmentRecord>,
    pub aggregates: EntailmentAggregates,
}

fn rows(dimension: &str, map: BTreeMap<String, ClassCounts>) -> impl Iterator<Item = BreakdownRow> + '_ {
    map.into_iter().map(move |(key, counts)| BreakdownRow {
        dimension: dimension.to_string(),
        key,
        accuracy: counts.accuracy(),
        trivial_rate: counts.trivial_rate(),
        counts,
    })
}

/// Aggregates records against the items they came from (matched by position).
pub fn aggregate_entailment(
    items: &[EntailmentItem],
    records: &[EntailmentRecord],
    variant: NegVariant,
) -> EntailmentAggregates {
    let mut overall = ClassCounts::default();
    let mut by_bin_cond: BTreeMap<String, ClassCounts> = BTreeMap::new();
    let mut by_template: BTreeMap<u32, ClassCounts> = BTreeMap::new();
    let mut by_mask: BTreeMap<String, ClassCounts> = BTreeMap::new();
    let mut by_cat: BTreeMap<ScaleCategory, ClassCounts> = BTreeMap::new();
    for (item, rec) in items.iter().zip(records) {
        let slots = [
            &mut overall,
            by_bin_cond
                .entry(format!("{}/{}", item.bin.as_str(), condition_str(item.condition)))
                .or_default(),
            by_template.entry(item.template_id).or_default(),
            by_mask.entry(mask_str(item.mask_position).to_string()).or_default(),
            by_cat.entry(item.category).or_default(),
        ];
        for s in slots {
            match rec {
                EntailmentRecord::Ok(v) => s.add(v.classification),
                EntailmentRecord::Failed { .. } => s.failed += 1,
            }
        }
    }
    let mut breakdown: Vec<BreakdownRow> = rows("bin_condition", by_bin_cond).collect();
    // numeric template order rather than lexicographic
    breakdown.extend(by_template.into_iter().map(|(id, counts)| BreakdownRow {
        dimension: "template".into(),
        key: id.to_string(),
        accuracy: counts.accuracy(),
        trivial_rate: counts.trivial_rate(),
        counts,
    }));
    breakdown.extend(rows("mask_position", by_mask));
    breakdown.extend(rows(
        "category",
        by_cat.into_iter().map(|(c, n)| (c.to_string(), n)).collect(),
    ));
    EntailmentAggregates {
        variant,
        accuracy: overall.accuracy(),
        trivial_rate: overall.trivial_rate(),
        overall,
        breakdown,
    }
}

fn condition_str(c: Condition) -> &'static str {
    match c {
        Condition::Below => "BELOW",
        Condition::Above => "ABOVE",
    }
}

fn mask_str(m: MaskPosition) -> &'static str {
    match m {
        MaskPosition::BeforePremise => "BEFORE_PREMISE",
        MaskPosition::AfterPremise => "AFTER_PREMISE",
    }
}

/// Queries the model once per item and classifies the top completions under each
/// requested variant. One output per variant, in the order given.
pub fn run_entailment_probe(
    items: &[EntailmentItem],
    model: &dyn MaskedLanguageModel,
    lexicon: &Lexicon,
    variants: &[NegVariant],
    exec: Exec,
) -> Vec<EntailmentProbeOutput> {
    let completions = exec.map(items, |item| {
        fill_mask_topk(model, &item.item_id, &item.surface, SCAN_DEPTH).map_err(|e| e.to_string())
    });
    variants
        .iter()
        .map(|&variant| {
            let records: Vec<EntailmentRecord> = items
                .iter()
                .zip(&completions)
                .map(|(item, c)| match c {
                    Ok(c) => EntailmentRecord::Ok(classify_entailment_answer(item, c, lexicon, variant)),
                    Err(e) => EntailmentRecord::Failed {
                        item_id: item.item_id.clone(),
                        variant,
                        error: e.clone(),
                    },
                })
                .collect();
            let aggregates = aggregate_entailment(items, &records, variant);
            EntailmentProbeOutput { records, aggregates }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Candidate;

    fn item(template_id: u32, premise: &str, direction: Direction) -> EntailmentItem {
        let lex = Lexicon::builtin();
        EntailmentItem {
            item_id: format!("t{template_id}-{premise}-cold"),
            template_id,
            condition: if template_id <= 8 { Condition::Below } else { Condition::Above },
            category: lex.get(premise).unwrap().category.unwrap(),
            premise: premise.into(),
            adjective: "cold".into(),
            bin: FrequencyBin::High,
            surface: "x [MASK] y".into(),
            mask_position: MaskPosition::AfterPremise,
            direction,
        }
    }

    fn completions(words: &[&str]) -> RankedCompletions {
        RankedCompletions {
            query_id: "q".into(),
            candidates: words
                .iter()
                .enumerate()
                .map(|(i, w)| Candidate {
                    surface: w.to_string(),
                    log_prob: -(i as f64) - 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn classification_rules() {
        let lex = Lexicon::builtin();
        let below = item(1, "often", Direction::Below);
        let c = |a: &str| classify_answer(&below, a, &lex, NegVariant::WithNeg);
        assert_eq!(c("sometimes"), Classification::Correct);
        assert_eq!(c("always"), Classification::Incorrect);
        assert_eq!(c("often"), Classification::Trivial);
        let tied = item(1, "perhaps", Direction::Below);
        assert_eq!(classify_answer(&tied, "maybe", &lex, NegVariant::WithNeg), Classification::Trivial);
        assert_eq!(c("not"), Classification::Negation);
        assert_eq!(c("never"), Classification::Negation);
        assert_eq!(c("very"), Classification::OffCategory);
        assert_eq!(c(OTHER), Classification::OffCategory);
        let above = item(9, "often", Direction::Above);
        assert_eq!(classify_answer(&above, "always", &lex, NegVariant::WithNeg), Classification::Correct);
        assert_eq!(classify_answer(&above, "sometimes", &lex, NegVariant::WithNeg), Classification::Incorrect);
    }

    #[test]
    fn scan_respects_variant() {
        let lex = Lexicon::builtin();
        let words = ["the", "not", "never", "sometimes"];
        assert_eq!(scan_answer(words.into_iter(), &lex, NegVariant::WithNeg), "not");
        assert_eq!(scan_answer(words.into_iter(), &lex, NegVariant::NoNeg), "sometimes");
        let eleven = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "very"];
        assert_eq!(scan_answer(eleven.into_iter(), &lex, NegVariant::WithNeg), OTHER);
        // frequency-reference entries are not answers
        assert_eq!(scan_answer(["already"].into_iter(), &lex, NegVariant::WithNeg), OTHER);
    }

    #[test]
    fn accuracy_and_trivial_rate() {
        let lex = Lexicon::builtin();
        let items = vec![
            item(1, "often", Direction::Below),
            item(1, "usually", Direction::Below),
            item(1, "frequently", Direction::Below),
            item(1, "always", Direction::Below),
        ];
        let answers = ["sometimes", "not", "frequently", "very"];
        let records: Vec<EntailmentRecord> = items
            .iter()
            .zip(answers)
            .map(|(i, a)| {
                EntailmentRecord::Ok(classify_entailment_answer(i, &completions(&[a]), &lex, NegVariant::WithNeg))
            })
            .chain([EntailmentRecord::Failed {
                item_id: "x".into(),
                variant: NegVariant::WithNeg,
                error: "boom".into(),
            }])
            .collect();
        let mut all = items.clone();
        all.push(item(2, "often", Direction::Below));
        let agg = aggregate_entailment(&all, &records, NegVariant::WithNeg);
        assert_eq!(agg.overall.correct, 1);
        assert_eq!(agg.overall.negation, 1);
        assert_eq!(agg.overall.trivial, 1);
        assert_eq!(agg.overall.off_category, 1);
        assert_eq!(agg.overall.failed, 1);
        assert_eq!(agg.accuracy, Some(0.5));
        assert_eq!(agg.trivial_rate, Some(0.25));
        assert_eq!(agg.row("template", "2").unwrap().counts.failed, 1);
        assert_eq!(agg.row("bin_condition", "HIGH/BELOW").unwrap().counts.correct, 1);
    }

    #[test]
    fn no_classified_items_gives_no_rate() {
        assert_eq!(ClassCounts::default().accuracy(), None);
        assert_eq!(ClassCounts::default().trivial_rate(), None);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("with-neg".parse::<NegVariant>().unwrap(), NegVariant::WithNeg);
        assert_eq!("NO_NEG".parse::<NegVariant>().unwrap(), NegVariant::NoNeg);
        assert!("both".parse::<NegVariant>().is_err());
    }
}
