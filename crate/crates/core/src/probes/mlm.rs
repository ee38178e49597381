use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, OTHER, SCAN_DEPTH};
use crate::dataset::{MaskedInstance, Variant};
use crate::gateway::{GatewayError, MaskQuery, MaskedLanguageModel};
use crate::lexicon::{Lexicon, ScaleCategory, NOT};
use crate::metrics::mean_reciprocal_rank;
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmVerdict {
    pub item_id: String,
    pub variant: Variant,
    pub category: ScaleCategory,
    pub target: String,
    pub adjective: String,
    pub target_rank: usize,
    pub reciprocal_rank: f64,
    pub target_log_prob: f64,
    pub not_log_prob: f64,
    pub beat_not: bool,
    pub multi_token: bool,
    /// First lexicon word among the top completions, or `OTHER`.
    pub top_target_match: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MlmRecord {
    Ok(MlmVerdict),
    Failed {
        item_id: String,
        variant: Variant,
        error: String,
    },
}

/// MRR and beat-`not` accuracy for one slice of verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmSummary {
    pub variant: Variant,
    /// A target adverb, a category name, or `OVERALL`.
    pub group: String,
    pub n: usize,
    pub mrr: Option<f64>,
    pub beat_not: Option<f64>,
    pub multi_token: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmAggregates {
    pub failed: usize,
    /// Per variant: every target, then every category, then OVERALL.
    pub rows: Vec<MlmSummary>,
    pub confusion_full: ConfusionMatrix,
    pub confusion_neutral: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmProbeOutput {
    pub records: Vec<MlmRecord>,
    pub aggregates: MlmAggregates,
}

/// The first answer-vocabulary word in the top completions.
pub fn first_lexicon_match<'a>(surfaces: impl Iterator<Item = &'a str>, lexicon: &Lexicon) -> String {
    let vocab = lexicon.answer_vocabulary();
    surfaces
        .take(SCAN_DEPTH)
        .find(|s| vocab.contains(s))
        .map_or_else(|| OTHER.to_string(), String::from)
}

fn verdict(
    inst: &MaskedInstance,
    model: &dyn MaskedLanguageModel,
    lexicon: &Lexicon,
) -> Result<MlmVerdict, GatewayError> {
    let q = MaskQuery::run(model, &inst.text_with_mask)?;
    let target = q.score(model, &inst.target)?;
    let not = q.score(model, NOT)?;
    Ok(MlmVerdict {
        item_id: inst.item_id.clone(),
        variant: inst.variant,
        category: inst.category,
        target: inst.target.clone(),
        adjective: inst.adjective.clone(),
        target_rank: target.rank,
        reciprocal_rank: 1.0 / target.rank as f64,
        target_log_prob: target.log_prob,
        not_log_prob: not.log_prob,
        beat_not: target.log_prob > not.log_prob,
        multi_token: target.multi_token,
        top_target_match: first_lexicon_match(q.candidates().iter().map(|c| c.surface.as_str()), lexicon),
    })
}

fn summarize(variant: Variant, group: String, vs: &[&MlmVerdict]) -> MlmSummary {
    let ranks: Vec<usize> = vs.iter().map(|v| v.target_rank).collect();
    MlmSummary {
        variant,
        group,
        n: vs.len(),
        mrr: mean_reciprocal_rank(&ranks).ok(),
        beat_not: (!vs.is_empty())
            .then(|| vs.iter().filter(|v| v.beat_not).count() as f64 / vs.len() as f64),
        multi_token: vs.iter().filter(|v| v.multi_token).count(),
    }
}

pub fn aggregate_mlm(records: &[MlmRecord], lexicon: &Lexicon) -> MlmAggregates {
    let mut rows = Vec::new();
    let mut failed = 0;
    let mut confusion_full = ConfusionMatrix::new(lexicon);
    let mut confusion_neutral = ConfusionMatrix::new(lexicon);
    let mut by_variant: BTreeMap<Variant, Vec<&MlmVerdict>> = BTreeMap::new();
    for r in records {
        match r {
            MlmRecord::Ok(v) => {
                by_variant.entry(v.variant).or_default().push(v);
                match v.variant {
                    Variant::FullContext => confusion_full.add(&v.target, &v.top_target_match),
                    Variant::Neutral => confusion_neutral.add(&v.target, &v.top_target_match),
                }
            }
            MlmRecord::Failed { .. } => failed += 1,
        }
    }
    for variant in [Variant::FullContext, Variant::Neutral] {
        let vs = by_variant.remove(&variant).unwrap_or_default();
        for adv in lexicon.targets() {
            let sel: Vec<&MlmVerdict> = vs.iter().copied().filter(|v| v.target == adv.surface).collect();
            rows.push(summarize(variant, adv.surface.clone(), &sel));
        }
        for cat in ScaleCategory::ALL {
            let sel: Vec<&MlmVerdict> = vs.iter().copied().filter(|v| v.category == cat).collect();
            rows.push(summarize(variant, cat.to_string(), &sel));
        }
        rows.push(summarize(variant, "OVERALL".into(), &vs));
    }
    MlmAggregates {
        failed,
        rows,
        confusion_full,
        confusion_neutral,
    }
}

/// Scores every instance; gateway failures become FAILED records and are left out of the
/// aggregates.
pub fn run_mlm_probe(
    instances: &[MaskedInstance],
    model: &dyn MaskedLanguageModel,
    lexicon: &Lexicon,
    exec: Exec,
) -> MlmProbeOutput {
    let records = exec.map(instances, |inst| match verdict(inst, model, lexicon) {
        Ok(v) => MlmRecord::Ok(v),
        Err(e) => MlmRecord::Failed {
            item_id: inst.item_id.clone(),
            variant: inst.variant,
            error: e.to_string(),
        },
    });
    let aggregates = aggregate_mlm(&records, lexicon);
    MlmProbeOutput { records, aggregates }
}

impl MlmAggregates {
    pub fn row(&self, variant: Variant, group: &str) -> Option<&MlmSummary> {
        self.rows.iter().find(|r| r.variant == variant && r.group == group)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockMlm;
    use std::collections::HashMap;

    fn instance(id: &str, target: &str, text: &str) -> MaskedInstance {
        let lex = Lexicon::builtin();
        MaskedInstance {
            item_id: id.into(),
            text_with_mask: text.into(),
            target: target.into(),
            category: lex.get(target).unwrap().category.unwrap(),
            adjective: "cold".into(),
            variant: Variant::FullContext,
        }
    }

    #[test]
    fn mrr_arithmetic_through_the_probe() {
        let lex = Lexicon::builtin();
        // ranks 1, 2 and 4 for the three targets
        let table: HashMap<&str, Vec<(&str, f64)>> = [
            ("a [MASK] one.", vec![("very", 4.0), ("not", 3.0)]),
            ("b [MASK] two.", vec![("not", 4.0), ("quite", 3.0)]),
            ("c [MASK] three.", vec![("not", 4.0), ("so", 3.5), ("too", 3.2), ("often", 3.0)]),
        ]
        .into_iter()
        .collect();
        let vocab = ["very", "not", "quite", "so", "too", "often"].map(String::from).to_vec();
        let m = MockMlm::new("t", vocab, move |text, w| {
            table[text].iter().find(|(x, _)| *x == w).map_or(0.0, |x| x.1)
        });
        let insts = [
            instance("1", "very", "a [MASK] one."),
            instance("2", "quite", "b [MASK] two."),
            instance("3", "often", "c [MASK] three."),
        ];
        let out = run_mlm_probe(&insts, &m, &lex, Exec::Sequential);
        let overall = out.aggregates.row(Variant::FullContext, "OVERALL").unwrap();
        assert!((overall.mrr.unwrap() - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-12);
        assert!((overall.beat_not.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let MlmRecord::Ok(v) = &out.records[1] else { panic!() };
        assert_eq!(v.top_target_match, "not");
    }

    #[test]
    fn equal_scores_do_not_beat_not() {
        let lex = Lexicon::builtin();
        let vocab = ["very", "not"].map(String::from).to_vec();
        let m = MockMlm::new("t", vocab, |_, _| 1.0);
        let out = run_mlm_probe(&[instance("1", "very", "x [MASK] y.")], &m, &lex, Exec::Sequential);
        let MlmRecord::Ok(v) = &out.records[0] else { panic!() };
        assert!(!v.beat_not);
    }

    #[test]
    fn gateway_errors_become_failed_records() {
        let lex = Lexicon::builtin();
        let m = MockMlm::prior(&lex);
        let out = run_mlm_probe(&[instance("1", "very", "no mask here")], &m, &lex, Exec::Sequential);
        assert!(matches!(out.records[0], MlmRecord::Failed { .. }));
        assert_eq!(out.aggregates.failed, 1);
        let overall = out.aggregates.row(Variant::FullContext, "OVERALL").unwrap();
        assert_eq!(overall.n, 0);
        assert_eq!(overall.mrr, None);
    }
}
