use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{NliLabel, NliPair};
use crate::gateway::NliClassifier;
use crate::io::stable_key;
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NliRecord {
    Ok {
        pair_id: String,
        gold: NliLabel,
        predicted: NliLabel,
        probs: [f64; 3],
        /// True when the argmax had to be broken between equal probabilities.
        tie_broken: bool,
    },
    Failed {
        pair_id: String,
        error: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub n: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliProbeResult {
    pub model: String,
    pub overall: AccuracyCell,
    /// Keyed by frequency bin name.
    pub per_bin: BTreeMap<String, AccuracyCell>,
    pub per_category: BTreeMap<String, AccuracyCell>,
    /// counts[gold][predicted], indexed ENTAILMENT, NEUTRAL, CONTRADICTION.
    pub confusion: [[u64; 3]; 3],
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliProbeOutput {
    pub records: Vec<NliRecord>,
    pub result: NliProbeResult,
}

fn bump(cell: &mut AccuracyCell, ok: bool) {
    cell.n += 1;
    cell.correct += u64::from(ok);
    cell.accuracy = Some(cell.correct as f64 / cell.n as f64);
}

pub fn aggregate_nli(model: &str, pairs: &[NliPair], records: &[NliRecord]) -> NliProbeResult {
    let mut res = NliProbeResult {
        model: model.to_string(),
        overall: AccuracyCell::default(),
        per_bin: BTreeMap::new(),
        per_category: BTreeMap::new(),
        confusion: [[0; 3]; 3],
        failed: 0,
    };
    for (pair, rec) in pairs.iter().zip(records) {
        match rec {
            NliRecord::Ok { gold, predicted, .. } => {
                // NEUTRAL never matches a gold label, so it always counts as wrong
                let ok = gold == predicted;
                bump(&mut res.overall, ok);
                bump(res.per_bin.entry(pair.bin.as_str().to_string()).or_default(), ok);
                bump(res.per_category.entry(pair.category.to_string()).or_default(), ok);
                res.confusion[gold.index()][predicted.index()] += 1;
            }
            NliRecord::Failed { .. } => res.failed += 1,
        }
    }
    res
}

/// Classifies every pair; ties in the argmax are broken uniformly by a generator keyed on
/// (seed, pair id).
pub fn run_nli_probe(
    pairs: &[NliPair],
    classifier: &dyn NliClassifier,
    seed: u64,
    exec: Exec,
) -> NliProbeOutput {
    let records = exec.map(pairs, |p| match classifier.classify(&p.premise, &p.hypothesis) {
        Ok(v) => {
            let best = v.argmax_labels();
            let predicted = if best.len() == 1 {
                best[0]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_key(seed, &p.pair_id));
                best[rng.random_range(0..best.len())]
            };
            NliRecord::Ok {
                pair_id: p.pair_id.clone(),
                gold: p.label,
                predicted,
                probs: v.probs,
                tie_broken: best.len() > 1,
            }
        }
        Err(e) => NliRecord::Failed {
            pair_id: p.pair_id.clone(),
            error: e.to_string(),
        },
    });
    let result = aggregate_nli(classifier.model_id(), pairs, &records);
    NliProbeOutput { records, result }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_entailment, to_nli, AdjectivePool, Eligibility, TemplateSet};
    use crate::gateway::mock::{OracleNli, UniformNli};
    use crate::lexicon::Lexicon;

    fn pairs() -> Vec<NliPair> {
        let lex = Lexicon::builtin();
        let items = generate_entailment(
            &lex,
            &TemplateSet::builtin(),
            &AdjectivePool::builtin(),
            &Eligibility::standard(&lex),
            Exec::default(),
        )
        .unwrap();
        to_nli(&items, &lex, 3).pairs
    }

    #[test]
    fn oracle_scores_perfectly() {
        let ps = pairs();
        let oracle = OracleNli::new(
            "oracle",
            ps.iter().map(|p| (p.premise.clone(), p.hypothesis.clone(), p.label)),
        );
        let out = run_nli_probe(&ps, &oracle, 0, Exec::default());
        assert_eq!(out.result.overall.accuracy, Some(1.0));
        assert_eq!(out.result.failed, 0);
    }

    #[test]
    fn uniform_classifier_is_near_a_third() {
        let ps = pairs();
        let out = run_nli_probe(&ps, &UniformNli { id: "u".into() }, 11, Exec::default());
        let acc = out.result.overall.accuracy.unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 0.02, "{acc}");
        let seq = run_nli_probe(&ps, &UniformNli { id: "u".into() }, 11, Exec::Sequential);
        assert_eq!(out, seq);
        assert!(out.result.confusion[0][1] > 0, "neutral predictions are recorded");
    }
}
