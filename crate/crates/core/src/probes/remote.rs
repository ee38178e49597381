use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::entailment::aggregate_entailment;
use super::{
    classify_entailment_answer, EntailmentProbeOutput, EntailmentRecord, NegVariant, ProbeError,
    SCAN_DEPTH,
};
use crate::dataset::{EntailmentItem, FrequencyBin};
use crate::gateway::remote::RemoteCompleter;
use crate::gateway::{Candidate, RankedCompletions};
use crate::io::stable_key;
use crate::lexicon::Lexicon;
use crate::par::Exec;

/// Instruction prompt; `{SENTENCE}` receives the item surface with its `[MASK]`.
pub const DEFAULT_PROMPT: &str = include_str!("../../data/remote_prompt.txt");

pub const SENTENCE_SLOT: &str = "{SENTENCE}";

/// Indices of a sample stratified by (template, frequency bin), returned ascending.
///
/// Allocation is as even as possible across non-empty strata: each stratum gets an equal
/// share capped at its size, and whatever a capped stratum cannot take is re-spread over the
/// rest. Leftover units go to strata in (template, bin) order. Within a stratum the members
/// are shuffled by a generator keyed on (seed, stratum).
pub fn stratified_sample(items: &[EntailmentItem], size: usize, seed: u64) -> Result<Vec<usize>, ProbeError> {
    if size > items.len() {
        return Err(ProbeError::Input(format!(
            "sample of {size} requested from {} items",
            items.len()
        )));
    }
    let mut strata: BTreeMap<(u32, FrequencyBin), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        strata.entry((it.template_id, it.bin)).or_default().push(i);
    }
    let keys: Vec<(u32, FrequencyBin)> = strata.keys().copied().collect();
    let mut quota: BTreeMap<(u32, FrequencyBin), usize> = keys.iter().map(|k| (*k, 0)).collect();
    let mut remaining = size;
    loop {
        let open: Vec<_> = keys.iter().filter(|k| quota[*k] < strata[*k].len()).copied().collect();
        if remaining == 0 || open.is_empty() {
            break;
        }
        let share = remaining / open.len();
        let mut extra = remaining % open.len();
        for k in open {
            let mut want = share;
            if extra > 0 {
                want += 1;
                extra -= 1;
            }
            let room = strata[&k].len() - quota[&k];
            let take = want.min(room);
            *quota.get_mut(&k).unwrap() += take;
            remaining -= take;
        }
    }
    let mut out = Vec::with_capacity(size);
    for (k, mut members) in strata {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_key(seed, &format!("stratum:{}:{}", k.0, k.1)));
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..quota[&k]]);
    }
    out.sort_unstable();
    Ok(out)
}

pub fn render_prompt(template: &str, item: &EntailmentItem) -> String {
    template.replace(SENTENCE_SLOT, &item.surface)
}

/// Completions in the order returned; the log-probabilities are stand-ins that only encode
/// that order, since the API does not score them.
fn as_ranked(query_id: &str, words: Vec<String>) -> RankedCompletions {
    RankedCompletions {
        query_id: query_id.to_string(),
        candidates: words
            .into_iter()
            .enumerate()
            .map(|(i, surface)| Candidate {
                surface,
                log_prob: -(i as f64),
            })
            .collect(),
    }
}

/// Asks the remote model for `n` completions per item (at most [`SCAN_DEPTH`] are scanned)
/// and classifies them like masked-model output, under each requested variant.
pub fn run_remote_probe(
    items: &[EntailmentItem],
    completer: &RemoteCompleter,
    prompt_template: &str,
    n: usize,
    lexicon: &Lexicon,
    variants: &[NegVariant],
    exec: Exec,
) -> Result<Vec<EntailmentProbeOutput>, ProbeError> {
    if !prompt_template.contains(SENTENCE_SLOT) {
        return Err(ProbeError::Input(format!("prompt template lacks {SENTENCE_SLOT}")));
    }
    if n == 0 {
        return Err(ProbeError::Input("at least one completion per item is needed".into()));
    }
    let completions = exec.map(items, |item| {
        completer
            .complete(&render_prompt(prompt_template, item), n)
            .map(|words| as_ranked(&item.item_id, words))
            .map_err(|e| e.to_string())
    });
    Ok(variants
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
        .collect())
}

/// Default completions requested per item.
pub const DEFAULT_COMPLETIONS: usize = SCAN_DEPTH;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_entailment, AdjectivePool, Eligibility, TemplateSet};
    use crate::gateway::mock::PriorCompletions;
    use crate::gateway::remote::ResponseCache;

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
    fn sample_is_balanced_and_deterministic() {
        let its = items();
        let s = stratified_sample(&its, 5120, 1).unwrap();
        assert_eq!(s.len(), 5120);
        let mut per: BTreeMap<(u32, FrequencyBin), usize> = BTreeMap::new();
        for &i in &s {
            *per.entry((its[i].template_id, its[i].bin)).or_default() += 1;
        }
        assert_eq!(per.len(), 64);
        assert!(per.values().all(|&c| c == 80));
        assert_eq!(s, stratified_sample(&its, 5120, 1).unwrap());
        assert_ne!(s, stratified_sample(&its, 5120, 2).unwrap());
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_strata_are_capped_and_refilled() {
        let its = items();
        // keep only 3 items from template 1 / HIGH
        let mut kept = 0;
        let small: Vec<EntailmentItem> = its
            .into_iter()
            .filter(|i| {
                if i.template_id == 1 && i.bin == FrequencyBin::High {
                    kept += 1;
                    kept <= 3
                } else {
                    true
                }
            })
            .collect();
        let s = stratified_sample(&small, 640, 0).unwrap();
        assert_eq!(s.len(), 640);
        let n = s
            .iter()
            .filter(|&&i| small[i].template_id == 1 && small[i].bin == FrequencyBin::High)
            .count();
        assert_eq!(n, 3);
        assert!(stratified_sample(&small[..5], 6, 0).is_err());
    }

    #[test]
    fn remote_probe_with_prior_backend() {
        let lex = Lexicon::builtin();
        let its = items();
        let idx = stratified_sample(&its, 64, 0).unwrap();
        let sample: Vec<EntailmentItem> = idx.iter().map(|&i| its[i].clone()).collect();
        let c = RemoteCompleter::new(Box::new(PriorCompletions::new(&lex)), "m", ResponseCache::in_memory());
        let outs = run_remote_probe(&sample, &c, DEFAULT_PROMPT, 10, &lex, &NegVariant::ALL, Exec::default()).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].records.len(), 64);
        assert_eq!(outs[0].aggregates.overall.failed, 0);
        let calls = c.network_calls();
        run_remote_probe(&sample, &c, DEFAULT_PROMPT, 10, &lex, &NegVariant::ALL, Exec::default()).unwrap();
        assert_eq!(c.network_calls(), calls, "second run is served from the cache");
        assert!(run_remote_probe(&sample, &c, "no slot", 10, &lex, &NegVariant::ALL, Exec::default()).is_err());
    }

    #[test]
    fn prompt_rendering() {
        let its = items();
        let p = render_prompt(DEFAULT_PROMPT, &its[0]);
        assert!(p.contains(&its[0].surface));
        assert!(p.contains("[MASK]"));
    }
}
