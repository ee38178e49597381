use serde::{Deserialize, Serialize};

use crate::extraction::ProbeItem;
use crate::lexicon::{Lexicon, ScaleCategory};
use crate::MASK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    FullContext,
    Neutral,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FullContext => "FULL_CONTEXT",
            Variant::Neutral => "NEUTRAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedInstance {
    pub item_id: String,
    pub text_with_mask: String,
    pub target: String,
    pub category: ScaleCategory,
    pub adjective: String,
    pub variant: Variant,
}

/// The context-free frame, lowercase and unpunctuated at the start.
pub fn neutral_frame(adjective: &str) -> String {
    format!("is {MASK} {adjective}.")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRejection {
    pub item_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MlmBuild {
    /// FULL_CONTEXT then NEUTRAL for each accepted item, in input order.
    pub instances: Vec<MaskedInstance>,
    pub rejected: Vec<MaskRejection>,
}

fn mask_item(item: &ProbeItem, lexicon: &Lexicon) -> Result<(String, ScaleCategory), String> {
    let adv = lexicon
        .get(&item.adverb)
        .filter(|a| a.is_target)
        .ok_or_else(|| format!("`{}` is not a target adverb", item.adverb))?;
    if item.mask_end <= item.mask_start {
        return Err(format!(
            "empty mask span {}..{}",
            item.mask_start, item.mask_end
        ));
    }
    let chars: Vec<char> = item.context.chars().collect();
    if item.mask_end > chars.len() {
        return Err(format!(
            "mask span {}..{} exceeds context length {}",
            item.mask_start,
            item.mask_end,
            chars.len()
        ));
    }
    let span: String = chars[item.mask_start..item.mask_end].iter().collect();
    if span.to_lowercase() != adv.surface {
        return Err(format!(
            "mask span {}..{} holds `{span}`, expected `{}`",
            item.mask_start, item.mask_end, adv.surface
        ));
    }
    if item.context.contains(MASK) {
        return Err(format!("context already contains {MASK}"));
    }
    let before: String = chars[..item.mask_start].iter().collect();
    let after: String = chars[item.mask_end..].iter().collect();
    Ok((
        format!("{before}{MASK}{after}"),
        adv.category.expect("targets have categories"),
    ))
}

/// One FULL_CONTEXT and one NEUTRAL instance per extracted item; items whose span does not
/// hold their adverb are rejected with a diagnostic instead.
pub fn build_mlm_items(items: &[ProbeItem], lexicon: &Lexicon) -> MlmBuild {
    let mut out = MlmBuild::default();
    for item in items {
        let item_id = item.item_id();
        match mask_item(item, lexicon) {
            Ok((text, category)) => {
                out.instances.push(MaskedInstance {
                    item_id: item_id.clone(),
                    text_with_mask: text,
                    target: item.adverb.clone(),
                    category,
                    adjective: item.adjective.clone(),
                    variant: Variant::FullContext,
                });
                out.instances.push(MaskedInstance {
                    item_id,
                    text_with_mask: neutral_frame(&item.adjective),
                    target: item.adverb.clone(),
                    category,
                    adjective: item.adjective.clone(),
                    variant: Variant::Neutral,
                });
            }
            Err(reason) => out.rejected.push(MaskRejection { item_id, reason }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(context: &str, adverb: &str, adjective: &str) -> ProbeItem {
        let start = context.find(adverb).unwrap();
        let start = context[..start].chars().count();
        ProbeItem {
            source_id: "s".into(),
            context: context.into(),
            adverb: adverb.into(),
            adjective: adjective.into(),
            mask_start: start,
            mask_end: start + adverb.chars().count(),
            word_count: context.split_whitespace().count(),
        }
    }

    #[test]
    fn full_context_and_neutral() {
        let lex = Lexicon::builtin();
        let it = item(
            "And honestly, after all these years, this entire situation is definitely exceptional.",
            "definitely",
            "exceptional",
        );
        let out = build_mlm_items(&[it], &lex);
        assert!(out.rejected.is_empty());
        assert_eq!(out.instances.len(), 2);
        assert!(out.instances[0]
            .text_with_mask
            .ends_with("this entire situation is [MASK] exceptional."));
        assert_eq!(out.instances[0].target, "definitely");
        assert_eq!(out.instances[0].category, ScaleCategory::Modality);
        assert_eq!(out.instances[1].text_with_mask, "is [MASK] exceptional.");
        assert_eq!(neutral_frame("empathetic"), "is [MASK] empathetic.");
    }

    #[test]
    fn zero_length_span_is_rejected() {
        let lex = Lexicon::builtin();
        let mut it = item("Most I know are quite empathetic.", "quite", "empathetic");
        it.mask_end = it.mask_start;
        let out = build_mlm_items(&[it], &lex);
        assert!(out.instances.is_empty());
        assert_eq!(out.rejected.len(), 1);
        assert!(out.rejected[0].reason.contains("empty"));
    }

    #[test]
    fn misaligned_span_is_rejected() {
        let lex = Lexicon::builtin();
        let mut it = item("Most I know are quite empathetic.", "quite", "empathetic");
        it.mask_start += 1;
        it.mask_end += 1;
        let out = build_mlm_items(&[it], &lex);
        assert_eq!(out.rejected.len(), 1);
    }

    #[test]
    fn offsets_are_characters_not_bytes() {
        let lex = Lexicon::builtin();
        let it = item("Café owners told me the new menu is très fine and really good.", "really", "good");
        let out = build_mlm_items(&[it], &lex);
        assert!(out.rejected.is_empty());
        assert!(out.instances[0].text_with_mask.ends_with("and [MASK] good."));
    }
}
