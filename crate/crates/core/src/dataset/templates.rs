use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{data_lines, read_data_file, DatasetError};
use crate::MASK;

const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.tsv");

pub const PREMISE_SLOT: &str = "{PREMISE}";
pub const MASK_SLOT: &str = "{MASK}";
pub const ADJ_SLOT: &str = "{ADJ}";

/// Template 16 in its ungrammatical form, without the copula after `It`. Opt-in, for
/// comparisons against numbers obtained with that wording.
pub const VERBATIM_TEMPLATE_16: &str =
    "It not {PREMISE} {ADJ} because it is at most {MASK} {ADJ}.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Below,
    Above,
}

/// Where a correct answer lies relative to the premise on the gold scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskPosition {
    BeforePremise,
    AfterPremise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolarityFrame {
    AtLeast,
    AtMostNegated,
}

macro_rules! upper_enum_text {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(<$ty>::$variant => $text),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
                    $($text => Ok(<$ty>::$variant),)+
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
    };
}

upper_enum_text!(Condition { Below => "BELOW", Above => "ABOVE" });
upper_enum_text!(Direction { Below => "BELOW", Above => "ABOVE" });
upper_enum_text!(MaskPosition { BeforePremise => "BEFORE_PREMISE", AfterPremise => "AFTER_PREMISE" });
upper_enum_text!(PolarityFrame { AtLeast => "AT_LEAST", AtMostNegated => "AT_MOST_NEGATED" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentTemplate {
    pub id: u32,
    pub condition: Condition,
    pub pattern: String,
    pub mask_position: MaskPosition,
    pub polarity_frame: PolarityFrame,
}

impl EntailmentTemplate {
    /// The direction a correct answer takes, read off the pattern: when the mask is the
    /// argument of "at least"/"at most" it is the weaker claim, so it must lie below the
    /// premise; otherwise the premise is the bound and the answer must lie above.
    pub fn expected_direction(&self) -> Direction {
        let bounded = ["at least ", "at most "]
            .iter()
            .any(|b| self.pattern.contains(&format!("{b}{MASK_SLOT}")));
        if bounded {
            Direction::Below
        } else {
            Direction::Above
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let err = |message: String| DatasetError::Template {
            id: self.id,
            message,
        };
        let count = |slot: &str| self.pattern.matches(slot).count();
        if count(MASK_SLOT) != 1 {
            return Err(err(format!("expected one {MASK_SLOT} slot, found {}", count(MASK_SLOT))));
        }
        if count(PREMISE_SLOT) != 1 {
            return Err(err(format!(
                "expected one {PREMISE_SLOT} slot, found {}",
                count(PREMISE_SLOT)
            )));
        }
        if count(ADJ_SLOT) == 0 {
            return Err(err(format!("missing {ADJ_SLOT} slot")));
        }
        if self.pattern.contains(MASK) {
            return Err(err(format!("pattern contains a literal {MASK}")));
        }
        let stripped = self
            .pattern
            .replace(MASK_SLOT, "")
            .replace(PREMISE_SLOT, "")
            .replace(ADJ_SLOT, "");
        if stripped.contains('{') || stripped.contains('}') {
            return Err(err("unknown slot in pattern".into()));
        }
        let textual = if self.pattern.find(MASK_SLOT) < self.pattern.find(PREMISE_SLOT) {
            MaskPosition::BeforePremise
        } else {
            MaskPosition::AfterPremise
        };
        if textual != self.mask_position {
            return Err(err(format!(
                "mask_position {} disagrees with the pattern ({textual})",
                self.mask_position
            )));
        }
        Ok(())
    }

    /// Instantiates the pattern; `mask` fills the mask slot (normally `[MASK]`).
    pub fn fill(&self, premise: &str, adjective: &str, mask: &str) -> String {
        self.pattern
            .replace(PREMISE_SLOT, premise)
            .replace(ADJ_SLOT, adjective)
            .replace(MASK_SLOT, mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<EntailmentTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        TemplateSet::parse(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }

    /// The shipped set with template 16 in its verbatim, ungrammatical form.
    /// Only the surface changes; the expected direction stays the same.
    pub fn builtin_verbatim() -> TemplateSet {
        let mut set = TemplateSet::builtin();
        for t in &mut set.templates {
            if t.id == 16 {
                t.pattern = VERBATIM_TEMPLATE_16.to_string();
            }
        }
        set
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TemplateSet, DatasetError> {
        TemplateSet::parse(&read_data_file(path.as_ref())?)
    }

    pub fn parse(text: &str) -> Result<TemplateSet, DatasetError> {
        let mut templates = Vec::new();
        for (line, raw) in data_lines(text) {
            let err = |message: String| DatasetError::TemplateParse { line, message };
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", cols.len())));
            }
            templates.push(EntailmentTemplate {
                id: cols[0]
                    .parse()
                    .map_err(|_| err(format!("bad template id `{}`", cols[0])))?,
                condition: cols[1].parse().map_err(err)?,
                pattern: cols[2].to_string(),
                mask_position: cols[3].parse().map_err(err)?,
                polarity_frame: cols[4].parse().map_err(err)?,
            });
        }
        TemplateSet::new(templates)
    }

    pub fn new(mut templates: Vec<EntailmentTemplate>) -> Result<TemplateSet, DatasetError> {
        templates.sort_by_key(|t| t.id);
        for w in templates.windows(2) {
            if w[0].id == w[1].id {
                return Err(DatasetError::TemplateSet(format!("duplicate template id {}", w[0].id)));
            }
        }
        for t in &templates {
            t.validate()?;
        }
        if templates.is_empty() {
            return Err(DatasetError::TemplateSet("no templates".into()));
        }
        Ok(TemplateSet { templates })
    }

    /// Checks the full design: eight templates per condition.
    pub fn validate_complete(&self) -> Result<(), DatasetError> {
        for c in [Condition::Below, Condition::Above] {
            let n = self.templates.iter().filter(|t| t.condition == c).count();
            if n != 8 {
                return Err(DatasetError::TemplateSet(format!(
                    "{c} has {n} templates, expected 8"
                )));
            }
        }
        Ok(())
    }

    pub fn templates(&self) -> &[EntailmentTemplate] {
        &self.templates
    }

    pub fn get(&self, id: u32) -> Option<&EntailmentTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn in_condition(&self, c: Condition) -> impl Iterator<Item = &EntailmentTemplate> {
        self.templates.iter().filter(move |t| t.condition == c)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# id\tcondition\tpattern\tmask_position\tpolarity_frame\n");
        for t in &self.templates {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                t.id, t.condition, t.pattern, t.mask_position, t.polarity_frame
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_is_complete() {
        let set = TemplateSet::builtin();
        set.validate_complete().unwrap();
        assert_eq!(set.templates().len(), 16);
    }

    #[test]
    fn directions() {
        let set = TemplateSet::builtin();
        for t in set.templates() {
            let expected = match (t.condition, t.id) {
                (_, 16) => Direction::Below,
                (Condition::Below, _) => Direction::Below,
                (Condition::Above, _) => Direction::Above,
            };
            assert_eq!(t.expected_direction(), expected, "template {}", t.id);
        }
        let exact = TemplateSet::builtin_verbatim();
        assert_eq!(exact.get(16).unwrap().expected_direction(), Direction::Below);
        assert!(exact.get(16).unwrap().pattern.starts_with("It not"));
    }

    #[test]
    fn fill_first_template() {
        let t = TemplateSet::builtin().get(1).unwrap().clone();
        assert_eq!(
            t.fill("often", "cold", MASK),
            "If it is often cold, then it is at least [MASK] cold."
        );
    }

    #[test]
    fn slot_errors_name_the_template() {
        let bad = EntailmentTemplate {
            id: 42,
            condition: Condition::Below,
            pattern: "It is {PREMISE} {ADJ}.".into(),
            mask_position: MaskPosition::AfterPremise,
            polarity_frame: PolarityFrame::AtLeast,
        };
        let e = bad.validate().unwrap_err().to_string();
        assert!(e.contains("template 42"), "{e}");

        let wrong_position = EntailmentTemplate {
            pattern: "It is at least {MASK} {ADJ} if it is {PREMISE} {ADJ}.".into(),
            ..bad
        };
        assert!(wrong_position.validate().is_err());
    }

    #[test]
    fn tsv_roundtrip() {
        let set = TemplateSet::builtin();
        assert_eq!(TemplateSet::parse(&set.to_tsv()).unwrap(), set);
    }
}
