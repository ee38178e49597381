//! Target adverb inventory, scale categories and gold orderings.
//!
//! The lexicon is loaded from a tab-separated file with the columns
//! `adverb category gold_rank is_negation is_target wordfreq_rel reddit_rel`.
//! Tied adverbs share a `gold_rank`; non-target entries (the benchmark word `not`
//! and frequency-reference words) use `-` for category and rank.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Default non-negative bottom references for the DIFF reference vector.
const DEFAULT_BOTTOMS: [(ScaleCategory, &str); 3] = [
    (ScaleCategory::Modality, "maybe"),
    (ScaleCategory::Frequency, "sometimes"),
    (ScaleCategory::Degree, "slightly"),
];

/// The benchmark negation every probe compares against.
pub const NOT: &str = "not";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate adverb `{0}`")]
    Duplicate(String),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
    #[error("unknown adverb `{0}`")]
    Unknown(String),
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScaleCategory {
    Modality,
    Frequency,
    Degree,
}

impl ScaleCategory {
    /// Display order used in every report.
    pub const ALL: [ScaleCategory; 3] = [
        ScaleCategory::Modality,
        ScaleCategory::Frequency,
        ScaleCategory::Degree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleCategory::Modality => "MODALITY",
            ScaleCategory::Frequency => "FREQUENCY",
            ScaleCategory::Degree => "DEGREE",
        }
    }
}

impl fmt::Display for ScaleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScaleCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MODALITY" => Ok(ScaleCategory::Modality),
            "FREQUENCY" => Ok(ScaleCategory::Frequency),
            "DEGREE" => Ok(ScaleCategory::Degree),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarAdverb {
    pub surface: String,
    pub category: Option<ScaleCategory>,
    pub gold_rank: Option<u32>,
    pub is_negation: bool,
    pub is_target: bool,
    pub wordfreq_rel: Option<f64>,
    pub reddit_rel: Option<f64>,
}

/// Outcome of comparing two adverbs on their gold scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Below,
    Above,
    Tied,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldScale {
    pub category: ScaleCategory,
    /// Rank groups from the bottom of the scale to the top.
    pub ordering: Vec<Vec<String>>,
    pub top: String,
    pub bottom_nonneg: String,
}

impl GoldScale {
    /// All members of the rank group containing `surface`.
    pub fn group_of(&self, surface: &str) -> Option<&[String]> {
        self.ordering
            .iter()
            .find(|g| g.iter().any(|s| s == surface))
            .map(|g| g.as_slice())
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.ordering.iter().flatten().map(String::as_str)
    }
}

/// Lowercases and trims, the matching rule for every surface lookup.
pub fn normalize_surface(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<ScalarAdverb>,
    index: HashMap<String, usize>,
    scales: BTreeMap<ScaleCategory, GoldScale>,
}

impl Lexicon {
    /// The shipped lexicon: 24 targets, `not`, and two frequency-reference entries.
    pub fn builtin() -> Lexicon {
        Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            entries.push(parse_row(raw, line)?);
        }
        Lexicon::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<ScalarAdverb>) -> Result<Lexicon, LexiconError> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.surface.clone(), i).is_some() {
                return Err(LexiconError::Duplicate(e.surface.clone()));
            }
        }
        if !index.contains_key(NOT) {
            return Err(LexiconError::Invalid(format!(
                "the benchmark word `{NOT}` is missing"
            )));
        }
        let mut scales = BTreeMap::new();
        for cat in ScaleCategory::ALL {
            let mut members: Vec<&ScalarAdverb> = entries
                .iter()
                .filter(|e| e.is_target && e.category == Some(cat))
                .collect();
            if members.len() < 2 {
                return Err(LexiconError::Invalid(format!(
                    "category {cat} needs at least two target adverbs"
                )));
            }
            members.sort_by_key(|e| e.gold_rank);
            let mut ordering: Vec<Vec<String>> = Vec::new();
            let mut last_rank = None;
            for e in members {
                let rank = e.gold_rank.expect("validated in parse_row");
                match last_rank {
                    Some(r) if r == rank => ordering.last_mut().unwrap().push(e.surface.clone()),
                    Some(r) if r + 1 == rank => ordering.push(vec![e.surface.clone()]),
                    None if rank == 0 => ordering.push(vec![e.surface.clone()]),
                    _ => {
                        return Err(LexiconError::Invalid(format!(
                            "gold ranks in {cat} are not contiguous from 0 (found {rank})"
                        )))
                    }
                }
                last_rank = Some(rank);
            }
            let top = ordering.last().unwrap()[0].clone();
            let bottom_nonneg = default_bottom(cat, &ordering, &entries, &index)?;
            scales.insert(
                cat,
                GoldScale {
                    category: cat,
                    ordering,
                    top,
                    bottom_nonneg,
                },
            );
        }
        Ok(Lexicon {
            entries,
            index,
            scales,
        })
    }

    /// Overrides the non-negative bottom reference of a category.
    pub fn with_bottom_reference(
        mut self,
        cat: ScaleCategory,
        surface: &str,
    ) -> Result<Lexicon, LexiconError> {
        let surface = normalize_surface(surface);
        let adv = self.lookup(&surface)?;
        if adv.category != Some(cat) || !adv.is_target || adv.is_negation {
            return Err(LexiconError::Invalid(format!(
                "`{surface}` is not a non-negated {cat} target"
            )));
        }
        self.scales.get_mut(&cat).unwrap().bottom_nonneg = surface;
        Ok(self)
    }

    pub fn entries(&self) -> &[ScalarAdverb] {
        &self.entries
    }

    pub fn get(&self, surface: &str) -> Option<&ScalarAdverb> {
        let key = normalize_surface(surface);
        self.index.get(&key).map(|&i| &self.entries[i])
    }

    pub fn lookup(&self, surface: &str) -> Result<&ScalarAdverb, LexiconError> {
        self.get(surface)
            .ok_or_else(|| LexiconError::Unknown(normalize_surface(surface)))
    }

    /// Target adverbs in display order: categories as in [`ScaleCategory::ALL`],
    /// gold order within each.
    pub fn targets(&self) -> Vec<&ScalarAdverb> {
        ScaleCategory::ALL
            .iter()
            .flat_map(|&c| self.targets_in(c))
            .collect()
    }

    pub fn targets_in(&self, cat: ScaleCategory) -> Vec<&ScalarAdverb> {
        self.scales[&cat]
            .members()
            .map(|s| &self.entries[self.index[s]])
            .collect()
    }

    pub fn scale(&self, cat: ScaleCategory) -> &GoldScale {
        &self.scales[&cat]
    }

    /// Words counted as negations in probe answers: `not`, `never`, `hardly`.
    pub fn is_negation(&self, surface: &str) -> bool {
        self.get(surface).is_some_and(|a| a.is_negation)
    }

    /// Targets plus `not`, in display order; the vocabulary of confusion matrices
    /// and answer scans.
    pub fn answer_vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.targets().iter().map(|a| a.surface.as_str()).collect();
        v.push(NOT);
        v
    }

    pub fn compare(&self, a: &str, b: &str) -> Result<Relation, LexiconError> {
        let a = self.lookup(a)?;
        let b = self.lookup(b)?;
        Ok(compare_adverbs(a, b))
    }

    pub fn to_tsv(&self) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
        }
        let mut out = String::from(
            "# adverb\tcategory\tgold_rank\tis_negation\tis_target\twordfreq_rel\treddit_rel\n",
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.surface,
                opt(&e.category),
                opt(&e.gold_rank),
                e.is_negation,
                e.is_target,
                opt(&e.wordfreq_rel),
                opt(&e.reddit_rel),
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::builtin()
    }
}

/// Gold-scale relation of `a` relative to `b`.
pub fn compare_adverbs(a: &ScalarAdverb, b: &ScalarAdverb) -> Relation {
    match (a.category, b.category, a.gold_rank, b.gold_rank) {
        (Some(ca), Some(cb), Some(ra), Some(rb)) if ca == cb => match ra.cmp(&rb) {
            std::cmp::Ordering::Less => Relation::Below,
            std::cmp::Ordering::Greater => Relation::Above,
            std::cmp::Ordering::Equal => Relation::Tied,
        },
        _ => Relation::Incomparable,
    }
}

fn default_bottom(
    cat: ScaleCategory,
    ordering: &[Vec<String>],
    entries: &[ScalarAdverb],
    index: &HashMap<String, usize>,
) -> Result<String, LexiconError> {
    if let Some((_, s)) = DEFAULT_BOTTOMS
        .iter()
        .find(|(c, s)| *c == cat && ordering.iter().flatten().any(|m| m == s))
    {
        return Ok(s.to_string());
    }
    ordering
        .iter()
        .flatten()
        .find(|s| !entries[index[*s]].is_negation)
        .cloned()
        .ok_or_else(|| LexiconError::Invalid(format!("category {cat} has no non-negated target")))
}

fn parse_row(raw: &str, line: usize) -> Result<ScalarAdverb, LexiconError> {
    let err = |message: String| LexiconError::Parse { line, message };
    let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
    if cols.len() != 7 {
        return Err(err(format!("expected 7 tab-separated columns, found {}", cols.len())));
    }
    let surface = normalize_surface(cols[0]);
    if surface.is_empty() || surface.contains(char::is_whitespace) {
        return Err(err(format!("invalid adverb `{}`", cols[0])));
    }
    let category = match cols[1] {
        "-" | "" => None,
        c => Some(c.parse::<ScaleCategory>().map_err(err)?),
    };
    let gold_rank = match cols[2] {
        "-" | "" => None,
        r => Some(
            r.parse::<u32>()
                .map_err(|_| err(format!("gold_rank `{r}` is not a non-negative integer")))?,
        ),
    };
    let flag = |s: &str, name: &str| match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(err(format!("{name} `{other}` is not a boolean"))),
    };
    let is_negation = flag(cols[3], "is_negation")?;
    let is_target = flag(cols[4], "is_target")?;
    let freq = |s: &str, name: &str| -> Result<Option<f64>, LexiconError> {
        match s {
            "-" | "" => Ok(None),
            v => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| err(format!("{name} `{v}` is not a number")))?;
                if !(x > 0.0 && x < 1.0) {
                    return Err(err(format!("{name} {x} is outside (0, 1)")));
                }
                Ok(Some(x))
            }
        }
    };
    let wordfreq_rel = freq(cols[5], "wordfreq_rel")?;
    let reddit_rel = freq(cols[6], "reddit_rel")?;
    if is_target && (category.is_none() || gold_rank.is_none()) {
        return Err(err(format!("target `{surface}` needs a category and gold_rank")));
    }
    Ok(ScalarAdverb {
        surface,
        category,
        gold_rank,
        is_negation,
        is_target,
        wordfreq_rel,
        reddit_rel,
    })
}
