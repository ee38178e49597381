//! Adjective pool for the entailment dataset: real adjectives in three log-frequency bins
//! plus phonotactically legal pseudowords.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{data_lines, read_data_file, DatasetError};

const DEFAULT_POOL: &str = include_str!("../../data/adjective_pool.tsv");
const FRAME_ADJECTIVES: &str = include_str!("../../data/frame_adjectives.txt");
const COMMON_WORDS: &str = include_str!("../../data/common_words.txt");

pub const PER_BIN: usize = 40;
/// Shortest word counted as a part when checking pseudowords for compounds.
pub const MIN_COMPOUND_PART: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrequencyBin {
    Pseudo,
    Low,
    Med,
    High,
}

impl FrequencyBin {
    pub const ALL: [FrequencyBin; 4] = [
        FrequencyBin::Pseudo,
        FrequencyBin::Low,
        FrequencyBin::Med,
        FrequencyBin::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyBin::Pseudo => "PSEUDO",
            FrequencyBin::Low => "LOW",
            FrequencyBin::Med => "MED",
            FrequencyBin::High => "HIGH",
        }
    }

    /// Half-open natural-log bounds `[lo, hi)`; `None` for pseudowords.
    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            FrequencyBin::Pseudo => None,
            FrequencyBin::Low => Some((-18.0, -14.0)),
            FrequencyBin::Med => Some((-14.0, -10.0)),
            FrequencyBin::High => Some((-10.0, -6.0)),
        }
    }

    /// The real-word bin containing `log_freq`, if any.
    pub fn for_log_freq(log_freq: f64) -> Option<FrequencyBin> {
        [FrequencyBin::Low, FrequencyBin::Med, FrequencyBin::High]
            .into_iter()
            .find(|b| {
                let (lo, hi) = b.bounds().unwrap();
                log_freq >= lo && log_freq < hi
            })
    }
}

impl fmt::Display for FrequencyBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrequencyBin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FrequencyBin::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown frequency bin `{s}`"))
    }
}

/// Source of natural-log relative word frequencies.
pub trait WordFrequency: Send + Sync {
    fn log_freq(&self, word: &str) -> Option<f64>;
}

/// In-memory frequency table, loadable from `word<TAB>log_freq` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableFrequency {
    table: HashMap<String, f64>,
}

impl TableFrequency {
    pub fn new(table: HashMap<String, f64>) -> Self {
        TableFrequency { table }
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut table = HashMap::new();
        for (line, raw) in data_lines(text) {
            let mut cols = raw.split('\t').map(str::trim);
            let (Some(w), Some(f)) = (cols.next(), cols.next()) else {
                return Err(DatasetError::PoolParse {
                    line,
                    message: "expected `word<TAB>log_freq`".into(),
                });
            };
            let f: f64 = f.parse().map_err(|_| DatasetError::PoolParse {
                line,
                message: format!("bad frequency `{f}`"),
            })?;
            table.insert(w.to_lowercase(), f);
        }
        Ok(TableFrequency { table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        TableFrequency::parse(&read_data_file(path.as_ref())?)
    }
}

impl WordFrequency for TableFrequency {
    fn log_freq(&self, word: &str) -> Option<f64> {
        self.table.get(&word.to_lowercase()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub adjective: String,
    pub bin: FrequencyBin,
    pub log_freq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjectivePool {
    entries: Vec<PoolEntry>,
}

/// The 40 common adjectives that build the ranking frames.
pub fn frame_adjectives() -> Vec<String> {
    data_lines(FRAME_ADJECTIVES)
        .map(|(_, l)| l.trim().to_string())
        .collect()
}

/// Common English words used to reject pseudowords that are compounds of real words.
pub fn common_words() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        data_lines(COMMON_WORDS)
            .map(|(_, l)| l.trim().to_lowercase())
            .collect()
    })
}

/// Whether `word` splits into two dictionary words of at least [`MIN_COMPOUND_PART`] letters.
pub fn is_compound(word: &str, dictionary: &HashSet<String>) -> bool {
    let chars: Vec<char> = word.chars().collect();
    (MIN_COMPOUND_PART..=chars.len().saturating_sub(MIN_COMPOUND_PART)).any(|i| {
        let a: String = chars[..i].iter().collect();
        let b: String = chars[i..].iter().collect();
        dictionary.contains(&a) && dictionary.contains(&b)
    })
}

impl AdjectivePool {
    pub fn builtin() -> AdjectivePool {
        AdjectivePool::parse(DEFAULT_POOL).expect("shipped pool parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AdjectivePool, DatasetError> {
        AdjectivePool::parse(&read_data_file(path.as_ref())?)
    }

    pub fn parse(text: &str) -> Result<AdjectivePool, DatasetError> {
        let mut entries = Vec::new();
        for (line, raw) in data_lines(text) {
            let err = |message: String| DatasetError::PoolParse { line, message };
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            }
            let bin: FrequencyBin = cols[1].parse().map_err(err)?;
            let log_freq = match cols[2] {
                "-" | "" => None,
                v => Some(v.parse::<f64>().map_err(|_| err(format!("bad log_freq `{v}`")))?),
            };
            entries.push(PoolEntry {
                adjective: cols[0].to_lowercase(),
                bin,
                log_freq,
            });
        }
        Ok(AdjectivePool { entries })
    }

    pub fn from_entries(entries: Vec<PoolEntry>) -> AdjectivePool {
        AdjectivePool { entries }
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bin_of(&self, adjective: &str) -> Option<FrequencyBin> {
        self.entries
            .iter()
            .find(|e| e.adjective == adjective)
            .map(|e| e.bin)
    }

    pub fn counts(&self) -> BTreeMap<FrequencyBin, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.bin).or_insert(0) += 1;
        }
        m
    }

    /// Full check against the design: `per_bin` entries in every bin, frequencies inside
    /// their half-open bins, and pseudowords that are neither real words nor compounds.
    pub fn validate(&self, per_bin: usize, dictionary: &HashSet<String>) -> Result<(), DatasetError> {
        let err = |m: String| Err(DatasetError::Pool(m));
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.adjective.as_str()) {
                return err(format!("duplicate entry `{}`", e.adjective));
            }
            if e.adjective.is_empty() || !e.adjective.chars().all(|c| c.is_alphabetic()) {
                return err(format!("`{}` is not a single alphabetic word", e.adjective));
            }
            match (e.bin.bounds(), e.log_freq) {
                (None, None) => {
                    if dictionary.contains(&e.adjective) {
                        return err(format!("pseudoword `{}` is a real word", e.adjective));
                    }
                    if is_compound(&e.adjective, dictionary) {
                        return err(format!(
                            "pseudoword `{}` is a compound of real words",
                            e.adjective
                        ));
                    }
                }
                (None, Some(_)) => {
                    return err(format!("pseudoword `{}` has a frequency", e.adjective))
                }
                (Some(_), None) => {
                    return err(format!("`{}` in {} lacks a frequency", e.adjective, e.bin))
                }
                (Some((lo, hi)), Some(f)) => {
                    if !(f >= lo && f < hi) {
                        return err(format!(
                            "`{}` has log frequency {f}, outside {} [{lo}, {hi})",
                            e.adjective, e.bin
                        ));
                    }
                }
            }
        }
        let counts = self.counts();
        for b in FrequencyBin::ALL {
            let n = counts.get(&b).copied().unwrap_or(0);
            if n != per_bin {
                return err(format!("bin {b} has {n} entries, expected {per_bin}"));
            }
        }
        Ok(())
    }

    /// Builds a pool from candidate adjectives, binning them with `freq` and keeping the
    /// first `per_bin` per bin in candidate order.
    pub fn select(
        candidates: &[String],
        freq: &dyn WordFrequency,
        pseudowords: &[String],
        per_bin: usize,
    ) -> Result<AdjectivePool, DatasetError> {
        let mut entries: Vec<PoolEntry> = pseudowords
            .iter()
            .take(per_bin)
            .map(|p| PoolEntry {
                adjective: p.to_lowercase(),
                bin: FrequencyBin::Pseudo,
                log_freq: None,
            })
            .collect();
        let mut taken: BTreeMap<FrequencyBin, usize> = BTreeMap::new();
        for c in candidates {
            let Some(f) = freq.log_freq(c) else { continue };
            let Some(bin) = FrequencyBin::for_log_freq(f) else { continue };
            let n = taken.entry(bin).or_insert(0);
            if *n < per_bin {
                *n += 1;
                entries.push(PoolEntry {
                    adjective: c.to_lowercase(),
                    bin,
                    log_freq: Some(f),
                });
            }
        }
        entries.sort_by_key(|e| e.bin);
        let pool = AdjectivePool { entries };
        for b in FrequencyBin::ALL {
            let n = pool.counts().get(&b).copied().unwrap_or(0);
            if n < per_bin {
                return Err(DatasetError::Pool(format!(
                    "only {n} candidates for bin {b}, need {per_bin}"
                )));
            }
        }
        Ok(pool)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# adjective\tbin\tlog_freq\n");
        for e in &self.entries {
            let f = e.log_freq.map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
            out.push_str(&format!("{}\t{}\t{}\n", e.adjective, e.bin, f));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pool_is_valid() {
        let pool = AdjectivePool::builtin();
        assert_eq!(pool.len(), 160);
        pool.validate(PER_BIN, common_words()).unwrap();
    }

    #[test]
    fn bins_are_half_open() {
        assert_eq!(FrequencyBin::for_log_freq(-14.0), Some(FrequencyBin::Med));
        assert_eq!(FrequencyBin::for_log_freq(-14.0001), Some(FrequencyBin::Low));
        assert_eq!(FrequencyBin::for_log_freq(-10.0), Some(FrequencyBin::High));
        assert_eq!(FrequencyBin::for_log_freq(-6.0), None);
        assert_eq!(FrequencyBin::for_log_freq(-18.0), Some(FrequencyBin::Low));
        assert_eq!(FrequencyBin::for_log_freq(-18.5), None);
    }

    #[test]
    fn compound_pseudowords_are_rejected() {
        let dict: HashSet<String> = ["sun", "flower", "cat"].iter().map(|s| s.to_string()).collect();
        assert!(is_compound("sunflower", &dict));
        assert!(!is_compound("sunflo", &dict));
        assert!(!is_compound("glorp", common_words()));

        let mut pool = AdjectivePool::builtin();
        pool.entries[0].adjective = "sunflower".into();
        let e = pool.validate(PER_BIN, &dict).unwrap_err().to_string();
        assert!(e.contains("compound"), "{e}");
    }

    #[test]
    fn out_of_bin_frequency_is_rejected() {
        let mut pool = AdjectivePool::builtin();
        let i = pool.entries.iter().position(|e| e.bin == FrequencyBin::Low).unwrap();
        pool.entries[i].log_freq = Some(-9.0);
        assert!(pool.validate(PER_BIN, common_words()).is_err());
    }

    #[test]
    fn select_bins_candidates() {
        let table: HashMap<String, f64> = [("a", -15.0), ("b", -12.0), ("c", -8.0), ("d", -3.0), ("e", -15.5)]
            .iter()
            .map(|(w, f)| (w.to_string(), *f))
            .collect();
        let freq = TableFrequency::new(table);
        let cands: Vec<String> = ["a", "b", "c", "d", "e", "zz"].iter().map(|s| s.to_string()).collect();
        let pool = AdjectivePool::select(&cands, &freq, &["glorp".into()], 1).unwrap();
        let names: Vec<&str> = pool.entries().iter().map(|e| e.adjective.as_str()).collect();
        assert_eq!(names, ["glorp", "a", "b", "c"]);
        assert!(AdjectivePool::select(&cands, &freq, &[], 1).is_err());
    }

    #[test]
    fn frame_list_has_forty() {
        let f = frame_adjectives();
        assert_eq!(f.len(), 40);
        assert_eq!(&f[..5], ["able", "bad", "big", "black", "clear"]);
    }

    #[test]
    fn tsv_roundtrip() {
        let pool = AdjectivePool::builtin();
        assert_eq!(AdjectivePool::parse(&pool.to_tsv()).unwrap(), pool);
    }
}
