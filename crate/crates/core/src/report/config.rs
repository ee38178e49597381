use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::io::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Mlm,
    Ranking,
    Entailment,
    RandomBaseline,
    Nli,
    Remote,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 6] = [
        ProbeKind::Mlm,
        ProbeKind::Ranking,
        ProbeKind::Entailment,
        ProbeKind::RandomBaseline,
        ProbeKind::Nli,
        ProbeKind::Remote,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Mlm => "mlm",
            ProbeKind::Ranking => "ranking",
            ProbeKind::Entailment => "entailment",
            ProbeKind::RandomBaseline => "random-baseline",
            ProbeKind::Nli => "nli",
            ProbeKind::Remote => "remote",
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProbeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProbeKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown probe `{s}`"))
    }
}

fn default_sample() -> usize {
    5120
}

fn default_completions() -> usize {
    10
}

/// A declarative run. Paths are resolved relative to the working directory; every data
/// path is optional and falls back to the shipped resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// `mock` or the path of a model TOML file.
    pub model: String,
    pub probes: Vec<ProbeKind>,
    /// Seeds every sampled step (baseline answers, NLI balancing, tie breaks, remote sample).
    pub seed: u64,
    #[serde(default)]
    pub sequential: bool,
    /// Use template 16 in its copula-less wording.
    #[serde(default)]
    pub verbatim_templates: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Pre-computed parses for the corpus; the built-in heuristic parser otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parses: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PathBuf>,
    #[serde(default = "default_sample")]
    pub remote_sample: usize,
    #[serde(default = "default_completions")]
    pub remote_completions: usize,
}

impl RunConfig {
    pub fn new(output_dir: impl Into<PathBuf>, model: impl Into<String>, probes: Vec<ProbeKind>, seed: u64) -> Self {
        RunConfig {
            output_dir: output_dir.into(),
            model: model.into(),
            probes,
            seed,
            sequential: false,
            verbatim_templates: false,
            corpus: None,
            parses: None,
            lexicon: None,
            templates: None,
            pool: None,
            prompt: None,
            remote_sample: default_sample(),
            remote_completions: default_completions(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks the configuration without touching any model: probes are listed once,
    /// sizes are positive and every referenced file exists.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.probes.is_empty() {
            return Err(ReportError::Config("no probes selected".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.probes {
            if !seen.insert(p) {
                return Err(ReportError::Config(format!("probe `{p}` listed twice")));
            }
        }
        if self.remote_sample == 0 || self.remote_completions == 0 {
            return Err(ReportError::Config("remote sample and completions must be positive".into()));
        }
        if self.parses.is_some() && self.corpus.is_none() {
            return Err(ReportError::Config("`parses` given without a `corpus`".into()));
        }
        let mut paths: Vec<(&str, &Path)> = Vec::new();
        if self.model != "mock" {
            paths.push(("model", Path::new(&self.model)));
        }
        for (name, p) in [
            ("corpus", &self.corpus),
            ("parses", &self.parses),
            ("lexicon", &self.lexicon),
            ("templates", &self.templates),
            ("pool", &self.pool),
            ("prompt", &self.prompt),
        ] {
            if let Some(p) = p {
                paths.push((name, p.as_path()));
            }
        }
        for (name, p) in paths {
            if !p.is_file() {
                return Err(ReportError::Config(format!("{name} file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; equal configurations hash equally.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("run config serializes"))
    }

    pub fn wants(&self, p: ProbeKind) -> bool {
        self.probes.contains(&p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_hashes_stably() {
        let text = "output_dir = \"out\"\nmodel = \"mock\"\nprobes = [\"mlm\", \"random-baseline\"]\nseed = 3\n";
        let a = RunConfig::parse(text).unwrap();
        assert_eq!(a.probes, vec![ProbeKind::Mlm, ProbeKind::RandomBaseline]);
        assert_eq!(a.remote_sample, 5120);
        let b = RunConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 4, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        a.validate().unwrap();
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::parse("output_dir = \"o\"\nmodel = \"mock\"\nprobes = [\"mlm\"]\n").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn validation_errors() {
        let base = RunConfig::new("o", "mock", vec![ProbeKind::Mlm], 0);
        let missing = RunConfig {
            corpus: Some("/definitely/not/here.jsonl".into()),
            ..base.clone()
        };
        assert!(missing.validate().unwrap_err().to_string().contains("corpus"));
        let twice = RunConfig {
            probes: vec![ProbeKind::Nli, ProbeKind::Nli],
            ..base.clone()
        };
        assert!(twice.validate().is_err());
        let none = RunConfig { probes: vec![], ..base.clone() };
        assert!(none.validate().is_err());
        let model = RunConfig {
            model: "/no/model.toml".into(),
            ..base
        };
        assert!(model.validate().is_err());
    }
}
