use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::http::SidecarClient;
use super::mock::{MockMlm, PriorCompletions, UniformNli};
use super::planted::PlantedEmbedder;
use super::remote::{OpenAiBackend, RemoteCompleter, ReplayBackend, ResponseCache};
use super::{CausalMaskAdapter, GatewayError, LayerSelection, ModelHandle, Pooling};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// In-process deterministic models with every capability.
    Mock,
    /// Masked LM / embedder / NLI classifier behind the HTTP sidecar.
    Sidecar,
    /// Causal LM behind the sidecar, scored by substituting candidate words.
    CausalSidecar,
    /// OpenAI-compatible completion API.
    Openai,
    /// Recorded completion responses.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub layer: LayerSelection,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Model name sent to a completion API.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_batch_size() -> usize {
    32
}

fn default_max_in_flight() -> usize {
    super::remote::DEFAULT_MAX_IN_FLIGHT
}

fn default_timeout_secs() -> u64 {
    60
}

impl ModelConfig {
    pub fn mock() -> Self {
        ModelConfig {
            name: "mock".into(),
            kind: ModelKind::Mock,
            endpoint: None,
            layer: LayerSelection::default(),
            pooling: Pooling::default(),
            batch_size: default_batch_size(),
            remote_model: None,
            cache_path: None,
            replay_path: None,
            max_in_flight: default_max_in_flight(),
            timeout_secs: default_timeout_secs(),
        }
    }

    /// `mock` names the built-in mock; anything else is read as a TOML model file.
    pub fn resolve(name_or_path: &str) -> Result<Self, GatewayError> {
        if name_or_path == "mock" {
            return Ok(ModelConfig::mock());
        }
        ModelConfig::load(name_or_path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    fn endpoint(&self) -> Result<&str, GatewayError> {
        self.endpoint
            .as_deref()
            .ok_or_else(|| GatewayError::Config(format!("model `{}` needs an endpoint", self.name)))
    }

    fn cache(&self) -> Result<ResponseCache, GatewayError> {
        match &self.cache_path {
            Some(p) => ResponseCache::open(p),
            None => Ok(ResponseCache::in_memory()),
        }
    }
}

/// Instantiates the backends a configuration names.
pub fn load_model(cfg: &ModelConfig, lexicon: &Lexicon) -> Result<ModelHandle, GatewayError> {
    let mut h = ModelHandle::new(cfg.name.clone());
    h.batch_size = cfg.batch_size.max(1);
    let timeout = Duration::from_secs(cfg.timeout_secs);
    let remote_model = cfg.remote_model.clone().unwrap_or_else(|| cfg.name.clone());
    match cfg.kind {
        ModelKind::Mock => {
            h.mlm = Some(Arc::new(MockMlm::prior(lexicon)));
            h.embedder = Some(Arc::new(PlantedEmbedder::new(lexicon)));
            h.nli = Some(Arc::new(UniformNli { id: "mock".into() }));
            let remote = RemoteCompleter::new(Box::new(PriorCompletions::new(lexicon)), remote_model, cfg.cache()?)
                .with_max_in_flight(cfg.max_in_flight);
            h.remote = Some(Arc::new(remote));
            h.notes.push("deterministic mock: frequency-prior MLM, planted embeddings, uniform NLI".into());
        }
        ModelKind::Sidecar => {
            let client = Arc::new(SidecarClient::connect(cfg.endpoint()?, timeout, cfg.layer, cfg.pooling)?);
            h.mlm = Some(client.clone());
            h.embedder = Some(client.clone());
            h.nli = Some(client);
        }
        ModelKind::CausalSidecar => {
            let client = Arc::new(SidecarClient::connect(cfg.endpoint()?, timeout, cfg.layer, cfg.pooling)?);
            let candidates = lexicon
                .answer_vocabulary()
                .into_iter()
                .map(String::from)
                .collect();
            h.mlm = Some(Arc::new(CausalMaskAdapter::new(client, candidates)));
            h.notes.push(
                "causal model scored by full-sentence likelihood with each candidate substituted \
                 (reconstruction); ranks are over the lexicon vocabulary only"
                    .into(),
            );
        }
        ModelKind::Openai => {
            let base = cfg.endpoint.as_deref().unwrap_or("https://api.openai.com/v1");
            let backend = OpenAiBackend::from_env(base, timeout)?;
            let remote = RemoteCompleter::new(Box::new(backend), remote_model, cfg.cache()?)
                .with_max_in_flight(cfg.max_in_flight);
            h.remote = Some(Arc::new(remote));
        }
        ModelKind::Replay => {
            let path = cfg.replay_path.as_ref().ok_or_else(|| {
                GatewayError::Config(format!("model `{}` needs a replay_path", cfg.name))
            })?;
            let remote = RemoteCompleter::new(Box::new(ReplayBackend::load(path)?), remote_model, ResponseCache::in_memory());
            h.remote = Some(Arc::new(remote));
            h.notes.push(format!("remote responses replayed from {}", path.display()));
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_has_every_capability() {
        let h = load_model(&ModelConfig::mock(), &Lexicon::builtin()).unwrap();
        assert!(h.mlm().is_ok() && h.embedder().is_ok() && h.nli().is_ok() && h.remote().is_ok());
    }

    #[test]
    fn toml_config_parses() {
        let cfg: ModelConfig = toml::from_str(
            "name = \"bert-base-uncased\"\nkind = \"sidecar\"\nendpoint = \"http://127.0.0.1:8765\"\nlayer = \"mean_last_four\"\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ModelKind::Sidecar);
        assert_eq!(cfg.layer, LayerSelection::MeanLastFour);
        assert_eq!(cfg.batch_size, 32);
        assert!(toml::from_str::<ModelConfig>("name = \"x\"\nkind = \"mock\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn missing_endpoint_is_reported() {
        let cfg = ModelConfig {
            kind: ModelKind::Sidecar,
            ..ModelConfig::mock()
        };
        let e = load_model(&cfg, &Lexicon::builtin()).unwrap_err().to_string();
        assert!(e.contains("endpoint"), "{e}");
    }
}
