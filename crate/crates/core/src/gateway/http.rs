//! Client for a local inference sidecar speaking JSON over HTTP.
//!
//! The sidecar (see `scripts/sidecar.py`) wraps one pretrained checkpoint and serves:
//!
//! | endpoint | request | response |
//! |---|---|---|
//! | `POST /mask_logprobs` | `{text}` | `{tokens, logprobs}` |
//! | `POST /tokenize` | `{word}` | `{pieces}` |
//! | `POST /incremental_logprobs` | `{text, pieces}` | `{logprobs}` |
//! | `POST /embed` | `{text, start, end, layer, pooling}` | `{values, layer}` |
//! | `POST /nli` | `{premise, hypothesis}` | `{probs}` (entailment, neutral, contradiction) |
//! | `POST /sentence_logprob` | `{text}` | `{logprob}` |
//! | `GET /info` | | `{model, mask_token, hidden_size}` |

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    CausalLanguageModel, ContextualEmbedder, EmbeddingVector, GatewayError, LayerSelection,
    MaskedLanguageModel, NliClassifier, NliVerdict, Pooling,
};

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SidecarInfo {
    pub model: String,
    pub mask_token: String,
    #[serde(default)]
    pub hidden_size: usize,
}

pub struct SidecarClient {
    base: String,
    client: reqwest::blocking::Client,
    info: SidecarInfo,
    layer: LayerSelection,
    pooling: Pooling,
}

#[derive(Deserialize)]
struct MaskResponse {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct PiecesResponse {
    pieces: Vec<String>,
}

#[derive(Deserialize)]
struct LogprobsResponse {
    logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    values: Vec<f64>,
    layer: i32,
}

#[derive(Deserialize)]
struct NliResponse {
    probs: [f64; 3],
}

#[derive(Deserialize)]
struct SentenceResponse {
    logprob: f64,
}

impl SidecarClient {
    /// Connects and reads `/info`.
    pub fn connect(
        base: &str,
        timeout: Duration,
        layer: LayerSelection,
        pooling: Pooling,
    ) -> Result<SidecarClient, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let base = base.trim_end_matches('/').to_string();
        let info: SidecarInfo = client
            .get(format!("{base}/info"))
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| GatewayError::Transport(format!("{base}/info: {e}")))?;
        Ok(SidecarClient {
            base,
            client,
            info,
            layer,
            pooling,
        })
    }

    fn post<T: DeserializeOwned>(&self, endpoint: &str, body: serde_json::Value) -> Result<T, GatewayError> {
        let url = format!("{}/{endpoint}", self.base);
        let resp = self
            .client
            .post(&url)
            .json(&body)
            .send()
            .map_err(|e| GatewayError::Transport(format!("{url}: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(GatewayError::Model(format!("{url} returned {status}: {text}")));
        }
        resp.json()
            .map_err(|e| GatewayError::Model(format!("{url}: malformed response: {e}")))
    }
}

impl MaskedLanguageModel for SidecarClient {
    fn model_id(&self) -> &str {
        &self.info.model
    }

    fn mask_token(&self) -> &str {
        &self.info.mask_token
    }

    fn vocab_log_probs(&self, text: &str) -> Result<Vec<(String, f64)>, GatewayError> {
        let r: MaskResponse = self.post("mask_logprobs", json!({ "text": text }))?;
        if r.tokens.len() != r.logprobs.len() {
            return Err(GatewayError::Model("tokens and logprobs differ in length".into()));
        }
        Ok(r.tokens.into_iter().zip(r.logprobs).collect())
    }

    fn tokenize_word(&self, word: &str) -> Result<Vec<String>, GatewayError> {
        let r: PiecesResponse = self.post("tokenize", json!({ "word": word }))?;
        Ok(r.pieces)
    }

    fn incremental_log_probs(&self, text: &str, pieces: &[String]) -> Result<Vec<f64>, GatewayError> {
        let r: LogprobsResponse =
            self.post("incremental_logprobs", json!({ "text": text, "pieces": pieces }))?;
        Ok(r.logprobs)
    }
}

impl ContextualEmbedder for SidecarClient {
    fn model_id(&self) -> &str {
        &self.info.model
    }

    fn hidden_size(&self) -> usize {
        self.info.hidden_size
    }

    fn embed_span(&self, text: &str, start: usize, end: usize) -> Result<EmbeddingVector, GatewayError> {
        let body = json!({
            "text": text,
            "start": start,
            "end": end,
            "layer": self.layer,
            "pooling": self.pooling,
        });
        let r: EmbedResponse = self.post("embed", body).map_err(|e| match e {
            GatewayError::Model(m) if m.contains("align") => GatewayError::Alignment {
                start,
                end,
                message: m,
            },
            other => other,
        })?;
        if self.info.hidden_size > 0 && r.values.len() != self.info.hidden_size {
            return Err(GatewayError::Model(format!(
                "embedding has {} entries, hidden size is {}",
                r.values.len(),
                self.info.hidden_size
            )));
        }
        EmbeddingVector::new(r.values, r.layer, self.pooling)
    }
}

impl NliClassifier for SidecarClient {
    fn model_id(&self) -> &str {
        &self.info.model
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        let r: NliResponse = self.post("nli", json!({ "premise": premise, "hypothesis": hypothesis }))?;
        NliVerdict::new(r.probs)
    }
}

impl CausalLanguageModel for SidecarClient {
    fn model_id(&self) -> &str {
        &self.info.model
    }

    fn sentence_log_prob(&self, text: &str) -> Result<f64, GatewayError> {
        let r: SentenceResponse = self.post("sentence_logprob", json!({ "text": text }))?;
        Ok(r.logprob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_sidecar_is_a_transport_error() {
        let e = SidecarClient::connect(
            "http://127.0.0.1:9",
            Duration::from_millis(200),
            LayerSelection::Last,
            Pooling::MeanSubtokens,
        )
        .err()
        .unwrap();
        assert!(matches!(e, GatewayError::Transport(_)), "{e}");
    }
}
