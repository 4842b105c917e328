use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{cosine, SimilarityProvider};
use crate::error::{Error, Result};
use crate::world::Observation;

/// Environment variable holding the embedding service URL.
pub const EMBED_ENDPOINT_ENV: &str = "SEQNAV_EMBED_URL";

/// One JSON request/response exchange with a remote service.
pub trait JsonTransport: Send + Sync {
    fn post(&self, body: &Value) -> Result<Value>;
}

pub struct HttpTransport {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Provider(format!("http client: {e}")))?;
        Ok(HttpTransport { endpoint: endpoint.into(), client })
    }
}

impl JsonTransport for HttpTransport {
    fn post(&self, body: &Value) -> Result<Value> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(body)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?;
        resp.json().map_err(|e| Error::Provider(format!("{}: malformed body: {e}", self.endpoint)))
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Cosine similarity of remotely computed embeddings. Texts are sent as
/// `{"texts": [..]}`, observations as their sorted landmark labels
/// `{"tokens": [..]}`; every vector is re-normalized locally and cached.
pub struct RemoteEmbeddingClient {
    transport: Box<dyn JsonTransport>,
    cache: Mutex<HashMap<String, Arc<Vec<f64>>>>,
    requests: AtomicUsize,
}

impl RemoteEmbeddingClient {
    pub fn new(transport: Box<dyn JsonTransport>) -> Self {
        RemoteEmbeddingClient { transport, cache: Mutex::new(HashMap::new()), requests: AtomicUsize::new(0) }
    }

    pub fn http(endpoint: impl Into<String>, timeout: Duration) -> Result<Self> {
        Ok(Self::new(Box::new(HttpTransport::new(endpoint, timeout)?)))
    }

    /// Client for the endpoint named by [`EMBED_ENDPOINT_ENV`].
    pub fn from_env(timeout: Duration) -> Result<Self> {
        let url = std::env::var(EMBED_ENDPOINT_ENV)
            .map_err(|_| Error::Provider(format!("{EMBED_ENDPOINT_ENV} is not set")))?;
        Self::http(url, timeout)
    }

    /// Number of requests that reached the transport.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn fetch(&self, key: String, body: Value) -> Result<Arc<Vec<f64>>> {
        if let Some(v) = self.cache.lock().get(&key) {
            return Ok(v.clone());
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let raw = self.transport.post(&body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_value(raw).map_err(|e| Error::Provider(format!("malformed embedding response: {e}")))?;
        let [v]: [Vec<f64>; 1] = parsed
            .embeddings
            .try_into()
            .map_err(|e: Vec<_>| Error::Provider(format!("expected 1 embedding, got {}", e.len())))?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Provider("embedding has zero or non-finite norm".into()));
        }
        let unit = Arc::new(v.into_iter().map(|x| x / norm).collect::<Vec<_>>());
        Ok(self.cache.lock().entry(key).or_insert(unit).clone())
    }

    pub fn embed_text(&self, text: &str) -> Result<Arc<Vec<f64>>> {
        self.fetch(format!("text:{text}"), json!({ "texts": [text] }))
    }

    pub fn embed_observation(&self, obs: &Observation) -> Result<Arc<Vec<f64>>> {
        let mut labels: Vec<&str> = obs.visible_landmarks.iter().map(|l| l.label.as_str()).collect();
        labels.sort_unstable();
        self.fetch(format!("obs:{}", obs.digest()), json!({ "tokens": labels }))
    }
}

impl SimilarityProvider for RemoteEmbeddingClient {
    fn score(&self, text: &str, obs: &Observation) -> Result<f64> {
        if text.trim().is_empty() {
            return Err(Error::contract("similarity of an empty phrase"));
        }
        let t = self.embed_text(text)?;
        let o = self.embed_observation(obs)?;
        cosine(&t, &o).map_err(|e| Error::Provider(e.to_string()))
    }
}
