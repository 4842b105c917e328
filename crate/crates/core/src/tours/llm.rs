use std::path::Path as FsPath;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::Provenance;
use crate::error::{Error, Result};
use crate::instruction::{segment, SegmentationStyle};
use crate::similarity::{HttpTransport, JsonTransport};

/// Environment variable holding the chat-completion service URL.
pub const LLM_ENDPOINT_ENV: &str = "SEQNAV_LLM_URL";

pub const CONCAT_TEMPLATE: &str = "Please help logically connect two navigation instructions into one, ensuring semantic coherence, with the end of the first serving as the start of the second. <INS1> <INS2>";

pub const ENRICH_TEMPLATE: &str = "<IMAGES> Please look closely at these multiple images of the first view corresponding to a navigation trajectory, and help me enrich the discriminating details of instruction without changing its logic. The original instruction is: <INS>";

pub fn concat_prompt(ins1: &str, ins2: &str) -> String {
    CONCAT_TEMPLATE.replacen("<INS1>", ins1, 1).replacen("<INS2>", ins2, 1)
}

pub fn enrichment_prompt(phrase: &str, frames: &[String]) -> String {
    let images: Vec<String> = frames.iter().map(|f| format!("<image:{f}>")).collect();
    ENRICH_TEMPLATE.replacen("<IMAGES>", &images.join(" "), 1).replacen("<INS>", phrase, 1)
}

pub fn request_digest(request: &Value) -> String {
    hex::encode(Sha256::digest(request.to_string().as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmLogEntry {
    pub digest: String,
    pub ok: bool,
    pub detail: String,
}

/// Chat-completion client. Requests are
/// `{"model", "messages": [{"role": "user", "content"}]}`; the reply text
/// is `choices[0].message.content`.
pub struct LlmClient {
    transport: Box<dyn JsonTransport>,
    model: String,
    retries: usize,
    log: Mutex<Vec<LlmLogEntry>>,
}

impl LlmClient {
    pub fn new(transport: Box<dyn JsonTransport>, model: impl Into<String>, retries: usize) -> Self {
        LlmClient { transport, model: model.into(), retries, log: Mutex::new(Vec::new()) }
    }

    pub fn from_env(model: impl Into<String>, timeout: Duration, retries: usize) -> Result<Self> {
        let url =
            std::env::var(LLM_ENDPOINT_ENV).map_err(|_| Error::Provider(format!("{LLM_ENDPOINT_ENV} is not set")))?;
        Ok(Self::new(Box::new(HttpTransport::new(url, timeout)?), model, retries))
    }

    pub fn log(&self) -> Vec<LlmLogEntry> {
        self.log.lock().clone()
    }

    pub fn request(&self, prompt: &str) -> Value {
        json!({ "model": self.model, "messages": [{ "role": "user", "content": prompt }] })
    }

    fn complete(&self, prompt: &str, check: impl Fn(&str) -> Result<()>) -> Result<String> {
        let req = self.request(prompt);
        let digest = request_digest(&req);
        let mut last = Error::Provider("no attempt made".into());
        for _ in 0..=self.retries {
            let got = self.transport.post(&req).and_then(|v| {
                let text = v
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Provider("response has no choices[0].message.content".into()))?
                    .trim()
                    .to_string();
                check(&text)?;
                Ok(text)
            });
            let entry = match &got {
                Ok(t) => LlmLogEntry { digest: digest.clone(), ok: true, detail: t.clone() },
                Err(e) => LlmLogEntry { digest: digest.clone(), ok: false, detail: e.to_string() },
            };
            self.log.lock().push(entry);
            match got {
                Ok(t) => return Ok(t),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// Joins two instructions; the reply must be longer than either input.
    pub fn concat(&self, ins1: &str, ins2: &str) -> Result<String> {
        let min = ins1.chars().count().max(ins2.chars().count());
        self.complete(&concat_prompt(ins1, ins2), |t| {
            if t.chars().count() <= min {
                return Err(Error::Provider(format!("joined instruction has {} chars, need > {min}", t.chars().count())));
            }
            Ok(())
        })
    }

    /// Adds visual detail to a phrase without dropping sentences.
    pub fn enrich(&self, phrase: &str, frames: &[String]) -> Result<String> {
        if frames.is_empty() {
            return Err(Error::contract("enrichment needs at least one frame"));
        }
        let sentences = |s: &str| segment(s, SegmentationStyle::TypeIVPeriods).map(|i| i.len()).unwrap_or(0);
        let need = sentences(phrase);
        self.complete(&enrichment_prompt(phrase, frames), |t| {
            if sentences(t) < need {
                return Err(Error::Provider(format!("enriched text has {} sentences, need {need}", sentences(t))));
            }
            Ok(())
        })
    }
}

/// Enriches with the client when there is one, keeping the phrase on
/// failure or when offline.
pub fn enrich_or_keep(client: Option<&LlmClient>, phrase: &str, frames: &[String]) -> Result<(String, Provenance)> {
    if frames.is_empty() {
        return Err(Error::contract("enrichment needs at least one frame"));
    }
    match client.map(|c| c.enrich(phrase, frames)) {
        Some(Ok(t)) => Ok((t, Provenance::Llm)),
        _ => Ok((phrase.to_string(), Provenance::Offline)),
    }
}

pub const CASSETTE_FORMAT: &str = "seqnav-cassette/1";

/// Recorded responses keyed by request digest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub format: String,
    pub entries: std::collections::BTreeMap<String, Value>,
}

impl Cassette {
    pub fn new() -> Self {
        Cassette { format: CASSETTE_FORMAT.into(), entries: Default::default() }
    }

    pub fn insert(&mut self, request: &Value, response: Value) {
        self.entries.insert(request_digest(request), response);
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Cassette = serde_json::from_str(&text)?;
        if c.format != CASSETTE_FORMAT {
            return Err(Error::Format { found: c.format, expected: CASSETTE_FORMAT.into() });
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Replays a cassette; with an inner transport, misses are forwarded and
/// recorded.
pub struct CassetteTransport {
    cassette: Mutex<Cassette>,
    inner: Option<Box<dyn JsonTransport>>,
}

impl CassetteTransport {
    pub fn replay(cassette: Cassette) -> Self {
        CassetteTransport { cassette: Mutex::new(cassette), inner: None }
    }

    pub fn record(cassette: Cassette, inner: Box<dyn JsonTransport>) -> Self {
        CassetteTransport { cassette: Mutex::new(cassette), inner: Some(inner) }
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().clone()
    }
}

impl JsonTransport for CassetteTransport {
    fn post(&self, body: &Value) -> Result<Value> {
        let key = request_digest(body);
        if let Some(v) = self.cassette.lock().entries.get(&key) {
            return Ok(v.clone());
        }
        let inner = self.inner.as_ref().ok_or_else(|| Error::Provider(format!("no recorded response for {key}")))?;
        let v = inner.post(body)?;
        self.cassette.lock().entries.insert(key, v.clone());
        Ok(v)
    }
}
