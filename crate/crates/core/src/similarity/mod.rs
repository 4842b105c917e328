//! Text/observation similarity providers.
//!
//! [`SyntheticOracleProvider`] is a deterministic keyword oracle over the
//! landmarks an observation can see; [`RemoteEmbeddingClient`] fetches
//! embeddings from an HTTP service and compares them by cosine.

mod remote;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::world::{Observation, LANDMARK_VOCABULARY};

pub use remote::{JsonTransport, HttpTransport, RemoteEmbeddingClient, EMBED_ENDPOINT_ENV};

pub trait SimilarityProvider: Send + Sync {
    /// Similarity in `[-1, 1]` between a phrase and what the agent sees.
    fn score(&self, text: &str, obs: &Observation) -> Result<f64>;
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for &P {
    fn score(&self, text: &str, obs: &Observation) -> Result<f64> {
        (**self).score(text, obs)
    }
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for Box<P> {
    fn score(&self, text: &str, obs: &Observation) -> Result<f64> {
        (**self).score(text, obs)
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::contract(format!("cosine of vectors with dims {} and {}", u.len(), v.len())));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracleProvider {
    /// Landmark label and the tokens that refer to it.
    pub keyword_map: Vec<(String, Vec<String>)>,
    pub match_scale: f64,
    pub base_score: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticOracleProvider {
    fn default() -> Self {
        SyntheticOracleProvider {
            keyword_map: LANDMARK_VOCABULARY
                .iter()
                .map(|(l, syn)| (l.to_string(), syn.iter().map(|s| s.to_string()).collect()))
                .collect(),
            match_scale: 0.9,
            base_score: 0.05,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl SyntheticOracleProvider {
    pub fn with_seed(seed: u64) -> Self {
        SyntheticOracleProvider { seed, ..Self::default() }
    }

    pub fn noise_free() -> Self {
        SyntheticOracleProvider { noise_sigma: 0.0, ..Self::default() }
    }

    /// Distinct landmark labels a phrase refers to, in keyword-map order.
    pub fn referenced_labels(&self, text: &str) -> Vec<&str> {
        let tokens = tokenize(text);
        self.keyword_map
            .iter()
            .filter(|(_, syn)| syn.iter().any(|s| tokens.iter().any(|t| t == s)))
            .map(|(l, _)| l.as_str())
            .collect()
    }

    pub fn overlap(&self, text: &str, obs: &Observation) -> f64 {
        let refs = self.referenced_labels(text);
        let hits = refs.iter().filter(|l| obs.sees(l)).count();
        hits as f64 / refs.len().max(1) as f64
    }

    /// Truncated Gaussian noise keyed by seed, text and quantized pose only,
    /// so changing what is visible never changes the noise draw.
    fn noise(&self, text: &str, obs: &Observation) -> f64 {
        if self.noise_sigma == 0.0 {
            return 0.0;
        }
        let qx = (obs.pose.x / 0.25).round() as i64;
        let qy = (obs.pose.y / 0.25).round() as i64;
        let qh = (obs.pose.heading.degrees() / 15.0).round() as i64 % 24;
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(text.as_bytes());
        h.update([0u8]);
        for q in [qx, qy, qh] {
            h.update(q.to_le_bytes());
        }
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(key);
        loop {
            let z: f64 = StandardNormal.sample(&mut rng);
            if z.abs() <= 3.0 {
                return z * self.noise_sigma;
            }
        }
    }
}

impl SimilarityProvider for SyntheticOracleProvider {
    fn score(&self, text: &str, obs: &Observation) -> Result<f64> {
        if text.trim().is_empty() {
            return Err(Error::contract("similarity of an empty phrase"));
        }
        let raw = self.base_score + self.match_scale * self.overlap(text, obs) + self.noise(text, obs);
        Ok(raw.clamp(-1.0, 1.0))
    }
}
