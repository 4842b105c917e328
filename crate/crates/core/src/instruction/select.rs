use serde::{Deserialize, Serialize};

use super::Instruction;
use crate::error::{Error, Result};
use crate::similarity::SimilarityProvider;
use crate::tensor::softmax;
use crate::world::Observation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseSelection {
    pub raw_similarities: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Entropy of `probabilities` in bits over `log2(max(n, 2))`.
    pub entropy: f64,
    /// True when the gate trusts a single phrase.
    pub alpha: bool,
    /// Most probable phrase, lowest index on ties.
    pub k_star: usize,
}

impl PhraseSelection {
    /// The phrase in focus, or `None` when the global instruction is used.
    pub fn selected(&self) -> Option<usize> {
        self.alpha.then_some(self.k_star)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn normalized_entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum();
    (h / (p.len().max(2) as f64).log2()).clamp(0.0, 1.0)
}

pub fn selection_from_similarities(theta: Vec<f64>, phi_lambda: f64, logit_scale: f64) -> Result<PhraseSelection> {
    if theta.is_empty() {
        return Err(Error::contract("phrase selection needs at least one phrase"));
    }
    if !(phi_lambda > 0.0 && phi_lambda < 1.0) {
        return Err(Error::contract(format!("entropy threshold {phi_lambda} outside (0, 1)")));
    }
    if !(logit_scale > 0.0 && logit_scale.is_finite()) {
        return Err(Error::contract(format!("logit scale {logit_scale} must be positive")));
    }
    let logits: Vec<f64> = theta.iter().map(|t| logit_scale * t).collect();
    let probabilities = softmax(&logits);
    let entropy = normalized_entropy(&probabilities);
    let k_star = argmax(&probabilities);
    Ok(PhraseSelection { raw_similarities: theta, probabilities, entropy, alpha: entropy < phi_lambda, k_star })
}

/// Scores every phrase against the observation and applies the entropy gate.
pub fn select_phrase(
    instr: &Instruction,
    obs: &Observation,
    provider: &dyn SimilarityProvider,
    phi_lambda: f64,
    logit_scale: f64,
) -> Result<PhraseSelection> {
    let theta = instr.phrases.iter().map(|p| provider.score(&p.text, obs)).collect::<Result<Vec<_>>>()?;
    selection_from_similarities(theta, phi_lambda, logit_scale)
}
