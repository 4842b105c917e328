use sha2::{Digest, Sha256};

use super::{Instruction, PhraseSelection};
use crate::similarity::tokenize;

pub trait InstructionEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<f64>;
}

/// Signed feature hashing of lowercase tokens and token bigrams, L2
/// normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct HashedBagEncoder {
    dim: usize,
}

impl Default for HashedBagEncoder {
    fn default() -> Self {
        HashedBagEncoder { dim: 128 }
    }
}

impl HashedBagEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        HashedBagEncoder { dim }
    }

    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let h = Sha256::digest(feature.as_bytes());
        let idx = u64::from_le_bytes(h[..8].try_into().unwrap()) % self.dim as u64;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[idx as usize] += sign * weight;
    }
}

impl InstructionEncoder for HashedBagEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let tokens = tokenize(text);
        for t in &tokens {
            self.add(&mut v, t, 1.0);
        }
        for w in tokens.windows(2) {
            self.add(&mut v, &format!("{} {}", w[0], w[1]), 0.5);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
            return v;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

/// Phrase embedding when the gate is open, whole-instruction embedding
/// otherwise.
pub fn encode_instruction(sel: &PhraseSelection, instr: &Instruction, encoder: &dyn InstructionEncoder) -> Vec<f64> {
    match sel.selected() {
        Some(k) => encoder.encode(instr.phrase(k)),
        None => encoder.encode(&instr.raw),
    }
}
