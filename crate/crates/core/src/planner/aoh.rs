use rand_chacha::ChaCha8Rng;

use super::{ActionPolicy, PolicyInput, PolicyOutput};
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::tensor::{matvec, seeded_rng, sigmoid, softmax, Tensor, TensorManifest};

/// Gate rows are stacked reset, update, candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct GruWeights {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
}

impl GruWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruWeights {
            w_ih: Tensor::zeros(&[3 * hidden, input]),
            w_hh: Tensor::zeros(&[3 * hidden, hidden]),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
        }
    }

    fn seeded(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (1.0 / hidden as f64).sqrt();
        GruWeights {
            w_ih: Tensor::random(&[3 * hidden, input], std, rng),
            w_hh: Tensor::random(&[3 * hidden, hidden], std, rng),
            b_ih: Tensor::random(&[3 * hidden], std / 4.0, rng),
            b_hh: Tensor::random(&[3 * hidden], std / 4.0, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub fn input(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn validate(&self, name: &str) -> Result<()> {
        let h = self.w_hh.shape().get(1).copied().unwrap_or(0);
        let i = self.w_ih.shape().get(1).copied().unwrap_or(0);
        self.w_ih.expect_shape(&format!("{name}.w_ih"), &[3 * h, i])?;
        self.w_hh.expect_shape(&format!("{name}.w_hh"), &[3 * h, h])?;
        self.b_ih.expect_shape(&format!("{name}.b_ih"), &[3 * h])?;
        self.b_hh.expect_shape(&format!("{name}.b_hh"), &[3 * h])
    }
}

/// One GRU step:
/// `r = σ(W_ir x + b_ir + W_hr h + b_hr)`,
/// `z = σ(W_iz x + b_iz + W_hz h + b_hz)`,
/// `n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))`,
/// `h' = (1 − z) ⊙ n + z ⊙ h`.
pub fn gru_cell(w: &GruWeights, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let n = w.hidden();
    if x.len() != w.input() || h.len() != n {
        return Err(Error::contract(format!(
            "gru expects input {} / hidden {}, got {} / {}",
            w.input(),
            n,
            x.len(),
            h.len()
        )));
    }
    let gi = matvec(&w.w_ih, Some(&w.b_ih), x);
    let gh = matvec(&w.w_hh, Some(&w.b_hh), h);
    Ok((0..n)
        .map(|j| {
            let r = sigmoid(gi[j] + gh[j]);
            let z = sigmoid(gi[n + j] + gh[n + j]);
            let c = (gi[2 * n + j] + r * gh[2 * n + j]).tanh();
            (1.0 - z) * c + z * h[j]
        })
        .collect())
}

/// Action head: previous action embedding and instruction embedding feed a
/// first GRU; its state attends over the 16 map-embedding positions; a
/// second GRU consumes the attended context with the first state; a linear
/// layer gives logits over the four policy actions. Hidden state is the two
/// GRU states concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralAoh {
    /// `[embed, 6]`: five actions plus episode start.
    pub action_embed: Tensor,
    pub gru1: GruWeights,
    /// Query projection `[attn, hidden]`, key/value projections `[attn, 128]`.
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub gru2: GruWeights,
    pub w_out: Tensor,
    pub b_out: Tensor,
}

const MAP_CHANNELS: usize = 128;
const MAP_POSITIONS: usize = 16;
const ACTION_SLOTS: usize = 6;

impl NeuralAoh {
    pub fn zeros(instruction_dim: usize, embed: usize, hidden: usize, attn: usize) -> Self {
        NeuralAoh {
            action_embed: Tensor::zeros(&[embed, ACTION_SLOTS]),
            gru1: GruWeights::zeros(instruction_dim + embed, hidden),
            w_q: Tensor::zeros(&[attn, hidden]),
            w_k: Tensor::zeros(&[attn, MAP_CHANNELS]),
            w_v: Tensor::zeros(&[attn, MAP_CHANNELS]),
            gru2: GruWeights::zeros(attn + hidden, hidden),
            w_out: Tensor::zeros(&[4, hidden]),
            b_out: Tensor::zeros(&[4]),
        }
    }

    pub fn seeded(seed: u64, instruction_dim: usize, embed: usize, hidden: usize, attn: usize) -> Self {
        let mut rng = seeded_rng(seed);
        let r = &mut rng;
        NeuralAoh {
            action_embed: Tensor::random(&[embed, ACTION_SLOTS], 1.0, r),
            gru1: GruWeights::seeded(instruction_dim + embed, hidden, r),
            w_q: Tensor::random(&[attn, hidden], (1.0 / hidden as f64).sqrt(), r),
            w_k: Tensor::random(&[attn, MAP_CHANNELS], (1.0 / MAP_CHANNELS as f64).sqrt(), r),
            w_v: Tensor::random(&[attn, MAP_CHANNELS], (1.0 / MAP_CHANNELS as f64).sqrt(), r),
            gru2: GruWeights::seeded(attn + hidden, hidden, r),
            w_out: Tensor::random(&[4, hidden], (1.0 / hidden as f64).sqrt(), r),
            b_out: Tensor::zeros(&[4]),
        }
    }

    /// Default sizes: 128-d instructions, 16-d action embedding, 64-d
    /// states, 64-d attention.
    pub fn seeded_default(seed: u64) -> Self {
        Self::seeded(seed, 128, 16, 64, 64)
    }

    fn hidden(&self) -> usize {
        self.gru1.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        self.gru1.validate("aoh.gru1")?;
        self.gru2.validate("aoh.gru2")?;
        let (e, h, a) = (self.action_embed.shape()[0], self.hidden(), self.w_q.shape()[0]);
        self.action_embed.expect_shape("aoh.action_embed", &[e, ACTION_SLOTS])?;
        self.w_q.expect_shape("aoh.w_q", &[a, h])?;
        self.w_k.expect_shape("aoh.w_k", &[a, MAP_CHANNELS])?;
        self.w_v.expect_shape("aoh.w_v", &[a, MAP_CHANNELS])?;
        if self.gru2.hidden() != h || self.gru2.input() != a + h {
            return Err(Error::contract("aoh.gru2 must take [context, state1] and share the hidden size"));
        }
        if self.gru1.input() <= e {
            return Err(Error::contract("aoh.gru1 input must hold the instruction and action embedding"));
        }
        self.w_out.expect_shape("aoh.w_out", &[4, h])?;
        self.b_out.expect_shape("aoh.b_out", &[4])
    }

    pub fn to_manifest(&self) -> TensorManifest {
        let mut m = TensorManifest::new();
        m.insert("aoh.action_embed", self.action_embed.clone());
        for (name, g) in [("aoh.gru1", &self.gru1), ("aoh.gru2", &self.gru2)] {
            m.insert(format!("{name}.w_ih"), g.w_ih.clone());
            m.insert(format!("{name}.w_hh"), g.w_hh.clone());
            m.insert(format!("{name}.b_ih"), g.b_ih.clone());
            m.insert(format!("{name}.b_hh"), g.b_hh.clone());
        }
        m.insert("aoh.w_q", self.w_q.clone());
        m.insert("aoh.w_k", self.w_k.clone());
        m.insert("aoh.w_v", self.w_v.clone());
        m.insert("aoh.w_out", self.w_out.clone());
        m.insert("aoh.b_out", self.b_out.clone());
        m
    }

    pub fn from_manifest(m: &TensorManifest) -> Result<Self> {
        let gru = |name: &str| -> Result<GruWeights> {
            Ok(GruWeights {
                w_ih: m.get(&format!("{name}.w_ih"))?.clone(),
                w_hh: m.get(&format!("{name}.w_hh"))?.clone(),
                b_ih: m.get(&format!("{name}.b_ih"))?.clone(),
                b_hh: m.get(&format!("{name}.b_hh"))?.clone(),
            })
        };
        let aoh = NeuralAoh {
            action_embed: m.get("aoh.action_embed")?.clone(),
            gru1: gru("aoh.gru1")?,
            w_q: m.get("aoh.w_q")?.clone(),
            w_k: m.get("aoh.w_k")?.clone(),
            w_v: m.get("aoh.w_v")?.clone(),
            gru2: gru("aoh.gru2")?,
            w_out: m.get("aoh.w_out")?.clone(),
            b_out: m.get("aoh.b_out")?.clone(),
        };
        aoh.validate()?;
        Ok(aoh)
    }

    pub fn forward(
        &self,
        map: &Tensor,
        instruction: &[f64],
        hidden: &[f64],
        prev: Option<Action>,
    ) -> Result<PolicyOutput> {
        map.expect_shape("map embedding", &[MAP_CHANNELS, 4, 4])?;
        let h = self.hidden();
        let hidden_in: Vec<f64> = if hidden.is_empty() { vec![0.0; 2 * h] } else { hidden.to_vec() };
        if hidden_in.len() != 2 * h {
            return Err(Error::contract(format!("aoh hidden state must have {} values", 2 * h)));
        }
        let (h1_prev, h2_prev) = hidden_in.split_at(h);

        let mut onehot = [0.0; ACTION_SLOTS];
        onehot[prev.map_or(ACTION_SLOTS - 1, Action::index)] = 1.0;
        let a_embed = matvec(&self.action_embed, None, &onehot);
        let x1: Vec<f64> = instruction.iter().copied().chain(a_embed).collect();
        let h1 = gru_cell(&self.gru1, &x1, h1_prev)?;

        let q = matvec(&self.w_q, None, &h1);
        let scale = (q.len() as f64).sqrt();
        let positions: Vec<Vec<f64>> = (0..MAP_POSITIONS)
            .map(|p| (0..MAP_CHANNELS).map(|c| map.data()[c * MAP_POSITIONS + p]).collect())
            .collect();
        let scores: Vec<f64> = positions
            .iter()
            .map(|m| matvec(&self.w_k, None, m).iter().zip(&q).map(|(k, q)| k * q).sum::<f64>() / scale)
            .collect();
        let weights = softmax(&scores);
        let mut context = vec![0.0; q.len()];
        for (m, w) in positions.iter().zip(&weights) {
            for (c, v) in context.iter_mut().zip(matvec(&self.w_v, None, m)) {
                *c += w * v;
            }
        }

        let x2: Vec<f64> = context.into_iter().chain(h1.iter().copied()).collect();
        let h2 = gru_cell(&self.gru2, &x2, h2_prev)?;
        let p = softmax(&matvec(&self.w_out, Some(&self.b_out), &h2));
        Ok(PolicyOutput { probs: [p[0], p[1], p[2], p[3]], hidden: h1.into_iter().chain(h2).collect() })
    }
}

impl ActionPolicy for NeuralAoh {
    fn predict(&mut self, input: &PolicyInput) -> Result<PolicyOutput> {
        let map = input.map_embedding.ok_or_else(|| Error::contract("neural action head needs a map embedding"))?;
        self.forward(map, input.instruction_embedding, input.hidden, input.prev_action)
    }

    fn hidden_size(&self) -> usize {
        2 * self.hidden()
    }
}
