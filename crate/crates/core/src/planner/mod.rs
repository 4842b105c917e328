//! Low-level action planner: policies and the exploration/verification
//! wrapper with its adaptive threshold.

mod aoh;
mod eav;
mod scripted;

use crate::error::Result;
use crate::geometry::{Action, Pose};
use crate::tensor::Tensor;

pub use aoh::{gru_cell, GruWeights, NeuralAoh};
pub use eav::{
    eav_step, update_threshold, EavConfig, EavEvent, EavInputs, EavState, EavStep, Mode, ThresholdEvent,
    ThresholdMode, DELTA0_INIT, DELTA0_MAX, DELTA0_MIN,
};
pub use scripted::ScriptedOraclePolicy;

pub struct PolicyInput<'a> {
    /// 128x4x4 map embedding, absent when the policy does not use it.
    pub map_embedding: Option<&'a Tensor>,
    pub instruction_embedding: &'a [f64],
    pub hidden: &'a [f64],
    /// `None` at the first step of an episode.
    pub prev_action: Option<Action>,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    /// Over FORWARD, TURN_LEFT, TURN_RIGHT, STOP.
    pub probs: [f64; 4],
    pub hidden: Vec<f64>,
}

pub trait ActionPolicy {
    fn predict(&mut self, input: &PolicyInput) -> Result<PolicyOutput>;

    /// Whether the runner must compute map embeddings for this policy.
    fn uses_map_embedding(&self) -> bool {
        true
    }

    fn hidden_size(&self) -> usize;
}

fn ranked(probs: &[f64; 4]) -> [usize; 4] {
    let mut idx = [0, 1, 2, 3];
    // stable sort keeps lower indices first on ties
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    idx
}

pub fn best_action(probs: &[f64; 4]) -> Action {
    Action::POLICY_ACTIONS[ranked(probs)[0]]
}

/// Runner-up action; ties go to the lower action index.
pub fn second_best(probs: &[f64; 4]) -> Action {
    Action::POLICY_ACTIONS[ranked(probs)[1]]
}
