use serde::{Deserialize, Serialize};

use super::{best_action, second_best, ActionPolicy, PolicyInput};
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::instruction::{Instruction, PhraseSelection};
use crate::similarity::SimilarityProvider;
use crate::tensor::Tensor;
use crate::world::Observation;

pub const DELTA0_INIT: f64 = 0.30;
pub const DELTA0_MIN: f64 = 0.05;
pub const DELTA0_MAX: f64 = 1.0;
const DECAY_EVERY: u32 = 10;
const DECAY: f64 = 0.01;
const FAIL_STEP: f64 = 0.05;
const PASS_STEP: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Learnable,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EavConfig {
    /// Phrase-order check.
    pub term1: bool,
    /// Observation similarity check against the expected next phrase.
    pub term2: bool,
    pub threshold: ThresholdMode,
}

impl Default for EavConfig {
    fn default() -> Self {
        EavConfig { term1: true, term2: true, threshold: ThresholdMode::Learnable }
    }
}

impl EavConfig {
    pub fn new(term1: bool, term2: bool, threshold: ThresholdMode) -> Result<Self> {
        let cfg = EavConfig { term1, term2, threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn off() -> Self {
        EavConfig { term1: false, term2: false, threshold: ThresholdMode::Learnable }
    }

    pub fn enabled(&self) -> bool {
        self.term1 || self.term2
    }

    pub fn validate(&self) -> Result<()> {
        if let ThresholdMode::Fixed(v) = self.threshold {
            if !(DELTA0_MIN..=DELTA0_MAX).contains(&v) {
                return Err(Error::config(
                    "eav.threshold.fixed",
                    format!("{v} outside [{DELTA0_MIN}, {DELTA0_MAX}]"),
                ));
            }
        }
        Ok(())
    }

    pub fn initial_delta0(&self) -> f64 {
        match self.threshold {
            ThresholdMode::Learnable => DELTA0_INIT,
            ThresholdMode::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exploration,
    Verification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EavState {
    pub k_star_last: Option<usize>,
    pub delta0: f64,
    pub mode: Mode,
    pub low_action_counter: u32,
    pub hidden: Vec<f64>,
    pub a_prev: Option<Action>,
}

impl EavState {
    pub fn new(cfg: &EavConfig) -> Self {
        EavState {
            k_star_last: None,
            delta0: cfg.initial_delta0(),
            mode: Mode::Exploration,
            low_action_counter: 0,
            hidden: Vec::new(),
            a_prev: None,
        }
    }

    /// Episode boundary inside one scene: the threshold and its counter
    /// carry over, everything else starts fresh.
    pub fn start_episode(&mut self) {
        self.k_star_last = None;
        self.mode = Mode::Exploration;
        self.hidden.clear();
        self.a_prev = None;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdEvent {
    Tick,
    VerificationFailed,
    VerificationPassed,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Learnable threshold dynamics; a fixed threshold ignores every event.
pub fn update_threshold(mode: ThresholdMode, state: &mut EavState, event: ThresholdEvent) {
    if let ThresholdMode::Fixed(_) = mode {
        return;
    }
    let delta = match event {
        ThresholdEvent::Tick => {
            state.low_action_counter += 1;
            if state.low_action_counter < DECAY_EVERY {
                return;
            }
            state.low_action_counter = 0;
            -DECAY
        }
        ThresholdEvent::VerificationFailed => -FAIL_STEP,
        ThresholdEvent::VerificationPassed => PASS_STEP,
    };
    state.delta0 = round6((state.delta0 + delta).clamp(DELTA0_MIN, DELTA0_MAX));
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EavEvent {
    ForcedRunnerUp { action: Action },
    OrderViolation { k_star: usize, k_star_last: usize },
    VerificationFailed { phrase: usize, delta_t: f64, delta0: f64 },
    VerificationPassed { phrase: usize, delta_t: f64, delta0: f64 },
    RollbackUnavailable,
}

pub struct EavInputs<'a> {
    pub obs: &'a Observation,
    pub instr: &'a Instruction,
    pub sel: &'a PhraseSelection,
    pub map_embedding: Option<&'a Tensor>,
    pub instruction_embedding: &'a [f64],
    /// False when the simulator's pose stack is empty.
    pub can_rollback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EavStep {
    pub action: Action,
    pub probs: [f64; 4],
    pub delta_t: Option<f64>,
    pub events: Vec<EavEvent>,
}

enum Verdict {
    Proceed,
    Rollback,
}

/// One decision of the exploration/verification loop. The returned action
/// is assumed to be executed; threshold ticks count it.
pub fn eav_step(
    cfg: &EavConfig,
    state: &mut EavState,
    inputs: &EavInputs,
    policy: &mut dyn ActionPolicy,
    provider: &dyn SimilarityProvider,
) -> Result<EavStep> {
    if inputs.sel.raw_similarities.len() != inputs.instr.len() {
        return Err(Error::contract("phrase selection does not match the instruction"));
    }
    let out = policy.predict(&PolicyInput {
        map_embedding: inputs.map_embedding,
        instruction_embedding: inputs.instruction_embedding,
        hidden: &state.hidden,
        prev_action: state.a_prev,
        pose: inputs.obs.pose,
    })?;
    state.hidden = out.hidden;
    let probs = out.probs;
    let mut events = Vec::new();
    let mut delta_t = None;

    let action = if state.mode == Mode::Verification {
        state.mode = Mode::Exploration;
        let a = second_best(&probs);
        events.push(EavEvent::ForcedRunnerUp { action: a });
        a
    } else {
        let verdict = verify(cfg, state, inputs, provider, &mut events, &mut delta_t)?;
        match verdict {
            Verdict::Rollback if inputs.can_rollback => {
                state.mode = Mode::Verification;
                Action::TurnBackLastStep
            }
            Verdict::Rollback => {
                events.push(EavEvent::RollbackUnavailable);
                best_action(&probs)
            }
            Verdict::Proceed => best_action(&probs),
        }
    };

    if action == Action::TurnBackLastStep && delta_t.is_some() {
        update_threshold(cfg.threshold, state, ThresholdEvent::VerificationFailed);
    }
    if events.iter().any(|e| matches!(e, EavEvent::VerificationPassed { .. })) {
        update_threshold(cfg.threshold, state, ThresholdEvent::VerificationPassed);
    }
    update_threshold(cfg.threshold, state, ThresholdEvent::Tick);
    state.a_prev = Some(action);
    Ok(EavStep { action, probs, delta_t, events })
}

fn verify(
    cfg: &EavConfig,
    state: &mut EavState,
    inputs: &EavInputs,
    provider: &dyn SimilarityProvider,
    events: &mut Vec<EavEvent>,
    delta_t: &mut Option<f64>,
) -> Result<Verdict> {
    let sel = inputs.sel;
    if !cfg.enabled() || !sel.alpha {
        return Ok(Verdict::Proceed);
    }
    let k = sel.k_star;
    let Some(last) = state.k_star_last else {
        state.k_star_last = Some(k);
        return Ok(Verdict::Proceed);
    };
    let in_order = k == last || k == last + 1;
    if cfg.term1 && in_order {
        state.k_star_last = Some(k);
        return Ok(Verdict::Proceed);
    }
    // Term-II alone still needs a phrase switch to look at
    if !cfg.term1 && k == last {
        return Ok(Verdict::Proceed);
    }
    if cfg.term1 {
        events.push(EavEvent::OrderViolation { k_star: k, k_star_last: last });
    }
    if !cfg.term2 {
        return Ok(Verdict::Rollback);
    }
    let next = last + 1;
    if next >= inputs.instr.len() {
        return Ok(Verdict::Proceed);
    }
    let d = provider.score(inputs.instr.phrase(next), inputs.obs)?;
    *delta_t = Some(d);
    if d < state.delta0 {
        events.push(EavEvent::VerificationFailed { phrase: next, delta_t: d, delta0: state.delta0 });
        Ok(Verdict::Rollback)
    } else {
        events.push(EavEvent::VerificationPassed { phrase: next, delta_t: d, delta0: state.delta0 });
        state.k_star_last = Some(k);
        Ok(Verdict::Proceed)
    }
}
