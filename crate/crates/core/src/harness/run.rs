use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{PolicyConfig, ProviderConfig, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{Action, Path};
use crate::instruction::{
    encode_instruction, segment, select_phrase, synthesize_instruction, HashedBagEncoder, Instruction,
    InstructionEncoder, SegmentationStyle,
};
use crate::mapping::{encode_map, MapEncoderWeights, TourMap};
use crate::metrics::{
    episode_metrics, tndtw, Aggregate, EpisodeMetrics, EpisodeResult, MetricsReport, ProgressTracker, SelectionRecord,
};
use crate::planner::{eav_step, ActionPolicy, EavInputs, EavState, NeuralAoh, ScriptedOraclePolicy};
use crate::similarity::{RemoteEmbeddingClient, SimilarityProvider, SyntheticOracleProvider};
use crate::tensor::TensorManifest;
use crate::tours::read_tours;
use crate::world::{generate_scene, generate_tour_episodes, observe, read_scene, step, AgentState, ReferenceEpisode, Scene};

/// splitmix64 over two words.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSpec {
    pub id: String,
    pub reference: ReferenceEpisode,
    pub instruction: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TourSpec {
    pub id: String,
    pub scene: Scene,
    pub episodes: Vec<EpisodeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub tour: String,
    pub episode: String,
    pub metrics: EpisodeMetrics,
    pub result: EpisodeResult,
    pub actions: Vec<Action>,
    /// Threshold after every decision.
    pub delta0_trace: Vec<f64>,
    pub turn_backs: usize,
    pub stopped: bool,
    pub known_cells_start: usize,
    pub known_cells_end: usize,
    /// Map fingerprint at episode start and end.
    pub map_digest_start: String,
    pub map_digest_end: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TourOutcome {
    pub tour: String,
    pub episodes: Vec<EpisodeOutcome>,
    pub tndtw: f64,
}

pub fn map_digest(map: &TourMap) -> String {
    let mut h = Sha256::new();
    for (c, s, m) in map.known_cells() {
        h.update(c.col.to_le_bytes());
        h.update(c.row.to_le_bytes());
        h.update([s as u8]);
        h.update(m.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Sub-task each phrase falls in, by the sentence containing its start.
pub fn phrase_subtasks(raw: &str, instr: &Instruction, n_subtasks: usize) -> Vec<usize> {
    let sentences = segment(raw, SegmentationStyle::TypeIVPeriods).map(|s| s.phrases).unwrap_or_default();
    instr
        .phrases
        .iter()
        .map(|p| {
            let s = sentences.iter().position(|s| p.start < s.end).unwrap_or(sentences.len().saturating_sub(1));
            s.min(n_subtasks - 1)
        })
        .collect()
}

/// Everything an episode needs besides the scene and episode itself.
pub struct Runtime {
    pub cfg: RunConfig,
    pub seed: u64,
    provider: Box<dyn SimilarityProvider>,
    encoder: HashedBagEncoder,
    map_weights: Option<MapEncoderWeights>,
    neural: Option<NeuralAoh>,
}

impl Runtime {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let provider: Box<dyn SimilarityProvider> = match cfg.provider {
            ProviderConfig::Oracle { noise_sigma } => {
                Box::new(SyntheticOracleProvider { noise_sigma, seed, ..SyntheticOracleProvider::default() })
            }
            ProviderConfig::Remote { timeout_secs } => {
                Box::new(RemoteEmbeddingClient::from_env(std::time::Duration::from_secs_f64(timeout_secs))?)
            }
        };
        let (map_weights, neural) = match &cfg.policy {
            PolicyConfig::Scripted { .. } => (None, None),
            PolicyConfig::Neural { weights } => {
                let mw = match &cfg.map_weights {
                    Some(p) => MapEncoderWeights::from_manifest(TensorManifest::load(p)?)?,
                    None => MapEncoderWeights::seeded(mix(seed, 1)),
                };
                let aoh = match weights {
                    Some(p) => NeuralAoh::from_manifest(&TensorManifest::load(p)?)?,
                    None => NeuralAoh::seeded(mix(seed, 2), cfg.encoder_dim, 16, 64, 64),
                };
                (Some(mw), Some(aoh))
            }
        };
        Ok(Runtime {
            cfg: cfg.clone(),
            seed,
            provider,
            encoder: HashedBagEncoder::new(cfg.encoder_dim),
            map_weights,
            neural,
        })
    }

    fn policy<'a>(&self, scene: &'a Scene, ep: &'a ReferenceEpisode, seed: u64) -> Result<Box<dyn ActionPolicy + 'a>> {
        match (&self.cfg.policy, &self.neural) {
            (PolicyConfig::Scripted { error_rate }, _) => {
                Ok(Box::new(ScriptedOraclePolicy::new(scene, ep, *error_rate, seed)?))
            }
            (PolicyConfig::Neural { .. }, Some(aoh)) => Ok(Box::new(aoh.clone())),
            _ => Err(Error::contract("neural policy weights were not loaded")),
        }
    }

    /// Observe, select, encode, map, decide, act; until STOP or the step cap.
    pub fn run_episode(
        &self,
        tour_id: &str,
        scene: &Scene,
        spec: &EpisodeSpec,
        map: &mut TourMap,
        eav: &mut EavState,
        seed: u64,
    ) -> Result<EpisodeOutcome> {
        let cfg = &self.cfg;
        let reference = &spec.reference;
        let instr = segment(&spec.instruction, cfg.segmentation)?;
        let to_subtask = phrase_subtasks(&spec.instruction, &instr, reference.n_subtasks());
        let mut policy = self.policy(scene, reference, seed)?;
        eav.start_episode();

        let known_cells_start = map.known_cell_count();
        let map_digest_start = map_digest(map);
        let mut agent = AgentState::new(reference.start);
        let mut obs = observe(scene, agent.pose);
        let mut path = vec![agent.pose.position()];
        let mut tracker = ProgressTracker::new(&reference.path, &reference.boundaries);
        let mut log = Vec::new();
        let mut actions = Vec::new();
        let mut delta0_trace = Vec::new();
        let mut stopped = false;

        for _ in 0..cfg.step_cap {
            let sel = select_phrase(&instr, &obs, self.provider.as_ref(), cfg.phi_lambda, cfg.logit_scale)?;
            let z_s = encode_instruction(&sel, &instr, &self.encoder as &dyn InstructionEncoder);
            map.integrate_observation(&obs);
            let z_m = match (&self.map_weights, policy.uses_map_embedding()) {
                (Some(w), true) => Some(encode_map(&map.crop_ego(agent.pose), w)?),
                _ => None,
            };
            let inputs = EavInputs {
                obs: &obs,
                instr: &instr,
                sel: &sel,
                map_embedding: z_m.as_ref(),
                instruction_embedding: &z_s,
                can_rollback: !agent.pose_stack.is_empty(),
            };
            let decision = eav_step(&cfg.eav, eav, &inputs, policy.as_mut(), self.provider.as_ref())?;
            let truth = tracker.update(agent.pose.position());
            log.push(SelectionRecord { selected: sel.selected().map(|k| to_subtask[k]), truth });
            actions.push(decision.action);
            delta0_trace.push(eav.delta0);
            if decision.action == Action::Stop {
                stopped = true;
                break;
            }
            let (next, next_obs) = step(scene, &agent, decision.action)?;
            if next.pose.position() != agent.pose.position() {
                path.push(next.pose.position());
            }
            agent = next;
            obs = next_obs;
        }

        let result = EpisodeResult {
            agent_path: Path::new(path)?,
            reference_path: reference.path.clone(),
            boundaries: reference.boundaries.clone(),
            selection_log: log,
        };
        Ok(EpisodeOutcome {
            tour: tour_id.to_string(),
            episode: spec.id.clone(),
            metrics: episode_metrics(&result, &cfg.metrics)?,
            result,
            turn_backs: actions.iter().filter(|&&a| a == Action::TurnBackLastStep).count(),
            actions,
            delta0_trace,
            stopped,
            known_cells_start,
            known_cells_end: map.known_cell_count(),
            map_digest_start,
            map_digest_end: map_digest(map),
        })
    }

    /// One map and one threshold for the whole tour; everything else is
    /// per episode.
    pub fn run_tour(&self, tour: &TourSpec, seed: u64) -> Result<TourOutcome> {
        let mut map = TourMap::new(tour.scene.resolution());
        let mut eav = EavState::new(&self.cfg.eav);
        let episodes = tour
            .episodes
            .iter()
            .enumerate()
            .map(|(i, ep)| self.run_episode(&tour.id, &tour.scene, ep, &mut map, &mut eav, mix(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let results: Vec<EpisodeResult> = episodes.iter().map(|e| e.result.clone()).collect();
        Ok(TourOutcome { tour: tour.id.clone(), tndtw: tndtw(&results, self.cfg.metrics.d_th)?, episodes })
    }
}

const GENERATION_ATTEMPTS: u64 = 32;

/// Seeded synthetic tours: a fresh scene per tour, episodes chained end to
/// start, one synthesized sentence per sub-task.
pub fn generate_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<TourSpec>> {
    let s = &cfg.suite;
    (0..s.tours)
        .into_par_iter()
        .map(|t| {
            let mut last = None;
            for attempt in 0..GENERATION_ATTEMPTS {
                let tseed = mix(mix(seed, t as u64), attempt);
                let made = generate_scene(tseed, &s.scene)
                    .and_then(|scene| Ok((generate_tour_episodes(&scene, tseed, s.episodes_per_tour, s.subtasks)?, scene)));
                match made {
                    Ok((eps, scene)) => {
                        let episodes = eps
                            .into_iter()
                            .enumerate()
                            .map(|(e, reference)| EpisodeSpec {
                                id: format!("t{t:03}-e{e}"),
                                instruction: synthesize_instruction(&reference.descriptors, mix(tseed, e as u64)),
                                reference,
                            })
                            .collect();
                        return Ok(TourSpec { id: format!("t{t:03}"), scene, episodes });
                    }
                    Err(e) => last = Some(e),
                }
            }
            Err(last.unwrap())
        })
        .collect()
}

pub fn load_tour_suite(cfg: &RunConfig) -> Result<Vec<TourSpec>> {
    let (Some(tf), Some(sf)) = (&cfg.tour_file, &cfg.scene_file) else {
        return Err(Error::config("tour_file", "tour_file and scene_file are required"));
    };
    let scene = read_scene(sf)?;
    read_tours(tf)?
        .into_iter()
        .map(|t| {
            let episodes = t
                .episodes
                .iter()
                .map(|r| {
                    Ok(EpisodeSpec { id: r.id.clone(), reference: r.to_reference(&scene)?, instruction: r.instruction.clone() })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TourSpec { id: t.id, scene: scene.clone(), episodes })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub tours: Vec<TourOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub seed: u64,
    /// Mean and spread over repeats.
    pub aggregate: Aggregate,
    pub repeats: Vec<RepeatReport>,
}

pub fn run_repeat(cfg: &RunConfig, seed: u64) -> Result<RepeatReport> {
    let suite = match cfg.tour_file {
        Some(_) => load_tour_suite(cfg)?,
        None => generate_suite(cfg, seed)?,
    };
    let rt = Runtime::new(cfg, seed)?;
    let tours: Vec<TourOutcome> = suite
        .par_iter()
        .enumerate()
        .map(|(i, t)| rt.run_tour(t, mix(seed, 1000 + i as u64)))
        .collect::<Result<_>>()?;
    let episodes = tours.iter().flat_map(|t| t.episodes.iter().map(|e| e.metrics)).collect();
    let tour_tndtw = tours.iter().map(|t| t.tndtw).collect();
    Ok(RepeatReport { seed, metrics: MetricsReport::new(episodes, tour_tndtw), tours })
}

pub fn repeat_seed(base: u64, r: usize) -> u64 {
    mix(base, 0x5eed_0000 + r as u64)
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let repeats = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, repeat_seed(cfg.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let aggs: Vec<Aggregate> = repeats.iter().map(|r| r.metrics.aggregate).collect();
    Ok(RunReport { config_digest: cfg.digest(), seed: cfg.seed, aggregate: Aggregate::over_repeats(&aggs), repeats })
}
