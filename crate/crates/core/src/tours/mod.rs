//! Turning single-trajectory episodes into sequential tours: endpoint
//! stitching, instruction joining and enrichment, and the tour file.

mod file;
mod llm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, Path, Point, Pose};
use crate::instruction::{segment, SegmentationStyle};
use crate::world::{ReferenceEpisode, Scene};

pub use file::{read_tours, tours_from_jsonl, tours_to_jsonl, write_tours, TOUR_FORMAT};
pub use llm::{
    concat_prompt, enrich_or_keep, enrichment_prompt, request_digest, Cassette, CassetteTransport, LlmClient,
    LlmLogEntry, CASSETTE_FORMAT, CONCAT_TEMPLATE, ENRICH_TEMPLATE, LLM_ENDPOINT_ENV,
};

pub const DEFAULT_STITCH_TOL: f64 = 0.25;
pub const DEFAULT_MAX_CHAIN: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: String,
    pub scene_id: String,
    pub start_pose: Pose,
    pub reference_path: Path,
    /// Index of each sub-trajectory's last node in `reference_path`.
    pub boundaries: Vec<usize>,
    pub instruction: String,
    pub phrases: Vec<String>,
    pub start: Point,
    pub end: Point,
}

impl EpisodeRecord {
    pub fn new(
        id: impl Into<String>,
        scene_id: impl Into<String>,
        start_pose: Pose,
        reference_path: Path,
        boundaries: Vec<usize>,
        instruction: impl Into<String>,
    ) -> Result<Self> {
        let instruction = instruction.into();
        let phrases = segment(&instruction, SegmentationStyle::TypeIVPeriods)?.texts().iter().map(|s| s.to_string()).collect();
        let rec = EpisodeRecord {
            id: id.into(),
            scene_id: scene_id.into(),
            start_pose,
            start: reference_path.first(),
            end: reference_path.last(),
            reference_path,
            boundaries,
            instruction,
            phrases,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn from_episode(id: impl Into<String>, ep: &ReferenceEpisode, instruction: impl Into<String>) -> Result<Self> {
        Self::new(id, ep.scene_id.clone(), ep.start, ep.path.clone(), ep.boundaries.clone(), instruction)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start != self.reference_path.first() || self.end != self.reference_path.last() {
            return Err(Error::contract(format!("episode `{}`: start/end differ from its path", self.id)));
        }
        let b = &self.boundaries;
        if b.is_empty() || b.windows(2).any(|w| w[0] >= w[1]) || *b.last().unwrap() + 1 != self.reference_path.len() {
            return Err(Error::contract(format!("episode `{}`: bad sub-task boundaries", self.id)));
        }
        Ok(())
    }

    /// The simulator episode this record describes.
    pub fn to_reference(&self, scene: &Scene) -> Result<ReferenceEpisode> {
        if scene.id() != self.scene_id {
            return Err(Error::contract(format!("episode `{}` belongs to scene `{}`", self.id, self.scene_id)));
        }
        let descriptors = self
            .boundaries
            .iter()
            .map(|&b| {
                let p = self.reference_path.points()[b];
                let goal = scene
                    .landmarks()
                    .iter()
                    .find(|l| euclidean(l.position, p) < 1e-9)
                    .map_or_else(String::new, |l| l.label.clone());
                crate::world::SubtaskDescriptor { goal, goal_position: p, passed: Vec::new() }
            })
            .collect();
        Ok(ReferenceEpisode {
            scene_id: self.scene_id.clone(),
            start: self.start_pose,
            path: self.reference_path.clone(),
            boundaries: self.boundaries.clone(),
            descriptors,
        })
    }
}

/// How a tour instruction was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Single,
    Offline,
    Llm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TourRecord {
    pub id: String,
    pub scene_id: String,
    pub episode_ids: Vec<String>,
    pub stitched_instruction: String,
    pub subtask_count: usize,
    pub provenance: Provenance,
    pub episodes: Vec<EpisodeRecord>,
}

impl TourRecord {
    pub fn validate(&self, tol: f64) -> Result<()> {
        let ids: Vec<&str> = self.episodes.iter().map(|e| e.id.as_str()).collect();
        if self.episodes.is_empty() || ids != self.episode_ids {
            return Err(Error::contract(format!("tour `{}`: episode ids do not match episodes", self.id)));
        }
        for e in &self.episodes {
            e.validate()?;
            if e.scene_id != self.scene_id {
                return Err(Error::contract(format!("tour `{}` mixes scenes", self.id)));
            }
        }
        for w in self.episodes.windows(2) {
            let gap = euclidean(w[0].end, w[1].start);
            if gap > tol {
                return Err(Error::contract(format!(
                    "tour `{}`: `{}` ends {gap:.3} m from the start of `{}`",
                    self.id, w[0].id, w[1].id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StitchConfig {
    pub tol: f64,
    pub max_chain: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        StitchConfig { tol: DEFAULT_STITCH_TOL, max_chain: DEFAULT_MAX_CHAIN }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::config("stitch.tol", "must be positive"));
        }
        if self.max_chain == 0 {
            return Err(Error::config("stitch.max_chain", "must be at least 1"));
        }
        Ok(())
    }
}

/// Greedy chains of record indices. Within each scene (scenes in id
/// order) records are visited in id order; a chain grows by the unused
/// record whose start is nearest the chain end, smallest id on ties, while
/// that start lies within `tol` and the chain is shorter than `max_chain`.
pub fn stitch_chains(records: &[EpisodeRecord], cfg: &StitchConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_scene.entry(r.scene_id.as_str()).or_default().push(i);
    }
    let mut chains = Vec::new();
    for (_, mut idx) in by_scene {
        idx.sort_by(|&a, &b| records[a].id.cmp(&records[b].id).then(a.cmp(&b)));
        let mut used = vec![false; records.len()];
        for &head in &idx {
            if used[head] {
                continue;
            }
            used[head] = true;
            let mut chain = vec![head];
            while chain.len() < cfg.max_chain {
                let end = records[*chain.last().unwrap()].end;
                // idx is id-sorted, so a strict comparison keeps the smallest id on ties
                let mut best: Option<(f64, usize)> = None;
                for &c in &idx {
                    let d = euclidean(end, records[c].start);
                    if !used[c] && d <= cfg.tol && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
                let Some((_, next)) = best else { break };
                used[next] = true;
                chain.push(next);
            }
            chains.push(chain);
        }
    }
    Ok(chains)
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `"<a>. Then, <b>"` with `b`'s first letter lowercased; keeps every
/// period boundary of both inputs.
pub fn concat_instructions_offline(a: &str, b: &str) -> Result<String> {
    let (a, b) = (normalize_ws(a), normalize_ws(b));
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("cannot join an empty instruction"));
    }
    let head = a.trim_end_matches('.').trim_end();
    let mut chars = b.chars();
    let first = chars.next().unwrap();
    Ok(format!("{head}. Then, {}{}", first.to_lowercase(), chars.as_str()))
}

/// Stitches records into tours, joining instructions with the LLM when a
/// client is given and falling back to offline joining on any failure.
pub fn stitch_trajectories(
    records: &[EpisodeRecord],
    cfg: &StitchConfig,
    llm: Option<&LlmClient>,
) -> Result<Vec<TourRecord>> {
    let chains = stitch_chains(records, cfg)?;
    chains
        .into_iter()
        .map(|chain| {
            let eps: Vec<EpisodeRecord> = chain.iter().map(|&i| records[i].clone()).collect();
            let mut text = eps[0].instruction.clone();
            let mut provenance = Provenance::Single;
            for e in &eps[1..] {
                let joined = llm.and_then(|c| c.concat(&text, &e.instruction).ok());
                text = match joined {
                    Some(t) if provenance != Provenance::Offline => {
                        provenance = Provenance::Llm;
                        t
                    }
                    _ => {
                        provenance = Provenance::Offline;
                        concat_instructions_offline(&text, &e.instruction)?
                    }
                };
            }
            let ids: Vec<String> = eps.iter().map(|e| e.id.clone()).collect();
            Ok(TourRecord {
                id: format!("tour-{}", ids.join("+")),
                scene_id: eps[0].scene_id.clone(),
                subtask_count: eps.iter().map(|e| e.boundaries.len()).sum(),
                episode_ids: ids,
                stitched_instruction: text,
                provenance,
                episodes: eps,
            })
        })
        .collect()
}
