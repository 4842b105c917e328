//! Trajectory and task-completion metrics.

mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, Path, Point};

pub use report::{aggregate, Aggregate, Format, MetricsReport, Stat, Table, TableRow, TABLE_COLUMNS};

pub const DEFAULT_SUCCESS_RADIUS: f64 = 3.0;
pub const DEFAULT_D_TH: f64 = 3.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplVariant {
    /// `sr · l / max(l, p)`.
    #[default]
    Standard,
    /// `sr · p / l`; may exceed 1.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    /// Success radius in meters, also used for sub-task completion.
    pub success_radius: f64,
    pub d_th: f64,
    pub spl: SplVariant,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { success_radius: DEFAULT_SUCCESS_RADIUS, d_th: DEFAULT_D_TH, spl: SplVariant::Standard }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.success_radius > 0.0 && self.success_radius.is_finite()) {
            return Err(Error::config("metrics.success_radius", "must be positive"));
        }
        if !(self.d_th > 0.0 && self.d_th.is_finite()) {
            return Err(Error::config("metrics.d_th", "must be positive"));
        }
        Ok(())
    }
}

/// Phrase chosen at one executed step against the sub-task the agent was
/// actually on. `selected` is `None` when the global instruction was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub selected: Option<usize>,
    pub truth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub agent_path: Path,
    pub reference_path: Path,
    /// Index of each sub-trajectory's last node in `reference_path`.
    pub boundaries: Vec<usize>,
    pub selection_log: Vec<SelectionRecord>,
}

impl EpisodeResult {
    pub fn validate(&self) -> Result<()> {
        let b = &self.boundaries;
        if b.is_empty() || b.windows(2).any(|w| w[0] >= w[1]) || *b.last().unwrap() + 1 != self.reference_path.len() {
            return Err(Error::contract("sub-task boundaries must increase and end at the reference end"));
        }
        Ok(())
    }

    pub fn goal(&self) -> Point {
        self.reference_path.last()
    }
}

/// Minimum cumulative Euclidean cost over monotone warpings that match
/// endpoints to endpoints.
pub fn dtw(r: &Path, t: &Path) -> f64 {
    let (r, t) = (r.points(), t.points());
    let m = t.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for a in r {
        cur[0] = f64::INFINITY;
        for (j, b) in t.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = euclidean(*a, *b) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = f64::INFINITY;
    }
    prev[m]
}

pub fn ndtw(r: &Path, t: &Path, d_th: f64) -> Result<f64> {
    if !(d_th > 0.0) {
        return Err(Error::contract("d_th must be positive"));
    }
    Ok((-dtw(r, t) / (r.len() as f64 * d_th)).exp())
}

/// nDTW of the whole tour: episodes' reference paths and agent paths are
/// each concatenated in order.
pub fn tndtw(episodes: &[EpisodeResult], d_th: f64) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::contract("tour has no episodes"));
    }
    let r = Path::concat(episodes.iter().map(|e| &e.reference_path))?;
    let t = Path::concat(episodes.iter().map(|e| &e.agent_path))?;
    ndtw(&r, &t, d_th)
}

pub fn tl(ep: &EpisodeResult) -> f64 {
    ep.agent_path.length()
}

pub fn ne(ep: &EpisodeResult) -> f64 {
    euclidean(ep.agent_path.last(), ep.goal())
}

pub fn sr(ep: &EpisodeResult, radius: f64) -> f64 {
    if ne(ep) <= radius {
        1.0
    } else {
        0.0
    }
}

pub fn os(ep: &EpisodeResult, radius: f64) -> f64 {
    let g = ep.goal();
    let closest = ep.agent_path.points().iter().map(|p| euclidean(*p, g)).fold(f64::INFINITY, f64::min);
    if closest <= radius {
        1.0
    } else {
        0.0
    }
}

pub fn spl(ep: &EpisodeResult, radius: f64, variant: SplVariant) -> f64 {
    let s = sr(ep, radius);
    let l = ep.reference_path.length();
    let p = tl(ep);
    match variant {
        SplVariant::Standard => {
            let denom = l.max(p);
            if denom == 0.0 {
                s
            } else {
                s * l / denom
            }
        }
        SplVariant::Literal => {
            if l == 0.0 {
                s
            } else {
                s * p / l
            }
        }
    }
}

/// Ordered prefix of sub-tasks completed: sub-task k counts only once the
/// agent has come within `radius` of its endpoint after completing k − 1.
pub fn cpsubt(ep: &EpisodeResult, radius: f64) -> f64 {
    let goals: Vec<Point> = ep.boundaries.iter().map(|&b| ep.reference_path.points()[b]).collect();
    let mut done = 0;
    for p in ep.agent_path.points() {
        while done < goals.len() && euclidean(*p, goals[done]) <= radius {
            done += 1;
        }
    }
    done as f64 / goals.len() as f64
}

/// Share of executed steps whose selection hit the true sub-task; global
/// fallbacks count as misses.
pub fn cpsubi(ep: &EpisodeResult) -> f64 {
    if ep.selection_log.is_empty() {
        return 0.0;
    }
    let hits = ep.selection_log.iter().filter(|s| s.selected == Some(s.truth)).count();
    hits as f64 / ep.selection_log.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub tl: f64,
    pub ne: f64,
    pub sr: f64,
    pub os: f64,
    pub spl: f64,
    pub ndtw: f64,
    pub cpsubt: f64,
    pub cpsubi: f64,
}

pub fn episode_metrics(ep: &EpisodeResult, params: &MetricParams) -> Result<EpisodeMetrics> {
    ep.validate()?;
    let r = params.success_radius;
    Ok(EpisodeMetrics {
        tl: tl(ep),
        ne: ne(ep),
        sr: sr(ep, r),
        os: os(ep, r),
        spl: spl(ep, r, params.spl),
        ndtw: ndtw(&ep.reference_path, &ep.agent_path, params.d_th)?,
        cpsubt: cpsubt(ep, r),
        cpsubi: cpsubi(ep),
    })
}

/// Tracks which reference node the agent is at, moving only within a
/// window around the last match so that paths that double back do not
/// jump ahead.
#[derive(Clone, Debug)]
pub struct ProgressTracker<'a> {
    path: &'a Path,
    boundaries: &'a [usize],
    node: usize,
}

const PROGRESS_WINDOW: usize = 8;

impl<'a> ProgressTracker<'a> {
    pub fn new(path: &'a Path, boundaries: &'a [usize]) -> Self {
        ProgressTracker { path, boundaries, node: 0 }
    }

    /// Updates with the agent's position and returns its sub-task.
    pub fn update(&mut self, p: Point) -> usize {
        let pts = self.path.points();
        let lo = self.node.saturating_sub(PROGRESS_WINDOW);
        let hi = (self.node + PROGRESS_WINDOW).min(pts.len() - 1);
        let mut best = self.node;
        for i in lo..=hi {
            if euclidean(pts[i], p) < euclidean(pts[best], p) {
                best = i;
            }
        }
        self.node = best;
        self.subtask()
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn subtask(&self) -> usize {
        self.boundaries.iter().position(|&b| self.node <= b).unwrap_or(self.boundaries.len() - 1)
    }
}
