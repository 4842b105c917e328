use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionPolicy, PolicyInput, PolicyOutput};
use crate::error::{Error, Result};
use crate::geometry::{Action, Heading, Pose};
use crate::world::{action_optimal_path, Cell, ReferenceEpisode, Scene};

const ARRIVE_TOL: f64 = 0.125;
const ALIGN_TOL_DEG: f64 = 7.5;

/// Reference-following stand-in for a trained action head.
///
/// At each sub-task boundary after the first the policy may, with
/// probability `error_rate`, take a wrong fork: it heads for a distractor
/// landmark and stops there. While lost, its runner-up action is the one
/// that would lead back toward the true goal, and as soon as it observes
/// that an action other than its own choice was executed it drops the
/// detour and replans to the true goal.
#[derive(Clone, Debug)]
pub struct ScriptedOraclePolicy<'a> {
    scene: &'a Scene,
    episode: &'a ReferenceEpisode,
    error_rate: f64,
    seed: u64,
    /// `wrong_fork[k]`: an error fires when sub-task `k` begins.
    wrong_fork: Vec<bool>,
    target: usize,
    plan: Vec<Cell>,
    next: usize,
    detour: Option<Cell>,
    last_choice: Option<Action>,
    rng: ChaCha8Rng,
}

impl<'a> ScriptedOraclePolicy<'a> {
    pub fn new(scene: &'a Scene, episode: &'a ReferenceEpisode, error_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&error_rate) {
            return Err(Error::contract(format!("error rate {error_rate} outside [0, 1]")));
        }
        if episode.n_subtasks() == 0 {
            return Err(Error::contract("episode has no sub-tasks"));
        }
        let mut p = ScriptedOraclePolicy {
            scene,
            episode,
            error_rate,
            seed,
            wrong_fork: Vec::new(),
            target: 0,
            plan: Vec::new(),
            next: 0,
            detour: None,
            last_choice: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        p.reset();
        Ok(p)
    }

    /// Restarts the episode with the same error draws.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.episode.n_subtasks();
        self.wrong_fork = (0..n).map(|k| k > 0 && self.rng.random_bool(self.error_rate)).collect();
        self.target = 0;
        self.detour = None;
        self.last_choice = None;
        self.plan = self.reference_subpath(0);
        self.next = 1.min(self.plan.len() - 1);
    }

    pub fn error_count(&self) -> usize {
        self.wrong_fork.iter().filter(|&&e| e).count()
    }

    pub fn is_lost(&self) -> bool {
        self.detour.is_some()
    }

    fn reference_subpath(&self, k: usize) -> Vec<Cell> {
        let from = if k == 0 { 0 } else { self.episode.boundaries[k - 1] };
        self.episode.path.points()[from..=self.episode.boundaries[k]]
            .iter()
            .map(|&p| self.scene.cell_of(p))
            .collect()
    }

    fn goal_cell(&self, k: usize) -> Cell {
        self.scene.cell_of(self.episode.goal(k))
    }

    fn destination(&self) -> Cell {
        self.detour.unwrap_or_else(|| self.goal_cell(self.target))
    }

    fn replan(&mut self, pose: Pose) {
        let here = self.scene.cell_of(pose.position());
        self.plan = action_optimal_path(self.scene, here, Some(pose.heading), self.destination())
            .unwrap_or_else(|| vec![here]);
        self.next = 1.min(self.plan.len() - 1);
    }

    fn pick_detour(&mut self, k: usize) -> Option<Cell> {
        let n = self.episode.n_subtasks();
        let here = self.goal_cell(k - 1);
        let reachable = |c: Cell| c != here && action_optimal_path(self.scene, here, None, c).is_some();
        let goals: Vec<usize> = (0..n).filter(|&j| j + 1 != k && j != k && j + 1 != n).collect();
        if let Some(&j) = goals.choose(&mut self.rng) {
            return Some(self.goal_cell(j));
        }
        if k + 1 != n {
            return Some(self.goal_cell(n - 1));
        }
        let labels: Vec<&str> = self.episode.descriptors.iter().map(|d| d.goal.as_str()).collect();
        let others: Vec<Cell> = self
            .scene
            .landmarks()
            .iter()
            .filter(|l| !labels.contains(&l.label.as_str()))
            .map(|l| self.scene.cell_of(l.position))
            .filter(|&c| reachable(c))
            .collect();
        others.choose(&mut self.rng).copied()
    }

    fn steer(&self, pose: Pose, waypoint: Cell) -> Action {
        let p = pose.position();
        let w = self.scene.center(waypoint);
        let want = Heading::from_degrees((w.y - p.y).atan2(w.x - p.x).to_degrees());
        let delta = pose.heading.delta_to(want);
        if delta.abs() <= ALIGN_TOL_DEG {
            Action::Forward
        } else if delta > 0.0 {
            Action::TurnLeft
        } else {
            Action::TurnRight
        }
    }

    /// Action that heads for the true goal of the current sub-task.
    fn corrective_action(&self, pose: Pose) -> Action {
        let here = self.scene.cell_of(pose.position());
        let goal = self.goal_cell(self.target);
        match action_optimal_path(self.scene, here, Some(pose.heading), goal) {
            Some(path) if path.len() > 1 => self.steer(pose, path[1]),
            _ => Action::Stop,
        }
    }

    fn choose(&mut self, pose: Pose) -> Action {
        let n = self.episode.n_subtasks();
        let here = self.scene.cell_of(pose.position());
        let last = self.plan[self.next.saturating_sub(1)];
        if here != last && here != self.plan[self.next] {
            self.replan(pose);
        }
        loop {
            let at_next = self.scene.center(self.plan[self.next]).distance(&pose.position()) < ARRIVE_TOL;
            if !at_next {
                return self.steer(pose, self.plan[self.next]);
            }
            if self.next + 1 < self.plan.len() {
                self.next += 1;
                continue;
            }
            // end of the current plan
            if self.detour.is_some() || self.target + 1 == n {
                return Action::Stop;
            }
            self.target += 1;
            self.detour = if self.wrong_fork[self.target] { self.pick_detour(self.target) } else { None };
            if self.detour.is_some() {
                self.replan(pose);
            } else {
                self.plan = self.reference_subpath(self.target);
                self.next = 1.min(self.plan.len() - 1);
                if self.plan[0] != here {
                    self.replan(pose);
                }
            }
            if self.plan.len() == 1 {
                return Action::Stop;
            }
        }
    }
}

fn usual_runner_up(a: Action) -> Action {
    match a {
        Action::Forward => Action::TurnLeft,
        _ => Action::Forward,
    }
}

impl ActionPolicy for ScriptedOraclePolicy<'_> {
    fn predict(&mut self, input: &PolicyInput) -> Result<PolicyOutput> {
        if let (Some(prev), Some(mine)) = (input.prev_action, self.last_choice) {
            if prev != mine && prev != Action::TurnBackLastStep {
                self.detour = None;
                self.replan(input.pose);
            }
        }
        let best = self.choose(input.pose);
        let mut runner_up = usual_runner_up(best);
        if self.detour.is_some() {
            let fix = self.corrective_action(input.pose);
            if fix != best {
                runner_up = fix;
            }
        }
        let mut probs = [0.05; 4];
        probs[best.index()] = 0.7;
        probs[runner_up.index()] = 0.2;
        self.last_choice = Some(best);
        Ok(PolicyOutput { probs, hidden: Vec::new() })
    }

    fn uses_map_embedding(&self) -> bool {
        false
    }

    fn hidden_size(&self) -> usize {
        0
    }
}
