use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::paths::action_optimal_path;
use super::sensing::{visible_landmarks, SensorConfig};
use super::{class, Cell, Landmark, Room, Scene, DEFAULT_RESOLUTION, LANDMARK_VOCABULARY};
use crate::error::{Error, Result};
use crate::geometry::{Heading, Path, Point, Pose, TURN_STEP_DEG};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub rooms: usize,
    /// Interior side length of each room, in cells.
    pub room_size: usize,
    pub landmarks_per_room: usize,
    pub obstacles_per_room: usize,
    /// Probability of a door on a wall that the spanning tree did not use.
    pub extra_door_prob: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec { rooms: 4, room_size: 20, landmarks_per_room: 2, obstacles_per_room: 1, extra_door_prob: 0.3 }
    }
}

impl SceneSpec {
    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Generation(m));
        if !(1..=16).contains(&self.rooms) {
            return bad(format!("rooms must be in 1..=16, got {}", self.rooms));
        }
        if !(12..=40).contains(&self.room_size) {
            return bad(format!("room_size must be in 12..=40, got {}", self.room_size));
        }
        if self.rooms * self.landmarks_per_room > LANDMARK_VOCABULARY.len() {
            return bad(format!(
                "{} landmarks requested but the vocabulary has {} labels",
                self.rooms * self.landmarks_per_room,
                LANDMARK_VOCABULARY.len()
            ));
        }
        if self.obstacles_per_room > 4 {
            return bad("at most 4 obstacles per room".into());
        }
        if !(0.0..=1.0).contains(&self.extra_door_prob) {
            return bad("extra_door_prob must be a probability".into());
        }
        Ok(())
    }
}

struct Grid {
    width: usize,
    blocked: Vec<bool>,
    semantics: Vec<u8>,
}

impl Grid {
    fn set(&mut self, c: Cell, blocked: bool, class: u8) {
        let i = c.row as usize * self.width + c.col as usize;
        self.blocked[i] = blocked;
        self.semantics[i] = class;
    }

    fn free(&self, c: Cell) -> bool {
        c.col >= 0
            && c.row >= 0
            && (c.col as usize) < self.width
            && (c.row as usize) < self.blocked.len() / self.width
            && !self.blocked[c.row as usize * self.width + c.col as usize]
    }

    fn connected(&self) -> bool {
        let height = self.blocked.len() / self.width;
        let Some(start) = (0..self.blocked.len()).find(|&i| !self.blocked[i]) else {
            return false;
        };
        let total = self.blocked.iter().filter(|b| !**b).count();
        let mut seen = vec![false; self.blocked.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            let c = Cell::new((i % self.width) as i64, (i / self.width) as i64);
            for n in c.neighbors4() {
                if n.col < 0 || n.row < 0 || n.col as usize >= self.width || n.row as usize >= height {
                    continue;
                }
                let j = n.row as usize * self.width + n.col as usize;
                if !self.blocked[j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == total
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Deterministic multi-room scene: rooms on a grid layout, doors along a
/// random spanning tree plus optional extras, small furniture obstacles and
/// uniquely labelled landmarks.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<Scene> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (spec.rooms as f64).sqrt().ceil() as usize;
    let rows = spec.rooms.div_ceil(cols);
    let s = spec.room_size;
    let width = cols * (s + 1) + 1;
    let height = rows * (s + 1) + 1;
    let mut grid = Grid { width, blocked: vec![true; width * height], semantics: vec![class::WALL; width * height] };

    let mut rooms = Vec::with_capacity(spec.rooms);
    for slot in 0..spec.rooms {
        let (i, j) = ((slot / cols) as i64, (slot % cols) as i64);
        let min = Cell::new(j * (s as i64 + 1) + 1, i * (s as i64 + 1) + 1);
        let max = Cell::new(min.col + s as i64 - 1, min.row + s as i64 - 1);
        let room_class = rng.random_range(class::ROOM_FIRST..=class::ROOM_LAST);
        for row in min.row..=max.row {
            for col in min.col..=max.col {
                grid.set(Cell::new(col, row), false, room_class);
            }
        }
        rooms.push(Room { class: room_class, min, max });
    }

    let mut edges = Vec::new();
    for a in 0..spec.rooms {
        if a % cols + 1 < cols && a + 1 < spec.rooms {
            edges.push((a, a + 1));
        }
        if a + cols < spec.rooms {
            edges.push((a, a + cols));
        }
    }
    edges.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..spec.rooms).collect();
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let tree_edge = ra != rb;
        if tree_edge {
            parent[ra] = rb;
        }
        if tree_edge || rng.random_bool(spec.extra_door_prob) {
            let offset = rng.random_range(2..=(s as i64 - 5));
            let ra_room = &rooms[a];
            for k in 0..3 {
                let cell = if b == a + 1 {
                    Cell::new(ra_room.max.col + 1, ra_room.min.row + offset + k)
                } else {
                    Cell::new(ra_room.min.col + offset + k, ra_room.max.row + 1)
                };
                grid.set(cell, false, ra_room.class);
            }
        }
    }

    for room in &rooms {
        for _ in 0..spec.obstacles_per_room {
            for _attempt in 0..20 {
                let col = rng.random_range(room.min.col + 3..=room.max.col - 4);
                let row = rng.random_range(room.min.row + 3..=room.max.row - 4);
                let cells: Vec<Cell> =
                    (0..2).flat_map(|dc| (0..2).map(move |dr| Cell::new(col + dc, row + dr))).collect();
                if cells.iter().any(|&c| !grid.free(c)) {
                    continue;
                }
                let obstacle_class = rng.random_range(class::OBSTACLE_FIRST..=class::OBSTACLE_LAST);
                for &c in &cells {
                    grid.set(c, true, obstacle_class);
                }
                if grid.connected() {
                    break;
                }
                for &c in &cells {
                    grid.set(c, false, room.class);
                }
            }
        }
    }

    let mut labels: Vec<&str> = LANDMARK_VOCABULARY.iter().map(|(l, _)| *l).collect();
    labels.shuffle(&mut rng);
    let mut labels = labels.into_iter();
    let mut landmarks: Vec<Landmark> = Vec::new();
    let clear = |grid: &Grid, c: Cell| {
        (-1..=1).all(|dc| (-1..=1).all(|dr| grid.free(Cell::new(c.col + dc, c.row + dr))))
    };
    for room in &rooms {
        for _ in 0..spec.landmarks_per_room {
            let label = labels.next().expect("vocabulary size checked");
            let mut placed = false;
            for _attempt in 0..200 {
                let c = Cell::new(
                    rng.random_range(room.min.col + 1..=room.max.col - 1),
                    rng.random_range(room.min.row + 1..=room.max.row - 1),
                );
                let p = Point::new(c.col as f64 * DEFAULT_RESOLUTION, c.row as f64 * DEFAULT_RESOLUTION);
                if clear(&grid, c) && landmarks.iter().all(|l| l.position.distance(&p) >= 2.0) {
                    landmarks.push(Landmark { label: label.to_string(), position: p });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!("could not place landmark `{label}`")));
            }
        }
    }

    let id = format!("scene-{seed:016x}-r{}", spec.rooms);
    Scene::from_grid(id, width, height, DEFAULT_RESOLUTION, grid.blocked, grid.semantics, rooms, landmarks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskDescriptor {
    pub goal: String,
    pub goal_position: Point,
    /// Other landmarks seen along this sub-trajectory, sorted.
    pub passed: Vec<String>,
}

/// A reference route through several landmark goals, visited in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEpisode {
    pub scene_id: String,
    pub start: Pose,
    pub path: Path,
    /// Index into `path` of each sub-trajectory's final node.
    pub boundaries: Vec<usize>,
    pub descriptors: Vec<SubtaskDescriptor>,
}

impl ReferenceEpisode {
    pub fn n_subtasks(&self) -> usize {
        self.boundaries.len()
    }

    pub fn goal(&self, k: usize) -> Point {
        self.path.points()[self.boundaries[k]]
    }

    /// Sub-task index that path node `i` belongs to.
    pub fn subtask_of_node(&self, i: usize) -> usize {
        self.boundaries.iter().position(|&b| i <= b).unwrap_or(self.boundaries.len() - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRequest {
    pub n_subtasks: usize,
    pub start: Option<Cell>,
    /// Landmarks that may not be used as goals.
    pub exclude: Vec<String>,
    pub min_subpath_cells: usize,
    pub max_attempts: usize,
}

impl EpisodeRequest {
    pub fn new(n_subtasks: usize) -> Self {
        EpisodeRequest { n_subtasks, start: None, exclude: Vec::new(), min_subpath_cells: 8, max_attempts: 400 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePose {
    pub pose: Pose,
    pub subtask: usize,
}

fn direction(a: Cell, b: Cell) -> Heading {
    let deg = match (b.col - a.col, b.row - a.row) {
        (1, 0) => 0.0,
        (0, 1) => 90.0,
        (-1, 0) => 180.0,
        _ => 270.0,
    };
    Heading::from_degrees(deg)
}

/// Pose sequence of an agent that executes the reference exactly: turn in
/// 15° steps toward each segment (left on ties), then move one cell.
pub fn reference_poses(scene: &Scene, ep: &ReferenceEpisode) -> Vec<ReferencePose> {
    let cells: Vec<Cell> = ep.path.points().iter().map(|&p| scene.cell_of(p)).collect();
    let mut pose = ep.start;
    let mut out = vec![ReferencePose { pose, subtask: 0 }];
    for i in 1..cells.len() {
        let subtask = ep.subtask_of_node(i);
        let target = direction(cells[i - 1], cells[i]);
        loop {
            let delta = pose.heading.delta_to(target);
            if delta == 0.0 {
                break;
            }
            let turn = if delta > 0.0 { TURN_STEP_DEG } else { -TURN_STEP_DEG };
            pose = Pose::new(pose.x, pose.y, pose.heading.degrees() + turn);
            out.push(ReferencePose { pose, subtask });
        }
        let p = ep.path.points()[i];
        pose = Pose { x: p.x, y: p.y, heading: pose.heading };
        out.push(ReferencePose { pose, subtask });
    }
    out
}

/// Goal landmarks visible from each reference pose must not run ahead of
/// the route: away from goals only the current goal may be seen, at goal `j`
/// goals `j` and `j + 1` may also be seen.
fn sequentially_visible(scene: &Scene, ep: &ReferenceEpisode, sensor: &SensorConfig) -> bool {
    let goals: Vec<&str> = ep.descriptors.iter().map(|d| d.goal.as_str()).collect();
    reference_poses(scene, ep).iter().all(|rp| {
        let here = rp.pose.position();
        let at_goal = (0..goals.len()).find(|&j| ep.goal(j).distance(&here) < 1e-9);
        visible_landmarks(scene, rp.pose, sensor).iter().all(|v| match goals.iter().position(|g| *g == v.label) {
            None => true,
            Some(g) => g == rp.subtask || at_goal.is_some_and(|j| g == j || g == j + 1),
        })
    })
}

fn clearance(scene: &Scene, c: Cell) -> bool {
    (-1..=1).all(|dc| (-1..=1).all(|dr| scene.is_free(Cell::new(c.col + dc, c.row + dr))))
}

pub fn generate_reference_episode(scene: &Scene, seed: u64, n_subtasks: usize) -> Result<ReferenceEpisode> {
    generate_episode_with(scene, seed, &EpisodeRequest::new(n_subtasks))
}

pub(crate) fn generate_episode_with(scene: &Scene, seed: u64, req: &EpisodeRequest) -> Result<ReferenceEpisode> {
    if req.n_subtasks == 0 {
        return Err(Error::Generation("n_subtasks must be at least 1".into()));
    }
    let sensor = SensorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e915_0de5_u64);
    let free: Vec<Cell> = scene.free_cells().filter(|&c| clearance(scene, c)).collect();
    if free.is_empty() {
        return Err(Error::Generation("scene has no free cell with clearance".into()));
    }
    for _attempt in 0..req.max_attempts {
        let start = req.start.unwrap_or_else(|| free[rng.random_range(0..free.len())]);
        let mut cells = vec![start];
        let mut boundaries = Vec::new();
        let mut goals: Vec<&Landmark> = Vec::new();
        let mut heading: Option<Heading> = None;
        let mut start_heading: Option<Heading> = None;
        let mut failed = false;
        for _k in 0..req.n_subtasks {
            let here = *cells.last().unwrap();
            let mut candidates: Vec<&Landmark> = scene
                .landmarks
                .iter()
                .filter(|l| !req.exclude.contains(&l.label) && !goals.iter().any(|g| g.label == l.label))
                .filter(|l| scene.cell_of(l.position) != here)
                .collect();
            candidates.shuffle(&mut rng);
            let chosen = candidates.into_iter().find_map(|l| {
                let sub = action_optimal_path(scene, here, heading, scene.cell_of(l.position))?;
                (sub.len() > req.min_subpath_cells).then_some((l, sub))
            });
            let Some((landmark, sub)) = chosen else {
                failed = true;
                break;
            };
            if start_heading.is_none() {
                start_heading = Some(direction(sub[0], sub[1]));
            }
            heading = Some(direction(sub[sub.len() - 2], sub[sub.len() - 1]));
            cells.extend_from_slice(&sub[1..]);
            boundaries.push(cells.len() - 1);
            goals.push(landmark);
        }
        if failed {
            continue;
        }
        let points: Vec<Point> = cells.iter().map(|&c| scene.center(c)).collect();
        let s = scene.center(start);
        let mut ep = ReferenceEpisode {
            scene_id: scene.id.clone(),
            start: Pose { x: s.x, y: s.y, heading: start_heading.unwrap() },
            path: Path::new(points)?,
            boundaries,
            descriptors: goals
                .iter()
                .map(|g| SubtaskDescriptor { goal: g.label.clone(), goal_position: g.position, passed: Vec::new() })
                .collect(),
        };
        if !sequentially_visible(scene, &ep, &sensor) {
            continue;
        }
        let mut passed = vec![BTreeSet::new(); ep.n_subtasks()];
        for rp in reference_poses(scene, &ep) {
            for v in visible_landmarks(scene, rp.pose, &sensor) {
                if v.label != ep.descriptors[rp.subtask].goal {
                    passed[rp.subtask].insert(v.label);
                }
            }
        }
        for (d, p) in ep.descriptors.iter_mut().zip(passed) {
            d.passed = p.into_iter().collect();
        }
        return Ok(ep);
    }
    Err(Error::Generation(format!(
        "no feasible {}-goal tour in scene `{}` after {} attempts",
        req.n_subtasks, scene.id, req.max_attempts
    )))
}

/// Episodes chained end to start in one scene; goal landmarks are not
/// reused within an episode and the start landmark is never a goal.
pub fn generate_tour_episodes(
    scene: &Scene,
    seed: u64,
    n_episodes: usize,
    n_subtasks: usize,
) -> Result<Vec<ReferenceEpisode>> {
    let mut out: Vec<ReferenceEpisode> = Vec::with_capacity(n_episodes);
    for e in 0..n_episodes {
        let mut req = EpisodeRequest::new(n_subtasks);
        if let Some(prev) = out.last() {
            req.start = Some(scene.cell_of(prev.path.last()));
            req.exclude.push(prev.descriptors.last().unwrap().goal.clone());
        }
        let ep_seed = seed.wrapping_add((e as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        out.push(generate_episode_with(scene, ep_seed, &req)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scene_to_json;

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(7, &SceneSpec::default()).unwrap();
        let b = generate_scene(7, &SceneSpec::default()).unwrap();
        assert_eq!(scene_to_json(&a).unwrap(), scene_to_json(&b).unwrap());
        let c = generate_scene(8, &SceneSpec::default()).unwrap();
        assert_ne!(scene_to_json(&a).unwrap(), scene_to_json(&c).unwrap());
    }

    #[test]
    fn room_count_echoes_spec() {
        for rooms in [1, 3, 4, 6] {
            let spec = SceneSpec { rooms, ..SceneSpec::default() };
            let s = generate_scene(11, &spec).unwrap();
            assert_eq!(s.rooms().len(), rooms);
            assert_eq!(s.landmarks().len(), rooms * spec.landmarks_per_room);
        }
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let spec = SceneSpec { rooms: 16, landmarks_per_room: 2, ..SceneSpec::default() };
        assert!(matches!(generate_scene(1, &spec), Err(Error::Generation(_))));
        let spec = SceneSpec { rooms: 0, ..SceneSpec::default() };
        assert!(generate_scene(1, &spec).is_err());
    }

    /// BFS connectivity oracle over free cells.
    fn reachable(scene: &Scene, from: Cell) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors4() {
                if scene.is_free(n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    #[test]
    fn landmarks_are_mutually_reachable() {
        for seed in 0..10 {
            let s = generate_scene(seed, &SceneSpec { rooms: 6, ..SceneSpec::default() }).unwrap();
            let first = s.cell_of(s.landmarks()[0].position);
            let comp = reachable(&s, first);
            assert!(s.landmarks().iter().all(|l| comp.contains(&s.cell_of(l.position))), "seed {seed}");
            let labels: BTreeSet<_> = s.landmarks().iter().map(|l| &l.label).collect();
            assert_eq!(labels.len(), s.landmarks().len());
        }
    }

    #[test]
    fn single_subtask_episode() {
        let s = generate_scene(3, &SceneSpec::default()).unwrap();
        let ep = generate_reference_episode(&s, 5, 1).unwrap();
        assert_eq!(ep.boundaries, vec![ep.path.len() - 1]);
        assert_eq!(ep.descriptors.len(), 1);
    }

    #[test]
    fn subtrajectories_chain_end_to_start() {
        let s = generate_scene(3, &SceneSpec::default()).unwrap();
        let ep = generate_reference_episode(&s, 9, 3).unwrap();
        assert_eq!(ep.boundaries.len(), 3);
        assert!(ep.boundaries.windows(2).all(|w| w[0] < w[1]));
        for (k, d) in ep.descriptors.iter().enumerate() {
            assert_eq!(ep.goal(k), d.goal_position);
        }
        // consecutive nodes are 4-neighbours
        for w in ep.path.points().windows(2) {
            assert!((w[0].distance(&w[1]) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptor_landmarks_lie_within_range_of_their_subpath() {
        let sensor = SensorConfig::default();
        for seed in 0..6 {
            let s = generate_scene(seed, &SceneSpec::default()).unwrap();
            let ep = generate_reference_episode(&s, seed + 100, 3).unwrap();
            for (k, d) in ep.descriptors.iter().enumerate() {
                let lo = if k == 0 { 0 } else { ep.boundaries[k - 1] };
                let sub = &ep.path.points()[lo..=ep.boundaries[k]];
                for label in &d.passed {
                    let lm = s.landmark(label).unwrap();
                    let near = sub.iter().map(|p| p.distance(&lm.position)).fold(f64::INFINITY, f64::min);
                    assert!(near <= sensor.max_range, "{label} is {near} m from sub-path {k}");
                }
            }
        }
    }

    #[test]
    fn tours_chain_episodes() {
        let s = generate_scene(21, &SceneSpec { rooms: 6, ..SceneSpec::default() }).unwrap();
        let eps = generate_tour_episodes(&s, 4, 3, 2).unwrap();
        for w in eps.windows(2) {
            assert_eq!(w[0].path.last(), w[1].path.first());
        }
    }

    #[test]
    fn reference_poses_end_on_every_goal() {
        let s = generate_scene(2, &SceneSpec::default()).unwrap();
        let ep = generate_reference_episode(&s, 1, 2).unwrap();
        let poses = reference_poses(&s, &ep);
        assert_eq!(poses[0].pose, ep.start);
        for k in 0..2 {
            assert!(poses.iter().any(|rp| rp.pose.position() == ep.goal(k)));
        }
        assert_eq!(poses.last().unwrap().pose.position(), ep.path.last());
    }
}
