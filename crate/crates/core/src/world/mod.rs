//! Synthetic persistent scenes and the simulator loop.
//!
//! A [`Scene`] is an occupancy grid with a semantic class per cell, a set of
//! rectangular rooms and point landmarks. Cell `(col, row)` is centered on
//! world point `(col * resolution, row * resolution)`, so an agent that only
//! moves along the axes stays on cell centers.

mod format;
mod generate;
mod paths;
mod sensing;
mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub use format::{read_scene, scene_from_json, scene_to_json, write_scene, SCENE_FORMAT};
pub use generate::{
    generate_reference_episode, generate_scene, generate_tour_episodes, reference_poses,
    EpisodeRequest, ReferenceEpisode, ReferencePose, SceneSpec, SubtaskDescriptor,
};
pub use paths::{action_optimal_path, shortest_path_distance};
pub use sensing::{
    line_of_sight, observe, observe_with, visible_landmarks, DepthRay, Observation, SensorConfig,
    VisibleLandmark,
};
pub use sim::{step, AgentState};

/// Number of semantic classes carried by scenes and maps.
pub const SEMANTIC_CLASSES: usize = 13;
pub const DEFAULT_RESOLUTION: f64 = 0.25;

pub mod class {
    pub const WALL: u8 = 0;
    /// Room floor classes occupy `1..=8`.
    pub const ROOM_FIRST: u8 = 1;
    pub const ROOM_LAST: u8 = 8;
    /// Furniture obstacle classes occupy `9..=12`.
    pub const OBSTACLE_FIRST: u8 = 9;
    pub const OBSTACLE_LAST: u8 = 12;

    pub const NAMES: [&str; super::SEMANTIC_CLASSES] = [
        "wall", "living_room", "kitchen", "bedroom", "bathroom", "hallway", "dining_room",
        "office", "laundry", "cabinet", "counter", "column", "shelf",
    ];
}

/// Landmark labels and the synonym tokens an instruction may use for them.
pub const LANDMARK_VOCABULARY: &[(&str, &[&str])] = &[
    ("couch", &["couch", "sofa"]),
    ("fireplace", &["fireplace", "hearth"]),
    ("bed", &["bed"]),
    ("piano", &["piano"]),
    ("stairs", &["stairs", "staircase", "steps"]),
    ("mirror", &["mirror"]),
    ("plant", &["plant", "fern"]),
    ("lamp", &["lamp"]),
    ("painting", &["painting", "picture", "artwork"]),
    ("fridge", &["fridge", "refrigerator"]),
    ("sink", &["sink", "basin"]),
    ("wardrobe", &["wardrobe", "closet"]),
    ("television", &["television", "tv"]),
    ("bathtub", &["bathtub", "tub"]),
    ("bookshelf", &["bookshelf", "bookcase", "shelves"]),
    ("clock", &["clock"]),
    ("vase", &["vase"]),
    ("window", &["window"]),
    ("armchair", &["armchair"]),
    ("dresser", &["dresser"]),
    ("rug", &["rug", "carpet"]),
    ("oven", &["oven", "stove"]),
    ("toilet", &["toilet"]),
    ("washer", &["washer", "laundry"]),
];

/// Synonym tokens of a vocabulary label, or just the label itself.
pub fn synonyms(label: &str) -> Vec<String> {
    LANDMARK_VOCABULARY
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, syn)| syn.iter().map(|s| s.to_string()).collect())
        .unwrap_or_else(|| vec![label.to_string()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: i64,
    pub row: i64,
}

impl Cell {
    pub const fn new(col: i64, row: i64) -> Self {
        Cell { col, row }
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        let Cell { col, row } = self;
        [Cell::new(col + 1, row), Cell::new(col, row + 1), Cell::new(col - 1, row), Cell::new(col, row - 1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub label: String,
    pub position: Point,
}

/// Axis-aligned room interior, inclusive cell bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub class: u8,
    pub min: Cell,
    pub max: Cell,
}

impl Room {
    pub fn contains(&self, c: Cell) -> bool {
        c.col >= self.min.col && c.col <= self.max.col && c.row >= self.min.row && c.row <= self.max.row
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub(crate) id: String,
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) resolution: f64,
    pub(crate) blocked: Vec<bool>,
    pub(crate) semantics: Vec<u8>,
    pub(crate) rooms: Vec<Room>,
    pub(crate) landmarks: Vec<Landmark>,
}

impl Scene {
    /// Builds a scene from row-major grids and validates it.
    pub fn from_grid(
        id: impl Into<String>,
        width: usize,
        height: usize,
        resolution: f64,
        blocked: Vec<bool>,
        semantics: Vec<u8>,
        rooms: Vec<Room>,
        landmarks: Vec<Landmark>,
    ) -> Result<Self> {
        let scene = Scene { id: id.into(), width, height, resolution, blocked, semantics, rooms, landmarks };
        scene.validate()?;
        Ok(scene)
    }

    /// Parses an ASCII layout: `#` blocked, `.` free, a letter marks a free
    /// cell holding the landmark mapped to it. Row 0 of the text is the top
    /// (largest y) row.
    pub fn from_ascii(id: &str, rows: &[&str], labels: &[(char, &str)]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut blocked = vec![false; width * height];
        let mut semantics = vec![class::ROOM_FIRST; width * height];
        let mut landmarks = Vec::new();
        for (text_row, line) in rows.iter().enumerate() {
            if line.len() != width {
                return Err(Error::contract("ragged ascii scene"));
            }
            let row = height - 1 - text_row;
            for (col, ch) in line.chars().enumerate() {
                let i = row * width + col;
                match ch {
                    '#' => {
                        blocked[i] = true;
                        semantics[i] = class::WALL;
                    }
                    '.' => {}
                    c => {
                        let label = labels
                            .iter()
                            .find(|(k, _)| *k == c)
                            .map(|(_, l)| *l)
                            .ok_or_else(|| Error::contract(format!("unmapped scene glyph `{c}`")))?;
                        landmarks.push(Landmark {
                            label: label.to_string(),
                            position: Point::new(col as f64 * DEFAULT_RESOLUTION, row as f64 * DEFAULT_RESOLUTION),
                        });
                    }
                }
            }
        }
        let rooms = vec![Room {
            class: class::ROOM_FIRST,
            min: Cell::new(0, 0),
            max: Cell::new(width as i64 - 1, height as i64 - 1),
        }];
        Scene::from_grid(id, width, height, DEFAULT_RESOLUTION, blocked, semantics, rooms, landmarks)
    }

    fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::contract("resolution must be positive"));
        }
        if self.blocked.len() != n || self.semantics.len() != n {
            return Err(Error::contract("grid dimensions disagree"));
        }
        if let Some(c) = self.semantics.iter().find(|&&c| c as usize >= SEMANTIC_CLASSES) {
            return Err(Error::contract(format!("semantic class {c} out of range")));
        }
        for lm in &self.landmarks {
            if !lm.position.is_finite() || !self.is_free(self.cell_of(lm.position)) {
                return Err(Error::contract(format!("landmark `{}` is not on a free cell", lm.label)));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn landmark(&self, label: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.label == label)
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        Cell::new((p.x / self.resolution).round() as i64, (p.y / self.resolution).round() as i64)
    }

    pub fn center(&self, c: Cell) -> Point {
        Point::new(c.col as f64 * self.resolution, c.row as f64 * self.resolution)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as usize) < self.width && (c.row as usize) < self.height
    }

    fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c).then(|| c.row as usize * self.width + c.col as usize)
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.index(c).map_or(true, |i| self.blocked[i])
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_blocked(c)
    }

    pub fn is_free_point(&self, p: Point) -> bool {
        self.is_free(self.cell_of(p))
    }

    /// Semantic class of a cell; out-of-bounds reads as wall.
    pub fn semantic(&self, c: Cell) -> u8 {
        self.index(c).map_or(class::WALL, |i| self.semantics[i])
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i64)
            .flat_map(move |row| (0..self.width as i64).map(move |col| Cell::new(col, row)))
            .filter(move |&c| self.is_free(c))
    }

    pub fn room_of(&self, c: Cell) -> Option<usize> {
        self.rooms.iter().position(|r| r.contains(c))
    }
}
