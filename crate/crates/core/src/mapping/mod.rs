//! Persistent per-tour occupancy and semantic maps, egocentric crops and
//! the map encoder.

mod encoder;

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Pose};
use crate::tensor::Tensor;
use crate::world::{Cell, Observation, DEFAULT_RESOLUTION, SEMANTIC_CLASSES};

pub use encoder::{cbraa_block, encode_map, BlockWeights, MapEmbedding, MapEncoderWeights};

pub const CROP_SIZE: usize = 64;
const CROP_CENTER: i64 = 32;
const GROW_MARGIN: i64 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Unknown = 0,
    Free = 1,
    Blocked = 2,
}

/// Map in world-cell coordinates; grows to cover whatever is observed.
#[derive(Clone, Debug, PartialEq)]
pub struct TourMap {
    resolution: f64,
    min_col: i64,
    min_row: i64,
    width: usize,
    height: usize,
    occupancy: Vec<CellState>,
    /// Bit `c` set when a hit of class `c` landed in the cell.
    semantics: Vec<u16>,
    known: usize,
}

impl Default for TourMap {
    fn default() -> Self {
        Self::new(DEFAULT_RESOLUTION)
    }
}

impl TourMap {
    pub fn new(resolution: f64) -> Self {
        TourMap {
            resolution,
            min_col: 0,
            min_row: 0,
            width: 0,
            height: 0,
            occupancy: Vec::new(),
            semantics: Vec::new(),
            known: 0,
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn known_cell_count(&self) -> usize {
        self.known
    }

    /// Cell bounds as `(min_col, min_row, width, height)`.
    pub fn bounds(&self) -> (i64, i64, usize, usize) {
        (self.min_col, self.min_row, self.width, self.height)
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        Cell::new((p.x / self.resolution).round() as i64, (p.y / self.resolution).round() as i64)
    }

    fn index(&self, c: Cell) -> Option<usize> {
        let (dc, dr) = (c.col - self.min_col, c.row - self.min_row);
        (dc >= 0 && dr >= 0 && (dc as usize) < self.width && (dr as usize) < self.height)
            .then(|| dr as usize * self.width + dc as usize)
    }

    pub fn state(&self, c: Cell) -> CellState {
        self.index(c).map_or(CellState::Unknown, |i| self.occupancy[i])
    }

    pub fn semantic_mask(&self, c: Cell) -> u16 {
        self.index(c).map_or(0, |i| self.semantics[i])
    }

    /// All cells with a known state, as `(cell, state, semantic mask)`.
    pub fn known_cells(&self) -> impl Iterator<Item = (Cell, CellState, u16)> + '_ {
        self.occupancy.iter().enumerate().filter(|(_, s)| **s != CellState::Unknown).map(|(i, s)| {
            let c = Cell::new(self.min_col + (i % self.width) as i64, self.min_row + (i / self.width) as i64);
            (c, *s, self.semantics[i])
        })
    }

    fn ensure(&mut self, lo: Cell, hi: Cell) {
        if self.width > 0 && self.index(lo).is_some() && self.index(hi).is_some() {
            return;
        }
        let (old_c, old_r) = (self.min_col, self.min_row);
        let (old_w, old_h) = (self.width as i64, self.height as i64);
        let (mut c0, mut r0, mut c1, mut r1) = (lo.col - GROW_MARGIN, lo.row - GROW_MARGIN, hi.col + GROW_MARGIN, hi.row + GROW_MARGIN);
        if self.width > 0 {
            c0 = c0.min(old_c);
            r0 = r0.min(old_r);
            c1 = c1.max(old_c + old_w - 1);
            r1 = r1.max(old_r + old_h - 1);
        }
        let (w, h) = ((c1 - c0 + 1) as usize, (r1 - r0 + 1) as usize);
        let mut occ = vec![CellState::Unknown; w * h];
        let mut sem = vec![0u16; w * h];
        for r in 0..old_h {
            for c in 0..old_w {
                let src = (r * old_w + c) as usize;
                let dst = ((r + old_r - r0) as usize) * w + (c + old_c - c0) as usize;
                occ[dst] = self.occupancy[src];
                sem[dst] = self.semantics[src];
            }
        }
        self.min_col = c0;
        self.min_row = r0;
        self.width = w;
        self.height = h;
        self.occupancy = occ;
        self.semantics = sem;
    }

    fn mark(&mut self, c: Cell, state: CellState) {
        let i = self.index(c).expect("map grown before marking");
        let old = self.occupancy[i];
        if old == CellState::Unknown {
            self.known += 1;
        }
        if old != CellState::Blocked {
            self.occupancy[i] = state;
        }
    }

    /// Projects depth rays: cells before the hit become free, the hit cell
    /// becomes blocked and records the hit class. Known cells never become
    /// unknown again and blocked wins over free.
    pub fn integrate_observation(&mut self, obs: &Observation) {
        let origin = obs.pose.position();
        let reach = obs.depth_rays.iter().map(|r| r.range).fold(0.0, f64::max) / self.resolution;
        let here = self.cell_of(origin);
        let pad = reach.ceil() as i64 + 1;
        self.ensure(Cell::new(here.col - pad, here.row - pad), Cell::new(here.col + pad, here.row + pad));
        self.mark(here, CellState::Free);
        let step = self.resolution / 8.0;
        for ray in &obs.depth_rays {
            let angle = (obs.pose.heading.degrees() + ray.bearing).to_radians();
            let (s, c) = angle.sin_cos();
            let res = self.resolution;
            let at = |d: f64| {
                let (x, y) = (origin.x + c * d, origin.y + s * d);
                Cell::new((x / res).round() as i64, (y / res).round() as i64)
            };
            let hit_cell = ray.hit_class.map(|_| at(ray.range));
            let n = (ray.range / step).round() as usize;
            for i in 1..n {
                let cell = at(i as f64 * step);
                if Some(cell) != hit_cell {
                    self.mark(cell, CellState::Free);
                }
            }
            if let (Some(cell), Some(class)) = (hit_cell, ray.hit_class) {
                self.mark(cell, CellState::Blocked);
                let i = self.index(cell).unwrap();
                self.semantics[i] |= 1 << class;
            }
        }
    }

    /// Egocentric 64x64 window, agent at (32, 32) facing up, nearest-cell
    /// sampling. Occupancy reads blocked 0, unknown 0.5, free 1.
    pub fn crop_ego(&self, pose: Pose) -> EgoCrop {
        let mut occ = Tensor::zeros(&[1, CROP_SIZE, CROP_SIZE]);
        let mut sem = Tensor::zeros(&[SEMANTIC_CLASSES, CROP_SIZE, CROP_SIZE]);
        let (fx, fy) = pose.heading.unit();
        let (rx, ry) = (fy, -fx);
        let plane = CROP_SIZE * CROP_SIZE;
        for r in 0..CROP_SIZE {
            let f = (CROP_CENTER - r as i64) as f64 * self.resolution;
            for c in 0..CROP_SIZE {
                let s = (c as i64 - CROP_CENTER) as f64 * self.resolution;
                let cell = self.cell_of(Point::new(pose.x + f * fx + s * rx, pose.y + f * fy + s * ry));
                let i = r * CROP_SIZE + c;
                occ.data_mut()[i] = match self.state(cell) {
                    CellState::Blocked => 0.0,
                    CellState::Unknown => 0.5,
                    CellState::Free => 1.0,
                };
                let mask = self.semantic_mask(cell);
                for k in 0..SEMANTIC_CLASSES {
                    if mask & (1 << k) != 0 {
                        sem.data_mut()[k * plane + i] = 1.0;
                    }
                }
            }
        }
        EgoCrop { occ, sem, pose_used: pose }
    }

    /// Grayscale PGM (blocked 0, unknown 128, free 255, top row = largest y)
    /// plus a JSON sidecar with the anchoring.
    pub fn export_snapshot(&self, pgm_path: impl AsRef<FsPath>, json_path: impl AsRef<FsPath>) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for r in (0..self.height).rev() {
            for c in 0..self.width {
                bytes.push(match self.occupancy[r * self.width + c] {
                    CellState::Blocked => 0,
                    CellState::Unknown => 128,
                    CellState::Free => 255,
                });
            }
        }
        let pgm_path = pgm_path.as_ref();
        std::fs::write(pgm_path, bytes).map_err(|e| Error::io(pgm_path, e))?;
        let meta = serde_json::json!({
            "min_col": self.min_col,
            "min_row": self.min_row,
            "width": self.width,
            "height": self.height,
            "resolution": self.resolution,
            "known_cell_count": self.known,
        });
        let json_path = json_path.as_ref();
        std::fs::write(json_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(json_path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoCrop {
    /// 1x64x64.
    pub occ: Tensor,
    /// 13x64x64.
    pub sem: Tensor,
    pub pose_used: Pose,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Action;
    use crate::world::{
        generate_reference_episode, generate_scene, observe, reference_poses, step, AgentState, DepthRay, SceneSpec,
    };

    fn single_ray(range: f64, hit: Option<u8>) -> Observation {
        Observation {
            pose: Pose::new(0.0, 0.0, 0.0),
            visible_landmarks: vec![],
            depth_rays: vec![DepthRay { bearing: 0.0, range, hit_class: hit }],
        }
    }

    #[test]
    fn ray_marks_free_then_blocked() {
        let mut m = TourMap::default();
        m.integrate_observation(&single_ray(2.0, Some(0)));
        for col in 0..8 {
            assert_eq!(m.state(Cell::new(col, 0)), CellState::Free, "col {col}");
        }
        assert_eq!(m.state(Cell::new(8, 0)), CellState::Blocked);
        assert_eq!(m.semantic_mask(Cell::new(8, 0)), 1);
        assert_eq!(m.state(Cell::new(9, 0)), CellState::Unknown);
        assert_eq!(m.known_cell_count(), 9);
    }

    #[test]
    fn integration_is_idempotent() {
        let mut a = TourMap::default();
        a.integrate_observation(&single_ray(2.0, Some(3)));
        let b = a.clone();
        a.integrate_observation(&single_ray(2.0, Some(3)));
        assert_eq!(a, b);
    }

    #[test]
    fn blank_map_crops_to_unknown() {
        let crop = TourMap::default().crop_ego(Pose::new(3.0, -2.0, 37.0));
        assert_eq!(crop.occ.shape(), &[1, 64, 64]);
        assert_eq!(crop.sem.shape(), &[13, 64, 64]);
        assert!(crop.occ.data().iter().all(|&v| v == 0.5));
        assert!(crop.sem.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wall_ahead_appears_above_center() {
        let mut m = TourMap::default();
        m.integrate_observation(&single_ray(1.0, Some(0)));
        let crop = m.crop_ego(Pose::new(0.0, 0.0, 0.0));
        // 1 m at 0.25 m per cell: 4 rows above the agent
        assert_eq!(crop.occ.at3(0, 28, 32), 0.0);
        assert_eq!(crop.sem.at3(0, 28, 32), 1.0);
        assert_eq!(crop.occ.at3(0, 30, 32), 1.0);
        assert_eq!(crop.occ.at3(0, 32, 32), 1.0);
        // facing the other way, the wall is behind
        let back = m.crop_ego(Pose::new(0.0, 0.0, 180.0));
        assert_eq!(back.occ.at3(0, 36, 32), 0.0);
    }

    #[test]
    fn quarter_turn_rotates_the_crop() {
        let scene = generate_scene(5, &SceneSpec::default()).unwrap();
        let ep = generate_reference_episode(&scene, 2, 1).unwrap();
        let mut m = TourMap::default();
        for rp in reference_poses(&scene, &ep).iter().take(40) {
            m.integrate_observation(&observe(&scene, rp.pose));
        }
        let p = ep.start.position();
        let c0 = m.crop_ego(Pose::new(p.x, p.y, 0.0));
        let c90 = m.crop_ego(Pose::new(p.x, p.y, 90.0));
        for r in 0..64 {
            for c in 1..64 {
                assert_eq!(c90.occ.at3(0, r, c), c0.occ.at3(0, 64 - c, r), "({r},{c})");
            }
        }
    }

    #[test]
    fn known_count_matches_recount_and_never_drops() {
        let scene = generate_scene(9, &SceneSpec::default()).unwrap();
        let ep = generate_reference_episode(&scene, 3, 2).unwrap();
        let mut m = TourMap::default();
        let mut state = AgentState::new(ep.start);
        let mut last = 0;
        for (i, rp) in reference_poses(&scene, &ep).iter().enumerate() {
            m.integrate_observation(&observe(&scene, rp.pose));
            assert!(m.known_cell_count() >= last);
            last = m.known_cell_count();
            if i % 7 == 0 {
                state = step(&scene, &state, Action::TurnLeft).unwrap().0;
                m.integrate_observation(&observe(&scene, state.pose));
            }
        }
        let recount = m.known_cells().count();
        assert_eq!(recount, m.known_cell_count());
        // no semantic bit on an unknown cell
        assert!(m.known_cells().all(|(_, s, mask)| mask == 0 || s == CellState::Blocked));
    }

    #[test]
    fn snapshot_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = TourMap::default();
        m.integrate_observation(&single_ray(2.0, Some(0)));
        m.export_snapshot(dir.path().join("m.pgm"), dir.path().join("m.json")).unwrap();
        let bytes = std::fs::read(dir.path().join("m.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(meta["known_cell_count"], 9);
    }
}
