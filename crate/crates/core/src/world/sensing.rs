use serde::{Deserialize, Serialize};

use super::{class, Scene};
use crate::geometry::{Heading, Point, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub fov_deg: f64,
    pub max_range: f64,
    pub ray_spacing_deg: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig { fov_deg: 90.0, max_range: 5.0, ray_spacing_deg: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleLandmark {
    pub label: String,
    /// Degrees relative to the heading, counter-clockwise positive.
    pub bearing: f64,
    pub range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRay {
    pub bearing: f64,
    pub range: f64,
    pub hit_class: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub visible_landmarks: Vec<VisibleLandmark>,
    pub depth_rays: Vec<DepthRay>,
}

impl Observation {
    pub fn sees(&self, label: &str) -> bool {
        self.visible_landmarks.iter().any(|l| l.label == label)
    }

    /// Cache key: sorted landmark labels plus the pose quantized to one
    /// cell and one turn step.
    pub fn digest(&self) -> String {
        let mut labels: Vec<&str> = self.visible_landmarks.iter().map(|l| l.label.as_str()).collect();
        labels.sort_unstable();
        let qx = (self.pose.x / 0.25).round() as i64;
        let qy = (self.pose.y / 0.25).round() as i64;
        let qh = (self.pose.heading.degrees() / 15.0).round() as i64 % 24;
        format!("{}@{qx},{qy},{qh}", labels.join("|"))
    }
}

// Fraction of a cell between ray-march samples.
const MARCH_SUBSTEPS: f64 = 8.0;

fn march_step(scene: &Scene) -> f64 {
    scene.resolution / MARCH_SUBSTEPS
}

/// Distance along a ray to the first blocked cell, with its class.
fn cast(scene: &Scene, origin: Point, angle_rad: f64, max_range: f64) -> (f64, Option<u8>) {
    let (s, c) = angle_rad.sin_cos();
    let step = march_step(scene);
    let n = (max_range / step).floor() as usize;
    for i in 1..=n {
        let d = i as f64 * step;
        let cell = scene.cell_of(Point::new(origin.x + c * d, origin.y + s * d));
        if scene.is_blocked(cell) {
            let hit = if scene.in_bounds(cell) { scene.semantic(cell) } else { class::WALL };
            return (d, Some(hit));
        }
    }
    (max_range, None)
}

/// True when no blocked cell lies on the segment strictly between `a` and `b`.
pub fn line_of_sight(scene: &Scene, a: Point, b: Point) -> bool {
    let d = a.distance(&b);
    let step = march_step(scene);
    let n = (d / step).floor() as usize;
    let target = scene.cell_of(b);
    (1..=n).all(|i| {
        let t = i as f64 * step / d;
        let cell = scene.cell_of(Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
        cell == target || scene.is_free(cell)
    })
}

fn wrap_bearing(deg: f64) -> f64 {
    let mut b = deg.rem_euclid(360.0);
    if b > 180.0 {
        b -= 360.0;
    }
    b
}

/// Landmarks in range, inside the field of view and unoccluded. A landmark
/// closer than half a cell is always visible with bearing 0.
pub fn visible_landmarks(scene: &Scene, pose: Pose, sensor: &SensorConfig) -> Vec<VisibleLandmark> {
    let origin = pose.position();
    scene
        .landmarks
        .iter()
        .filter_map(|lm| {
            let range = origin.distance(&lm.position);
            if range > sensor.max_range {
                return None;
            }
            if range < scene.resolution / 2.0 {
                return Some(VisibleLandmark { label: lm.label.clone(), bearing: 0.0, range });
            }
            let world = (lm.position.y - origin.y).atan2(lm.position.x - origin.x).to_degrees();
            let bearing = wrap_bearing(world - pose.heading.degrees());
            (bearing.abs() <= sensor.fov_deg / 2.0 && line_of_sight(scene, origin, lm.position))
                .then(|| VisibleLandmark { label: lm.label.clone(), bearing, range })
        })
        .collect()
}

pub fn observe(scene: &Scene, pose: Pose) -> Observation {
    observe_with(scene, pose, &SensorConfig::default())
}

pub fn observe_with(scene: &Scene, pose: Pose, sensor: &SensorConfig) -> Observation {
    let half = sensor.fov_deg / 2.0;
    let n_rays = (sensor.fov_deg / sensor.ray_spacing_deg).round() as usize + 1;
    let origin = pose.position();
    let depth_rays = (0..n_rays)
        .map(|i| {
            let bearing = -half + i as f64 * sensor.ray_spacing_deg;
            let angle = Heading::from_degrees(pose.heading.degrees() + bearing).radians();
            let (range, hit_class) = cast(scene, origin, angle, sensor.max_range);
            DepthRay { bearing, range, hit_class }
        })
        .collect();
    Observation { pose, visible_landmarks: visible_landmarks(scene, pose, sensor), depth_rays }
}
