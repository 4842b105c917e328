//! Poses, the discrete action set and path arithmetic.
//!
//! Frame convention: heading 0° points along +x and angles grow
//! counter-clockwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance covered by one FORWARD action, in meters.
pub const FORWARD_STEP: f64 = 0.25;
/// Rotation of one TURN_LEFT / TURN_RIGHT action, in degrees.
pub const TURN_STEP_DEG: f64 = 15.0;

const MICRO: i64 = 1_000_000;
const FULL_TURN: i64 = 360 * MICRO;
const TURN_STEP: i64 = 15 * MICRO;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        euclidean(*self, *other)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// A heading in `[0, 360)` degrees.
///
/// Stored as integer micro-degrees so that 15° turns compose exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Heading(i64);

impl Heading {
    pub fn from_degrees(deg: f64) -> Self {
        let micro = (deg * MICRO as f64).round() as i64;
        Heading(micro.rem_euclid(FULL_TURN))
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 / MICRO as f64
    }

    pub fn radians(self) -> f64 {
        self.degrees().to_radians()
    }

    pub fn micro_degrees(self) -> i64 {
        self.0
    }

    fn rotated(self, delta_micro: i64) -> Self {
        Heading((self.0 + delta_micro).rem_euclid(FULL_TURN))
    }

    /// Unit direction vector; exact on the four axis headings.
    pub fn unit(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            x if x == 90 * MICRO => (0.0, 1.0),
            x if x == 180 * MICRO => (-1.0, 0.0),
            x if x == 270 * MICRO => (0.0, -1.0),
            _ => {
                let r = self.radians();
                (r.cos(), r.sin())
            }
        }
    }

    /// Signed smallest rotation from `self` to `target`, in degrees, in `(-180, 180]`.
    pub fn delta_to(self, target: Heading) -> f64 {
        let mut d = (target.0 - self.0).rem_euclid(FULL_TURN);
        if d > FULL_TURN / 2 {
            d -= FULL_TURN;
        }
        d as f64 / MICRO as f64
    }
}

impl Serialize for Heading {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Heading {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let deg = f64::deserialize(d)?;
        if !deg.is_finite() {
            return Err(serde::de::Error::custom("heading must be finite"));
        }
        Ok(Heading::from_degrees(deg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading_deg: f64) -> Self {
        Pose { x, y, heading: Heading::from_degrees(heading_deg) }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
    TurnBackLastStep,
}

impl Action {
    /// The four actions a policy may emit, in probability-vector order.
    pub const POLICY_ACTIONS: [Action; 4] =
        [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn index(self) -> usize {
        match self {
            Action::Forward => 0,
            Action::TurnLeft => 1,
            Action::TurnRight => 2,
            Action::Stop => 3,
            Action::TurnBackLastStep => 4,
        }
    }

    /// Inverse of [`Action::index`] over the policy actions.
    pub fn from_policy_index(i: usize) -> Option<Action> {
        Self::POLICY_ACTIONS.get(i).copied()
    }

    pub fn is_motion(self) -> bool {
        !matches!(self, Action::Stop | Action::TurnBackLastStep)
    }
}

/// Pure pose update for the four policy actions.
///
/// Rollback needs the simulator's pose history and is rejected here.
pub fn apply_action(pose: Pose, action: Action) -> Result<Pose> {
    Ok(match action {
        Action::Forward => {
            let (dx, dy) = pose.heading.unit();
            Pose { x: pose.x + FORWARD_STEP * dx, y: pose.y + FORWARD_STEP * dy, ..pose }
        }
        Action::TurnLeft => Pose { heading: pose.heading.rotated(TURN_STEP), ..pose },
        Action::TurnRight => Pose { heading: pose.heading.rotated(-TURN_STEP), ..pose },
        Action::Stop => pose,
        Action::TurnBackLastStep => {
            return Err(Error::contract("TURN_BACK_LAST_STEP has no pure geometric effect"))
        }
    })
}

pub fn euclidean(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// An ordered, non-empty polyline.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Path(Vec<Point>);

impl Path {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::contract("path must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::contract(format!("path point {i} is not finite")));
        }
        Ok(Path(points))
    }

    pub fn single(p: Point) -> Self {
        Path(vec![p])
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Point {
        self.0[0]
    }

    pub fn last(&self) -> Point {
        self.0[self.0.len() - 1]
    }

    pub fn push(&mut self, p: Point) {
        self.0.push(p);
    }

    pub fn length(&self) -> f64 {
        path_length(self)
    }

    /// Concatenates paths end to end, keeping every node.
    pub fn concat<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<Path> {
        let points: Vec<Point> = paths.into_iter().flat_map(|p| p.0.iter().copied()).collect();
        Path::new(points)
    }
}

impl<'de> Deserialize<'de> for Path {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<Point>::deserialize(d)?;
        Path::new(points).map_err(serde::de::Error::custom)
    }
}

pub fn path_length(path: &Path) -> f64 {
    path.0.windows(2).map(|w| euclidean(w[0], w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forward_moves_quarter_meter_along_heading() {
        let p = apply_action(Pose::new(0.0, 0.0, 0.0), Action::Forward).unwrap();
        assert_eq!(p, Pose::new(0.25, 0.0, 0.0));
        let p = apply_action(Pose::new(0.0, 0.0, 90.0), Action::Forward).unwrap();
        assert_eq!(p, Pose::new(0.0, 0.25, 90.0));
    }

    #[test]
    fn turn_left_adds_fifteen_degrees() {
        let p = apply_action(Pose::new(1.0, 1.0, 0.0), Action::TurnLeft).unwrap();
        assert_eq!(p, Pose::new(1.0, 1.0, 15.0));
        let p = apply_action(Pose::new(1.0, 1.0, 0.0), Action::TurnRight).unwrap();
        assert_eq!(p.heading.degrees(), 345.0);
    }

    #[test]
    fn stop_is_identity() {
        let p = Pose::new(3.0, 4.0, 90.0);
        assert_eq!(apply_action(p, Action::Stop).unwrap(), p);
    }

    #[test]
    fn rollback_is_not_geometry() {
        let err = apply_action(Pose::new(0.0, 0.0, 0.0), Action::TurnBackLastStep).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn heading_normalizes_negative_and_large_angles() {
        assert_eq!(Heading::from_degrees(-15.0).degrees(), 345.0);
        assert_eq!(Heading::from_degrees(720.0).degrees(), 0.0);
        assert_eq!(Heading::from_degrees(0.0).delta_to(Heading::from_degrees(270.0)), -90.0);
        assert_eq!(Heading::from_degrees(0.0).delta_to(Heading::from_degrees(180.0)), 180.0);
    }

    #[test]
    fn path_lengths() {
        let p = |v: &[(f64, f64)]| Path::new(v.iter().map(|&t| t.into()).collect()).unwrap();
        assert_eq!(path_length(&p(&[(0.0, 0.0)])), 0.0);
        assert_eq!(path_length(&p(&[(0.0, 0.0), (3.0, 4.0)])), 5.0);
        assert_eq!(path_length(&p(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])), 2.0);
        assert!(Path::new(vec![]).is_err());
        assert!(Path::new(vec![Point::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(Point::new(0.0, 0.0), Point::new(0.0, 0.0)), 0.0);
        assert_eq!(euclidean(Point::new(0.0, 0.0), Point::new(1.0, 0.0)), 1.0);
        assert_eq!(euclidean(Point::new(1.0, 2.0), Point::new(4.0, 6.0)), 5.0);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-50.0..50.0f64, -50.0..50.0f64, -720.0..720.0f64).prop_map(|(x, y, h)| Pose::new(x, y, h))
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point::new(x, y))
    }

    proptest! {
        #[test]
        fn left_then_right_is_identity(p in arb_pose()) {
            let q = apply_action(apply_action(p, Action::TurnLeft).unwrap(), Action::TurnRight).unwrap();
            prop_assert_eq!(q, p);
        }

        #[test]
        fn twenty_four_left_turns_restore_heading(p in arb_pose()) {
            let mut q = p;
            for _ in 0..24 {
                q = apply_action(q, Action::TurnLeft).unwrap();
            }
            prop_assert_eq!(q.heading, p.heading);
            prop_assert!(q.heading.degrees() >= 0.0 && q.heading.degrees() < 360.0);
        }

        #[test]
        fn path_length_is_rigid_invariant(
            pts in prop::collection::vec(arb_point(), 1..12),
            theta in 0.0..std::f64::consts::TAU,
            tx in -20.0..20.0f64,
            ty in -20.0..20.0f64,
        ) {
            let (s, c) = theta.sin_cos();
            let moved: Vec<Point> = pts
                .iter()
                .map(|p| Point::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty))
                .collect();
            let a = path_length(&Path::new(pts).unwrap());
            let b = path_length(&Path::new(moved).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            prop_assert!(euclidean(a, c) <= euclidean(a, b) + euclidean(b, c) + 1e-9);
            prop_assert_eq!(euclidean(a, b), euclidean(b, a));
        }
    }
}
