//! Declarative 2D worlds: wall segments, moving actors and the ground-truth
//! contact test used for metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Point2};
use crate::kinematics::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    #[default]
    Solid,
    /// Invisible to lidar, visible to ultrasonic beams.
    Glass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(default)]
    pub material: Material,
}

impl Segment {
    pub fn new(a: Point2, b: Point2, material: Material) -> Self {
        Self {
            x1: a.x,
            y1: a.y,
            x2: b.x,
            y2: b.y,
            material,
        }
    }

    pub fn solid(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(Point2::new(x1, y1), Point2::new(x2, y2), Material::Solid)
    }

    pub fn glass(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(Point2::new(x1, y1), Point2::new(x2, y2), Material::Glass)
    }

    pub fn a(&self) -> Point2 {
        Point2::new(self.x1, self.y1)
    }

    pub fn b(&self) -> Point2 {
        Point2::new(self.x2, self.y2)
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        point_segment_distance(p, self.a(), self.b())
    }
}

/// Disc-shaped obstacle moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
}

impl Actor {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point2) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Spawn {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Spawn {
    pub fn state(&self) -> RobotState {
        RobotState::new(self.x, self.y, self.theta, 0.0, 0.0)
    }
}

/// World file contents (JSON, SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub bounds: Bounds,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub actors: Vec<Actor>,
    #[serde(default)]
    pub spawn: Spawn,
}

impl WorldModel {
    pub fn empty(bounds: Bounds) -> Self {
        Self {
            bounds,
            segments: Vec::new(),
            actors: Vec::new(),
            spawn: Spawn::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if ![b.x_min, b.y_min, b.x_max, b.y_max].iter().all(|v| v.is_finite())
            || b.x_min >= b.x_max
            || b.y_min >= b.y_max
        {
            return Err(Error::InvalidWorld("bounds must be finite and non-empty".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if ![s.x1, s.y1, s.x2, s.y2].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidWorld(format!("segment {i} is not finite")));
            }
        }
        for (i, a) in self.actors.iter().enumerate() {
            if ![a.x, a.y, a.radius, a.vx, a.vy].iter().all(|v| v.is_finite()) || a.radius <= 0.0 {
                return Err(Error::InvalidWorld(format!("actor {i} is invalid")));
            }
        }
        let sp = &self.spawn;
        if ![sp.x, sp.y, sp.theta].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidWorld("spawn is not finite".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let world: WorldModel =
            serde_json::from_str(text).map_err(|e| Error::InvalidWorld(e.to_string()))?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidWorld(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    /// Translates every actor by its velocity times `dt`.
    pub fn advance_actors(&self, dt: f64) -> WorldModel {
        let mut next = self.clone();
        next.advance_actors_in_place(dt);
        next
    }

    pub fn advance_actors_in_place(&mut self, dt: f64) {
        for a in &mut self.actors {
            a.x += a.vx * dt;
            a.y += a.vy * dt;
        }
    }
}

/// Disc model of the robot body used for planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Footprint {
    pub radius: f64,
    /// Extra margin used by collision prediction only.
    #[serde(default)]
    pub inflation: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self {
            radius: 0.35,
            inflation: 0.05,
        }
    }
}

impl Footprint {
    pub fn planning_radius(&self) -> f64 {
        self.radius + self.inflation
    }
}

/// Clearance between the robot disc (no inflation) and the nearest surface
/// or actor; negative when overlapping.
pub fn clearance(world: &WorldModel, footprint: &Footprint, pose: &RobotState) -> f64 {
    let p = pose.position();
    let walls = world
        .segments
        .iter()
        .map(|s| s.distance_to(p) - footprint.radius);
    let actors = world
        .actors
        .iter()
        .map(|a| p.dist(a.position()) - a.radius - footprint.radius);
    walls.chain(actors).fold(f64::INFINITY, f64::min)
}

/// Whether the robot body touches any wall (either material) or actor.
pub fn ground_truth_collision(world: &WorldModel, footprint: &Footprint, pose: &RobotState) -> bool {
    clearance(world, footprint, pose) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Bounds {
        Bounds {
            x_min: -10.0,
            y_min: -10.0,
            x_max: 10.0,
            y_max: 10.0,
        }
    }

    fn robot() -> Footprint {
        Footprint {
            radius: 0.3,
            inflation: 0.0,
        }
    }

    #[test]
    fn wall_contact() {
        let mut w = WorldModel::empty(bounds());
        w.segments.push(Segment::solid(0.2, -5.0, 0.2, 5.0));
        assert!(ground_truth_collision(&w, &robot(), &RobotState::default()));
        w.segments[0] = Segment::glass(0.4, -5.0, 0.4, 5.0);
        assert!(!ground_truth_collision(&w, &robot(), &RobotState::default()));
    }

    #[test]
    fn actor_contact() {
        let mut w = WorldModel::empty(bounds());
        w.actors.push(Actor {
            x: 0.5,
            y: 0.0,
            radius: 0.3,
            vx: 0.0,
            vy: 0.0,
        });
        assert!(ground_truth_collision(&w, &robot(), &RobotState::default()));
    }

    #[test]
    fn actors_move_linearly() {
        let mut w = WorldModel::empty(bounds());
        w.actors.push(Actor {
            x: 5.0,
            y: 0.0,
            radius: 0.3,
            vx: -1.0,
            vy: 0.0,
        });
        let once = w.advance_actors(0.1);
        assert!((once.actors[0].x - 4.9).abs() < 1e-12);
        assert_eq!(w.advance_actors(0.0), w);
        let twice = once.advance_actors(0.1);
        let single = w.advance_actors(0.2);
        assert!((twice.actors[0].x - single.actors[0].x).abs() < 1e-12);
    }

    #[test]
    fn world_json_round_trip() {
        let text = r#"{
            "bounds": {"x_min": -1, "y_min": -1, "x_max": 4, "y_max": 3},
            "segments": [{"x1": 2, "y1": -1, "x2": 2, "y2": 1, "material": "glass"}],
            "actors": [{"x": 3, "y": 0, "radius": 0.25, "vx": -0.5, "vy": 0}],
            "spawn": {"x": 0, "y": 0, "theta": 0}
        }"#;
        let w = WorldModel::from_json(text).unwrap();
        assert_eq!(w.segments[0].material, Material::Glass);
        assert_eq!(WorldModel::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn rejects_bad_world() {
        let text = r#"{"bounds": {"x_min": 1, "y_min": 0, "x_max": 0, "y_max": 1}}"#;
        assert!(WorldModel::from_json(text).is_err());
        assert!(WorldModel::from_json("{").is_err());
    }
}
