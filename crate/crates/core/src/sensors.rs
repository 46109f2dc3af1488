//! Simulated 360-beam lidar and three-beam ultrasonic array, plus
//! registration of returns into an ego-frame obstacle point set.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ray_disc, ray_segment, Point2};
use crate::kinematics::RobotState;
use crate::world::{Material, WorldModel};

pub const LIDAR_BEAMS: usize = 360;
pub const ULTRASONIC_BEARINGS_DEG: [f64; 3] = [-45.0, 0.0, 45.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Range reported for "no return". Not a measured hardware value.
    pub max_range: f64,
    /// Half-angle of each ultrasonic cone; 0 means a single exact ray.
    pub ultrasonic_half_angle_deg: f64,
    /// Standard deviation of additive Gaussian range noise; 0 disables it.
    pub noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            max_range: 6.0,
            ultrasonic_half_angle_deg: 7.5,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorScan {
    /// Index `i` is the range at bearing `i` degrees in the robot frame.
    pub lidar: Vec<f64>,
    /// Ranges at bearings -45, 0 and +45 degrees.
    pub ultrasonic: [f64; 3],
    pub max_range: f64,
}

impl SensorScan {
    /// A scan with no returns at all.
    pub fn empty(max_range: f64) -> Self {
        Self {
            lidar: vec![max_range; LIDAR_BEAMS],
            ultrasonic: [max_range; 3],
            max_range,
        }
    }
}

/// Registered obstacle points in the robot ego frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub points: Vec<Point2>,
}

impl ObstacleSet {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

#[derive(Clone, Copy)]
enum Visibility {
    SolidOnly,
    All,
}

fn cast(world: &WorldModel, origin: Point2, bearing: f64, max_range: f64, vis: Visibility) -> f64 {
    let dir = Point2::new(bearing.cos(), bearing.sin());
    let mut best = max_range;
    for seg in &world.segments {
        if matches!(vis, Visibility::SolidOnly) && seg.material == Material::Glass {
            continue;
        }
        if let Some(t) = ray_segment(origin, dir, seg.a(), seg.b()) {
            best = best.min(t);
        }
    }
    for actor in &world.actors {
        if let Some(t) = ray_disc(origin, dir, actor.position(), actor.radius) {
            best = best.min(t);
        }
    }
    // Ranges live in (0, max_range].
    best.max(1e-6)
}

/// First-hit ranges for the 360 lidar beams. Glass is transparent.
pub fn raycast_lidar(world: &WorldModel, pose: &RobotState, max_range: f64) -> Vec<f64> {
    let origin = pose.position();
    (0..LIDAR_BEAMS)
        .map(|i| {
            let bearing = pose.theta + (i as f64).to_radians();
            cast(world, origin, bearing, max_range, Visibility::SolidOnly)
        })
        .collect()
}

/// Minimum return over 1-degree rays inside each ultrasonic cone. Sees every
/// material.
pub fn raycast_ultrasonic(
    world: &WorldModel,
    pose: &RobotState,
    max_range: f64,
    half_angle_deg: f64,
) -> [f64; 3] {
    let origin = pose.position();
    let steps = half_angle_deg.max(0.0).floor() as i32;
    ULTRASONIC_BEARINGS_DEG.map(|center| {
        (-steps..=steps)
            .map(|k| {
                let bearing = pose.theta + (center + k as f64).to_radians();
                cast(world, origin, bearing, max_range, Visibility::All)
            })
            .fold(max_range, f64::min)
    })
}

/// Full sensor sweep at `pose`, with optional range noise.
pub fn scan<R: Rng + ?Sized>(
    world: &WorldModel,
    pose: &RobotState,
    cfg: &SensorConfig,
    rng: Option<&mut R>,
) -> SensorScan {
    let mut lidar = raycast_lidar(world, pose, cfg.max_range);
    let mut ultrasonic =
        raycast_ultrasonic(world, pose, cfg.max_range, cfg.ultrasonic_half_angle_deg);
    if let (Some(rng), true) = (rng, cfg.noise_sigma > 0.0) {
        let noise = Normal::new(0.0, cfg.noise_sigma).expect("finite sigma");
        let max = cfg.max_range;
        for r in lidar.iter_mut().chain(ultrasonic.iter_mut()) {
            if *r < max {
                *r = (*r + noise.sample(rng)).clamp(1e-6, max);
            }
        }
    }
    SensorScan {
        lidar,
        ultrasonic,
        max_range: cfg.max_range,
    }
}

/// Converts every returning beam into an ego-frame point. Max-range readings
/// are dropped; lidar and ultrasonic points are unioned.
pub fn register_obstacles(scan: &SensorScan) -> ObstacleSet {
    let lidar = scan
        .lidar
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < scan.max_range)
        .map(|(i, r)| Point2::from_polar(*r, (i as f64).to_radians()));
    let ultrasonic = scan
        .ultrasonic
        .iter()
        .zip(ULTRASONIC_BEARINGS_DEG)
        .filter(|(r, _)| **r < scan.max_range)
        .map(|(r, deg)| Point2::from_polar(*r, deg.to_radians()));
    ObstacleSet::new(lidar.chain(ultrasonic).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Actor, Bounds, Segment};
    use std::f64::consts::PI;

    const MAX: f64 = 6.0;

    fn world_with(segments: Vec<Segment>) -> WorldModel {
        let mut w = WorldModel::empty(Bounds {
            x_min: -10.0,
            y_min: -10.0,
            x_max: 10.0,
            y_max: 10.0,
        });
        w.segments = segments;
        w
    }

    fn exact() -> SensorConfig {
        SensorConfig {
            max_range: MAX,
            ultrasonic_half_angle_deg: 0.0,
            noise_sigma: 0.0,
        }
    }

    fn scan_of(w: &WorldModel, pose: &RobotState, cfg: &SensorConfig) -> SensorScan {
        scan::<rand::rngs::ThreadRng>(w, pose, cfg, None)
    }

    #[test]
    fn empty_world_has_no_returns() {
        let w = world_with(vec![]);
        let s = scan_of(&w, &RobotState::default(), &SensorConfig::default());
        assert!(s.lidar.iter().all(|r| *r == MAX));
        assert_eq!(s.ultrasonic, [MAX; 3]);
        assert!(register_obstacles(&s).is_empty());
    }

    #[test]
    fn solid_wall_ahead() {
        let w = world_with(vec![Segment::solid(2.0, -100.0, 2.0, 100.0)]);
        let s = scan_of(&w, &RobotState::default(), &SensorConfig::default());
        assert!((s.lidar[0] - 2.0).abs() < 1e-12);
        assert_eq!(s.lidar[90], MAX);
        assert!((s.ultrasonic[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn glass_is_lidar_transparent() {
        let w = world_with(vec![Segment::glass(2.0, -100.0, 2.0, 100.0)]);
        let s = scan_of(&w, &RobotState::default(), &SensorConfig::default());
        assert_eq!(s.lidar[0], MAX);
        assert!((s.ultrasonic[1] - 2.0).abs() < 1e-12);
        let obstacles = register_obstacles(&s);
        assert!(!obstacles.is_empty());
        let lidar_only = SensorScan {
            ultrasonic: [MAX; 3],
            ..s
        };
        assert!(register_obstacles(&lidar_only).is_empty());
    }

    #[test]
    fn actor_blocks_lidar() {
        let mut w = world_with(vec![]);
        w.actors.push(Actor {
            x: 3.0,
            y: 0.0,
            radius: 0.5,
            vx: 0.0,
            vy: 0.0,
        });
        let s = scan_of(&w, &RobotState::default(), &exact());
        assert!((s.lidar[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn registration_examples() {
        let mut s = SensorScan::empty(MAX);
        s.lidar[0] = 2.0;
        assert_eq!(register_obstacles(&s).points, vec![Point2::new(2.0, 0.0)]);
        let mut s = SensorScan::empty(MAX);
        s.lidar[90] = 1.0;
        s.ultrasonic[1] = 3.0;
        let pts = register_obstacles(&s).points;
        assert_eq!(pts.len(), 2);
        assert!(pts[0].dist(Point2::new(0.0, 1.0)) < 1e-12);
        assert_eq!(pts[1], Point2::new(3.0, 0.0));
    }

    #[test]
    fn registered_points_lie_on_geometry() {
        let w = world_with(vec![
            Segment::solid(2.0, -3.0, 2.5, 3.0),
            Segment::solid(-4.0, -1.0, -1.0, -4.0),
            Segment::glass(-2.0, 1.0, 1.0, 2.5),
        ]);
        let pose = RobotState::new(0.3, -0.2, 0.4, 0.0, 0.0);
        let s = scan_of(&w, &pose, &exact());
        let pts = register_obstacles(&s);
        assert!(!pts.is_empty());
        for p in &pts.points {
            let world_p = p.to_world(pose.position(), pose.theta);
            let d = w
                .segments
                .iter()
                .map(|s| s.distance_to(world_p))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "point {world_p:?} is {d} m off geometry");
        }
    }

    #[test]
    fn scan_is_rotation_equivariant() {
        let w = world_with(vec![
            Segment::solid(2.0, -3.0, 2.5, 3.0),
            Segment::solid(-4.0, -1.0, -1.0, -4.0),
        ]);
        let pose = RobotState::new(0.5, 0.5, 0.3, 0.0, 0.0);
        let base = scan_of(&w, &pose, &exact());
        let angle = PI / 3.0;
        let rot = |x: f64, y: f64| Point2::new(x, y).rotate(angle);
        let rotated = world_with(
            w.segments
                .iter()
                .map(|s| Segment::new(rot(s.x1, s.y1), rot(s.x2, s.y2), s.material))
                .collect(),
        );
        let p = rot(pose.x, pose.y);
        let rpose = RobotState::new(p.x, p.y, pose.theta + angle, 0.0, 0.0);
        let other = scan_of(&rotated, &rpose, &exact());
        for (a, b) in base.lidar.iter().zip(&other.lidar) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_keeps_ranges_valid() {
        use rand::SeedableRng;
        let w = world_with(vec![Segment::solid(0.5, -100.0, 0.5, 100.0)]);
        let cfg = SensorConfig {
            noise_sigma: 1.0,
            ..SensorConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = scan(&w, &RobotState::default(), &cfg, Some(&mut rng));
        assert!(s.lidar.iter().all(|r| *r > 0.0 && *r <= MAX));
    }

    #[test]
    fn synthetic_scan_round_trip() {
        // Points placed on exact beam bearings are recovered by registration.
        let mut s = SensorScan::empty(MAX);
        let mut expected = Vec::new();
        for (i, r) in [(0usize, 1.5), (45, 2.25), (200, 0.75), (359, 5.0)] {
            s.lidar[i] = r;
            expected.push(Point2::from_polar(r, (i as f64).to_radians()));
        }
        assert_eq!(register_obstacles(&s).points, expected);
    }
}
