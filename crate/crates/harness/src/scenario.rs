//! Scenario files: a world reference, a nominal spawn with heading jitter, a
//! success predicate and an episode cap.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use safer_core::geometry::{point_in_polygon, Point2};
use safer_core::kinematics::RobotState;
use safer_core::world::{Spawn, WorldModel};

use crate::driver::DriverSpec;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SuccessPredicate {
    /// Robot center inside `polygon` before any contact.
    EnterRoomNoCollision { polygon: Vec<[f64; 2]> },
    /// Progress along `direction` past `line` (a coordinate along that
    /// direction) without contact.
    PassHumanContinueHallway { direction: [f64; 2], line: f64 },
    /// Every waypoint reached in order, within `tolerance`.
    RouteCompletion { waypoints: Vec<[f64; 2]>, tolerance: f64 },
    /// Drive until the step cap; contacts are counted and undone rather than
    /// ending the episode.
    TimeBoxedCrashSession,
}

impl SuccessPredicate {
    pub fn id(&self) -> &'static str {
        match self {
            SuccessPredicate::EnterRoomNoCollision { .. } => "enter-room-no-collision",
            SuccessPredicate::PassHumanContinueHallway { .. } => "pass-human-continue-hallway",
            SuccessPredicate::RouteCompletion { .. } => "route-completion",
            SuccessPredicate::TimeBoxedCrashSession => "time-boxed-crash-session",
        }
    }

    pub fn is_crash_session(&self) -> bool {
        matches!(self, SuccessPredicate::TimeBoxedCrashSession)
    }
}

/// Progress through a success predicate over one episode.
#[derive(Debug, Clone, Default)]
pub struct SuccessTracker {
    next_waypoint: usize,
}

impl SuccessTracker {
    /// Whether the episode has succeeded at `pose`.
    pub fn update(&mut self, pred: &SuccessPredicate, pose: &RobotState) -> bool {
        let p = pose.position();
        match pred {
            SuccessPredicate::EnterRoomNoCollision { polygon } => {
                let poly: Vec<Point2> = polygon.iter().map(|q| Point2::new(q[0], q[1])).collect();
                point_in_polygon(p, &poly)
            }
            SuccessPredicate::PassHumanContinueHallway { direction, line } => {
                let d = Point2::new(direction[0], direction[1]);
                p.dot(d) / d.norm() >= *line
            }
            SuccessPredicate::RouteCompletion {
                waypoints,
                tolerance,
            } => {
                while let Some(w) = waypoints.get(self.next_waypoint) {
                    if p.dist(Point2::new(w[0], w[1])) <= *tolerance {
                        self.next_waypoint += 1;
                    } else {
                        break;
                    }
                }
                self.next_waypoint >= waypoints.len()
            }
            SuccessPredicate::TimeBoxedCrashSession => false,
        }
    }
}

fn default_jitter() -> f64 {
    std::f64::consts::FRAC_PI_4
}

fn default_trials() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// World file, relative to the scenario file.
    pub world: PathBuf,
    /// Overrides the world's spawn when present.
    #[serde(default)]
    pub spawn: Option<Spawn>,
    /// Heading jitter amplitude: `theta + jitter * U(-1, 1)`.
    #[serde(default = "default_jitter")]
    pub heading_jitter: f64,
    pub success: SuccessPredicate,
    pub max_steps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub driver: DriverSpec,
}

/// A scenario with its world loaded.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub world: WorldModel,
}

impl LoadedScenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Scenario(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let world = WorldModel::load(base.join(&scenario.world))?;
        Self::new(scenario, world)
    }

    pub fn new(scenario: Scenario, world: WorldModel) -> Result<Self, HarnessError> {
        if scenario.max_steps == 0 {
            return Err(HarnessError::Scenario("max_steps must be positive".into()));
        }
        world.validate()?;
        Ok(Self { scenario, world })
    }

    pub fn nominal_spawn(&self) -> Spawn {
        self.scenario.spawn.unwrap_or(self.world.spawn)
    }

    /// Spawn state with the heading jittered by `rng`.
    pub fn spawn_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RobotState {
        let s = self.nominal_spawn();
        let u: f64 = rng.random_range(-1.0..=1.0);
        RobotState::new(s.x, s.y, s.theta + self.scenario.heading_jitter * u, 0.0, 0.0)
    }
}

/// Directory holding the bundled scenario files.
pub fn builtin_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn builtin(name: &str) -> Result<LoadedScenario, HarnessError> {
    LoadedScenario::load(builtin_dir().join(format!("{name}.json")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicates() {
        let room = SuccessPredicate::EnterRoomNoCollision {
            polygon: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        };
        let mut t = SuccessTracker::default();
        assert!(t.update(&room, &RobotState::new(0.5, 0.5, 0.0, 0.0, 0.0)));
        assert!(!t.update(&room, &RobotState::new(1.5, 0.5, 0.0, 0.0, 0.0)));

        let hall = SuccessPredicate::PassHumanContinueHallway {
            direction: [2.0, 0.0],
            line: 3.0,
        };
        assert!(!t.update(&hall, &RobotState::new(2.9, 9.0, 0.0, 0.0, 0.0)));
        assert!(t.update(&hall, &RobotState::new(3.0, -1.0, 0.0, 0.0, 0.0)));

        let route = SuccessPredicate::RouteCompletion {
            waypoints: vec![[1.0, 0.0], [2.0, 0.0]],
            tolerance: 0.2,
        };
        let mut t = SuccessTracker::default();
        // Out-of-order visits do not count.
        assert!(!t.update(&route, &RobotState::new(2.0, 0.0, 0.0, 0.0, 0.0)));
        assert!(!t.update(&route, &RobotState::new(1.1, 0.0, 0.0, 0.0, 0.0)));
        assert!(t.update(&route, &RobotState::new(1.95, 0.1, 0.0, 0.0, 0.0)));
    }

    #[test]
    fn bundled_scenarios_load() {
        for name in [
            "tight_doorway",
            "human_encounter",
            "training_corridor",
            "open_corridor",
            "try_to_crash",
        ] {
            let s = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(s.scenario.max_steps > 0);
        }
    }

    #[test]
    fn jitter_stays_in_band() {
        use rand::SeedableRng;
        let s = builtin("tight_doorway").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let nominal = s.nominal_spawn().theta;
        for _ in 0..100 {
            let st = s.spawn_state(&mut rng);
            assert!((st.theta - nominal).abs() <= std::f64::consts::FRAC_PI_4 + 1e-12);
        }
    }
}
