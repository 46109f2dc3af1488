//! Core of the corrective collision-avoidance stack.
//!
//! Everything in this crate is a pure function over value types: unicycle
//! kinematics and velocity windows, a 2D world with simulated lidar and
//! ultrasonic sensing, the braking/avoidance gate, and the dynamic-window
//! searches that produce corrective commands.

pub mod config;
pub mod error;
pub mod gate;
pub mod geometry;
pub mod kinematics;
pub mod planner;
pub mod sensors;
pub mod world;

pub use config::SaferConfig;
pub use error::{Error, Result};
pub use gate::{gate, CorrectivePlanner, Correction, GateDecision, GateStage};
pub use geometry::Point2;
pub use kinematics::{
    ControlCommand, CommandKind, DynamicWindow, KinematicLimits, RobotState, Trajectory,
};
pub use planner::{CostWeights, SearchResult};
pub use sensors::{ObstacleSet, SensorScan};
pub use world::{Footprint, WorldModel};
