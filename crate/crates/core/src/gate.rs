//! Emergency-braking and avoidance gate.
//!
//! Each control cycle the gate registers obstacles from the latest scan and
//! picks one of three stages:
//!
//! * **Brake** when the current `(v, omega)` rollout over the plan-ahead time
//!   `t_p` hits an obstacle,
//! * **Avoid** when only the longer `beta * t_p` rollout hits one; the
//!   configured [`CorrectivePlanner`] then supplies the command,
//! * **Maintain** otherwise, passing the upstream command through untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    plan_ahead_time, rollout_trajectory, CommandKind, ControlCommand, DynamicWindow,
    KinematicLimits, RobotState, Trajectory,
};
use crate::sensors::{register_obstacles, ObstacleSet, SensorScan};
use crate::world::Footprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateStage {
    Maintain,
    Avoid,
    Brake,
}

impl GateStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            GateStage::Maintain => "Maintain",
            GateStage::Avoid => "Avoid",
            GateStage::Brake => "Brake",
        }
    }
}

/// What the avoidance stage produced, kept for telemetry and experience
/// collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub command: ControlCommand,
    /// Cost of `command`; infinite for unfiltered proposals that collide.
    pub cost: f64,
    pub candidates_evaluated: usize,
    /// Window the command was searched in, if any.
    pub window: Option<DynamicWindow>,
    /// Raw normalized `(throttle, turn)` proposal from a learned policy.
    pub policy_action: Option<[f64; 2]>,
}

/// Inputs available to the avoidance stage.
#[derive(Debug, Clone, Copy)]
pub struct AvoidanceContext<'a> {
    pub state: &'a RobotState,
    pub scan: &'a SensorScan,
    pub obstacles: &'a ObstacleSet,
    pub upstream: &'a ControlCommand,
}

/// Produces a corrective command when the gate decides avoidance is needed.
pub trait CorrectivePlanner {
    fn correct(&mut self, ctx: &AvoidanceContext<'_>) -> Result<Correction>;

    /// What the most recent failed `correct` tried, for telemetry and
    /// training. The gate attaches it to the escalated decision.
    fn failed_attempt(&mut self) -> Option<Correction> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub limits: KinematicLimits,
    pub footprint: Footprint,
    pub beta: f64,
    /// When false only the braking check runs (automatic emergency braking).
    pub avoidance_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub stage: GateStage,
    pub command: ControlCommand,
    /// 1 iff maximum braking was applied this cycle.
    pub sigma: u8,
    pub correction: Option<Correction>,
    /// Set when the planner failed or its command still predicted a collision
    /// within `t_p` and the gate escalated to braking.
    pub escalated: bool,
}

impl GateDecision {
    fn brake(state: &RobotState, limits: &KinematicLimits) -> Self {
        Self {
            stage: GateStage::Brake,
            command: max_braking_command(state, limits),
            sigma: 1,
            correction: None,
            escalated: false,
        }
    }
}

/// Whether any trajectory state's footprint covers an obstacle point.
pub fn predict_collision(traj: &Trajectory, obstacles: &ObstacleSet, footprint: &Footprint) -> bool {
    let r = footprint.planning_radius();
    let r_sq = r * r;
    traj.points()
        .any(|c| obstacles.points.iter().any(|p| c.dist_sq(*p) < r_sq))
}

fn collides_within(
    v: f64,
    omega: f64,
    horizon: f64,
    obstacles: &ObstacleSet,
    limits: &KinematicLimits,
    footprint: &Footprint,
) -> bool {
    match rollout_trajectory(v, omega, horizon, limits.t_r) {
        Ok(traj) => predict_collision(&traj, obstacles, footprint),
        // Non-finite velocities cannot be certified safe.
        Err(_) => true,
    }
}

pub fn needs_emergency_braking(
    state: &RobotState,
    obstacles: &ObstacleSet,
    limits: &KinematicLimits,
    footprint: &Footprint,
) -> bool {
    let t_p = plan_ahead_time(state.v, limits);
    collides_within(state.v, state.omega, t_p, obstacles, limits, footprint)
}

pub fn needs_avoidance(
    state: &RobotState,
    obstacles: &ObstacleSet,
    beta: f64,
    limits: &KinematicLimits,
    footprint: &Footprint,
) -> Result<bool> {
    check_beta(beta)?;
    let t_p = plan_ahead_time(state.v, limits);
    Ok(collides_within(
        state.v,
        state.omega,
        beta * t_p,
        obstacles,
        limits,
        footprint,
    ))
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "(1, inf)",
        })
    }
}

/// Decelerates `v` and `omega` toward zero at the acceleration limits.
pub fn max_braking_command(state: &RobotState, limits: &KinematicLimits) -> ControlCommand {
    let brake = |x: f64, step: f64| x.signum() * (x.abs() - step).max(0.0);
    ControlCommand::new(
        brake(state.v, limits.a_max_v * limits.t_r),
        brake(state.omega, limits.a_max_omega * limits.t_r),
        CommandKind::MaxBraking,
    )
}

fn touching(obstacles: &ObstacleSet, footprint: &Footprint) -> bool {
    let r = footprint.planning_radius();
    obstacles.points.iter().any(|p| p.norm() < r)
}

/// Decision for the given pre-registered obstacles.
pub fn gate_with_obstacles(
    state: &RobotState,
    scan: &SensorScan,
    obstacles: &ObstacleSet,
    upstream: &ControlCommand,
    planner: Option<&mut dyn CorrectivePlanner>,
    config: &GateConfig,
) -> Result<GateDecision> {
    check_beta(config.beta)?;
    let limits = &config.limits;
    let footprint = &config.footprint;

    if touching(obstacles, footprint)
        || needs_emergency_braking(state, obstacles, limits, footprint)
    {
        return Ok(GateDecision::brake(state, limits));
    }

    if !config.avoidance_enabled || !needs_avoidance(state, obstacles, config.beta, limits, footprint)? {
        return Ok(GateDecision {
            stage: GateStage::Maintain,
            command: *upstream,
            sigma: 0,
            correction: None,
            escalated: false,
        });
    }

    let Some(planner) = planner else {
        return Err(Error::Planner("avoidance enabled without a planner".into()));
    };
    let ctx = AvoidanceContext {
        state,
        scan,
        obstacles,
        upstream,
    };
    let correction = match planner.correct(&ctx) {
        Ok(c) => c,
        Err(_) => {
            let mut d = GateDecision::brake(state, limits);
            d.escalated = true;
            d.correction = planner.failed_attempt();
            return Ok(d);
        }
    };
    let cmd = correction.command;
    let t_p = plan_ahead_time(cmd.v, limits);
    if collides_within(cmd.v, cmd.omega, t_p, obstacles, limits, footprint) {
        let mut d = GateDecision::brake(state, limits);
        d.escalated = true;
        d.correction = Some(correction);
        return Ok(d);
    }
    Ok(GateDecision {
        stage: GateStage::Avoid,
        command: ControlCommand::corrective(cmd.v, cmd.omega),
        sigma: 0,
        correction: Some(correction),
        escalated: false,
    })
}

/// Registers obstacles from `scan` and runs the three-stage decision.
pub fn gate(
    state: &RobotState,
    scan: &SensorScan,
    upstream: &ControlCommand,
    planner: Option<&mut dyn CorrectivePlanner>,
    config: &GateConfig,
) -> Result<GateDecision> {
    let obstacles = register_obstacles(scan);
    gate_with_obstacles(state, scan, &obstacles, upstream, planner, config)
}
