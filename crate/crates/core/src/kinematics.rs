//! Unicycle kinematics, constant-velocity rollouts and velocity windows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::Point2;

/// Pose and velocity of the robot: `(x, y, theta, v, omega)` in meters,
/// radians, m/s and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            theta,
            v,
            omega,
        }
    }

    /// Ego-frame initial state of a planning rollout.
    pub fn ego(v: f64, omega: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, v, omega)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite("robot state", &[self.x, self.y, self.theta, self.v, self.omega])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub omega_max: f64,
    pub a_max_v: f64,
    pub a_max_omega: f64,
    /// Control period; also the rollout time step.
    pub t_r: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 1.0,
            a_max_v: 0.25,
            a_max_omega: 2.0,
            t_r: 0.1,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("limits.v_max", self.v_max),
            ("limits.omega_max", self.omega_max),
            ("limits.a_max_v", self.a_max_v),
            ("limits.a_max_omega", self.a_max_omega),
            ("limits.t_r", self.t_r),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        Ok(())
    }

    /// Clamps a command into `[-v_max, v_max] x [-omega_max, omega_max]`.
    pub fn saturate(&self, v: f64, omega: f64) -> (f64, f64) {
        (
            v.clamp(-self.v_max, self.v_max),
            omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    UpstreamReference,
    Corrective,
    MaxBraking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub omega: f64,
    pub kind: CommandKind,
}

impl ControlCommand {
    pub fn new(v: f64, omega: f64, kind: CommandKind) -> Self {
        Self { v, omega, kind }
    }

    pub fn upstream(v: f64, omega: f64) -> Self {
        Self::new(v, omega, CommandKind::UpstreamReference)
    }

    pub fn corrective(v: f64, omega: f64) -> Self {
        Self::new(v, omega, CommandKind::Corrective)
    }
}

/// Normalizes an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// One control period of unicycle motion. The pose advances with the
/// velocities held *before* the step; the commanded velocities only become
/// the new state velocities.
pub fn step_kinematics(state: &RobotState, cmd: &ControlCommand, t_r: f64) -> Result<RobotState> {
    state.check_finite()?;
    ensure_finite("command", &[cmd.v, cmd.omega])?;
    if !(t_r.is_finite() && t_r > 0.0) {
        return Err(Error::OutOfRange {
            name: "t_r",
            value: t_r,
            range: "(0, inf)",
        });
    }
    let (s, c) = state.theta.sin_cos();
    Ok(RobotState {
        x: state.x + state.v * c * t_r,
        y: state.y + state.v * s * t_r,
        theta: normalize_angle(state.theta + state.omega * t_r),
        v: cmd.v,
        omega: cmd.omega,
    })
}

/// Sampled ego-frame trajectory at constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<RobotState>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.states.iter().map(RobotState::position)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Number of states in a rollout of length `dt`: `floor(dt / t_r) + 1`.
/// The quotient is nudged by a few ulps so that e.g. `0.3 / 0.1` counts 3.
pub fn sample_count(dt: f64, t_r: f64) -> usize {
    ((dt / t_r) * (1.0 + 1e-12) + 1e-12).floor() as usize + 1
}

/// Constant-velocity rollout in the ego frame starting from `(0, 0, 0, v, omega)`.
pub fn rollout_trajectory(v: f64, omega: f64, dt: f64, t_r: f64) -> Result<Trajectory> {
    ensure_finite("rollout", &[v, omega, dt, t_r])?;
    if dt < 0.0 {
        return Err(Error::OutOfRange {
            name: "dt",
            value: dt,
            range: "[0, inf)",
        });
    }
    if t_r <= 0.0 {
        return Err(Error::OutOfRange {
            name: "t_r",
            value: t_r,
            range: "(0, inf)",
        });
    }
    let n = sample_count(dt, t_r);
    let cmd = ControlCommand::corrective(v, omega);
    let mut states = Vec::with_capacity(n);
    let mut s = RobotState::ego(v, omega);
    states.push(s);
    for _ in 1..n {
        s = step_kinematics(&s, &cmd, t_r)?;
        states.push(s);
    }
    Ok(Trajectory {
        states,
        horizon: dt,
    })
}

/// Braking-based planning horizon `t_r + |v| / (2 a_max_v)`.
pub fn plan_ahead_time(v: f64, limits: &KinematicLimits) -> f64 {
    limits.t_r + v.abs() / (2.0 * limits.a_max_v)
}

/// Rectangle in `(v, omega)` space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicWindow {
    pub v_lower: f64,
    pub v_upper: f64,
    pub omega_lower: f64,
    pub omega_upper: f64,
}

impl DynamicWindow {
    pub fn contains(&self, v: f64, omega: f64) -> bool {
        (self.v_lower..=self.v_upper).contains(&v)
            && (self.omega_lower..=self.omega_upper).contains(&omega)
    }

    pub fn v_width(&self) -> f64 {
        self.v_upper - self.v_lower
    }

    pub fn omega_width(&self) -> f64 {
        self.omega_upper - self.omega_lower
    }

    /// Intersection with another window; collapses onto the nearest edge of
    /// `other` when the two are disjoint in a dimension.
    pub fn intersect(&self, other: &DynamicWindow) -> DynamicWindow {
        let (v_lower, v_upper) = overlap(self.v_lower, self.v_upper, other.v_lower, other.v_upper);
        let (omega_lower, omega_upper) = overlap(
            self.omega_lower,
            self.omega_upper,
            other.omega_lower,
            other.omega_upper,
        );
        DynamicWindow {
            v_lower,
            v_upper,
            omega_lower,
            omega_upper,
        }
    }
}

fn overlap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> (f64, f64) {
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if lo <= hi {
        (lo, hi)
    } else if a_hi < b_lo {
        (b_lo, b_lo)
    } else {
        (b_hi, b_hi)
    }
}

fn window_around(v: f64, omega: f64, scale: f64, limits: &KinematicLimits) -> DynamicWindow {
    let dv = scale * limits.a_max_v * limits.t_r;
    let dw = scale * limits.a_max_omega * limits.t_r;
    DynamicWindow {
        v_lower: (v - dv).max(-limits.v_max),
        v_upper: (v + dv).min(limits.v_max),
        omega_lower: (omega - dw).max(-limits.omega_max),
        omega_upper: (omega + dw).min(limits.omega_max),
    }
}

/// Velocities reachable within one control period from the current state.
pub fn standard_window(state: &RobotState, limits: &KinematicLimits) -> DynamicWindow {
    window_around(state.v, state.omega, 1.0, limits)
}

/// Componentwise `max(min(x, upper), lower)`.
pub fn clamp_to_window(v_s: f64, omega_s: f64, w: &DynamicWindow) -> (f64, f64) {
    (
        v_s.min(w.v_upper).max(w.v_lower),
        omega_s.min(w.omega_upper).max(w.omega_lower),
    )
}

/// Window of `gamma` times the standard size centered on an already-clamped
/// policy proposal.
pub fn focused_window(
    v_s: f64,
    omega_s: f64,
    gamma: f64,
    limits: &KinematicLimits,
) -> Result<DynamicWindow> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, 1)",
        });
    }
    Ok(window_around(v_s, omega_s, gamma, limits))
}
