//! The operator-in-the-loop simulation: held reference commands, the gate,
//! one simulated cycle per tick, and a telemetry frame per tick.

use serde::{Deserialize, Serialize};

use safer_core::gate::GateStage;
use safer_core::kinematics::{plan_ahead_time, rollout_trajectory, ControlCommand, DynamicWindow, RobotState};
use safer_core::sensors::SensorScan;
use safer_core::world::WorldModel;
use safer_core::SaferConfig;
use safer_harness::metrics::EpisodeMetrics;
use safer_harness::sim::EpisodeRunner;
use safer_harness::{EpisodeResult, LoadedScenario, MethodId, MethodStack, SimOptions};
use safer_rl::policy::{scale_action, Action, PolicyMode};
use safer_rl::shared::PolicyStore;

use crate::tape::{Tape, TapeEvent};
use crate::TeleopError;

/// Reference commands older than this are replaced by a stop.
pub const DEFAULT_STALENESS: f64 = 0.5;
pub const MAX_LIDAR_POINTS: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorCommand {
    pub throttle: f64,
    pub turn: f64,
    /// Client timestamp, informational only.
    #[serde(default)]
    pub ts: f64,
}

impl OperatorCommand {
    pub fn new(throttle: f64, turn: f64) -> Self {
        Self { throttle, turn, ts: 0.0 }
    }

    /// Clamped into `[-1, 1]`; non-finite inputs are rejected.
    pub fn sanitized(self) -> Result<Self, TeleopError> {
        if !(self.throttle.is_finite() && self.turn.is_finite()) {
            return Err(TeleopError::BadCommand(format!(
                "throttle {} / turn {} must be finite",
                self.throttle, self.turn
            )));
        }
        Ok(Self {
            throttle: self.throttle.clamp(-1.0, 1.0),
            turn: self.turn.clamp(-1.0, 1.0),
            ts: if self.ts.is_finite() { self.ts } else { 0.0 },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub v: f64,
    pub omega: f64,
}

impl From<&ControlCommand> for Velocity {
    fn from(c: &ControlCommand) -> Self {
        Self { v: c.v, omega: c.omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRect {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl From<&DynamicWindow> for WindowRect {
    fn from(w: &DynamicWindow) -> Self {
        Self {
            v_min: w.v_lower,
            v_max: w.v_upper,
            omega_min: w.omega_lower,
            omega_max: w.omega_upper,
        }
    }
}

/// Everything the operator display needs about one tick. Pose, velocity and
/// lidar are what the gate saw; `emitted` is the velocity the base moved
/// with during the tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick: u64,
    pub sim_time: f64,
    pub method: MethodId,
    pub pose: Pose,
    pub velocity: Velocity,
    /// Ego-frame returns, at most [`MAX_LIDAR_POINTS`].
    pub lidar: Vec<[f64; 2]>,
    pub stage: GateStage,
    pub upstream: Velocity,
    pub gate_command: Velocity,
    pub emitted: Velocity,
    pub sigma: u8,
    pub escalated: bool,
    /// World-frame rollout of the gate command over the avoidance horizon.
    pub trajectory: Vec<[f64; 2]>,
    /// Search window of the corrective planner, when it ran.
    pub window: Option<WindowRect>,
    pub collided: bool,
    pub metrics: EpisodeMetrics,
}

/// Inputs that arrived since the previous tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TickInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<OperatorCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodId>,
}

impl TickInput {
    pub fn is_empty(&self) -> bool {
        self.command.is_none() && self.method.is_none()
    }
}

fn lidar_points(scan: &SensorScan) -> Vec<[f64; 2]> {
    let n = scan.lidar.len();
    let stride = n.div_ceil(MAX_LIDAR_POINTS).max(1);
    scan.lidar
        .iter()
        .enumerate()
        .step_by(stride)
        .filter(|(_, r)| **r < scan.max_range)
        .map(|(i, r)| {
            let a = (i as f64) * std::f64::consts::TAU / n as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeOptions {
    /// Measure planning latency. Off by default so identical inputs give
    /// identical frames.
    pub timing: bool,
    /// Same plant as the batch harness; when false velocities switch to the
    /// command instantly.
    pub accel_limited_base: bool,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self {
            timing: false,
            accel_limited_base: true,
        }
    }
}

pub struct Bridge {
    runner: EpisodeRunner,
    stack: MethodStack,
    policy: Option<PolicyStore>,
    seed: u64,
    staleness: f64,
    held: Option<(OperatorCommand, u64)>,
    tick: u64,
    tape: Tape,
}

impl Bridge {
    /// A session in `scenario`'s world with a spawn drawn from `seed`.
    pub fn new(
        scenario: LoadedScenario,
        cfg: SaferConfig,
        method: MethodId,
        policy: Option<PolicyStore>,
        seed: u64,
        options: BridgeOptions,
    ) -> Result<Self, TeleopError> {
        let stack = MethodStack::new(method, &cfg, policy.clone(), PolicyMode::Deterministic, seed)?;
        let sim = SimOptions {
            timing: options.timing,
            accel_limited_base: options.accel_limited_base,
            stall_cycles: None,
            open_ended: true,
        };
        let mut tape = Tape::new(seed, method);
        tape.accel_limited_base = options.accel_limited_base;
        Ok(Self {
            runner: EpisodeRunner::new(scenario, cfg, seed, sim),
            stack,
            policy,
            seed,
            staleness: DEFAULT_STALENESS,
            held: None,
            tick: 0,
            tape,
        })
    }

    pub fn with_staleness(mut self, seconds: f64) -> Self {
        self.staleness = seconds;
        self
    }

    pub fn method(&self) -> MethodId {
        self.stack.id
    }

    pub fn has_policy(&self) -> bool {
        self.policy.is_some()
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn state(&self) -> RobotState {
        self.runner.state()
    }

    pub fn scenario(&self) -> &LoadedScenario {
        self.runner.scenario()
    }

    pub fn config(&self) -> &SaferConfig {
        self.runner.config()
    }

    pub fn world(&self) -> &WorldModel {
        self.runner.world()
    }

    /// Scan the next tick will act on.
    pub fn scan(&mut self) -> &SensorScan {
        self.runner.sense()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Whether `method` can run in this session.
    pub fn check_method(&self, method: MethodId) -> Result<(), TeleopError> {
        if method.needs_policy() && self.policy.is_none() {
            Err(TeleopError::Harness(safer_harness::HarnessError::MissingCheckpoint(method)))
        } else {
            Ok(())
        }
    }

    /// Reference command in force at the current tick.
    fn reference(&self) -> ControlCommand {
        let limits = &self.runner.config().limits;
        match self.held {
            Some((cmd, since)) if ((self.tick - since) as f64) * limits.t_r < self.staleness - 1e-9 => {
                let (v, omega) = scale_action(Action::new(cmd.throttle, cmd.turn), limits);
                ControlCommand::upstream(v, omega)
            }
            _ => ControlCommand::upstream(0.0, 0.0),
        }
    }

    /// Applies `input`, runs one control cycle and reports it.
    pub fn tick(&mut self, input: TickInput) -> Result<TelemetryFrame, TeleopError> {
        let command = input.command.map(OperatorCommand::sanitized).transpose()?;
        if let Some(m) = input.method {
            self.check_method(m)?;
            if m != self.stack.id {
                let cfg = self.runner.config().clone();
                self.stack = MethodStack::new(m, &cfg, self.policy.clone(), PolicyMode::Deterministic, self.seed)?;
            }
        }
        if let Some(c) = command {
            self.held = Some((c, self.tick));
        }
        let recorded = TickInput {
            command,
            method: input.method,
        };
        if !recorded.is_empty() {
            self.tape.events.push(TapeEvent {
                tick: self.tick,
                input: recorded,
            });
        }

        let upstream = self.reference();
        let state = self.runner.state();
        let sim_time = self.runner.time();
        let lidar = lidar_points(self.runner.sense());
        let outcome = self.runner.step(&mut self.stack, upstream, None)?;
        let cfg = self.runner.config();
        let d = &outcome.decision;
        let horizon = cfg.gate.beta * plan_ahead_time(state.v, &cfg.limits);
        let (s, c) = state.theta.sin_cos();
        let trajectory = rollout_trajectory(d.command.v, d.command.omega, horizon, cfg.limits.t_r)?
            .points()
            .map(|p| [state.x + p.x * c - p.y * s, state.y + p.x * s + p.y * c])
            .collect();

        let frame = TelemetryFrame {
            tick: self.tick,
            sim_time,
            method: self.stack.id,
            pose: Pose {
                x: state.x,
                y: state.y,
                theta: state.theta,
            },
            velocity: Velocity {
                v: state.v,
                omega: state.omega,
            },
            lidar,
            stage: d.stage,
            upstream: (&upstream).into(),
            gate_command: (&d.command).into(),
            emitted: (&outcome.applied).into(),
            sigma: d.sigma,
            escalated: d.escalated,
            trajectory,
            window: d.correction.as_ref().and_then(|c| c.window.as_ref()).map(WindowRect::from),
            collided: outcome.collided,
            metrics: self.runner.metrics(),
        };
        self.tick += 1;
        self.tape.ticks = self.tick;
        Ok(frame)
    }

    /// Ends the session.
    pub fn finish(self) -> (EpisodeResult, Tape) {
        (self.runner.finish(None), self.tape)
    }
}

/// Drives a fresh bridge through `tape`.
pub fn replay(
    tape: &Tape,
    scenario: LoadedScenario,
    cfg: SaferConfig,
    policy: Option<PolicyStore>,
) -> Result<(Vec<TelemetryFrame>, EpisodeResult), TeleopError> {
    tape.check_version()?;
    let options = BridgeOptions {
        timing: false,
        accel_limited_base: tape.accel_limited_base,
    };
    let mut bridge = Bridge::new(scenario, cfg, tape.method, policy, tape.seed, options)?;
    let mut events = tape.events.iter().peekable();
    let mut frames = Vec::with_capacity(tape.ticks as usize);
    for tick in 0..tape.ticks {
        let input = match events.next_if(|e| e.tick == tick) {
            Some(e) => e.input,
            None => TickInput::default(),
        };
        frames.push(bridge.tick(input)?);
    }
    let (result, _) = bridge.finish();
    Ok((frames, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use safer_harness::scenario::builtin;

    fn bridge(method: MethodId) -> Bridge {
        Bridge::new(
            builtin("open_corridor").unwrap(),
            SaferConfig::default(),
            method,
            None,
            3,
            BridgeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn sanitize_clamps_and_rejects_nan() {
        let c = OperatorCommand::new(3.0, -7.0).sanitized().unwrap();
        assert_eq!((c.throttle, c.turn), (1.0, -1.0));
        assert!(OperatorCommand::new(f64::NAN, 0.0).sanitized().is_err());
    }

    #[test]
    fn idle_session_stays_put() {
        let mut b = bridge(MethodId::Aeb);
        let start = b.state();
        for i in 0..20 {
            let f = b.tick(TickInput::default()).unwrap();
            assert_eq!(f.tick, i);
            assert_eq!(f.upstream, Velocity { v: 0.0, omega: 0.0 });
            assert_eq!(f.stage, GateStage::Maintain);
        }
        assert_eq!(b.state(), start);
    }

    #[test]
    fn reference_goes_stale_after_half_a_second() {
        let mut b = bridge(MethodId::NoSafety);
        let v_max = SaferConfig::default().limits.v_max;
        let mut frames = vec![b.tick(TickInput {
            command: Some(OperatorCommand::new(1.0, 0.0)),
            method: None,
        })
        .unwrap()];
        for _ in 0..9 {
            frames.push(b.tick(TickInput::default()).unwrap());
        }
        for f in &frames[..5] {
            assert_eq!(f.upstream.v, v_max, "tick {}", f.tick);
        }
        for f in &frames[5..] {
            assert_eq!(f.upstream, Velocity { v: 0.0, omega: 0.0 }, "tick {}", f.tick);
        }
    }

    #[test]
    fn method_switch_applies_on_the_same_tick() {
        let mut b = bridge(MethodId::NoSafety);
        b.tick(TickInput::default()).unwrap();
        let f = b
            .tick(TickInput {
                command: None,
                method: Some(MethodId::Dwa),
            })
            .unwrap();
        assert_eq!(f.method, MethodId::Dwa);
        assert!(b
            .tick(TickInput {
                command: None,
                method: Some(MethodId::Safer),
            })
            .is_err());
    }

    #[test]
    fn lidar_points_are_ego_frame_returns() {
        let mut scan = SensorScan::empty(6.0);
        scan.lidar[0] = 2.0;
        scan.lidar[90] = 1.0;
        let pts = lidar_points(&scan);
        assert_eq!(pts.len(), 2);
        assert!((pts[0][0] - 2.0).abs() < 1e-12 && pts[0][1].abs() < 1e-12);
        assert!(pts[1][0].abs() < 1e-12 && (pts[1][1] - 1.0).abs() < 1e-12);
    }
}
