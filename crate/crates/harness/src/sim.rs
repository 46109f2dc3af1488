//! Closed-loop episode simulation: sense, gate, move, check contact.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use safer_core::gate::{
    gate_with_obstacles, needs_avoidance, needs_emergency_braking, GateDecision, GateStage,
};
use safer_core::kinematics::{step_kinematics, ControlCommand, KinematicLimits, RobotState};
use safer_core::planner::{evaluate_candidate, CostContext};
use safer_core::sensors::{register_obstacles, scan, ObstacleSet, SensorScan};
use safer_core::world::{ground_truth_collision, WorldModel};
use safer_core::SaferConfig;

use crate::driver::Driver;
use crate::methods::MethodStack;
use crate::metrics::{CycleSample, EpisodeMetrics, MetricsAccumulator};
use crate::scenario::{LoadedScenario, SuccessTracker};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Success,
    Collision,
    StepCap,
    /// Held stationary by braking for the configured number of cycles.
    Stalled,
}

/// Everything known about one control cycle.
pub struct CycleRecord<'a> {
    pub step: usize,
    pub t: f64,
    pub state: RobotState,
    pub scan: &'a SensorScan,
    pub obstacles: &'a ObstacleSet,
    pub world: &'a WorldModel,
    pub upstream: ControlCommand,
    pub decision: &'a GateDecision,
    /// The avoidance stage would run: the avoidance horizon predicts contact
    /// but the braking horizon does not.
    pub intervention: bool,
    /// Finite action cost of the executed command against the upstream
    /// reference.
    pub executed_cost: f64,
    pub latency_ms: f64,
    pub next_state: RobotState,
    pub collided: bool,
    pub termination: Option<Termination>,
}

/// Sensor view of the state the episode ended in.
pub struct EpisodeEnd<'a> {
    pub state: RobotState,
    pub scan: &'a SensorScan,
    pub obstacles: &'a ObstacleSet,
    pub termination: Termination,
}

pub trait EpisodeObserver {
    fn on_cycle(&mut self, rec: &CycleRecord<'_>);
    fn on_end(&mut self, _end: &EpisodeEnd<'_>) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub termination: Termination,
    pub metrics: EpisodeMetrics,
    pub latencies_ms: Vec<f64>,
    pub spawn: RobotState,
    pub final_state: RobotState,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Record wall-clock latency; when false every latency is zero.
    pub timing: bool,
    /// The base tracks each command within the acceleration limits instead
    /// of switching velocity instantly.
    pub accel_limited_base: bool,
    /// End the episode once the robot has been held stationary by braking
    /// for this many cycles.
    pub stall_cycles: Option<usize>,
    /// Never terminate: contacts are undone as in a crash session and the
    /// step cap is ignored.
    pub open_ended: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            timing: true,
            accel_limited_base: true,
            stall_cycles: None,
            open_ended: false,
        }
    }
}

impl SimOptions {
    pub fn untimed() -> Self {
        Self {
            timing: false,
            ..Self::default()
        }
    }
}

/// Velocity the base actually reaches this cycle when commanded `cmd`.
pub fn base_response(state: &RobotState, cmd: &ControlCommand, limits: &KinematicLimits) -> ControlCommand {
    let dv = limits.a_max_v * limits.t_r;
    let dw = limits.a_max_omega * limits.t_r;
    ControlCommand::new(
        cmd.v.clamp(state.v - dv, state.v + dv),
        cmd.omega.clamp(state.omega - dw, state.omega + dw),
        cmd.kind,
    )
}

fn decide(
    stack: &mut MethodStack,
    state: &RobotState,
    scan: &SensorScan,
    obstacles: &ObstacleSet,
    upstream: &ControlCommand,
) -> Result<GateDecision, HarnessError> {
    match &stack.gate {
        None => Ok(GateDecision {
            stage: GateStage::Maintain,
            command: *upstream,
            sigma: 0,
            correction: None,
            escalated: false,
        }),
        Some(gc) => {
            let planner = stack
                .planner
                .as_mut()
                .map(|p| p.as_mut() as &mut dyn safer_core::CorrectivePlanner);
            Ok(gate_with_obstacles(state, scan, obstacles, upstream, planner, gc)?)
        }
    }
}

/// What one [`EpisodeRunner::step`] did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub decision: GateDecision,
    /// Velocity the base moved with.
    pub applied: ControlCommand,
    pub intervention: bool,
    pub latency_ms: f64,
    pub collided: bool,
    pub termination: Option<Termination>,
}

/// One episode advanced a control cycle at a time.
pub struct EpisodeRunner {
    scenario: LoadedScenario,
    cfg: SaferConfig,
    options: SimOptions,
    rng: ChaCha8Rng,
    world: WorldModel,
    spawn: RobotState,
    state: RobotState,
    tracker: SuccessTracker,
    succeeded: bool,
    acc: MetricsAccumulator,
    stalled: usize,
    step: usize,
    sensed: Option<(SensorScan, ObstacleSet)>,
    termination: Option<Termination>,
}

impl EpisodeRunner {
    /// Draws the spawn from `seed`.
    pub fn new(scenario: LoadedScenario, cfg: SaferConfig, seed: u64, options: SimOptions) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spawn = scenario.spawn_state(&mut rng);
        Self {
            world: scenario.world.clone(),
            scenario,
            cfg,
            options,
            rng,
            spawn,
            state: spawn,
            tracker: SuccessTracker::default(),
            succeeded: false,
            acc: MetricsAccumulator::default(),
            stalled: 0,
            step: 0,
            sensed: None,
            termination: None,
        }
    }

    pub fn state(&self) -> RobotState {
        self.state
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.limits.t_r
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn scenario(&self) -> &LoadedScenario {
        &self.scenario
    }

    pub fn config(&self) -> &SaferConfig {
        &self.cfg
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        self.acc.finish(self.succeeded)
    }

    /// Scan for the current cycle, taken once per cycle.
    pub fn sense(&mut self) -> &SensorScan {
        if self.sensed.is_none() {
            let sc = scan(&self.world, &self.state, &self.cfg.sensors, Some(&mut self.rng));
            let obstacles = register_obstacles(&sc);
            self.sensed = Some((sc, obstacles));
        }
        &self.sensed.as_ref().expect("just sensed").0
    }

    /// Runs the gate on `upstream` and moves the robot.
    pub fn step(
        &mut self,
        stack: &mut MethodStack,
        upstream: ControlCommand,
        observer: Option<&mut (dyn EpisodeObserver + '_)>,
    ) -> Result<StepOutcome, HarnessError> {
        self.sense();
        let (sc, obstacles) = self.sensed.take().expect("sensed above");
        let t = self.time();
        let cfg = &self.cfg;
        let limits = &cfg.limits;
        let footprint = &cfg.footprint;
        let state = self.state;
        let pred = &self.scenario.scenario.success;
        let open_ended = self.options.open_ended;
        let contact_undone = open_ended || pred.is_crash_session();

        let started = Instant::now();
        let decision = decide(stack, &state, &sc, &obstacles, &upstream)?;
        let latency_ms = if self.options.timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };

        let intervention = needs_avoidance(&state, &obstacles, cfg.gate.beta, limits, footprint)?
            && !needs_emergency_braking(&state, &obstacles, limits, footprint);
        let cc = CostContext {
            v_ref: upstream.v,
            omega_ref: upstream.omega,
            obstacles: &obstacles,
            weights: &cfg.cost,
            beta: cfg.gate.beta,
            limits,
            footprint,
        };
        let executed_cost = evaluate_candidate(decision.command.v, decision.command.omega, &cc).raw;

        let applied = if self.options.accel_limited_base {
            base_response(&state, &decision.command, limits)
        } else {
            decision.command
        };
        let mut next = step_kinematics(&state, &applied, limits.t_r)?;
        self.world.advance_actors_in_place(limits.t_r);
        let collided = ground_truth_collision(&self.world, footprint, &next);
        if collided && contact_undone {
            next = RobotState::new(state.x, state.y, state.theta, 0.0, 0.0);
        }
        let step_distance = next.position().dist(state.position());
        let held = decision.stage == GateStage::Brake && state.v == 0.0 && state.omega == 0.0;
        self.stalled = if held { self.stalled + 1 } else { 0 };
        let reached = !collided && !self.succeeded && self.tracker.update(pred, &next);
        self.succeeded |= reached;
        let outcome = if open_ended {
            None
        } else if collided && !contact_undone {
            Some(Termination::Collision)
        } else if reached {
            Some(Termination::Success)
        } else if self.options.stall_cycles.is_some_and(|n| self.stalled >= n) {
            Some(Termination::Stalled)
        } else if self.step + 1 >= self.scenario.scenario.max_steps {
            Some(Termination::StepCap)
        } else {
            None
        };

        self.acc.push(&CycleSample {
            t,
            applied_v: state.v,
            command_v: decision.command.v,
            command_omega: decision.command.omega,
            sigma: decision.sigma,
            intervention,
            executed_cost,
            latency_ms,
            candidates: decision
                .correction
                .as_ref()
                .map_or(0, |c| c.candidates_evaluated),
            step_distance,
            collided,
        });
        if let Some(obs) = observer {
            obs.on_cycle(&CycleRecord {
                step: self.step,
                t,
                state,
                scan: &sc,
                obstacles: &obstacles,
                world: &self.world,
                upstream,
                decision: &decision,
                intervention,
                executed_cost,
                latency_ms,
                next_state: next,
                collided,
                termination: outcome,
            });
        }
        self.state = next;
        self.step += 1;
        self.termination = outcome;
        Ok(StepOutcome {
            decision,
            applied,
            intervention,
            latency_ms,
            collided,
            termination: outcome,
        })
    }

    /// Closes the episode; `observer` sees a fresh scan of the final state.
    pub fn finish(mut self, observer: Option<&mut (dyn EpisodeObserver + '_)>) -> EpisodeResult {
        let termination = self.termination.unwrap_or(Termination::StepCap);
        if let Some(obs) = observer {
            self.sensed = None;
            self.sense();
            let (sc, obstacles) = self.sensed.as_ref().expect("just sensed");
            obs.on_end(&EpisodeEnd {
                state: self.state,
                scan: sc,
                obstacles,
                termination,
            });
        }
        EpisodeResult {
            termination,
            latencies_ms: self.acc.latencies_ms().to_vec(),
            metrics: self.acc.finish(termination == Termination::Success),
            spawn: self.spawn,
            final_state: self.state,
        }
    }
}

/// Runs one episode from a spawn drawn with `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    scenario: &LoadedScenario,
    cfg: &SaferConfig,
    stack: &mut MethodStack,
    driver: &mut dyn Driver,
    seed: u64,
    options: SimOptions,
    mut observer: Option<&mut dyn EpisodeObserver>,
) -> Result<EpisodeResult, HarnessError> {
    let options = SimOptions {
        open_ended: false,
        ..options
    };
    let mut runner = EpisodeRunner::new(scenario.clone(), cfg.clone(), seed, options);
    for _ in 0..scenario.scenario.max_steps {
        let t = runner.time();
        let state = runner.state();
        let upstream = driver.command(t, &state, runner.sense());
        if runner.step(stack, upstream, observer.as_deref_mut())?.termination.is_some() {
            break;
        }
    }
    Ok(runner.finish(observer))
}
