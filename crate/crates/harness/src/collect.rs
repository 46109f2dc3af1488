//! Turns simulated control cycles into training transitions.
//!
//! A transition is opened on every Avoid or Brake cycle and closed on the
//! following cycle, whose braking indicator becomes `sigma_next`. A policy
//! proposal the gate escalated to braking is stored as that proposal with
//! `sigma_next = 1`: the gate brakes in the same cycle instead of the next.

use safer_core::gate::{needs_emergency_braking, GateStage};
use safer_core::kinematics::ControlCommand;
use safer_core::SaferConfig;
use safer_rl::observation::{build_observation, Observation, ObservationScaling};
use safer_rl::replay::Experience;

use crate::sim::{CycleRecord, EpisodeEnd, EpisodeObserver, Termination};

struct Pending {
    s: Observation,
    a: [f64; 2],
    cost: f64,
    escalated: bool,
}

pub struct ExperienceCollector {
    cfg: SaferConfig,
    scaling: ObservationScaling,
    pending: Option<Pending>,
    last_upstream: ControlCommand,
    held: bool,
    pub experiences: Vec<Experience>,
}

impl ExperienceCollector {
    pub fn new(cfg: &SaferConfig) -> Self {
        Self {
            cfg: cfg.clone(),
            scaling: ObservationScaling::new(cfg.sensors.max_range, &cfg.limits, cfg.observation.normalize),
            pending: None,
            last_upstream: ControlCommand::upstream(0.0, 0.0),
            held: false,
            experiences: Vec::new(),
        }
    }

    pub fn take(&mut self) -> Vec<Experience> {
        std::mem::take(&mut self.experiences)
    }

    fn close(&mut self, s_next: Observation, sigma_next: u8, done: bool) {
        if let Some(p) = self.pending.take() {
            let sigma_next = if p.escalated { 1 } else { sigma_next };
            let e = Experience::new(
                p.s,
                p.a,
                s_next,
                done,
                sigma_next,
                p.cost,
                self.cfg.reward.lambda1,
                self.cfg.reward.lambda2,
            )
            .expect("executed cost is finite");
            self.experiences.push(e);
        }
    }

    fn normalized(&self, cmd: &ControlCommand) -> [f64; 2] {
        let l = &self.cfg.limits;
        [cmd.v / l.v_max, cmd.omega / l.omega_max]
    }
}

impl EpisodeObserver for ExperienceCollector {
    fn on_cycle(&mut self, rec: &CycleRecord<'_>) {
        let obs = build_observation(rec.scan, &rec.state, &rec.upstream, &self.scaling);
        self.close(obs.clone(), rec.decision.sigma, false);
        self.last_upstream = rec.upstream;
        // A robot already held at rest by braking adds the same transition
        // every cycle; only the first such cycle is kept.
        let at_rest = rec.state.v == 0.0 && rec.state.omega == 0.0;
        let record = match rec.decision.stage {
            GateStage::Maintain => self.cfg.schedule.collect_all_cycles,
            GateStage::Avoid => true,
            GateStage::Brake => !(at_rest && self.held),
        };
        self.held = rec.decision.stage == GateStage::Brake && at_rest;
        if record {
            let d = rec.decision;
            let proposal = d.correction.as_ref().and_then(|c| c.policy_action);
            let a = match (&d.stage, proposal) {
                (GateStage::Avoid, Some(p)) => p,
                (GateStage::Brake, Some(p)) if d.escalated => p,
                _ => self.normalized(&d.command),
            };
            self.pending = Some(Pending {
                s: obs,
                a,
                cost: rec.executed_cost,
                escalated: d.escalated && proposal.is_some(),
            });
        }
    }

    fn on_end(&mut self, end: &EpisodeEnd<'_>) {
        let obs = build_observation(end.scan, &end.state, &self.last_upstream, &self.scaling);
        let sigma = u8::from(needs_emergency_braking(
            &end.state,
            end.obstacles,
            &self.cfg.limits,
            &self.cfg.footprint,
        ));
        let done = matches!(
            end.termination,
            Termination::Collision | Termination::Success | Termination::StepCap | Termination::Stalled
        );
        self.close(obs, sigma, done);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use safer_core::gate::{Correction, GateDecision};
    use safer_core::sensors::{ObstacleSet, SensorScan};
    use safer_core::world::{Bounds, WorldModel};
    use safer_core::RobotState;

    fn decision(stage: GateStage, sigma: u8, escalated: bool, proposal: Option<[f64; 2]>) -> GateDecision {
        GateDecision {
            stage,
            command: ControlCommand::corrective(-0.05, 0.0),
            sigma,
            correction: proposal.map(|a| Correction {
                command: ControlCommand::corrective(0.2, 0.1),
                cost: f64::INFINITY,
                candidates_evaluated: 25,
                window: None,
                policy_action: Some(a),
            }),
            escalated,
        }
    }

    fn feed(c: &mut ExperienceCollector, decisions: &[GateDecision]) {
        let scan = SensorScan::empty(6.0);
        let obstacles = ObstacleSet::new(Vec::new());
        let world = WorldModel::empty(Bounds {
            x_min: -5.0,
            y_min: -5.0,
            x_max: 5.0,
            y_max: 5.0,
        });
        let state = RobotState::new(0.0, 0.0, 0.0, 0.3, 0.0);
        for (step, d) in decisions.iter().enumerate() {
            c.on_cycle(&CycleRecord {
                step,
                t: step as f64 * 0.1,
                state,
                scan: &scan,
                obstacles: &obstacles,
                world: &world,
                upstream: ControlCommand::upstream(0.5, 0.0),
                decision: d,
                intervention: true,
                executed_cost: 0.1,
                latency_ms: 0.0,
                next_state: state,
                collided: false,
                termination: None,
            });
        }
    }

    #[test]
    fn escalated_proposal_is_charged_for_braking() {
        let mut c = ExperienceCollector::new(&SaferConfig::default());
        feed(
            &mut c,
            &[
                decision(GateStage::Avoid, 0, false, Some([0.3, 0.2])),
                decision(GateStage::Brake, 1, true, Some([0.9, -0.4])),
                decision(GateStage::Avoid, 0, false, Some([0.1, 0.0])),
                decision(GateStage::Maintain, 0, false, None),
            ],
        );
        let e = c.take();
        assert_eq!(e.len(), 3);
        assert_eq!((e[0].a, e[0].sigma_next), ([0.3, 0.2], 1));
        // Charged in the cycle it was proposed, whatever follows.
        assert_eq!((e[1].a, e[1].sigma_next), ([0.9, -0.4], 1));
        assert_eq!((e[2].a, e[2].sigma_next), ([0.1, 0.0], 0));
    }

    #[test]
    fn plain_brake_records_the_brake_command() {
        let cfg = SaferConfig::default();
        let mut c = ExperienceCollector::new(&cfg);
        feed(
            &mut c,
            &[decision(GateStage::Brake, 1, false, None), decision(GateStage::Maintain, 0, false, None)],
        );
        let e = c.take();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].a, [-0.05 / cfg.limits.v_max, 0.0]);
        assert_eq!(e[0].sigma_next, 0);
    }
}
