//! Upstream drivers: the commands a safety layer is asked to pass through
//! or correct.

use serde::{Deserialize, Serialize};

use safer_core::kinematics::{normalize_angle, ControlCommand, KinematicLimits, RobotState};
use safer_core::sensors::SensorScan;

/// Full throttle with `turn = sin(t)`, scaled by the velocity limits.
pub fn sinusoidal_policy(t: f64, limits: &KinematicLimits) -> ControlCommand {
    ControlCommand::upstream(limits.v_max, t.sin() * limits.omega_max)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DriverSpec {
    #[default]
    Sinusoidal,
    /// Fixed normalized `(throttle, turn)`.
    Constant { throttle: f64, turn: f64 },
    /// Full throttle, steering toward the nearest lidar return.
    AdversarialChauffeur,
    /// Normalized `(throttle, turn)` per cycle; the last entry repeats.
    Script { commands: Vec<[f64; 2]> },
}

pub trait Driver {
    fn command(&mut self, t: f64, state: &RobotState, scan: &SensorScan) -> ControlCommand;
}

pub struct SpecDriver {
    spec: DriverSpec,
    limits: KinematicLimits,
    cycle: usize,
}

impl SpecDriver {
    pub fn new(spec: DriverSpec, limits: KinematicLimits) -> Self {
        Self {
            spec,
            limits,
            cycle: 0,
        }
    }
}

impl Driver for SpecDriver {
    fn command(&mut self, t: f64, _state: &RobotState, scan: &SensorScan) -> ControlCommand {
        let l = &self.limits;
        let cmd = match &self.spec {
            DriverSpec::Sinusoidal => sinusoidal_policy(t, l),
            DriverSpec::Constant { throttle, turn } => {
                ControlCommand::upstream(throttle * l.v_max, turn * l.omega_max)
            }
            DriverSpec::AdversarialChauffeur => adversarial_command(scan, l),
            DriverSpec::Script { commands } => {
                let c = commands
                    .get(self.cycle)
                    .or(commands.last())
                    .copied()
                    .unwrap_or([0.0, 0.0]);
                ControlCommand::upstream(c[0] * l.v_max, c[1] * l.omega_max)
            }
        };
        self.cycle += 1;
        cmd
    }
}

/// Heads for the closest lidar return at full speed, as normalized
/// `(throttle, turn)`.
pub fn adversarial_action(scan: &SensorScan) -> [f64; 2] {
    let nearest = scan
        .lidar
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < scan.max_range)
        .min_by(|a, b| a.1.total_cmp(b.1));
    let turn = match nearest {
        Some((i, _)) => (2.0 * normalize_angle((i as f64).to_radians())).clamp(-1.0, 1.0),
        None => 0.0,
    };
    [1.0, turn]
}

pub fn adversarial_command(scan: &SensorScan, limits: &KinematicLimits) -> ControlCommand {
    let [throttle, turn] = adversarial_action(scan);
    ControlCommand::upstream(throttle * limits.v_max, turn * limits.omega_max)
}
