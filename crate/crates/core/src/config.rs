//! Every tunable of the stack, grouped by namespace. Serialized as JSON with
//! keys such as `limits.v_max`, `gate.beta`, `search.gamma`, `cost.c1` and
//! `reward.lambda1`. Missing keys take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::GateConfig;
use crate::kinematics::KinematicLimits;
use crate::planner::{CostWeights, FocusedParams};
use crate::sensors::SensorConfig;
use crate::world::Footprint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateSection {
    /// Avoidance horizon multiplier on the plan-ahead time.
    pub beta: f64,
}

impl Default for GateSection {
    fn default() -> Self {
        Self { beta: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    pub n_v: usize,
    pub n_omega: usize,
    /// Focused window size relative to the standard window.
    pub gamma: f64,
    /// Focused sample count relative to `n_v` and `n_omega`.
    pub delta: f64,
    pub enforce_accel_feasibility: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            n_v: 50,
            n_omega: 50,
            gamma: 0.05,
            delta: 0.1,
            enforce_accel_feasibility: false,
        }
    }
}

impl SearchSection {
    pub fn focused(&self) -> FocusedParams {
        FocusedParams {
            gamma: self.gamma,
            delta: self.delta,
            n_v: self.n_v,
            n_omega: self.n_omega,
            enforce_accel_feasibility: self.enforce_accel_feasibility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSection {
    /// Penalty per maximum-braking activation.
    pub lambda1: f64,
    /// Penalty per unit of action cost.
    pub lambda2: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            lambda1: 35.0,
            lambda2: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationSection {
    /// Divide ranges by the sensor range and velocities by their limits.
    pub normalize: bool,
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self { normalize: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    #[default]
    Silu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub tau: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub initial_alpha: f64,
    pub target_entropy: f64,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            activation: Activation::Silu,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            tau: 5e-3,
            discount: 0.99,
            batch_size: 256,
            buffer_capacity: 100_000,
            initial_alpha: 0.2,
            target_entropy: -2.0,
            seed: 0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("sac.{msg}")));
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden widths must be positive");
        }
        for (name, v) in [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_alpha", self.lr_alpha),
            ("initial_alpha", self.initial_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive");
        }
        if !self.target_entropy.is_finite() {
            return bad("target_entropy must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleSection {
    /// Gradient steps between policy publishes.
    pub publish_every: u64,
    /// Experiences required before training starts.
    pub warmup: usize,
    /// Gradient steps per ingested experience.
    pub updates_per_experience: f64,
    /// Record Maintain cycles as well as Avoid and Brake.
    pub collect_all_cycles: bool,
    /// Episode step cap.
    pub max_steps: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            publish_every: 100,
            warmup: 256,
            updates_per_experience: 1.0,
            collect_all_cycles: false,
            max_steps: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SaferConfig {
    pub limits: KinematicLimits,
    pub footprint: Footprint,
    pub gate: GateSection,
    pub search: SearchSection,
    pub cost: CostWeights,
    pub reward: RewardSection,
    pub sensors: SensorConfig,
    pub observation: ObservationSection,
    pub sac: SacConfig,
    pub schedule: ScheduleSection,
}

fn in_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v,
            range: "(0, 1)",
        })
    }
}

impl SaferConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SaferConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks only; advisory warnings live with the tooling.
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if !(self.footprint.radius.is_finite()
            && self.footprint.radius > 0.0
            && self.footprint.inflation.is_finite()
            && self.footprint.inflation >= 0.0)
        {
            return Err(Error::InvalidConfig(
                "footprint radius must be positive and inflation non-negative".into(),
            ));
        }
        crate::gate::check_beta(self.gate.beta)?;
        in_open_unit("search.gamma", self.search.gamma)?;
        in_open_unit("search.delta", self.search.delta)?;
        if self.search.n_v < 2 || self.search.n_omega < 2 {
            return Err(Error::InvalidConfig(
                "search.n_v and search.n_omega must be at least 2".into(),
            ));
        }
        self.cost.validate()?;
        for (name, v) in [
            ("reward.lambda1", self.reward.lambda1),
            ("reward.lambda2", self.reward.lambda2),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !(self.sensors.max_range.is_finite() && self.sensors.max_range > 0.0) {
            return Err(Error::InvalidConfig("sensors.max_range must be positive".into()));
        }
        if !(self.sensors.noise_sigma.is_finite() && self.sensors.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(
                "sensors.noise_sigma must be non-negative".into(),
            ));
        }
        self.sac.validate()?;
        if self.schedule.publish_every == 0 || self.schedule.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "schedule.publish_every and schedule.max_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn gate_config(&self, avoidance_enabled: bool) -> GateConfig {
        GateConfig {
            limits: self.limits,
            footprint: self.footprint,
            beta: self.gate.beta,
            avoidance_enabled,
        }
    }
}
