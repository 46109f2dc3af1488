//! The five compared stacks and the planners behind their avoidance stage.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use safer_core::gate::{AvoidanceContext, Correction, CorrectivePlanner, GateConfig};
use safer_core::kinematics::{clamp_to_window, standard_window, ControlCommand};
use safer_core::planner::{
    evaluate_candidate, focused_search, standard_dwa_search, CostContext,
};
use safer_core::{Error as CoreError, SaferConfig};
use safer_rl::observation::{build_observation, ObservationScaling};
use safer_rl::policy::{policy_forward, scale_action, Action, PolicyMode};
use safer_rl::shared::PolicyStore;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodId {
    NoSafety,
    Aeb,
    Dwa,
    Rl,
    Safer,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::NoSafety,
        MethodId::Aeb,
        MethodId::Dwa,
        MethodId::Rl,
        MethodId::Safer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::NoSafety => "nosafety",
            MethodId::Aeb => "aeb",
            MethodId::Dwa => "dwa",
            MethodId::Rl => "rl",
            MethodId::Safer => "safer",
        }
    }

    pub fn needs_policy(&self) -> bool {
        matches!(self, MethodId::Rl | MethodId::Safer)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Method(s.to_string()))
    }
}

fn cost_context<'a>(
    cfg: &'a SaferConfig,
    ctx: &'a AvoidanceContext<'a>,
) -> CostContext<'a> {
    CostContext {
        v_ref: ctx.upstream.v,
        omega_ref: ctx.upstream.omega,
        obstacles: ctx.obstacles,
        weights: &cfg.cost,
        beta: cfg.gate.beta,
        limits: &cfg.limits,
        footprint: &cfg.footprint,
    }
}

/// Exhaustive search over the reachable window.
pub struct DwaPlanner {
    cfg: SaferConfig,
}

impl DwaPlanner {
    pub fn new(cfg: SaferConfig) -> Self {
        Self { cfg }
    }
}

impl CorrectivePlanner for DwaPlanner {
    fn correct(&mut self, ctx: &AvoidanceContext<'_>) -> safer_core::Result<Correction> {
        let cc = cost_context(&self.cfg, ctx);
        let res = standard_dwa_search(ctx.state, self.cfg.search.n_v, self.cfg.search.n_omega, &cc)?;
        Ok(Correction {
            command: res.best,
            cost: res.cost,
            candidates_evaluated: res.candidates_evaluated,
            window: Some(res.window),
            policy_action: None,
        })
    }
}

/// Learned proposal, used either directly or as the center of a focused
/// search.
pub struct PolicyPlanner {
    cfg: SaferConfig,
    store: PolicyStore,
    mode: PolicyMode,
    rng: ChaCha8Rng,
    focused: bool,
    scaling: ObservationScaling,
    last_version: Option<u64>,
    failure: Option<Correction>,
}

impl PolicyPlanner {
    pub fn new(cfg: SaferConfig, store: PolicyStore, mode: PolicyMode, seed: u64, focused: bool) -> Self {
        let scaling = ObservationScaling::new(cfg.sensors.max_range, &cfg.limits, cfg.observation.normalize);
        Self {
            cfg,
            store,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            focused,
            scaling,
            last_version: None,
            failure: None,
        }
    }

    pub fn store(&self) -> &PolicyStore {
        &self.store
    }

    /// Actor version used by the most recent proposal.
    pub fn last_version(&self) -> Option<u64> {
        self.last_version
    }
}

impl CorrectivePlanner for PolicyPlanner {
    fn correct(&mut self, ctx: &AvoidanceContext<'_>) -> safer_core::Result<Correction> {
        self.failure = None;
        let snapshot = self.store.load();
        self.last_version = Some(snapshot.version);
        let obs = build_observation(ctx.scan, ctx.state, ctx.upstream, &self.scaling);
        let action: Action = policy_forward(&snapshot.actor, &obs, self.mode, &mut self.rng)
            .map_err(|e| CoreError::Planner(e.to_string()))?;
        let (v_s, omega_s) = scale_action(action, &self.cfg.limits);
        let cc = cost_context(&self.cfg, ctx);
        if self.focused {
            let params = self.cfg.search.focused();
            let res = focused_search(v_s, omega_s, ctx.state, &params, &cc).inspect_err(|e| {
                self.failure = Some(Correction {
                    command: ControlCommand::corrective(v_s, omega_s),
                    cost: f64::INFINITY,
                    candidates_evaluated: match e {
                        CoreError::NoFeasibleCandidate { evaluated } => *evaluated,
                        _ => 0,
                    },
                    window: None,
                    policy_action: Some(action.to_array()),
                });
            })?;
            Ok(Correction {
                command: res.best,
                cost: res.cost,
                candidates_evaluated: res.candidates_evaluated,
                window: Some(res.window),
                policy_action: Some(action.to_array()),
            })
        } else {
            let window = standard_window(ctx.state, &self.cfg.limits);
            let (v, omega) = clamp_to_window(v_s, omega_s, &window);
            Ok(Correction {
                command: ControlCommand::corrective(v, omega),
                cost: evaluate_candidate(v, omega, &cc).cost(),
                candidates_evaluated: 1,
                window: Some(window),
                policy_action: Some(action.to_array()),
            })
        }
    }

    fn failed_attempt(&mut self) -> Option<Correction> {
        self.failure.take()
    }
}

/// Gate configuration plus avoidance planner for one method.
pub struct MethodStack {
    pub id: MethodId,
    /// `None` for the unprotected baseline.
    pub gate: Option<GateConfig>,
    pub planner: Option<Box<dyn CorrectivePlanner + Send>>,
    /// Shared actor, for the learned methods.
    pub policy: Option<PolicyStore>,
}

impl MethodStack {
    pub fn new(
        id: MethodId,
        cfg: &SaferConfig,
        policy: Option<PolicyStore>,
        mode: PolicyMode,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        if id.needs_policy() && policy.is_none() {
            return Err(HarnessError::MissingCheckpoint(id));
        }
        let (gate, planner): (Option<GateConfig>, Option<Box<dyn CorrectivePlanner + Send>>) = match id {
            MethodId::NoSafety => (None, None),
            MethodId::Aeb => (Some(cfg.gate_config(false)), None),
            MethodId::Dwa => (
                Some(cfg.gate_config(true)),
                Some(Box::new(DwaPlanner::new(cfg.clone()))),
            ),
            MethodId::Rl | MethodId::Safer => (
                Some(cfg.gate_config(true)),
                Some(Box::new(PolicyPlanner::new(
                    cfg.clone(),
                    policy.clone().expect("checked above"),
                    mode,
                    seed,
                    id == MethodId::Safer,
                ))),
            ),
        };
        Ok(Self {
            id,
            gate,
            planner,
            policy: if id.needs_policy() { policy } else { None },
        })
    }
}
