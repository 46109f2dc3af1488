//! Hyperparameter checks for the gate and the focused search.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use safer_core::geometry::Point2;
use safer_core::kinematics::RobotState;
use safer_core::planner::{evaluate_candidate, CostContext};
use safer_core::sensors::ObstacleSet;
use safer_core::SaferConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub key: String,
    pub message: String,
}

/// Measured costs used for the search-time budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimate {
    pub per_candidate_seconds: f64,
    pub policy_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    /// `gamma / delta`; at most 1 means the focused grid is no coarser than
    /// the standard one.
    pub granularity_ratio: f64,
    /// Focused candidates times measured per-candidate cost.
    pub estimated_search_seconds: Option<f64>,
    /// `t_r` minus the measured policy inference time.
    pub search_budget_seconds: Option<f64>,
}

impl ValidationReport {
    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }
}

fn issue(severity: Severity, key: &str, message: String) -> Issue {
    Issue {
        severity,
        key: key.into(),
        message,
    }
}

pub fn validate_config(cfg: &SaferConfig, timing: Option<TimingEstimate>) -> ValidationReport {
    let mut issues = Vec::new();
    if let Err(e) = cfg.validate() {
        issues.push(issue(Severity::Error, "config", e.to_string()));
    }
    let beta = cfg.gate.beta;
    if !(beta.is_finite() && beta > 1.0) {
        issues.push(issue(Severity::Error, "gate.beta", format!("beta = {beta} must exceed 1")));
    }
    let (gamma, delta) = (cfg.search.gamma, cfg.search.delta);
    for (key, x) in [("search.gamma", gamma), ("search.delta", delta)] {
        if !(x > 0.0 && x < 1.0) {
            issues.push(issue(Severity::Error, key, format!("{x} is outside (0, 1)")));
        }
    }
    let ratio = gamma / delta;
    if ratio > 1.0 {
        issues.push(issue(
            Severity::Warning,
            "search.gamma",
            format!("gamma/delta = {ratio} > 1: the focused grid is coarser than the standard grid"),
        ));
    }

    let candidates = (delta * delta * (cfg.search.n_v * cfg.search.n_omega) as f64).max(4.0);
    let estimate = timing.map(|t| t.per_candidate_seconds * candidates);
    let budget = timing.map(|t| cfg.limits.t_r - t.policy_seconds);
    if let (Some(est), Some(budget)) = (estimate, budget) {
        if est > budget {
            issues.push(issue(
                Severity::Warning,
                "search",
                format!("estimated search time {est:.6} s exceeds the {budget:.6} s left in a control period"),
            ));
        }
    }
    ValidationReport {
        issues,
        granularity_ratio: ratio,
        estimated_search_seconds: estimate,
        search_budget_seconds: budget,
    }
}

/// Mean wall-clock of one cost evaluation in a cluttered scene.
pub fn measure_candidate_cost(cfg: &SaferConfig, evaluations: usize) -> f64 {
    let pts: Vec<Point2> = (0..360)
        .map(|i| {
            let a = (i as f64).to_radians();
            Point2::new(3.0 * a.cos(), 3.0 * a.sin())
        })
        .collect();
    let obstacles = ObstacleSet::new(pts);
    let state = RobotState::ego(cfg.limits.v_max / 2.0, 0.0);
    let cc = CostContext {
        v_ref: cfg.limits.v_max,
        omega_ref: 0.0,
        obstacles: &obstacles,
        weights: &cfg.cost,
        beta: cfg.gate.beta,
        limits: &cfg.limits,
        footprint: &cfg.footprint,
    };
    let n = evaluations.max(1);
    let t = Instant::now();
    let mut acc = 0.0;
    for k in 0..n {
        let w = (k as f64 / n as f64 - 0.5) * cfg.limits.omega_max;
        acc += evaluate_candidate(state.v, w, &cc).raw;
    }
    std::hint::black_box(acc);
    t.elapsed().as_secs_f64() / n as f64
}
