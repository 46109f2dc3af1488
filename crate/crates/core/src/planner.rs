//! Action cost and the two dynamic-window searches: the exhaustive standard
//! search over the reachable window and the focused search around a policy
//! proposal.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{check_beta, predict_collision};
use crate::kinematics::{
    clamp_to_window, focused_window, plan_ahead_time, rollout_trajectory, standard_window,
    ControlCommand, DynamicWindow, KinematicLimits, RobotState, Trajectory,
};
use crate::sensors::ObstacleSet;
use crate::world::Footprint;

/// Floor applied to the obstacle distance inside the reciprocal term.
pub const DIST_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Speed term weight.
    pub c1: f64,
    /// Deviation-from-reference weight.
    pub c2: f64,
    /// Obstacle-clearance weight.
    pub c3: f64,
}

impl CostWeights {
    /// `(0.4, 0.2, 0.4)`.
    pub const V1: CostWeights = CostWeights {
        c1: 0.4,
        c2: 0.2,
        c3: 0.4,
    };
    /// `(0.4, 0.4, 0.2)`.
    pub const V2: CostWeights = CostWeights {
        c1: 0.4,
        c2: 0.4,
        c3: 0.2,
    };

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            c1: self.c1 * k,
            c2: self.c2 * k,
            c3: self.c3 * k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cost.c1", self.c1), ("cost.c2", self.c2), ("cost.c3", self.c3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "[0, inf)",
                });
            }
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::V1
    }
}

/// Everything the cost function needs besides the candidate itself.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub v_ref: f64,
    pub omega_ref: f64,
    pub obstacles: &'a ObstacleSet,
    pub weights: &'a CostWeights,
    pub beta: f64,
    pub limits: &'a KinematicLimits,
    pub footprint: &'a Footprint,
}

/// Minimum center distance between any trajectory state and any obstacle
/// point; `+inf` for an empty obstacle set.
pub fn min_obstacle_distance(obstacles: &ObstacleSet, traj: &Trajectory) -> f64 {
    let mut best = f64::INFINITY;
    for c in traj.points() {
        for p in &obstacles.points {
            best = best.min(c.dist_sq(*p));
        }
    }
    best.sqrt()
}

/// Cost formula given the trajectory-to-obstacle distance directly.
pub fn cost_from_distance(
    v_c: f64,
    omega_c: f64,
    v_ref: f64,
    omega_ref: f64,
    dist: f64,
    weights: &CostWeights,
    v_max: f64,
) -> f64 {
    let speed = weights.c1 * (v_max - v_c);
    let deviation = weights.c2 * ((v_c - v_ref).abs() + (omega_c - omega_ref).abs());
    let clearance = if dist.is_infinite() {
        0.0
    } else {
        weights.c3 / dist.max(DIST_EPSILON)
    };
    speed + deviation + clearance
}

/// Cost of a candidate together with whether its `beta * t_p` rollout
/// predicts a collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEvaluation {
    /// Finite value of the formula with the distance floor applied.
    pub raw: f64,
    pub collides: bool,
}

impl CostEvaluation {
    /// Cost with colliding candidates mapped to `+inf`.
    pub fn cost(&self) -> f64 {
        if self.collides {
            f64::INFINITY
        } else {
            self.raw
        }
    }
}

pub fn evaluate_candidate(v_c: f64, omega_c: f64, ctx: &CostContext<'_>) -> CostEvaluation {
    let horizon = ctx.beta * plan_ahead_time(v_c, ctx.limits);
    let traj = rollout_trajectory(v_c, omega_c, horizon, ctx.limits.t_r)
        .expect("finite candidate and positive horizon");
    let dist = min_obstacle_distance(ctx.obstacles, &traj);
    CostEvaluation {
        raw: cost_from_distance(
            v_c,
            omega_c,
            ctx.v_ref,
            ctx.omega_ref,
            dist,
            ctx.weights,
            ctx.limits.v_max,
        ),
        collides: predict_collision(&traj, ctx.obstacles, ctx.footprint),
    }
}

/// Cost of a corrective command; `+inf` when the candidate's `beta * t_p`
/// rollout predicts a collision.
pub fn action_cost(v_c: f64, omega_c: f64, ctx: &CostContext<'_>) -> f64 {
    evaluate_candidate(v_c, omega_c, ctx).cost()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ControlCommand,
    pub cost: f64,
    pub candidates_evaluated: usize,
    pub window: DynamicWindow,
    #[serde(with = "duration_secs")]
    pub elapsed: Duration,
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// `n` evenly spaced values across `[lo, hi]`, endpoints included.
pub fn grid_axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

/// Evaluates every point of an `n_v x n_omega` grid over `window` and
/// returns the cheapest. Ties go to the lowest v-major index.
pub fn grid_search(
    window: &DynamicWindow,
    n_v: usize,
    n_omega: usize,
    ctx: &CostContext<'_>,
) -> Result<SearchResult> {
    if n_v < 2 || n_omega < 2 {
        return Err(Error::OutOfRange {
            name: "grid size",
            value: n_v.min(n_omega) as f64,
            range: "[2, inf)",
        });
    }
    check_beta(ctx.beta)?;
    let start = Instant::now();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut evaluated = 0;
    for v in grid_axis(window.v_lower, window.v_upper, n_v) {
        for w in grid_axis(window.omega_lower, window.omega_upper, n_omega) {
            let cost = action_cost(v, w, ctx);
            evaluated += 1;
            if cost.is_finite() && best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, v, w));
            }
        }
    }
    let elapsed = start.elapsed();
    match best {
        Some((cost, v, w)) => Ok(SearchResult {
            best: ControlCommand::corrective(v, w),
            cost,
            candidates_evaluated: evaluated,
            window: *window,
            elapsed,
        }),
        None => Err(Error::NoFeasibleCandidate { evaluated }),
    }
}

/// Exhaustive search over the standard dynamic window.
pub fn standard_dwa_search(
    state: &RobotState,
    n_v: usize,
    n_omega: usize,
    ctx: &CostContext<'_>,
) -> Result<SearchResult> {
    let window = standard_window(state, ctx.limits);
    grid_search(&window, n_v, n_omega, ctx)
}

/// Per-dimension sample count of the focused search: `round(delta * n)`,
/// never fewer than two.
pub fn focused_samples(delta: f64, n: usize) -> usize {
    ((delta * n as f64).round() as usize).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusedParams {
    pub gamma: f64,
    pub delta: f64,
    pub n_v: usize,
    pub n_omega: usize,
    /// Additionally intersect the focused window with the standard window.
    pub enforce_accel_feasibility: bool,
}

/// Window actually searched by [`focused_search`] for a raw scaled proposal.
pub fn focused_search_window(
    v_s: f64,
    omega_s: f64,
    state: &RobotState,
    params: &FocusedParams,
    limits: &KinematicLimits,
) -> Result<DynamicWindow> {
    let standard = standard_window(state, limits);
    let (v_s, omega_s) = clamp_to_window(v_s, omega_s, &standard);
    let focused = focused_window(v_s, omega_s, params.gamma, limits)?;
    Ok(if params.enforce_accel_feasibility {
        focused.intersect(&standard)
    } else {
        focused
    })
}

/// Focused grid search around the scaled policy proposal `(v_s, omega_s)`.
/// The proposal is first clamped into the standard window.
pub fn focused_search(
    v_s: f64,
    omega_s: f64,
    state: &RobotState,
    params: &FocusedParams,
    ctx: &CostContext<'_>,
) -> Result<SearchResult> {
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: params.delta,
            range: "(0, 1)",
        });
    }
    let window = focused_search_window(v_s, omega_s, state, params, ctx.limits)?;
    grid_search(
        &window,
        focused_samples(params.delta, params.n_v),
        focused_samples(params.delta, params.n_omega),
        ctx,
    )
}
