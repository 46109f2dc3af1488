//! Standard versus focused search on a fixed set of ego-frame scenes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use safer_core::geometry::Point2;
use safer_core::kinematics::{ControlCommand, RobotState};
use safer_core::planner::{focused_search, standard_dwa_search, CostContext, SearchResult};
use safer_core::sensors::ObstacleSet;
use safer_core::SaferConfig;

use crate::HarnessError;

/// One planning situation in the robot frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFixture {
    pub state: RobotState,
    pub obstacles: ObstacleSet,
    pub upstream: ControlCommand,
    /// Policy proposal `(v_s, omega_s)` that centers the focused search.
    pub proposal: (f64, f64),
}

impl BenchFixture {
    pub fn cost_context<'a>(&'a self, cfg: &'a SaferConfig) -> CostContext<'a> {
        CostContext {
            v_ref: self.upstream.v,
            omega_ref: self.upstream.omega,
            obstacles: &self.obstacles,
            weights: &cfg.cost,
            beta: cfg.gate.beta,
            limits: &cfg.limits,
            footprint: &cfg.footprint,
        }
    }
}

fn wall_points(rng: &mut ChaCha8Rng, out: &mut Vec<Point2>) {
    let dist = rng.random_range(0.9..2.2);
    let bearing: f64 = rng.random_range(-0.6..0.6);
    let tilt: f64 = rng.random_range(-0.8..0.8);
    let len = rng.random_range(0.6..2.0);
    let center = Point2::new(dist * bearing.cos(), dist * bearing.sin());
    let dir = Point2::new(-(bearing + tilt).sin(), (bearing + tilt).cos());
    let n = (len / 0.03) as usize;
    for k in 0..=n {
        let s = -len / 2.0 + len * k as f64 / n as f64;
        out.push(Point2::new(center.x + s * dir.x, center.y + s * dir.y));
    }
}

/// Twenty seeded scenes: one or two wall fragments plus scattered clutter
/// ahead of a moving robot.
pub fn standard_fixtures(cfg: &SaferConfig) -> Vec<BenchFixture> {
    let l = &cfg.limits;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    (0..20)
        .map(|i| {
            let mut pts = Vec::new();
            wall_points(&mut rng, &mut pts);
            if i % 2 == 1 {
                wall_points(&mut rng, &mut pts);
            }
            for _ in 0..rng.random_range(0..6) {
                let r = rng.random_range(1.0..3.0);
                let a: f64 = rng.random_range(-1.2..1.2);
                pts.push(Point2::new(r * a.cos(), r * a.sin()));
            }
            let v = rng.random_range(0.2..1.0) * l.v_max;
            let omega = rng.random_range(-0.5..0.5) * l.omega_max;
            let turn = (i as f64 * 0.7).sin();
            BenchFixture {
                state: RobotState::ego(v, omega),
                obstacles: ObstacleSet::new(pts),
                upstream: ControlCommand::upstream(l.v_max, turn * l.omega_max),
                proposal: (
                    rng.random_range(0.0..1.0) * l.v_max,
                    rng.random_range(-1.0..1.0) * l.omega_max,
                ),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTiming {
    pub standard_candidates: usize,
    pub focused_candidates: usize,
    pub standard_seconds: f64,
    pub focused_seconds: f64,
    pub standard_cost: f64,
    pub focused_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub fixtures: Vec<FixtureTiming>,
    /// Focused over standard candidate count.
    pub candidates_ratio: f64,
    /// Focused over standard mean wall-clock.
    pub time_ratio: f64,
    pub search_size_ratio: f64,
    pub window_ratio: f64,
    pub granularity_ratio: f64,
}

fn timed<T>(reps: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let r = f();
        best = best.min(t.elapsed());
        out = Some(r);
    }
    (out.expect("at least one repetition"), best)
}

fn finite_cost(r: &safer_core::Result<SearchResult>) -> f64 {
    r.as_ref().map_or(f64::INFINITY, |r| r.cost)
}

/// Runs both searches on every fixture; wall-clock is the fastest of `reps`
/// repetitions.
pub fn bench_search(fixtures: &[BenchFixture], cfg: &SaferConfig, reps: usize) -> Result<BenchReport, HarnessError> {
    if fixtures.is_empty() {
        return Err(HarnessError::Scenario("no bench fixtures".into()));
    }
    let s = &cfg.search;
    let focused = s.focused();
    let mut rows = Vec::with_capacity(fixtures.len());
    for f in fixtures {
        let cc = f.cost_context(cfg);
        let (std_res, std_t) = timed(reps, || standard_dwa_search(&f.state, s.n_v, s.n_omega, &cc));
        let (foc_res, foc_t) = timed(reps, || focused_search(f.proposal.0, f.proposal.1, &f.state, &focused, &cc));
        let count = |r: &safer_core::Result<SearchResult>| match r {
            Ok(r) => r.candidates_evaluated,
            Err(safer_core::Error::NoFeasibleCandidate { evaluated }) => *evaluated,
            Err(_) => 0,
        };
        rows.push(FixtureTiming {
            standard_candidates: count(&std_res),
            focused_candidates: count(&foc_res),
            standard_seconds: std_t.as_secs_f64(),
            focused_seconds: foc_t.as_secs_f64(),
            standard_cost: finite_cost(&std_res),
            focused_cost: finite_cost(&foc_res),
        });
    }
    let sum = |g: fn(&FixtureTiming) -> f64| rows.iter().map(g).sum::<f64>();
    Ok(BenchReport {
        candidates_ratio: sum(|r| r.focused_candidates as f64) / sum(|r| r.standard_candidates as f64),
        time_ratio: sum(|r| r.focused_seconds) / sum(|r| r.standard_seconds),
        search_size_ratio: s.delta * s.delta,
        window_ratio: 1.0 / s.gamma,
        granularity_ratio: s.gamma / s.delta,
        fixtures: rows,
    })
}
