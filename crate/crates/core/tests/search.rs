use proptest::prelude::*;
use safer_core::gate::predict_collision;
use safer_core::kinematics::{rollout_trajectory, standard_window};
use safer_core::planner::{
    action_cost, focused_search, focused_search_window, grid_axis, standard_dwa_search,
    CostContext, FocusedParams,
};
use safer_core::{CostWeights, Error, Footprint, KinematicLimits, ObstacleSet, Point2, RobotState};

fn limits() -> KinematicLimits {
    KinematicLimits::default()
}

fn params() -> FocusedParams {
    FocusedParams {
        gamma: 0.05,
        delta: 0.1,
        n_v: 50,
        n_omega: 50,
        enforce_accel_feasibility: false,
    }
}

fn obstacles() -> impl Strategy<Value = ObstacleSet> {
    prop::collection::vec((0.4f64..3.0, -2.0f64..2.0), 0..12)
        .prop_map(|pts| ObstacleSet::new(pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect()))
}

fn state() -> impl Strategy<Value = RobotState> {
    (0.0f64..0.5, -1.0f64..1.0).prop_map(|(v, w)| RobotState::ego(v, w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standard_result_is_consistent(s in state(), obs in obstacles(), v_ref in -0.5f64..0.5, w_ref in -1.0f64..1.0) {
        let (l, fp, w) = (limits(), Footprint::default(), CostWeights::V1);
        let ctx = CostContext { v_ref, omega_ref: w_ref, obstacles: &obs, weights: &w, beta: 2.0, limits: &l, footprint: &fp };
        match standard_dwa_search(&s, 12, 12, &ctx) {
            Ok(res) => {
                prop_assert_eq!(res.candidates_evaluated, 144);
                prop_assert!(res.window.contains(res.best.v, res.best.omega));
                prop_assert_eq!(res.cost, action_cost(res.best.v, res.best.omega, &ctx));
                let horizon = 2.0 * safer_core::kinematics::plan_ahead_time(res.best.v, &l);
                let traj = rollout_trajectory(res.best.v, res.best.omega, horizon, l.t_r).unwrap();
                prop_assert!(!predict_collision(&traj, &obs, &fp));
                // Minimum over the evaluated grid.
                let win = standard_window(&s, &l);
                for v in grid_axis(win.v_lower, win.v_upper, 12) {
                    for om in grid_axis(win.omega_lower, win.omega_upper, 12) {
                        prop_assert!(action_cost(v, om, &ctx) >= res.cost);
                    }
                }
            }
            Err(Error::NoFeasibleCandidate { evaluated }) => prop_assert_eq!(evaluated, 144),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn focused_result_stays_in_window(s in state(), obs in obstacles(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let (l, fp, w) = (limits(), Footprint::default(), CostWeights::V1);
        let ctx = CostContext { v_ref: 0.5, omega_ref: 0.0, obstacles: &obs, weights: &w, beta: 2.0, limits: &l, footprint: &fp };
        let (v_s, w_s) = (a * l.v_max, b * l.omega_max);
        let window = focused_search_window(v_s, w_s, &s, &params(), &l).unwrap();
        match focused_search(v_s, w_s, &s, &params(), &ctx) {
            Ok(res) => {
                prop_assert_eq!(res.candidates_evaluated, 25);
                prop_assert_eq!(res.window, window);
                prop_assert!(window.contains(res.best.v, res.best.omega));
                prop_assert_eq!(res.cost, action_cost(res.best.v, res.best.omega, &ctx));
            }
            Err(Error::NoFeasibleCandidate { evaluated }) => prop_assert_eq!(evaluated, 25),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn accel_feasible_window_is_inside_standard(s in state(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let l = limits();
        let p = FocusedParams { enforce_accel_feasibility: true, ..params() };
        let w = focused_search_window(a * l.v_max, b * l.omega_max, &s, &p, &l).unwrap();
        let std = standard_window(&s, &l);
        prop_assert!(w.v_lower >= std.v_lower && w.v_upper <= std.v_upper);
        prop_assert!(w.omega_lower >= std.omega_lower && w.omega_upper <= std.omega_upper);
    }
}

#[test]
fn wall_ahead_matches_fine_grid() {
    let (l, fp, w) = (limits(), Footprint::default(), CostWeights::V1);
    let obs = ObstacleSet::new((-60..=60).map(|i| Point2::new(1.6, i as f64 * 0.025)).collect());
    let ctx = CostContext {
        v_ref: 0.5,
        omega_ref: 0.0,
        obstacles: &obs,
        weights: &w,
        beta: 2.0,
        limits: &l,
        footprint: &fp,
    };
    let state = RobotState::ego(0.4, 0.0);
    let res = standard_dwa_search(&state, 50, 50, &ctx).unwrap();
    let win = res.window;
    let fine = grid_axis(win.v_lower, win.v_upper, 300)
        .flat_map(|v| grid_axis(win.omega_lower, win.omega_upper, 300).map(move |o| (v, o)))
        .map(|(v, o)| action_cost(v, o, &ctx))
        .fold(f64::INFINITY, f64::min);
    assert!(fine.is_finite());
    // One coarse cell of the linear terms plus generous room for the clearance term.
    let cell = (w.c1 + w.c2) * win.v_width() / 49.0 + w.c2 * win.omega_width() / 49.0;
    assert!(res.cost <= fine + 3.0 * cell, "{} vs {}", res.cost, fine);
    assert!(res.cost + 1e-12 >= fine - cell);
}
