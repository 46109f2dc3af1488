use safer_core::gate::GateStage;
use safer_core::world::WorldModel;
use safer_core::SaferConfig;
use safer_harness::driver::adversarial_action;
use safer_harness::scenario::builtin;
use safer_harness::trials::{aggregate, csv_string};
use safer_harness::{run_episode, LoadedScenario, MethodId, Scenario, SimOptions};
use safer_teleop::{replay, Bridge, BridgeOptions, OperatorCommand, Tape, TeleopError, TickInput, TAPE_VERSION};

fn wall_ahead() -> LoadedScenario {
    let world = WorldModel::from_json(
        r#"{
          "bounds": { "x_min": -2.0, "y_min": -3.0, "x_max": 6.0, "y_max": 3.0 },
          "segments": [ { "x1": 3.0, "y1": -2.5, "x2": 3.0, "y2": 2.5 } ],
          "spawn": { "x": 0.0, "y": 0.0, "theta": 0.0 }
        }"#,
    )
    .unwrap();
    let scenario: Scenario = serde_json::from_str(
        r#"{
          "name": "wall_ahead",
          "world": "inline",
          "heading_jitter": 0.0,
          "success": { "type": "time-boxed-crash-session" },
          "max_steps": 200
        }"#,
    )
    .unwrap();
    LoadedScenario::new(scenario, world).unwrap()
}

fn drive(throttle: f64, turn: f64) -> TickInput {
    TickInput {
        command: Some(OperatorCommand::new(throttle, turn)),
        method: None,
    }
}

#[test]
fn aeb_brakes_before_the_operator_reaches_the_wall() {
    let mut b = Bridge::new(wall_ahead(), SaferConfig::default(), MethodId::Aeb, None, 1, BridgeOptions::default()).unwrap();
    let frames: Vec<_> = (0..150).map(|_| b.tick(drive(1.0, 0.0)).unwrap()).collect();
    let first_brake = frames.iter().position(|f| f.sigma == 1).expect("never braked");
    let first_contact = frames.iter().position(|f| f.collided).unwrap_or(usize::MAX);
    assert!(first_brake < first_contact);
    assert_eq!(frames[first_brake].stage, GateStage::Brake);
    assert!(frames.iter().all(|f| f.pose.x < 3.0));

    let mut unprotected = Bridge::new(wall_ahead(), SaferConfig::default(), MethodId::NoSafety, None, 1, BridgeOptions::default()).unwrap();
    let hit = (0..150).any(|_| unprotected.tick(drive(1.0, 0.0)).unwrap().collided);
    assert!(hit, "the fixture should be reachable without protection");
}

#[test]
fn switching_methods_takes_effect_on_the_next_frame() {
    let mut b = Bridge::new(wall_ahead(), SaferConfig::default(), MethodId::NoSafety, None, 2, BridgeOptions::default()).unwrap();
    let mut reached = None;
    for _ in 0..150 {
        let f = b.tick(drive(1.0, 0.0)).unwrap();
        if f.collided {
            reached = Some(f.tick);
            break;
        }
        assert_eq!(f.sigma, 0);
    }
    assert!(reached.is_some());
    let f = b
        .tick(TickInput {
            command: Some(OperatorCommand::new(1.0, 0.0)),
            method: Some(MethodId::Dwa),
        })
        .unwrap();
    assert_eq!(f.method, MethodId::Dwa);
    assert_ne!(f.stage, GateStage::Maintain);
}

#[test]
fn recorded_sessions_replay_bitwise() {
    let cfg = SaferConfig::default();
    let scenario = builtin("tight_doorway").unwrap();
    let mut b = Bridge::new(scenario.clone(), cfg.clone(), MethodId::Dwa, None, 77, BridgeOptions::default()).unwrap();
    let mut live = Vec::new();
    for i in 0..120u64 {
        let input = match i {
            0 => drive(1.0, 0.0),
            7 => drive(0.8, 0.6),
            30 => TickInput {
                command: Some(OperatorCommand::new(1.0, -0.4)),
                method: Some(MethodId::Aeb),
            },
            // Left to go stale from here.
            40 => drive(0.6, 0.1),
            90 => TickInput {
                command: None,
                method: Some(MethodId::Dwa),
            },
            95 => drive(1.0, 1.0),
            _ => TickInput::default(),
        };
        live.push(b.tick(input).unwrap());
    }
    let (live_result, tape) = b.finish();
    assert_eq!(tape.ticks, 120);
    assert_eq!(tape.events.len(), 6);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    tape.save(&path).unwrap();
    let loaded = Tape::load(&path).unwrap();
    assert_eq!(loaded, tape);

    let (replayed, result) = replay(&loaded, scenario, cfg, None).unwrap();
    assert_eq!(
        serde_json::to_string(&replayed).unwrap(),
        serde_json::to_string(&live).unwrap()
    );
    let csv = |r| csv_string(&[aggregate(MethodId::Dwa, "tight_doorway", 77, &[r]).0]);
    assert_eq!(csv(result), csv(live_result));
}

#[test]
fn an_empty_tape_is_an_idle_session() {
    let mut tape = Tape::new(5, MethodId::Aeb);
    tape.ticks = 30;
    let (frames, result) = replay(&tape, builtin("open_corridor").unwrap(), SaferConfig::default(), None).unwrap();
    assert_eq!(frames.len(), 30);
    assert!(frames.iter().all(|f| f.stage == GateStage::Maintain && f.emitted.v == 0.0));
    assert_eq!(result.final_state, result.spawn);
    assert_eq!(result.metrics.distance, 0.0);
}

#[test]
fn replay_refuses_other_tape_versions() {
    let mut tape = Tape::new(5, MethodId::Aeb);
    tape.version = TAPE_VERSION + 1;
    let err = replay(&tape, builtin("open_corridor").unwrap(), SaferConfig::default(), None).unwrap_err();
    assert!(matches!(err, TeleopError::TapeVersion { .. }));
}

/// An operator replaying the adversarial chauffeur by hand sees exactly the
/// batch harness's crash-session episode.
#[test]
fn operator_chauffeur_matches_the_harness_crash_session() {
    let cfg = SaferConfig::default();
    let scenario = builtin("try_to_crash").unwrap();
    for method in [MethodId::Aeb, MethodId::Dwa] {
        let seed = 11;
        let mut b = Bridge::new(scenario.clone(), cfg.clone(), method, None, seed, BridgeOptions::default()).unwrap();
        let mut frames = Vec::new();
        for _ in 0..scenario.scenario.max_steps {
            let [throttle, turn] = adversarial_action(b.scan());
            frames.push(b.tick(drive(throttle, turn)).unwrap());
        }
        let (bridged, _) = b.finish();
        let batch = run_episode(method, &scenario, &cfg, seed, None, SimOptions::untimed()).unwrap();
        assert_eq!(bridged.metrics, batch.metrics, "{method}");
        assert_eq!(bridged.final_state, batch.final_state, "{method}");
        assert_eq!(frames.last().unwrap().metrics, batch.metrics);
    }
}
