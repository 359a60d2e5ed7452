use std::sync::Arc;

use proptest::prelude::*;

use huegrip_core::cvforce::ForceEstimate;
use huegrip_core::gesturenet::{GestureLabel, PrototypeClassifier};
use huegrip_core::gripsim::TargetKind;
use huegrip_core::session::{CatchOutcome, SessionLog};
use huegrip_core::teleop::{
    gesture_to_command, run_catch_scenario, Actuation, CatchLoop, Command, GestureTable, OperatorInput, Phase,
    ScenarioConfig, ScenarioScript, TeleopConfig,
};

fn estimate(force: f64) -> ForceEstimate {
    ForceEstimate {
        force,
        camera_hue: Some(60.0),
        contour_area: 8000,
        valid: true,
    }
}

fn with_limit(limit: f64) -> ScenarioConfig {
    ScenarioConfig {
        teleop: TeleopConfig {
            safety_limit: limit,
            ..TeleopConfig::default()
        },
        ..ScenarioConfig::default()
    }
}

/// Documented successor sets.
fn allowed(from: Phase, to: Phase) -> bool {
    use Phase::*;
    from == to
        || to == Fault
        || matches!(
            (from, to),
            (Idle, Approach)
                | (Approach, PreGrasp | Idle)
                | (PreGrasp, Grasping | Idle)
                | (Grasping, Holding | Releasing)
                | (Holding, Releasing)
                | (Releasing, Idle)
                | (Fault, Releasing)
        )
}

fn command_strategy() -> impl Strategy<Value = Command> {
    prop_oneof![
        prop::array::uniform3(-1.0f64..1.0).prop_map(|direction| Command::ArmMove { direction }),
        Just(Command::GraspStart),
        Just(Command::GraspHold),
        Just(Command::Release),
        Just(Command::EmergencyVent),
        Just(Command::Confirm),
        Just(Command::ToggleVerbosity),
        Just(Command::NoOp),
    ]
}

fn estimate_strategy() -> impl Strategy<Value = ForceEstimate> {
    prop_oneof![
        Just(ForceEstimate::invalid()),
        (0.0f64..=4.0).prop_map(estimate),
        prop_oneof![Just(f64::NAN), Just(-0.5), Just(9.0)].prop_map(estimate),
    ]
}

proptest! {
    #[test]
    fn phase_graph_is_closed(
        start in 0usize..7,
        limit in 0.1f64..=4.0,
        steps in prop::collection::vec((command_strategy(), estimate_strategy()), 1..80),
    ) {
        let cfg = TeleopConfig { safety_limit: limit, grasp_settle_ticks: 20, release_ticks: 10, ..TeleopConfig::default() };
        let mut state = cfg.initial_state();
        state.phase = Phase::ALL[start];
        let mut latched = None;
        for (cmd, est) in steps {
            if est.valid && (0.0..=4.0).contains(&est.force) {
                latched = Some(est.force);
            }
            let (next, act) = cfg.tick(&state, cmd, &est);
            prop_assert!(allowed(state.phase, next.phase), "{:?} -> {:?}", state.phase, next.phase);
            if latched.is_some_and(|f| f > limit) {
                prop_assert_eq!(act, Actuation::EmergencyVent);
                prop_assert_eq!(next.phase, Phase::Fault);
            }
            state = next;
        }
    }

    #[test]
    fn every_gesture_maps_in_every_phase(label in 0usize..8, phase in 0usize..7) {
        let m = gesture_to_command(&GestureTable::default(), GestureLabel::ALL[label], Phase::ALL[phase]);
        prop_assert!(Phase::ALL[phase].accepts(&m.command));
        if m.rejected.is_some() {
            prop_assert_eq!(m.command, Command::NoOp);
        }
    }
}

#[test]
fn tick_examples() {
    let cfg = TeleopConfig::default();
    let holding = huegrip_core::teleop::TeleopState {
        phase: Phase::Holding,
        ..cfg.initial_state()
    };
    let (next, act) = cfg.tick(&holding, Command::NoOp, &estimate(cfg.safety_limit + 0.1));
    assert_eq!((next.phase, act), (Phase::Fault, Actuation::EmergencyVent));

    let idle = cfg.initial_state();
    let (next, act) = cfg.tick(&idle, Command::NoOp, &ForceEstimate::invalid());
    assert_eq!(next.phase, Phase::Idle);
    assert_eq!(next.arm_pose, idle.arm_pose);
    assert_eq!(act, Actuation::Vent);

    let pre = huegrip_core::teleop::TeleopState {
        phase: Phase::PreGrasp,
        ..cfg.initial_state()
    };
    let (next, act) = cfg.tick(&pre, Command::GraspStart, &ForceEstimate::invalid());
    assert_eq!((next.phase, act), (Phase::Grasping, Actuation::Inflate));
}

#[test]
fn latched_estimate_survives_invalid_frames() {
    let cfg = TeleopConfig::default();
    let s = cfg.initial_state();
    let (s, _) = cfg.tick(&s, Command::NoOp, &estimate(1.0));
    let (s, _) = cfg.tick(&s, Command::NoOp, &ForceEstimate::invalid());
    assert_eq!(s.last_force_estimate.force, 1.0);
    let (s, act) = cfg.tick(&s, Command::NoOp, &estimate(3.0));
    assert_eq!(act, Actuation::EmergencyVent);
    let (_, act) = cfg.tick(&s, Command::Release, &ForceEstimate::invalid());
    assert_eq!(act, Actuation::EmergencyVent);
}

#[test]
fn soft_catch_with_full_scale_limit_reaches_holding() {
    let log = run_catch_scenario(&ScenarioScript::default_catch(), &with_limit(4.0), None).unwrap();
    assert!(log.steps.iter().any(|s| s.phase == Phase::Holding));
    assert!(log.steps.iter().all(|s| s.phase != Phase::Fault));
    let summary = log.summary(false);
    assert_eq!(summary.outcome, CatchOutcome::Caught);
    assert!(summary.mean_hold_force.unwrap() > 0.0);
    assert!(summary.estimate_error.unwrap() < 0.2);
    assert_eq!(log.steps.last().unwrap().phase, Phase::Idle);
}

#[test]
fn default_limit_tolerates_the_soft_target() {
    let log = run_catch_scenario(&ScenarioScript::default_catch(), &ScenarioConfig::default(), None).unwrap();
    assert_eq!(log.summary(false).outcome, CatchOutcome::Caught);
}

#[test]
fn rigid_target_trips_the_default_limit_only_if_it_reads_over() {
    let cfg = ScenarioConfig {
        target: TargetKind::Rigid,
        ..ScenarioConfig::default()
    };
    let log = run_catch_scenario(&ScenarioScript::default_catch(), &cfg, None).unwrap();
    let peak = log
        .steps
        .iter()
        .filter_map(|s| s.estimate)
        .filter(|e| e.estimate.valid)
        .map(|e| e.estimate.force)
        .fold(0.0, f64::max);
    let faulted = log.steps.iter().any(|s| s.phase == Phase::Fault);
    assert_eq!(faulted, peak > cfg.teleop.safety_limit);
}

#[test]
fn lowered_limit_faults_the_soft_catch() {
    let log = run_catch_scenario(&ScenarioScript::default_catch(), &with_limit(0.8), None).unwrap();
    let first_fault = log.steps.iter().position(|s| s.phase == Phase::Fault).expect("fault");
    let s = &log.steps[first_fault];
    assert_eq!(s.actuation, Actuation::EmergencyVent);
    assert_eq!(log.summary(false).outcome, CatchOutcome::Fault);
}

#[test]
fn empty_script_stays_idle_and_is_flagged() {
    let script = ScenarioScript {
        duration_ticks: 200,
        events: vec![],
    };
    let log = run_catch_scenario(&script, &ScenarioConfig::default(), None).unwrap();
    assert!(log.steps.iter().all(|s| s.phase == Phase::Idle));
    assert!(log.catch_failed());
    assert_eq!(log.summary(false).outcome, CatchOutcome::CatchFailed);
    assert_eq!(log.summary(true).outcome, CatchOutcome::InProgress);
    let zero = ScenarioScript {
        duration_ticks: 0,
        events: vec![],
    };
    assert!(run_catch_scenario(&zero, &ScenarioConfig::default(), None).is_err());
}

#[test]
fn glove_input_needs_a_classifier() {
    let mut lp = CatchLoop::new(ScenarioConfig::default(), None).unwrap();
    let glove = OperatorInput::GloveSample {
        angles: GestureLabel::Fist.prototype(),
    };
    assert!(lp.step(Some(glove)).is_err());

    let mut lp = CatchLoop::new(ScenarioConfig::default(), Some(Arc::new(PrototypeClassifier))).unwrap();
    let rec = lp.step(Some(glove)).unwrap();
    assert_eq!(rec.gesture, Some(GestureLabel::Fist));
    assert!(rec.rejected.is_some());
    let bad = OperatorInput::GloveSample { angles: [200.0; 5] };
    assert!(lp.step(Some(bad)).is_err());
}

#[test]
fn replays_are_identical_and_seeds_matter() {
    let noisy = |seed| ScenarioConfig {
        scene: huegrip_core::framegen::SceneSpec {
            noise_amplitude: 8,
            ..Default::default()
        },
        seed,
        ..ScenarioConfig::default()
    };
    let run = |seed| {
        run_catch_scenario(&ScenarioScript::default_catch(), &noisy(seed), None)
            .unwrap()
            .to_jsonl()
            .unwrap()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn session_log_round_trips_with_identical_summary() {
    let log = run_catch_scenario(&ScenarioScript::default_catch(), &ScenarioConfig::default(), None).unwrap();
    let bytes = log.to_jsonl().unwrap();
    let back = SessionLog::read_jsonl(bytes.as_slice()).unwrap();
    assert_eq!(back, log);
    assert_eq!(back.summary(false), log.summary(false));
    assert_eq!(back.to_jsonl().unwrap(), bytes);

    let mut csv = Vec::new();
    log.summary(false).write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("steps,outcome,mean_hold_force,estimate_error,valid_estimates,partial")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "caught");
    assert!(row[2].parse::<f64>().unwrap() > 0.0);
    assert!(row[3].parse::<f64>().is_ok());
    assert!(SessionLog::read_jsonl(&b"{not json}\n"[..]).is_err());
}

#[test]
fn script_json_format() {
    let text = r#"{"duration_ticks": 50, "events": [
        {"tick": 2, "type": "gesture", "label": "ThumbUp"},
        {"tick": 4, "type": "glove_sample", "angles": [10, 170, 170, 170, 170]}
    ]}"#;
    let script: ScenarioScript = serde_json::from_str(text).unwrap();
    assert_eq!(script.events.len(), 2);
    let log = run_catch_scenario(&script, &ScenarioConfig::default(), Some(Arc::new(PrototypeClassifier))).unwrap();
    assert_eq!(log.steps[2].gesture, Some(GestureLabel::ThumbUp));
    assert_eq!(log.steps[4].gesture, Some(GestureLabel::ThumbUp));
    assert_eq!(log.steps[2].phase, Phase::Approach);
}
