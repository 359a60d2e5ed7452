//! Teleoperation state machine and the closed catch loop.
//!
//! Phase graph (commands not listed for a phase are rejected as no-ops):
//!
//! ```text
//! Idle      --ArmMove-->    Approach
//! Approach  --ArmMove-->    Approach   --Confirm-->   PreGrasp   --Release--> Idle
//! PreGrasp  --ArmMove-->    PreGrasp   --GraspStart-> Grasping   --Release--> Idle
//! Grasping  --GraspHold or settle timeout--> Holding  --Release--> Releasing
//! Holding   --Release-->    Releasing
//! Releasing --release timeout-->       Idle
//! Fault     --Release (force back under limit)-->     Releasing
//! any       --EmergencyVent or over-limit force-->    Fault
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cvforce::{estimate, DecodeInterval, ForceEstimate};
use crate::error::{invalid, Error, Result};
use crate::framegen::{render, CameraImage, SceneSpec};
use crate::gesturenet::{Angles, GestureClassifier, GestureLabel};
use crate::gripsim::{GripperSim, SimConfig, TargetKind, ValveCommand, FINGERS};
use crate::huecode::{self, HueCommand};
use crate::session::{EstimateSample, SessionLog, StepRecord};
use crate::FORCE_FULL_SCALE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Approach,
    PreGrasp,
    Grasping,
    Holding,
    Releasing,
    Fault,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Idle,
        Phase::Approach,
        Phase::PreGrasp,
        Phase::Grasping,
        Phase::Holding,
        Phase::Releasing,
        Phase::Fault,
    ];

    /// Whether `command` is meaningful in this phase.
    pub fn accepts(self, command: &Command) -> bool {
        use Phase::*;
        match command {
            Command::NoOp | Command::EmergencyVent | Command::ToggleVerbosity => true,
            Command::ArmMove { .. } => matches!(self, Idle | Approach | PreGrasp),
            Command::Confirm => self == Approach,
            Command::GraspStart => self == PreGrasp,
            Command::GraspHold => self == Grasping,
            Command::Release => matches!(self, Approach | PreGrasp | Grasping | Holding | Fault),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    ArmMove { direction: [f64; 3] },
    GraspStart,
    GraspHold,
    Release,
    EmergencyVent,
    /// Advance to the next phase (Approach -> PreGrasp).
    Confirm,
    ToggleVerbosity,
    NoOp,
}

/// What the loop asks of the gripper and arm this tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Actuation {
    Vent,
    Inflate,
    Hold,
    ArmMove { delta: [f64; 3] },
    EmergencyVent,
}

impl Actuation {
    pub fn valve_commands(&self) -> [ValveCommand; FINGERS] {
        let v = match self {
            Actuation::Inflate => ValveCommand::Inflate,
            Actuation::Hold => ValveCommand::Hold,
            Actuation::Vent | Actuation::EmergencyVent | Actuation::ArmMove { .. } => ValveCommand::Vent,
        };
        [v; FINGERS]
    }
}

/// Gesture bindings. Operators may rebind any gesture in config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GestureTable(pub BTreeMap<GestureLabel, Command>);

impl Default for GestureTable {
    fn default() -> Self {
        use GestureLabel::*;
        Self(BTreeMap::from([
            (Fist, Command::GraspStart),
            (Palm, Command::Release),
            (Ok, Command::Confirm),
            (ThumbUp, Command::ArmMove { direction: [0.0, 0.0, 1.0] }),
            (IndexUp, Command::ArmMove { direction: [0.0, 0.0, -1.0] }),
            (Gun, Command::ArmMove { direction: [1.0, 0.0, 0.0] }),
            (CallMe, Command::ToggleVerbosity),
            (Rock, Command::EmergencyVent),
        ]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapping {
    pub command: Command,
    /// Why the bound command was dropped, if it was.
    pub rejected: Option<&'static str>,
}

/// Looks the gesture up and gates it on the current phase. A confirm
/// while grasping means "hold".
pub fn gesture_to_command(table: &GestureTable, label: GestureLabel, phase: Phase) -> Mapping {
    let bound = table.0.get(&label).copied().unwrap_or(Command::NoOp);
    let command = match (bound, phase) {
        (Command::Confirm, Phase::Grasping) => Command::GraspHold,
        (c, _) => c,
    };
    if phase.accepts(&command) {
        Mapping {
            command,
            rejected: None,
        }
    } else {
        log::debug!("gesture {label} ({command:?}) rejected in phase {phase:?}");
        Mapping {
            command: Command::NoOp,
            rejected: Some("gesture not valid in current phase"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeleopConfig {
    /// Force (on the [0, 4] axis) above which the gripper is vented.
    pub safety_limit: f64,
    /// Ticks in Grasping before switching to Holding unprompted.
    pub grasp_settle_ticks: u64,
    /// Ticks spent venting in Releasing before returning to Idle.
    pub release_ticks: u64,
    /// Arm displacement per ArmMove tick, metres.
    pub arm_step_m: f64,
    pub gestures: GestureTable,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            safety_limit: 2.0,
            grasp_settle_ticks: 150,
            release_ticks: 100,
            arm_step_m: 0.005,
            gestures: GestureTable::default(),
        }
    }
}

pub fn validate_safety_limit(limit: f64) -> Result<()> {
    if !(limit > 0.0 && limit <= FORCE_FULL_SCALE) {
        return Err(Error::Config(format!("safety_limit {limit} outside (0, 4]")));
    }
    Ok(())
}

impl TeleopConfig {
    pub fn validate(&self) -> Result<()> {
        validate_safety_limit(self.safety_limit)?;
        if !(self.arm_step_m.is_finite() && self.arm_step_m >= 0.0) {
            return Err(Error::Config("arm_step_m must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> TeleopState {
        TeleopState {
            phase: Phase::Idle,
            arm_pose: [0.0; 3],
            last_force_estimate: ForceEstimate::invalid(),
            safety_limit: self.safety_limit,
            phase_ticks: 0,
            verbose: false,
        }
    }

    /// One control step. An over-limit latched estimate always wins:
    /// the tick vents and lands in Fault regardless of `command`.
    pub fn tick(&self, state: &TeleopState, command: Command, force: &ForceEstimate) -> (TeleopState, Actuation) {
        let mut next = state.clone();
        if force.is_usable() {
            next.last_force_estimate = *force;
        }
        if next.over_limit() {
            next.enter(Phase::Fault);
            return (next, Actuation::EmergencyVent);
        }

        let command = if state.phase.accepts(&command) {
            command
        } else {
            log::debug!("command {command:?} ignored in phase {:?}", state.phase);
            Command::NoOp
        };
        let mut moved = None;
        match (state.phase, command) {
            (_, Command::EmergencyVent) => next.enter(Phase::Fault),
            (_, Command::ToggleVerbosity) => next.verbose = !next.verbose,
            (_, Command::ArmMove { direction }) => {
                let delta = direction.map(|d| d * self.arm_step_m);
                for (p, d) in next.arm_pose.iter_mut().zip(delta) {
                    *p += d;
                }
                moved = Some(delta);
                if state.phase == Phase::Idle {
                    next.enter(Phase::Approach);
                }
            }
            (Phase::Approach, Command::Confirm) => next.enter(Phase::PreGrasp),
            (Phase::PreGrasp, Command::GraspStart) => next.enter(Phase::Grasping),
            (Phase::Grasping, Command::GraspHold) => next.enter(Phase::Holding),
            (Phase::Approach | Phase::PreGrasp, Command::Release) => next.enter(Phase::Idle),
            (Phase::Grasping | Phase::Holding | Phase::Fault, Command::Release) => {
                next.enter(Phase::Releasing)
            }
            _ => {}
        }
        if next.phase == state.phase {
            next.phase_ticks += 1;
            match next.phase {
                Phase::Grasping if next.phase_ticks >= self.grasp_settle_ticks => next.enter(Phase::Holding),
                Phase::Releasing if next.phase_ticks >= self.release_ticks => next.enter(Phase::Idle),
                _ => {}
            }
        }

        let actuation = match (next.phase, moved) {
            (Phase::Fault, _) => Actuation::EmergencyVent,
            (_, Some(delta)) => Actuation::ArmMove { delta },
            (Phase::Grasping, _) => Actuation::Inflate,
            (Phase::Holding, _) => Actuation::Hold,
            _ => Actuation::Vent,
        };
        (next, actuation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleopState {
    pub phase: Phase,
    pub arm_pose: [f64; 3],
    /// Last valid estimate seen (estimates are latched, last valid wins).
    pub last_force_estimate: ForceEstimate,
    pub safety_limit: f64,
    /// Ticks spent in the current phase.
    pub phase_ticks: u64,
    pub verbose: bool,
}

impl TeleopState {
    pub fn over_limit(&self) -> bool {
        self.last_force_estimate.is_usable() && self.last_force_estimate.force > self.safety_limit
    }

    fn enter(&mut self, phase: Phase) {
        if self.phase != phase {
            self.phase = phase;
            self.phase_ticks = 0;
        }
    }
}

/// An operator action: a recognised gesture or raw glove angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorInput {
    Gesture { label: GestureLabel },
    GloveSample { angles: Angles },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub input: OperatorInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub duration_ticks: u64,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

impl ScenarioScript {
    /// Approach, confirm, grasp, hold, then release.
    pub fn default_catch() -> Self {
        let g = |tick, label| ScriptEvent {
            tick,
            input: OperatorInput::Gesture { label },
        };
        Self {
            duration_ticks: 900,
            events: vec![
                g(5, GestureLabel::ThumbUp),
                g(20, GestureLabel::Ok),
                g(40, GestureLabel::Fist),
                g(700, GestureLabel::Palm),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    pub target: TargetKind,
    pub teleop: TeleopConfig,
    /// Camera scene template; hue and occlusion are set per frame.
    pub scene: SceneSpec,
    pub decode: DecodeInterval,
    /// The camera pipeline runs every this many ticks.
    pub cv_period_ticks: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            target: TargetKind::Soft,
            teleop: TeleopConfig::default(),
            scene: SceneSpec::default(),
            decode: DecodeInterval::default(),
            cv_period_ticks: 10,
            seed: 0,
        }
    }
}

pub type SharedClassifier = Arc<dyn GestureClassifier + Send + Sync>;

/// The closed loop: classify -> map -> tick -> gripper -> hue -> camera
/// -> decode, one control tick per [`CatchLoop::step`].
pub struct CatchLoop {
    config: ScenarioConfig,
    state: TeleopState,
    sim: GripperSim,
    hue: HueCommand,
    in_contact: bool,
    step: u64,
    classifier: Option<SharedClassifier>,
}

impl CatchLoop {
    pub fn new(config: ScenarioConfig, classifier: Option<SharedClassifier>) -> Result<Self> {
        config.teleop.validate()?;
        config.decode.validate()?;
        if config.cv_period_ticks == 0 {
            return Err(Error::Config("cv_period_ticks must be > 0".into()));
        }
        let target = config.sim.target(config.target);
        let sim = GripperSim::new(config.sim.clone(), target, config.seed)?;
        let hue = huecode::encode(&crate::gripsim::SensorFrame::from_registers([0; 3], [0; 3]))?;
        Ok(Self {
            state: config.teleop.initial_state(),
            config,
            sim,
            hue,
            in_contact: false,
            step: 0,
            classifier,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &TeleopState {
        &self.state
    }

    pub fn hue(&self) -> &HueCommand {
        &self.hue
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn set_safety_limit(&mut self, limit: f64) -> Result<()> {
        validate_safety_limit(limit)?;
        self.config.teleop.safety_limit = limit;
        self.state.safety_limit = limit;
        Ok(())
    }

    /// Resolves an input to a gesture without advancing the loop.
    pub fn classify(&self, input: &OperatorInput) -> Result<GestureLabel> {
        match input {
            OperatorInput::Gesture { label } => Ok(*label),
            OperatorInput::GloveSample { angles } => {
                if angles.iter().any(|a| !a.is_finite() || !(0.0..=180.0).contains(a)) {
                    return Err(invalid("glove angles must lie in [0, 180]"));
                }
                let c = self
                    .classifier
                    .as_ref()
                    .ok_or_else(|| Error::Config("glove input needs a gesture classifier".into()))?;
                c.classify_angles(angles)
            }
        }
    }

    /// The camera's view of the gripper right now.
    pub fn scene(&self) -> SceneSpec {
        let occlusion = if self.in_contact {
            self.sim.target().occlusion_factor
        } else {
            0.0
        };
        SceneSpec {
            led_hue: self.hue.hue,
            occlusion_factor: occlusion,
            ..self.config.scene.clone()
        }
    }

    pub fn render_frame(&self) -> Result<CameraImage> {
        render(&self.scene(), self.config.seed.wrapping_add(self.step))
    }

    pub fn step(&mut self, input: Option<OperatorInput>) -> Result<StepRecord> {
        let gesture = input.as_ref().map(|i| self.classify(i)).transpose()?;
        let mapping = gesture.map(|g| gesture_to_command(&self.config.teleop.gestures, g, self.state.phase));
        let command = mapping.map_or(Command::NoOp, |m| m.command);

        let sample = if self.step.is_multiple_of(self.config.cv_period_ticks) {
            let est = estimate(&self.render_frame()?, &self.config.decode)?;
            Some(EstimateSample {
                estimate: est,
                true_force: self.hue.scale_force(),
            })
        } else {
            None
        };
        let force = sample.map_or_else(ForceEstimate::invalid, |s| s.estimate);

        let (state, actuation) = self.config.teleop.tick(&self.state, command, &force);
        self.state = state;
        let frame = self.sim.step(actuation.valve_commands(), self.config.sim.dt())?;
        self.in_contact = frame.contact_forces.iter().any(|f| *f > 0.0);
        self.hue = huecode::encode(&frame)?;

        let record = StepRecord {
            step: self.step,
            t: frame.t,
            input,
            gesture,
            command,
            rejected: mapping.and_then(|m| m.rejected).map(str::to_string),
            phase: self.state.phase,
            actuation,
            arm_pose: self.state.arm_pose,
            pressures: self.sim.state().per_finger_pressure,
            fsr: frame.fsr_registers,
            fsl: frame.fsl_registers,
            contact_forces: frame.contact_forces,
            hue: self.hue.hue,
            hue_force: self.hue.scale_force(),
            estimate: sample,
            events: Vec::new(),
        };
        self.step += 1;
        Ok(record)
    }
}

/// Runs a scripted scenario to completion. Events sharing a tick are
/// applied on consecutive ticks, one input per tick.
pub fn run_catch_scenario(
    script: &ScenarioScript,
    config: &ScenarioConfig,
    classifier: Option<SharedClassifier>,
) -> Result<SessionLog> {
    if script.duration_ticks == 0 {
        return Err(invalid("scenario script must run for at least one tick"));
    }
    let mut events = script.events.clone();
    events.sort_by_key(|e| e.tick);
    let mut pending = events.into_iter().peekable();
    let mut lp = CatchLoop::new(config.clone(), classifier)?;
    let mut log = SessionLog::default();
    for tick in 0..script.duration_ticks {
        let input = pending.next_if(|e| e.tick <= tick).map(|e| e.input);
        log.push(lp.step(input)?);
    }
    if log.catch_failed() {
        log::info!("scenario never reached Holding: catch failed");
    }
    Ok(log)
}
