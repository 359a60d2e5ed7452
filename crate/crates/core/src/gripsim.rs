//! Three-finger soft pneumatic gripper simulation.
//!
//! Each finger is a soft pneumatic actuator whose tip travels radially
//! inward as it is pressurised. Fingers are treated as massless linear
//! springs in series with the grasp target, so the contact force follows
//! quasi-statically from the commanded pressure.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const FINGERS: usize = 3;

/// Inclusive upper end of the 12-bit register scale.
pub const REGISTER_MAX: u16 = 4096;

/// Per-finger valve setting of the air supply module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValveCommand {
    Inflate,
    #[default]
    Hold,
    Vent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Soft,
    Rigid,
}

/// Simulation parameters. Every field has a default, so partial config
/// files are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub rate_hz: f64,
    pub supply_pressure_kpa: f64,
    /// Time constant of the first-order pressure lag.
    pub time_constant_s: f64,
    /// Pressure at which an unobstructed finger reaches full travel.
    pub full_curl_pressure_kpa: f64,
    /// Radial distance from the gripper axis to an open fingertip.
    pub open_radius_m: f64,
    /// Radial travel of an unobstructed fingertip at full curl.
    pub finger_travel_m: f64,
    pub finger_stiffness_n_per_m: f64,
    pub contact_damping_ns_per_m: f64,
    pub max_curl_deg: f64,
    /// Force at which the FSR register reaches 1 - 1/e of full scale.
    pub fsr_force_scale_n: f64,
    /// Amplitude of the uniform register jitter, in register counts.
    pub register_noise: u16,
    pub rigid_threshold_n_per_m: f64,
    pub soft_stiffness_n_per_m: f64,
    pub rigid_stiffness_n_per_m: f64,
    pub target_radius_m: f64,
    pub soft_occlusion: f64,
    pub rigid_occlusion: f64,
    /// Relative pressure error below which inflation counts as settled.
    pub settle_tolerance: f64,
    pub max_inflate_s: f64,
    /// Venting snaps a finger to zero pressure below this value.
    pub vent_cutoff_kpa: f64,
}

/// Soft-target stiffness fitted by `examples/calibrate_stiffness.rs` so the
/// soft/rigid mean hold force ratio is 0.46.
pub const CALIBRATED_SOFT_STIFFNESS: f64 = 50.0;

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rate_hz: 100.0,
            supply_pressure_kpa: 1.4,
            time_constant_s: 0.2,
            full_curl_pressure_kpa: 1.4,
            open_radius_m: 0.06,
            finger_travel_m: 0.05,
            finger_stiffness_n_per_m: 60.0,
            contact_damping_ns_per_m: 0.0,
            max_curl_deg: 90.0,
            fsr_force_scale_n: 4.0,
            register_noise: 0,
            rigid_threshold_n_per_m: 1000.0,
            soft_stiffness_n_per_m: CALIBRATED_SOFT_STIFFNESS,
            rigid_stiffness_n_per_m: 5000.0,
            target_radius_m: 0.04,
            soft_occlusion: 0.35,
            rigid_occlusion: 0.1,
            settle_tolerance: 0.005,
            max_inflate_s: 5.0,
            vent_cutoff_kpa: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rate_hz", self.rate_hz),
            ("supply_pressure_kpa", self.supply_pressure_kpa),
            ("time_constant_s", self.time_constant_s),
            ("full_curl_pressure_kpa", self.full_curl_pressure_kpa),
            ("open_radius_m", self.open_radius_m),
            ("finger_travel_m", self.finger_travel_m),
            ("finger_stiffness_n_per_m", self.finger_stiffness_n_per_m),
            ("max_curl_deg", self.max_curl_deg),
            ("fsr_force_scale_n", self.fsr_force_scale_n),
            ("rigid_threshold_n_per_m", self.rigid_threshold_n_per_m),
            ("soft_stiffness_n_per_m", self.soft_stiffness_n_per_m),
            ("rigid_stiffness_n_per_m", self.rigid_stiffness_n_per_m),
            ("target_radius_m", self.target_radius_m),
            ("settle_tolerance", self.settle_tolerance),
            ("max_inflate_s", self.max_inflate_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.contact_damping_ns_per_m.is_finite() && self.contact_damping_ns_per_m >= 0.0) {
            return Err(Error::Config("contact_damping_ns_per_m must be >= 0".into()));
        }
        if !(self.vent_cutoff_kpa.is_finite() && self.vent_cutoff_kpa >= 0.0) {
            return Err(Error::Config("vent_cutoff_kpa must be >= 0".into()));
        }
        if self.finger_travel_m > self.open_radius_m {
            return Err(Error::Config(
                "finger_travel_m cannot exceed open_radius_m".into(),
            ));
        }
        if self.soft_stiffness_n_per_m >= self.rigid_threshold_n_per_m
            || self.rigid_stiffness_n_per_m < self.rigid_threshold_n_per_m
        {
            return Err(Error::Config(
                "soft/rigid stiffnesses must straddle rigid_threshold_n_per_m".into(),
            ));
        }
        Ok(())
    }

    pub fn soft_target(&self) -> GraspTarget {
        GraspTarget {
            stiffness: self.soft_stiffness_n_per_m,
            radius: self.target_radius_m,
            kind: TargetKind::Soft,
            occlusion_factor: self.soft_occlusion,
        }
    }

    pub fn rigid_target(&self) -> GraspTarget {
        GraspTarget {
            stiffness: self.rigid_stiffness_n_per_m,
            radius: self.target_radius_m,
            kind: TargetKind::Rigid,
            occlusion_factor: self.rigid_occlusion,
        }
    }

    pub fn target(&self, kind: TargetKind) -> GraspTarget {
        match kind {
            TargetKind::Soft => self.soft_target(),
            TargetKind::Rigid => self.rigid_target(),
        }
    }

    /// Force (N) to FSR register: saturating, monotone.
    pub fn fsr_register(&self, force: f64) -> u16 {
        let x = f64::from(REGISTER_MAX) * (1.0 - (-force.max(0.0) / self.fsr_force_scale_n).exp());
        (x.round() as u16).min(REGISTER_MAX)
    }

    /// Curl angle (deg) to FS-L register: linear, monotone.
    pub fn fsl_register(&self, curl_deg: f64) -> u16 {
        let frac = (curl_deg / self.max_curl_deg).clamp(0.0, 1.0);
        (f64::from(REGISTER_MAX) * frac).round() as u16
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTarget {
    pub stiffness: f64,
    pub radius: f64,
    pub kind: TargetKind,
    pub occlusion_factor: f64,
}

impl GraspTarget {
    pub fn validate(&self, rigid_threshold: f64) -> Result<()> {
        if !(self.stiffness.is_finite() && self.stiffness > 0.0) {
            return Err(invalid(format!("target stiffness must be > 0, got {}", self.stiffness)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(invalid(format!("target radius must be > 0, got {}", self.radius)));
        }
        if !(0.0..=1.0).contains(&self.occlusion_factor) {
            return Err(invalid(format!(
                "occlusion_factor must lie in [0, 1], got {}",
                self.occlusion_factor
            )));
        }
        let rigid = self.stiffness >= rigid_threshold;
        match (self.kind, rigid) {
            (TargetKind::Rigid, false) => Err(invalid(format!(
                "rigid target stiffness {} is below the rigid threshold {rigid_threshold}",
                self.stiffness
            ))),
            (TargetKind::Soft, true) => Err(invalid(format!(
                "soft target stiffness {} is at or above the rigid threshold {rigid_threshold}",
                self.stiffness
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PneumaticState {
    pub per_finger_pressure: [f64; FINGERS],
    pub valve_states: [ValveCommand; FINGERS],
    pub supply_pressure: f64,
}

impl PneumaticState {
    /// Fully vented gripper on the given supply.
    pub fn vented(supply_pressure: f64) -> Self {
        Self {
            per_finger_pressure: [0.0; FINGERS],
            valve_states: [ValveCommand::Vent; FINGERS],
            supply_pressure,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.supply_pressure.is_finite() && self.supply_pressure >= 0.0) {
            return Err(invalid("supply pressure must be finite and >= 0"));
        }
        for (i, p) in self.per_finger_pressure.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 || *p > self.supply_pressure {
                return Err(invalid(format!(
                    "finger {i} pressure {p} outside [0, {}]",
                    self.supply_pressure
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    pub fsr_registers: [u16; FINGERS],
    pub fsl_registers: [u16; FINGERS],
    /// Ground-truth contact forces in newtons.
    pub contact_forces: [f64; FINGERS],
}

impl SensorFrame {
    /// A frame with the given registers and no force information.
    pub fn from_registers(fsr: [u16; FINGERS], fsl: [u16; FINGERS]) -> Self {
        Self {
            t: 0.0,
            fsr_registers: fsr,
            fsl_registers: fsl,
            contact_forces: [0.0; FINGERS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self
            .fsr_registers
            .iter()
            .chain(&self.fsl_registers)
            .find(|r| **r > REGISTER_MAX)
        {
            return Err(invalid(format!("register value {r} exceeds {REGISTER_MAX}")));
        }
        if self.contact_forces.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(invalid("contact forces must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn mean_contact_force(&self) -> f64 {
        self.contact_forces.iter().sum::<f64>() / FINGERS as f64
    }
}

/// Quasi-static finger/target interaction for one finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerContact {
    /// Depth the fingertip has pushed into the target surface.
    pub penetration: f64,
    /// Actual fingertip travel toward the axis.
    pub tip_travel: f64,
    pub curl_deg: f64,
}

/// Resolves where a finger at `pressure` ends up against `target`.
pub fn finger_contact(config: &SimConfig, target: &GraspTarget, pressure: f64) -> FingerContact {
    let free_travel = config.finger_travel_m * (pressure / config.full_curl_pressure_kpa);
    let gap = (config.open_radius_m - target.radius).max(0.0);
    let overlap = free_travel - gap;
    let (penetration, tip_travel) = if overlap > 0.0 {
        // Finger and target act as springs in series over the overlap.
        let kf = config.finger_stiffness_n_per_m;
        let kt = target.stiffness;
        let pen = overlap * kf / (kf + kt);
        (pen, gap + pen)
    } else {
        (0.0, free_travel)
    };
    let curl_deg = config.max_curl_deg * (tip_travel / config.finger_travel_m).min(1.0);
    FingerContact {
        penetration,
        tip_travel,
        curl_deg,
    }
}

/// Spring-law contact force with optional damping on penetration rate.
pub fn contact_force(target: &GraspTarget, damping: f64, penetration: f64, rate: f64) -> f64 {
    if penetration <= 0.0 {
        return 0.0;
    }
    (target.stiffness * penetration + damping * rate).max(0.0)
}

/// Advances one finger's pressure over `dt` under first-order lag.
pub fn pressure_step(config: &SimConfig, supply: f64, p: f64, cmd: ValveCommand, dt: f64) -> f64 {
    let alpha = 1.0 - (-dt / config.time_constant_s).exp();
    let next = match cmd {
        ValveCommand::Hold => p,
        ValveCommand::Inflate => p + (supply - p) * alpha,
        ValveCommand::Vent => {
            let v = p - p * alpha;
            if v < config.vent_cutoff_kpa {
                0.0
            } else {
                v
            }
        }
    };
    next.clamp(0.0, supply)
}

/// Single-writer gripper simulator.
#[derive(Debug, Clone)]
pub struct GripperSim {
    config: SimConfig,
    target: GraspTarget,
    state: PneumaticState,
    t: f64,
    prev_penetration: [f64; FINGERS],
    rng: ChaCha8Rng,
}

impl GripperSim {
    pub fn new(config: SimConfig, target: GraspTarget, seed: u64) -> Result<Self> {
        config.validate()?;
        target.validate(config.rigid_threshold_n_per_m)?;
        let state = PneumaticState::vented(config.supply_pressure_kpa);
        Ok(Self {
            config,
            target,
            state,
            t: 0.0,
            prev_penetration: [0.0; FINGERS],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn target(&self) -> &GraspTarget {
        &self.target
    }

    pub fn state(&self) -> &PneumaticState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Advances the gripper by `dt` seconds and samples the sensors.
    pub fn step(&mut self, command: [ValveCommand; FINGERS], dt: f64) -> Result<SensorFrame> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt must be finite and > 0, got {dt}")));
        }
        let supply = self.state.supply_pressure;
        let mut fsr = [0u16; FINGERS];
        let mut fsl = [0u16; FINGERS];
        let mut forces = [0.0; FINGERS];
        for i in 0..FINGERS {
            let p = pressure_step(&self.config, supply, self.state.per_finger_pressure[i], command[i], dt);
            self.state.per_finger_pressure[i] = p;
            let contact = finger_contact(&self.config, &self.target, p);
            let rate = (contact.penetration - self.prev_penetration[i]) / dt;
            self.prev_penetration[i] = contact.penetration;
            forces[i] = contact_force(
                &self.target,
                self.config.contact_damping_ns_per_m,
                contact.penetration,
                rate,
            );
            fsr[i] = self.jitter(self.config.fsr_register(forces[i]));
            fsl[i] = self.jitter(self.config.fsl_register(contact.curl_deg));
        }
        self.state.valve_states = command;
        self.t += dt;
        Ok(SensorFrame {
            t: self.t,
            fsr_registers: fsr,
            fsl_registers: fsl,
            contact_forces: forces,
        })
    }

    fn jitter(&mut self, register: u16) -> u16 {
        let amp = i32::from(self.config.register_noise);
        if amp == 0 {
            return register;
        }
        let noisy = i32::from(register) + self.rng.random_range(-amp..=amp);
        noisy.clamp(0, i32::from(REGISTER_MAX)) as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodePhase {
    Inflate,
    Hold,
    Vent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub phase: EpisodePhase,
    pub state: PneumaticState,
    pub frame: SensorFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub target: GraspTarget,
    pub steps: Vec<EpisodeStep>,
    /// Mean over the hold window of the per-frame mean finger force.
    pub mean_hold_force: f64,
    pub missed_grasp: bool,
}

impl EpisodeRecord {
    pub fn hold_frames(&self) -> impl Iterator<Item = &SensorFrame> {
        self.steps
            .iter()
            .filter(|s| s.phase == EpisodePhase::Hold)
            .map(|s| &s.frame)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "p1", "p2", "p3", "fsr1", "fsr2", "fsr3", "fsl1", "fsl2", "fsl3", "f1", "f2", "f3",
        ])?;
        for s in &self.steps {
            let mut row = vec![s.frame.t.to_string()];
            row.extend(s.state.per_finger_pressure.iter().map(f64::to_string));
            row.extend(s.frame.fsr_registers.iter().map(u16::to_string));
            row.extend(s.frame.fsl_registers.iter().map(u16::to_string));
            row.extend(s.frame.contact_forces.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// Runs the inflate, hold and vent protocol against one target.
///
/// Inflation continues until every finger pressure is within
/// `settle_tolerance` of supply (or `max_inflate_s` elapses). The hold
/// window then lasts `hold_duration` and the gripper is vented to zero.
pub fn run_grasp_episode(
    target: &GraspTarget,
    hold_duration: f64,
    config: &SimConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    if !(hold_duration.is_finite() && hold_duration > 0.0) {
        return Err(invalid(format!("hold_duration must be > 0, got {hold_duration}")));
    }
    let mut sim = GripperSim::new(config.clone(), target.clone(), seed)?;
    let dt = config.dt();
    let supply = config.supply_pressure_kpa;
    let mut steps = Vec::new();

    let max_inflate = (config.max_inflate_s / dt).ceil() as usize;
    for _ in 0..max_inflate {
        let frame = sim.step([ValveCommand::Inflate; FINGERS], dt)?;
        steps.push(EpisodeStep {
            phase: EpisodePhase::Inflate,
            state: sim.state().clone(),
            frame,
        });
        let settled = sim
            .state()
            .per_finger_pressure
            .iter()
            .all(|p| (supply - p) <= config.settle_tolerance * supply);
        if settled {
            break;
        }
    }
    let missed_grasp = steps
        .last()
        .is_none_or(|s| s.frame.contact_forces.iter().all(|f| *f == 0.0));

    let hold_steps = (hold_duration / dt).round() as usize;
    let mut force_sum = 0.0;
    for _ in 0..hold_steps {
        let frame = sim.step([ValveCommand::Hold; FINGERS], dt)?;
        force_sum += frame.mean_contact_force();
        steps.push(EpisodeStep {
            phase: EpisodePhase::Hold,
            state: sim.state().clone(),
            frame,
        });
    }
    let mean_hold_force = if hold_steps > 0 {
        force_sum / hold_steps as f64
    } else {
        0.0
    };

    while sim.state().per_finger_pressure.iter().any(|p| *p > 0.0) {
        let frame = sim.step([ValveCommand::Vent; FINGERS], dt)?;
        steps.push(EpisodeStep {
            phase: EpisodePhase::Vent,
            state: sim.state().clone(),
            frame,
        });
    }

    if missed_grasp {
        log::info!("episode flagged as missed grasp: fingers closed without contact");
    }
    Ok(EpisodeRecord {
        target: target.clone(),
        steps,
        mean_hold_force,
        missed_grasp,
    })
}

/// Soft mean hold force divided by rigid mean hold force under `config`.
pub fn soft_rigid_force_ratio(config: &SimConfig, hold_duration: f64) -> Result<f64> {
    let soft = run_grasp_episode(&config.soft_target(), hold_duration, config, 0)?;
    let rigid = run_grasp_episode(&config.rigid_target(), hold_duration, config, 0)?;
    Ok(soft.mean_hold_force / rigid.mean_hold_force)
}

/// Bisects the soft-target stiffness until the soft/rigid mean hold force
/// ratio matches `target_ratio` to within `tol`.
pub fn calibrate_soft_stiffness(config: &SimConfig, target_ratio: f64, tol: f64) -> Result<f64> {
    if !(0.0 < target_ratio && target_ratio < 1.0) {
        return Err(invalid("target ratio must lie in (0, 1)"));
    }
    let mut lo = 1e-6;
    let mut hi = config.rigid_threshold_n_per_m * (1.0 - 1e-9);
    let mut cfg = config.clone();
    let ratio_at = |cfg: &mut SimConfig, k: f64| {
        cfg.soft_stiffness_n_per_m = k;
        soft_rigid_force_ratio(cfg, 1.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = ratio_at(&mut cfg, mid)?;
        if (r - target_ratio).abs() <= tol {
            return Ok(mid);
        }
        if r < target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Config(format!(
        "soft stiffness calibration did not converge to ratio {target_ratio}"
    )))
}
