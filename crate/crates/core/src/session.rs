//! Per-step session logs, their JSON-lines form and summary statistics.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cvforce::ForceEstimate;
use crate::error::{Error, Result};
use crate::gesturenet::GestureLabel;
use crate::gripsim::FINGERS;
use crate::teleop::{Actuation, Command, OperatorInput, Phase};

/// A CV estimate together with the force the rendered hue encoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub estimate: ForceEstimate,
    pub true_force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<OperatorInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gesture: Option<GestureLabel>,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
    pub phase: Phase,
    pub actuation: Actuation,
    pub arm_pose: [f64; 3],
    pub pressures: [f64; FINGERS],
    pub fsr: [u16; FINGERS],
    pub fsl: [u16; FINGERS],
    pub contact_forces: [f64; FINGERS],
    pub hue: u8,
    /// Force encoded by `hue` on the [0, 4] axis.
    pub hue_force: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatchOutcome {
    Caught,
    Fault,
    CatchFailed,
    InProgress,
}

impl CatchOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            CatchOutcome::Caught => "caught",
            CatchOutcome::Fault => "fault",
            CatchOutcome::CatchFailed => "catch_failed",
            CatchOutcome::InProgress => "in_progress",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub steps: u64,
    pub reached_holding: bool,
    pub faulted: bool,
    pub outcome: CatchOutcome,
    /// Mean ground-truth finger force (N) over Holding steps.
    pub mean_hold_force: Option<f64>,
    /// Mean absolute CV force error over valid estimates.
    pub estimate_error: Option<f64>,
    pub valid_estimates: u64,
    pub partial: bool,
}

impl SessionSummary {
    pub fn from_steps(steps: &[StepRecord], partial: bool) -> Self {
        let reached_holding = steps.iter().any(|s| s.phase == Phase::Holding);
        let faulted = steps.iter().any(|s| s.phase == Phase::Fault);
        let hold: Vec<f64> = steps
            .iter()
            .filter(|s| s.phase == Phase::Holding)
            .map(|s| s.contact_forces.iter().sum::<f64>() / FINGERS as f64)
            .collect();
        let errors: Vec<f64> = steps
            .iter()
            .filter_map(|s| s.estimate)
            .filter(|e| e.estimate.valid)
            .map(|e| (e.estimate.force - e.true_force).abs())
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let outcome = if faulted {
            CatchOutcome::Fault
        } else if reached_holding {
            CatchOutcome::Caught
        } else if partial {
            CatchOutcome::InProgress
        } else {
            CatchOutcome::CatchFailed
        };
        Self {
            steps: steps.len() as u64,
            reached_holding,
            faulted,
            outcome,
            mean_hold_force: mean(&hold),
            estimate_error: mean(&errors),
            valid_estimates: errors.len() as u64,
            partial,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "steps",
            "outcome",
            "mean_hold_force",
            "estimate_error",
            "valid_estimates",
            "partial",
        ])?;
        w.write_record([
            self.steps.to_string(),
            self.outcome.as_str().to_string(),
            opt(self.mean_hold_force),
            opt(self.estimate_error),
            self.valid_estimates.to_string(),
            self.partial.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Append-only step log of one session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub steps: Vec<StepRecord>,
}

impl SessionLog {
    pub fn push(&mut self, step: StepRecord) {
        self.steps.push(step);
    }

    pub fn summary(&self, partial: bool) -> SessionSummary {
        SessionSummary::from_steps(&self.steps, partial)
    }

    pub fn catch_failed(&self) -> bool {
        !self.steps.iter().any(|s| s.phase == Phase::Holding)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.steps {
            write_step_line(&mut out, s)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(buf)
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut steps = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("session log line {}: {e}", n + 1)))?;
            steps.push(step);
        }
        Ok(Self { steps })
    }
}

pub fn write_step_line<W: Write>(mut out: W, step: &StepRecord) -> Result<()> {
    serde_json::to_writer(&mut out, step)?;
    out.write_all(b"\n")?;
    Ok(())
}
