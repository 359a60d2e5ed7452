//! JSON messages exchanged over the operator WebSocket.
//!
//! Every message is an object with a `type` field. Clients may attach an
//! integer `id` to an input; the matching `ack` or `err` echoes it.

use serde::{Deserialize, Serialize};

use huegrip_core::cvforce::ForceEstimate;
use huegrip_core::gesturenet::{Angles, GestureLabel};
use huegrip_core::teleop::{Command, OperatorInput, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    GloveSample {
        angles: Angles,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Gesture {
        label: GestureLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    /// Runtime-adjustable settings; absent keys are left unchanged.
    ConfigUpdate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        safety_limit: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stream_rate_hz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frame_rate_hz: Option<f64>,
    },
}

impl ClientMessage {
    pub fn id(&self) -> Option<u64> {
        match self {
            ClientMessage::GloveSample { id, .. }
            | ClientMessage::Gesture { id, .. }
            | ClientMessage::ConfigUpdate { id, .. } => *id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::GloveSample { .. } => "glove_sample",
            ClientMessage::Gesture { .. } => "gesture",
            ClientMessage::ConfigUpdate { .. } => "config_update",
        }
    }

    pub fn operator_input(&self) -> Option<OperatorInput> {
        match *self {
            ClientMessage::GloveSample { angles, .. } => Some(OperatorInput::GloveSample { angles }),
            ClientMessage::Gesture { label, .. } => Some(OperatorInput::Gesture { label }),
            ClientMessage::ConfigUpdate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not valid JSON or not a known message shape.
    Malformed,
    /// Well-formed but unusable, e.g. angles outside [0, 180].
    InvalidInput,
    /// The gesture's command is not allowed in the current phase.
    Rejected,
    /// The input queue is full.
    Busy,
    /// The control loop has stopped.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub step: u64,
    pub t: f64,
    pub phase: Phase,
    pub hue: u8,
    pub led_rgb: [u8; 3],
    /// Most recently classified gesture.
    pub gesture: Option<GestureLabel>,
    pub command: Command,
    /// Latched camera estimate, `null` until one is valid.
    pub force_estimate: Option<ForceEstimate>,
    pub safety_limit: f64,
    pub arm_pose: [f64; 3],
    pub pressures: [f64; 3],
    /// Base64 PNG of the camera frame, on every n-th message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_b64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent once on connect.
    Session {
        session_id: String,
        tick_rate_hz: f64,
        stream_rate_hz: f64,
        frame_rate_hz: f64,
    },
    Telemetry(Telemetry),
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        input: String,
        /// Tick at which the input was applied.
        step: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gesture: Option<GestureLabel>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        command: Option<Command>,
    },
    Err {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn err(id: Option<u64>, code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Err {
            id,
            code,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
