//! Simulation and sensing stack for a color-telemetry soft gripper.
//!
//! The pieces form one closed teleoperation loop:
//!
//! * [`gripsim`] steps a three-finger pneumatic gripper against a grasp
//!   target and produces 12-bit sensor registers.
//! * [`huecode`] folds those registers into a single LED hue byte.
//! * [`framegen`] renders what a camera pointed at the LEDs would see.
//! * [`cvforce`] recovers the applied force from such a frame.
//! * [`gesturenet`] classifies flex-glove poses with a small MLP.
//! * [`teleop`] maps gestures to gripper/arm commands behind a force
//!   interlock and runs whole catch scenarios.
//! * [`session`] holds the per-step logs and their summaries.

pub mod cvforce;
pub mod error;
pub mod framegen;
pub mod gesturenet;
pub mod gripsim;
pub mod huecode;
pub mod session;
pub mod teleop;

pub use error::{Error, Result};

/// Full scale of the decoded force axis.
pub const FORCE_FULL_SCALE: f64 = 4.0;
