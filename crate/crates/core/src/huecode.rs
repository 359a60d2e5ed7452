//! Folds a sensor frame into the one-byte LED hue.
//!
//! Both register kinds are mapped affinely onto the hue band [45, 210];
//! the FSR contribution is the strongest finger, the flex contribution is
//! the mean over fingers, and the LED hue is the average of the two.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gripsim::{SensorFrame, FINGERS, REGISTER_MAX};
use crate::FORCE_FULL_SCALE;

pub const HUE_MIN: f64 = 45.0;
pub const HUE_MAX: f64 = 210.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueCommand {
    pub hue: u8,
    pub hue_fsr: f64,
    pub hue_fsl: f64,
}

impl HueCommand {
    /// Unrounded LED hue.
    pub fn exact_hue(&self) -> f64 {
        0.5 * (self.hue_fsr + self.hue_fsl)
    }

    /// The force this command encodes on the decoder's [0, 4] axis.
    pub fn scale_force(&self) -> f64 {
        hue_to_scale_force(self.exact_hue())
    }
}

/// Position of an LED hue within the band, expressed on the force axis.
pub fn hue_to_scale_force(hue: f64) -> f64 {
    FORCE_FULL_SCALE * (hue - HUE_MIN) / (HUE_MAX - HUE_MIN)
}

pub fn map_register_to_hue(r: u16) -> Result<f64> {
    if r > REGISTER_MAX {
        return Err(invalid(format!("register {r} outside [0, {REGISTER_MAX}]")));
    }
    Ok(affine(f64::from(r)))
}

fn affine(r: f64) -> f64 {
    HUE_MIN + r * (HUE_MAX - HUE_MIN) / f64::from(REGISTER_MAX)
}

/// Round half up onto the byte scale.
fn round_half_up(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode(frame: &SensorFrame) -> Result<HueCommand> {
    frame.validate()?;
    let fsr_max = *frame.fsr_registers.iter().max().expect("three fingers");
    let hue_fsr = map_register_to_hue(fsr_max)?;
    // Averaging in register space equals averaging in hue space under an
    // affine map, and costs one map call.
    let fsl_mean = frame.fsl_registers.iter().map(|r| f64::from(*r)).sum::<f64>() / FINGERS as f64;
    let hue_fsl = affine(fsl_mean);
    Ok(HueCommand {
        hue: round_half_up(0.5 * (hue_fsr + hue_fsl)),
        hue_fsr,
        hue_fsl,
    })
}
