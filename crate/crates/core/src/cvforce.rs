//! Camera-side force decoding.
//!
//! The pipeline is grayscale -> Otsu threshold -> 8-connected components
//! -> area filter -> circular mean hue of the surviving blob -> affine
//! hue-to-force map.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::framegen::{render, CameraImage, Rgb, SceneSpec};
use crate::gripsim::{SensorFrame, REGISTER_MAX};
use crate::huecode;
use crate::FORCE_FULL_SCALE;

/// Contours must be strictly larger than this many pixels.
pub const MIN_CONTOUR_AREA: usize = 5000;

/// Camera hues live on [0, 180).
pub const CAMERA_HUE_TURN: f64 = 180.0;

/// Camera-scale HSV: hue in [0, 179] (degrees / 2), saturation and value
/// in [0, 255]. Gray pixels report hue 0.
pub fn rgb_to_camera_hsv(rgb: Rgb) -> [u8; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let degrees = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let hue = ((degrees.rem_euclid(360.0) / 2.0).round() as u32 % 180) as u8;
    let sat = if max == 0.0 {
        0
    } else {
        (255.0 * delta / max).round() as u8
    };
    [hue, sat, max as u8]
}

pub fn camera_hue(rgb: Rgb) -> u8 {
    rgb_to_camera_hsv(rgb)[0]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

/// Rounded 0.299/0.587/0.114 luma, computed in integers.
pub fn luma([r, g, b]: Rgb) -> u8 {
    ((299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000) as u8
}

pub fn grayscale(image: &CameraImage) -> GrayImage {
    GrayImage {
        width: image.width,
        height: image.height,
        data: image.pixels.iter().copied().map(luma).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtsuResult {
    pub threshold: u8,
    pub mask: BinaryMask,
    /// Set when the image holds a single gray level.
    pub degenerate: bool,
}

/// Compares `a/b` with `c/d` exactly; `b` and `d` must be non-zero.
fn cmp_fraction(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    loop {
        let (qa, ra) = (a / b, a % b);
        let (qc, rc) = (c / d, c % d);
        if qa != qc {
            return qa.cmp(&qc);
        }
        match (ra == 0, rc == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        // ra/b vs rc/d orders the same way as d/rc vs b/ra.
        (a, b, c, d) = (d, rc, b, ra);
    }
}

/// Otsu's threshold over the 256-bin histogram.
///
/// Between-class variance for a split at `t` is proportional to
/// `(s0*N - S*n0)^2 / (n0*n1)`; candidates are compared as exact
/// fractions so ties always resolve to the lowest threshold.
pub fn otsu_threshold(gray: &GrayImage) -> Result<OtsuResult> {
    if gray.data.is_empty() {
        return Err(invalid("otsu_threshold needs a non-empty image"));
    }
    if gray.data.len() != gray.width as usize * gray.height as usize {
        return Err(invalid("gray image dimensions do not match its data"));
    }
    let mut hist = [0u64; 256];
    for &v in &gray.data {
        hist[v as usize] += 1;
    }
    let levels: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if levels.len() == 1 {
        return Ok(OtsuResult {
            threshold: levels[0] as u8,
            mask: BinaryMask::empty(gray.width, gray.height),
            degenerate: true,
        });
    }

    let n = gray.data.len() as i128;
    let total_sum: i128 = hist.iter().enumerate().map(|(i, c)| i as i128 * *c as i128).sum();
    let (mut n0, mut s0) = (0i128, 0i128);
    let mut best = (0u8, 0u128, 1u128);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as i128;
        s0 += t as i128 * count as i128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 * n - total_sum * n0).unsigned_abs();
        let num = diff * diff;
        let den = (n0 * n1) as u128;
        if cmp_fraction(num, den, best.1, best.2) == Ordering::Greater {
            best = (t as u8, num, den);
        }
    }
    let threshold = best.0;
    Ok(OtsuResult {
        threshold,
        mask: BinaryMask {
            width: gray.width,
            height: gray.height,
            bits: gray.data.iter().map(|&v| v > threshold).collect(),
        },
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    /// Row-major indices of member pixels.
    pub pixels: Vec<u32>,
    pub area: usize,
    /// Filled in by [`filter_and_measure`].
    pub mean_camera_hue: Option<f64>,
}

/// 8-connected foreground components, in row-major order of their first pixel.
pub fn extract_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; mask.bits.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            pixels.push(i as u32);
            let (x, y) = (i as i64 % w, i as i64 / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        out.push(Contour {
            area: pixels.len(),
            pixels,
            mean_camera_hue: None,
        });
    }
    out
}

/// Circular mean of camera hues, taken about the first sample so a
/// uniform input returns its hue exactly.
pub fn circular_mean_hue(hues: impl IntoIterator<Item = u8>) -> Option<f64> {
    let mut it = hues.into_iter();
    let reference = f64::from(it.next()?);
    let scale = std::f64::consts::TAU / CAMERA_HUE_TURN;
    let (mut s, mut c) = (0.0, 1.0);
    for h in it {
        let a = (f64::from(h) - reference) * scale;
        s += a.sin();
        c += a.cos();
    }
    let offset = s.atan2(c) / scale;
    Some((reference + offset).rem_euclid(CAMERA_HUE_TURN))
}

/// Keeps the largest contour above [`MIN_CONTOUR_AREA`] and measures its hue.
pub fn filter_and_measure(contours: &[Contour], image: &CameraImage) -> Option<Contour> {
    let mut best: Option<&Contour> = None;
    for c in contours.iter().filter(|c| c.area > MIN_CONTOUR_AREA) {
        if best.is_none_or(|b| c.area > b.area) {
            best = Some(c);
        }
    }
    let best = best?;
    let hue = circular_mean_hue(
        best.pixels
            .iter()
            .map(|&i| camera_hue(image.pixels[i as usize])),
    );
    Some(Contour {
        mean_camera_hue: hue,
        ..best.clone()
    })
}

/// Camera-hue interval decoded onto the [0, 4] force axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeInterval {
    /// Camera hue read at zero force.
    pub h_lo: f64,
    /// Camera hue read at full-scale force.
    pub h_hi: f64,
}

impl Default for DecodeInterval {
    /// Output of [`calibrate_decoder`] on the default scene.
    fn default() -> Self {
        Self {
            h_lo: 32.0,
            h_hi: 148.0,
        }
    }
}

impl DecodeInterval {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_lo.is_finite() && self.h_hi.is_finite()) {
            return Err(Error::Config("decode interval endpoints must be finite".into()));
        }
        if self.h_lo == self.h_hi {
            return Err(Error::Config(format!(
                "decode interval is empty: h_lo = h_hi = {}",
                self.h_lo
            )));
        }
        Ok(())
    }

    /// Affine on the interval, clamped to [0, 4] outside it. A reversed
    /// interval (`h_lo > h_hi`) decodes in the reversed direction.
    pub fn hue_to_force(&self, camera_hue: f64) -> Result<f64> {
        self.validate()?;
        if !camera_hue.is_finite() {
            return Err(invalid("camera hue must be finite"));
        }
        let f = FORCE_FULL_SCALE * (camera_hue - self.h_lo) / (self.h_hi - self.h_lo);
        Ok(f.clamp(0.0, FORCE_FULL_SCALE))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    pub force: f64,
    pub camera_hue: Option<f64>,
    pub contour_area: usize,
    pub valid: bool,
}

impl ForceEstimate {
    pub fn invalid() -> Self {
        Self {
            force: 0.0,
            camera_hue: None,
            contour_area: 0,
            valid: false,
        }
    }

    /// Valid and physically meaningful: finite and within [0, 4].
    pub fn is_usable(&self) -> bool {
        self.valid && self.force.is_finite() && (0.0..=FORCE_FULL_SCALE).contains(&self.force)
    }
}

/// Measures the LED blob, returning the surviving contour if any.
pub fn measure_blob(image: &CameraImage) -> Result<Option<Contour>> {
    image.validate()?;
    if image.pixels.is_empty() {
        return Ok(None);
    }
    let otsu = otsu_threshold(&grayscale(image))?;
    if otsu.degenerate {
        return Ok(None);
    }
    Ok(filter_and_measure(&extract_contours(&otsu.mask), image))
}

pub fn estimate(image: &CameraImage, interval: &DecodeInterval) -> Result<ForceEstimate> {
    interval.validate()?;
    let Some(blob) = measure_blob(image)? else {
        return Ok(ForceEstimate::invalid());
    };
    let hue = blob.mean_camera_hue.expect("measured contour has a hue");
    Ok(ForceEstimate {
        force: interval.hue_to_force(hue)?,
        camera_hue: Some(hue),
        contour_area: blob.area,
        valid: true,
    })
}

/// Reads back the camera hues of frames encoding registers 0 and 4096.
pub fn calibrate_decoder(template: &SceneSpec) -> Result<DecodeInterval> {
    let read = |register: u16| -> Result<f64> {
        let cmd = huecode::encode(&SensorFrame::from_registers([register; 3], [register; 3]))?;
        let spec = SceneSpec {
            led_hue: cmd.hue,
            noise_amplitude: 0,
            occlusion_factor: 0.0,
            ..template.clone()
        };
        let blob = measure_blob(&render(&spec, 0)?)?.ok_or_else(|| {
            Error::Config("calibration frame produced no measurable blob".into())
        })?;
        Ok(blob.mean_camera_hue.expect("measured"))
    };
    let interval = DecodeInterval {
        h_lo: read(0)?,
        h_hi: read(REGISTER_MAX)?,
    };
    interval.validate()?;
    Ok(interval)
}
