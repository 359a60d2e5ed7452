//! Synthetic camera frames of the LED-lit gripper.
//!
//! A frame is a flat background with one disc of LED color, optionally
//! cut by an occluding rectangle rising from the disc's lower edge and
//! overlaid with uniform per-channel noise.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::huecode::{HUE_MAX, HUE_MIN};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub pixels: Vec<Rgb>,
}

impl CameraImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width as usize * self.height as usize != self.pixels.len() {
            return Err(invalid(format!(
                "{}x{} image holds {} pixels",
                self.width,
                self.height,
                self.pixels.len()
            )));
        }
        Ok(())
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[(y * self.width + x) as usize]
    }

    fn flat(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    /// Binary PPM (P6) encoding.
    pub fn to_ppm(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::new();
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
            .write_image(&self.flat(), self.width, self.height, ExtendedColorType::Rgb8)?;
        Ok(out)
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)?.to_rgb8();
        Ok(Self::from(img))
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let img = RgbImage::from_raw(self.width, self.height, self.flat())
            .expect("validated dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_ppm()?)?;
        Ok(())
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_ppm(&std::fs::read(path)?)
    }
}

impl From<RgbImage> for CameraImage {
    fn from(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self {
            width,
            height,
            pixels,
        }
    }
}

/// Degrees on the color wheel for a byte hue (256 steps per turn).
pub fn byte_hue_degrees(hue: u8) -> f64 {
    f64::from(hue) * 360.0 / 256.0
}

/// Piecewise-linear HSV to RGB with hue in degrees and s, v in [0, 1].
pub fn hsv_degrees_to_rgb(degrees: f64, s: f64, v: f64) -> Rgb {
    let c = v * s;
    let h = degrees.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_byte = |u: f64| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

/// Same conversion as [`hsv_degrees_to_rgb`], done in integers so that
/// exact half-way channel values always round up.
pub fn byte_hue_to_rgb(hue: u8, saturation: u8, value: u8) -> Rgb {
    // Hue in sixths of a turn, in units of 1/128: 6 * hue / 256 = 3 * hue / 128.
    let p = 3 * u32::from(hue);
    let (v, s) = (u32::from(value), u32::from(saturation));
    // Channel values scaled by D = 255 * 128.
    const D: u32 = 255 * 128;
    let c = v * s * 128;
    let x = v * s * (128 - (p % 256).abs_diff(128));
    let m = v * D - c;
    let (r, g, b) = match p / 128 {
        0 => (c, x, 0),
        1 => (x, c, 0),
        2 => (0, c, x),
        3 => (0, x, c),
        4 => (x, 0, c),
        _ => (c, 0, x),
    };
    let to_byte = |u: u32| ((2 * (u + m) + D) / (2 * D)) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub blob_center: [f64; 2],
    pub blob_radius: f64,
    pub led_hue: u8,
    pub background_color: Rgb,
    pub noise_amplitude: u8,
    pub occlusion_factor: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            blob_center: [160.0, 120.0],
            blob_radius: 60.0,
            led_hue: 45,
            background_color: [8, 8, 8],
            noise_amplitude: 0,
            occlusion_factor: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("scene must have non-zero dimensions"));
        }
        if !(self.blob_radius.is_finite() && self.blob_radius > 0.0) {
            return Err(invalid("blob_radius must be > 0"));
        }
        if !(self.occlusion_factor.is_finite() && (0.0..=1.0).contains(&self.occlusion_factor)) {
            return Err(invalid("occlusion_factor must lie in [0, 1]"));
        }
        let hue = f64::from(self.led_hue);
        if !(HUE_MIN..=HUE_MAX).contains(&hue) {
            return Err(invalid(format!("led_hue {hue} outside [{HUE_MIN}, {HUE_MAX}]")));
        }
        let [cx, cy] = self.blob_center;
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(invalid("blob_center must be finite"));
        }
        if self.occlusion_factor == 0.0 {
            let r = self.blob_radius;
            let inside = cx - r >= 0.0
                && cy - r >= 0.0
                && cx + r <= f64::from(self.width - 1)
                && cy + r <= f64::from(self.height - 1);
            if !inside {
                return Err(invalid("unoccluded blob must lie fully inside the image"));
            }
        }
        Ok(())
    }

    fn in_disc(&self, x: u32, y: u32) -> bool {
        let dx = f64::from(x) - self.blob_center[0];
        let dy = f64::from(y) - self.blob_center[1];
        dx * dx + dy * dy <= self.blob_radius * self.blob_radius
    }

    /// Rows of the disc (bottom first) with their pixel counts.
    fn disc_rows(&self) -> Vec<(u32, usize)> {
        let mut rows = Vec::new();
        for y in (0..self.height).rev() {
            let n = (0..self.width).filter(|&x| self.in_disc(x, y)).count();
            if n > 0 {
                rows.push((y, n));
            }
        }
        rows
    }

    /// First image row hidden by the occluder, or `None` when nothing is.
    fn occluder_top(&self) -> Option<u32> {
        if self.occlusion_factor <= 0.0 {
            return None;
        }
        let rows = self.disc_rows();
        let total: usize = rows.iter().map(|(_, n)| n).sum();
        let goal = (self.occlusion_factor * total as f64).round() as usize;
        let mut covered = 0;
        let mut top = None;
        for (y, n) in rows {
            if covered >= goal {
                break;
            }
            covered += n;
            top = Some(y);
        }
        top
    }

    /// Disc pixels left visible after occlusion.
    pub fn visible_blob_area(&self) -> usize {
        let top = self.occluder_top().unwrap_or(u32::MAX);
        self.disc_rows()
            .iter()
            .filter(|(y, _)| *y < top)
            .map(|(_, n)| n)
            .sum()
    }
}

/// Renders a frame; identical (spec, seed) pairs give identical images.
pub fn render(spec: &SceneSpec, seed: u64) -> Result<CameraImage> {
    spec.validate()?;
    let mut img = CameraImage::filled(spec.width, spec.height, spec.background_color);
    let led = byte_hue_to_rgb(spec.led_hue, 255, 255);
    let occluded_from = spec.occluder_top();
    let r = spec.blob_radius;
    let x_lo = (spec.blob_center[0] - r).floor();
    let x_hi = (spec.blob_center[0] + r).ceil();
    for y in 0..spec.height {
        for x in 0..spec.width {
            let idx = (y * spec.width + x) as usize;
            let occluded = occluded_from.is_some_and(|top| {
                y >= top
                    && f64::from(y) <= spec.blob_center[1] + r
                    && (x_lo..=x_hi).contains(&f64::from(x))
            });
            // Occluded pixels show the backdrop.
            if spec.in_disc(x, y) && !occluded {
                img.pixels[idx] = led;
            }
        }
    }
    if spec.noise_amplitude > 0 {
        let amp = i16::from(spec.noise_amplitude);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for px in &mut img.pixels {
            for c in px.iter_mut() {
                let v = i16::from(*c) + rng.random_range(-amp..=amp);
                *c = v.clamp(0, 255) as u8;
            }
        }
    }
    Ok(img)
}
