//! Image corruptions standing in for generator imperfection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ProxyError;
use crate::image::ImageBuffer;
use crate::rng;

pub const MAX_NOISE_SIGMA: f64 = 16.0;
pub const MAX_BLUR_RADIUS: u32 = 2;
pub const MAX_BRIGHTNESS_SHIFT: u32 = 16;
pub const MAX_TRANSLATE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    /// Additive white noise, standard deviation in 8-bit levels.
    GaussianNoise(f64),
    /// Mean filter over a `(2r+1)^2` window with edge replication.
    BoxBlur(u32),
    /// Uniform integer offset drawn from `[-max, max]`.
    BrightnessShift(u32),
    /// Shift by integers drawn from `[-max, max]` per axis, edge-replicated.
    Translate(u32),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::GaussianNoise(_) => "gaussian_noise",
            Stage::BoxBlur(_) => "box_blur",
            Stage::BrightnessShift(_) => "brightness_shift",
            Stage::Translate(_) => "translate",
        }
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        let ok = match *self {
            Stage::GaussianNoise(s) => (0.0..=MAX_NOISE_SIGMA).contains(&s),
            Stage::BoxBlur(r) => r <= MAX_BLUR_RADIUS,
            Stage::BrightnessShift(m) => m <= MAX_BRIGHTNESS_SHIFT,
            Stage::Translate(m) => m <= MAX_TRANSLATE,
        };
        if ok {
            Ok(())
        } else {
            Err(ProxyError::Config(format!("stage {self} outside its allowed range")))
        }
    }

    fn parse_parts(name: &str, value: &str) -> Result<Stage, ProxyError> {
        let bad = || ProxyError::Config(format!("invalid parameter `{value}` for stage `{name}`"));
        let int = || value.trim().parse::<u32>().map_err(|_| bad());
        let stage = match name.trim() {
            "gaussian_noise" => Stage::GaussianNoise(value.trim().parse::<f64>().map_err(|_| bad())?),
            "box_blur" => Stage::BoxBlur(int()?),
            "brightness_shift" => Stage::BrightnessShift(int()?),
            "translate" => Stage::Translate(int()?),
            other => return Err(ProxyError::Config(format!("unknown corruption stage `{other}`"))),
        };
        stage.validate()?;
        Ok(stage)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Stage::GaussianNoise(s) => write!(f, "{}:{s}", self.name()),
            Stage::BoxBlur(v) | Stage::BrightnessShift(v) | Stage::Translate(v) => write!(f, "{}:{v}", self.name()),
        }
    }
}

impl FromStr for Stage {
    type Err = ProxyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, value) = s
            .rsplit_once(':')
            .ok_or_else(|| ProxyError::Config(format!("expected `stage:parameter`, found `{s}`")))?;
        Stage::parse_parts(name, value)
    }
}

/// Ordered list of corruption stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorruptionPipeline {
    pub stages: Vec<Stage>,
}

impl CorruptionPipeline {
    pub fn new(stages: Vec<Stage>) -> Result<Self, ProxyError> {
        for s in &stages {
            s.validate()?;
        }
        Ok(CorruptionPipeline { stages })
    }

    pub fn identity() -> Self {
        CorruptionPipeline::default()
    }

    /// Mild noise plus a global brightness change.
    pub fn default_generator() -> Self {
        CorruptionPipeline {
            stages: vec![Stage::GaussianNoise(2.0), Stage::BrightnessShift(8)],
        }
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        self.stages.iter().try_for_each(Stage::validate)
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }
}

impl fmt::Display for CorruptionPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stages.is_empty() {
            return f.write_str("-");
        }
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for CorruptionPipeline {
    type Err = ProxyError;

    /// Comma list of `stage:parameter`; `-` or empty is the identity.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "-" {
            return Ok(CorruptionPipeline::identity());
        }
        let stages = crate::kvfile::split_list(s)
            .map(str::parse)
            .collect::<Result<Vec<Stage>, _>>()?;
        Ok(CorruptionPipeline { stages })
    }
}

/// Applies the stages of `pipeline` in order; deterministic in `seed`.
pub fn corrupt(image: &ImageBuffer, pipeline: &CorruptionPipeline, seed: u64) -> Result<ImageBuffer, ProxyError> {
    pipeline.validate()?;
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let mut plane: Vec<f64> = image.samples().iter().map(|&v| f64::from(v)).collect();
    let mut rng = rng::stream(seed, rng::domain::CORRUPT, 0);
    for stage in &pipeline.stages {
        match *stage {
            Stage::GaussianNoise(sigma) => {
                if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("sigma validated");
                    for v in &mut plane {
                        *v += normal.sample(&mut rng);
                    }
                }
            }
            Stage::BoxBlur(r) => plane = box_blur(&plane, w, h, c, r as usize),
            Stage::BrightnessShift(m) => {
                let m = m as i32;
                let shift = f64::from(rng.random_range(-m..=m));
                for v in &mut plane {
                    *v += shift;
                }
            }
            Stage::Translate(m) => {
                let m = m as i64;
                let dx = rng.random_range(-m..=m);
                let dy = rng.random_range(-m..=m);
                plane = translate(&plane, w, h, c, dx, dy);
            }
        }
        // Each stage sees an 8-bit image, as a pipeline of real tools would.
        for v in &mut plane {
            *v = v.round().clamp(0.0, 255.0);
        }
    }
    let samples = plane.into_iter().map(|v| v as u8).collect();
    Ok(ImageBuffer::new(w, h, c, samples)?)
}

fn clamp_index(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

fn box_blur(plane: &[f64], w: usize, h: usize, c: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return plane.to_vec();
    }
    let r = r as i64;
    let norm = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut out = vec![0.0; plane.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for dy in -r..=r {
                    let yy = clamp_index(y as i64 + dy, h);
                    for dx in -r..=r {
                        let xx = clamp_index(x as i64 + dx, w);
                        acc += plane[(yy * w + xx) * c + ch];
                    }
                }
                out[(y * w + x) * c + ch] = acc / norm;
            }
        }
    }
    out
}

/// Output pixel `(x, y)` takes input `(x - dx, y - dy)`, replicating edges.
fn translate(plane: &[f64], w: usize, h: usize, c: usize, dx: i64, dy: i64) -> Vec<f64> {
    let mut out = vec![0.0; plane.len()];
    for y in 0..h {
        let sy = clamp_index(y as i64 - dy, h);
        for x in 0..w {
            let sx = clamp_index(x as i64 - dx, w);
            let (o, i) = ((y * w + x) * c, (sy * w + sx) * c);
            out[o..o + c].copy_from_slice(&plane[i..i + c]);
        }
    }
    out
}
