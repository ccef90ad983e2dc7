//! 8-bit raster images and binary portable pixmap (P5/P6) I/O.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("DimensionError: {0}")]
    Layout(String),
    #[error("FormatError: {0}")]
    Format(String),
    #[error("IoError: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl ImageError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        ImageError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Row-major interleaved 8-bit raster with one (gray) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

// ITU-R BT.601 luma weights.
const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Layout(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Layout(format!("unsupported channel count {channels}")));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(ImageError::Layout(format!(
                "sample count {} does not match {width}x{height}x{channels} = {expected}",
                samples.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            samples,
        })
    }

    /// Uniform image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_gray(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, ImageError> {
        Self::new(width, height, 1, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn same_layout(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Luma plane as reals, `width * height` long.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.samples.iter().map(|&s| f64::from(s)).collect(),
            _ => self
                .samples
                .chunks_exact(3)
                .map(|px| LUMA_R * f64::from(px[0]) + LUMA_G * f64::from(px[1]) + LUMA_B * f64::from(px[2]))
                .collect(),
        }
    }

    /// Returns a copy whose luma is moved towards `target`, clamped and rounded.
    ///
    /// For RGB the same offset is added to every channel, which shifts luma by
    /// exactly that offset and leaves the colour differences untouched.
    pub fn with_luma(&self, target: &[f64]) -> ImageBuffer {
        assert_eq!(target.len(), self.width * self.height, "luma plane size mismatch");
        let samples = match self.channels {
            1 => target.iter().map(|&y| to_u8(y)).collect(),
            _ => {
                let current = self.luma();
                let mut out = self.samples.clone();
                for ((px, &y), &y0) in out.chunks_exact_mut(3).zip(target).zip(&current) {
                    let delta = y - y0;
                    for c in px.iter_mut() {
                        *c = to_u8(f64::from(*c) + delta);
                    }
                }
                out
            }
        };
        ImageBuffer {
            samples,
            ..self.clone()
        }
    }

    /// Encodes as binary PGM (P5) or PPM (P6).
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.samples);
        out
    }

    pub fn from_pnm(bytes: &[u8]) -> Result<Self, ImageError> {
        let channels = match bytes.get(..2) {
            Some(b"P5") => 1,
            Some(b"P6") => 3,
            _ => return Err(ImageError::Format("not a binary P5/P6 pixmap".into())),
        };
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for (i, slot) in fields.iter_mut().enumerate() {
            pos = skip_space_and_comments(bytes, pos);
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                let name = ["width", "height", "maxval"][i];
                return Err(ImageError::Format(format!("missing {name} in pixmap header")));
            }
            *slot = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ImageError::Format("header value out of range".into()))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(ImageError::Format(format!("maxval {maxval} unsupported, expected 255")));
        }
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(ImageError::Format("expected whitespace after maxval".into())),
        }
        let data = &bytes[pos..];
        let expected = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(channels))
            .ok_or_else(|| ImageError::Format("pixmap dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(ImageError::Format(format!(
                "pixel data has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Self::new(width, height, channels, data.to_vec())
    }

    pub fn read_pnm(path: &Path) -> Result<Self, ImageError> {
        let bytes = fs::read(path).map_err(|e| ImageError::io(path, e))?;
        Self::from_pnm(&bytes).map_err(|e| match e {
            ImageError::Format(m) => ImageError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write_pnm(&self, path: &Path) -> Result<(), ImageError> {
        fs::write(path, self.to_pnm()).map_err(|e| ImageError::io(path, e))
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) == Some(&b'#') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_layouts() {
        assert!(ImageBuffer::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBuffer::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(ImageBuffer::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn pnm_header_layout() {
        let img = ImageBuffer::from_gray(2, 1, vec![7, 9]).unwrap();
        assert_eq!(img.to_pnm(), b"P5\n2 1\n255\n\x07\x09");
        let rgb = ImageBuffer::filled(1, 1, 3, 5).unwrap();
        assert_eq!(&rgb.to_pnm()[..2], b"P6");
    }

    #[test]
    fn pnm_reader_errors() {
        assert!(ImageBuffer::from_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(ImageBuffer::from_pnm(b"P5\n1 1\n65535\n00").is_err());
        assert!(ImageBuffer::from_pnm(b"P5\n2 2\n255\n\x01").is_err());
        assert!(ImageBuffer::from_pnm(b"P5\n2\n").is_err());
        // Comments are accepted between header tokens.
        let img = ImageBuffer::from_pnm(b"P5 # made by hand\n1 1\n255\n\x2a").unwrap();
        assert_eq!(img.samples(), &[42]);
    }

    #[test]
    fn rgb_luma_offset_preserves_chroma() {
        let img = ImageBuffer::new(1, 1, 3, vec![100, 50, 200]).unwrap();
        let y = img.luma()[0];
        let out = img.with_luma(&[y + 10.0]);
        assert_eq!(out.samples(), &[110, 60, 210]);
    }

    proptest! {
        #[test]
        fn pnm_roundtrip(w in 1usize..12, h in 1usize..12, rgb in any::<bool>(), seed in any::<u8>()) {
            let c = if rgb { 3 } else { 1 };
            let samples: Vec<u8> = (0..w * h * c).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let img = ImageBuffer::new(w, h, c, samples).unwrap();
            prop_assert_eq!(ImageBuffer::from_pnm(&img.to_pnm()).unwrap(), img);
        }
    }
}
