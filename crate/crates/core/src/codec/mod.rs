//! Blind, key-seeded invisible watermark codec.
//!
//! Each payload bit owns a key-derived set of slots. A slot is a pair of
//! mid-band DCT coefficients `(c1, c2)` in one luma block together with a
//! sign `s`; the bit is written into the differential `s * (c1 - c2)` and read
//! back by summing that quantity over the bit's slots. Embedding moves each
//! pair by the minimum amount that puts its differential at distance `alpha`
//! on the correct side of zero, so the host signal cancels out of a clean
//! roundtrip.

mod dct;
mod embed;
mod payload;
mod quality;
mod slots;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::image::ImageError;

pub use dct::{zigzag, BlockDct};
pub use embed::{decode, embed, SoftDecode};
pub use payload::{BitPayload, WatermarkKey};
pub use quality::{psnr, PSNR_CAP_DB};
pub use slots::{derive_slots, Slot, SlotAssignment};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("CapacityError: {available} slot pairs available, {required} required (d={d}, redundancy={redundancy})")]
    Capacity {
        available: usize,
        required: usize,
        d: usize,
        redundancy: usize,
    },
    #[error("DimensionError: {0}")]
    Dimension(String),
    #[error("PayloadError: {0}")]
    InvalidPayload(String),
    #[error("ConfigError: {0}")]
    InvalidConfig(String),
    #[error("IoError: {0}")]
    Io(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Smallest accepted image side, in pixels.
pub const MIN_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    /// Payload length in bits.
    pub d: usize,
    pub block_size: usize,
    /// Target differential magnitude, in orthonormal DCT units.
    pub alpha: f64,
    /// Zig-zag indices available for embedding; consecutive entries pair up.
    pub band: Vec<usize>,
    /// Minimum number of slots per bit.
    pub redundancy: usize,
    /// Adjust/clamp passes during embedding.
    pub max_passes: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            d: 100,
            block_size: 8,
            alpha: 6.0,
            band: (3..=28).collect(),
            redundancy: 8,
            max_passes: 3,
        }
    }
}

impl CodecConfig {
    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn pairs_per_block(&self) -> usize {
        self.band.len() / 2
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::InvalidConfig(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.block_size < 2 {
            return bad(format!("block size {} too small", self.block_size));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.redundancy == 0 {
            return bad("redundancy must be positive".into());
        }
        if self.max_passes == 0 {
            return bad("at least one embedding pass is required".into());
        }
        if self.band.len() < 2 {
            return bad("band needs at least two coefficients".into());
        }
        let area = self.block_size * self.block_size;
        let mut seen = vec![false; area];
        for &z in &self.band {
            if z == 0 || z >= area {
                return bad(format!("band index {z} outside 1..{area}"));
            }
            if std::mem::replace(&mut seen[z], true) {
                return bad(format!("band index {z} repeated"));
            }
        }
        Ok(())
    }

    /// Block grid for an image, checking size constraints.
    pub fn block_grid(&self, width: usize, height: usize) -> Result<(usize, usize), CodecError> {
        let bs = self.block_size;
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(CodecError::Dimension(format!(
                "image {width}x{height} is smaller than the {MIN_SIDE}x{MIN_SIDE} minimum"
            )));
        }
        if !width.is_multiple_of(bs) || !height.is_multiple_of(bs) {
            return Err(CodecError::Dimension(format!(
                "image {width}x{height} is not a multiple of block size {bs}"
            )));
        }
        Ok((width / bs, height / bs))
    }

    /// Stable short hash identifying the configuration.
    pub fn fingerprint(&self) -> String {
        let band: Vec<String> = self.band.iter().map(ToString::to_string).collect();
        let canonical = format!(
            "d={};block={};alpha={:?};band={};redundancy={};passes={}",
            self.d,
            self.block_size,
            self.alpha,
            band.join(","),
            self.redundancy,
            self.max_passes
        );
        Sha256::digest(canonical.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
