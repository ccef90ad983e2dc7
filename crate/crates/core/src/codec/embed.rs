use super::dct::{zigzag, BlockDct};
use super::slots::{derive_slots, SlotAssignment};
use super::{BitPayload, CodecConfig, CodecError, WatermarkKey};
use crate::image::ImageBuffer;

/// Decoder output: per-bit correlation scores and their sign decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDecode {
    pub scores: Vec<f64>,
    pub bits: BitPayload,
}

/// Block transform state shared by embed and decode.
struct Transform {
    dct: BlockDct,
    bs: usize,
    width: usize,
    blocks_x: usize,
    blocks_y: usize,
    /// Row-major in-block offsets of each coefficient pair.
    pairs: Vec<(usize, usize)>,
}

impl Transform {
    fn new(config: &CodecConfig, width: usize, slots: &SlotAssignment) -> Self {
        let bs = config.block_size;
        let zz = zigzag(bs);
        let pairs = config
            .band
            .chunks_exact(2)
            .map(|p| (zz[p[0]], zz[p[1]]))
            .collect();
        Transform {
            dct: BlockDct::new(bs),
            bs,
            width,
            blocks_x: slots.blocks_x,
            blocks_y: slots.blocks_y,
            pairs,
        }
    }

    fn area(&self) -> usize {
        self.bs * self.bs
    }

    fn block_origin(&self, block: usize) -> (usize, usize) {
        ((block % self.blocks_x) * self.bs, (block / self.blocks_x) * self.bs)
    }

    /// Coefficients of every block, `[block * area + v * bs + u]`.
    fn analyse(&self, luma: &[f64]) -> Vec<f64> {
        let area = self.area();
        let blocks = self.blocks_x * self.blocks_y;
        let mut coeffs = vec![0.0; blocks * area];
        let mut pixels = vec![0.0; area];
        for b in 0..blocks {
            let (x0, y0) = self.block_origin(b);
            for y in 0..self.bs {
                let row = (y0 + y) * self.width + x0;
                pixels[y * self.bs..(y + 1) * self.bs].copy_from_slice(&luma[row..row + self.bs]);
            }
            self.dct.forward(&pixels, &mut coeffs[b * area..(b + 1) * area]);
        }
        coeffs
    }

    fn synthesize_block(&self, coeffs: &[f64], block: usize, luma: &mut [f64]) {
        let area = self.area();
        let mut pixels = vec![0.0; area];
        self.dct.inverse(&coeffs[block * area..(block + 1) * area], &mut pixels);
        let (x0, y0) = self.block_origin(block);
        for y in 0..self.bs {
            let row = (y0 + y) * self.width + x0;
            luma[row..row + self.bs].copy_from_slice(&pixels[y * self.bs..(y + 1) * self.bs]);
        }
    }

    fn differential(&self, coeffs: &[f64], block: usize, pair: usize) -> f64 {
        let base = block * self.area();
        let (o1, o2) = self.pairs[pair];
        coeffs[base + o1] - coeffs[base + o2]
    }
}

// Violations smaller than this are left alone.
const TOLERANCE: f64 = 1e-9;
// Scores this close to zero are transform round-off, not signal.
const SCORE_EPSILON: f64 = 1e-9;

/// Writes `payload` into the luma plane of `image`.
///
/// Every slot of bit `j` is moved so that `s * (c1 - c2) >= alpha` when the
/// bit is set and `<= -alpha` otherwise, splitting the correction evenly
/// between the two coefficients. Rounding and clamping can undo part of a
/// correction, so the adjust step is repeated for up to `max_passes` passes.
pub fn embed(
    image: &ImageBuffer,
    payload: &BitPayload,
    key: WatermarkKey,
    config: &CodecConfig,
) -> Result<ImageBuffer, CodecError> {
    if payload.len() != config.d {
        return Err(CodecError::InvalidPayload(format!(
            "payload has {} bits, codec expects d={}",
            payload.len(),
            config.d
        )));
    }
    let slots = derive_slots(key, image.dims(), config)?;
    let tf = Transform::new(config, image.width(), &slots);
    let blocks = slots.blocks_x * slots.blocks_y;

    let mut current = image.clone();
    for _ in 0..config.max_passes {
        let mut luma = current.luma();
        let mut coeffs = tf.analyse(&luma);
        let mut touched = vec![false; blocks];
        for (j, bit_slots) in slots.per_bit.iter().enumerate() {
            let bit = payload.get(j);
            for slot in bit_slots {
                let (block, pair) = (slot.block as usize, slot.pair as usize);
                let s = f64::from(slot.sign);
                let t = s * tf.differential(&coeffs, block, pair);
                // signed change required of t
                let change = if bit {
                    (config.alpha - t).max(0.0)
                } else {
                    -(t + config.alpha).max(0.0)
                };
                if change.abs() <= TOLERANCE {
                    continue;
                }
                let base = block * tf.area();
                let (o1, o2) = tf.pairs[pair];
                coeffs[base + o1] += s * change / 2.0;
                coeffs[base + o2] -= s * change / 2.0;
                touched[block] = true;
            }
        }
        if !touched.iter().any(|&t| t) {
            break;
        }
        for block in (0..blocks).filter(|&b| touched[b]) {
            tf.synthesize_block(&coeffs, block, &mut luma);
        }
        current = current.with_luma(&luma);
    }
    Ok(current)
}

/// Reads the payload back: `score_j` is the signed differential summed over
/// the slots of bit `j`, and the bit is set iff its score is positive.
pub fn decode(image: &ImageBuffer, key: WatermarkKey, config: &CodecConfig) -> Result<SoftDecode, CodecError> {
    let slots = derive_slots(key, image.dims(), config)?;
    let tf = Transform::new(config, image.width(), &slots);
    let coeffs = tf.analyse(&image.luma());
    let scores: Vec<f64> = slots
        .per_bit
        .iter()
        .map(|bit_slots| {
            bit_slots
                .iter()
                .map(|s| f64::from(s.sign) * tf.differential(&coeffs, s.block as usize, s.pair as usize))
                .sum::<f64>()
        })
        .map(|s| if s.abs() <= SCORE_EPSILON { 0.0 } else { s })
        .collect();
    let bits = BitPayload::new(scores.iter().map(|&s| s > 0.0).collect())?;
    Ok(SoftDecode { scores, bits })
}
