use rand::seq::SliceRandom;
use rand::Rng;

use super::{CodecConfig, CodecError, WatermarkKey};
use crate::rng;

/// One embedding location: coefficient pair `pair` of block `block`, read
/// with polarity `sign`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub block: u32,
    pub pair: u16,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// `per_bit[j]` lists the slots owned by payload bit `j`.
    pub per_bit: Vec<Vec<Slot>>,
}

impl SlotAssignment {
    pub fn d(&self) -> usize {
        self.per_bit.len()
    }

    pub fn slots_per_bit(&self) -> usize {
        self.per_bit.first().map_or(0, Vec::len)
    }
}

/// Key-seeded, disjoint assignment of coefficient pairs to payload bits.
///
/// All `blocks * pairs_per_block` candidate slots are shuffled under the key
/// and dealt out in equal runs of `floor(total / d)` slots, so every bit gets
/// at least `redundancy` of them once the capacity check passes.
pub fn derive_slots(
    key: WatermarkKey,
    dims: (usize, usize),
    config: &CodecConfig,
) -> Result<SlotAssignment, CodecError> {
    config.validate()?;
    let (blocks_x, blocks_y) = config.block_grid(dims.0, dims.1)?;
    let blocks = blocks_x * blocks_y;
    let pairs = config.pairs_per_block();
    let available = blocks * pairs;
    let required = config.d * config.redundancy;
    if available < required {
        return Err(CodecError::Capacity {
            available,
            required,
            d: config.d,
            redundancy: config.redundancy,
        });
    }

    let mut candidates: Vec<(u32, u16)> = (0..blocks as u32)
        .flat_map(|b| (0..pairs as u16).map(move |p| (b, p)))
        .collect();
    let geometry = ((dims.0 as u64) << 32) | dims.1 as u64;
    let mut rng = rng::stream(key.seed(), rng::domain::SLOTS, geometry);
    candidates.shuffle(&mut rng);

    let per = available / config.d;
    let per_bit = candidates
        .chunks_exact(per)
        .take(config.d)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(block, pair)| Slot {
                    block,
                    pair,
                    sign: if rng.random::<bool>() { 1 } else { -1 },
                })
                .collect()
        })
        .collect();
    Ok(SlotAssignment {
        blocks_x,
        blocks_y,
        per_bit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn default_64x64_assignment() {
        let a = derive_slots(WatermarkKey(7), (64, 64), &CodecConfig::default()).unwrap();
        assert_eq!(a.blocks_x * a.blocks_y, 64);
        assert_eq!(a.d(), 100);
        assert!(a.per_bit.iter().all(|s| s.len() >= 8));
        let mut seen = HashSet::new();
        for s in a.per_bit.iter().flatten() {
            assert!(seen.insert((s.block, s.pair)), "slot reused: {s:?}");
            assert!(s.sign == 1 || s.sign == -1);
        }
    }

    #[test]
    fn capacity_error_on_32x32() {
        let err = derive_slots(WatermarkKey(7), (32, 32), &CodecConfig::default()).unwrap_err();
        match err {
            CodecError::Capacity { available, required, .. } => {
                assert_eq!(available, 16 * 13);
                assert_eq!(required, 800);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_and_key_dependent() {
        let c = CodecConfig::default();
        let a = derive_slots(WatermarkKey(7), (64, 64), &c).unwrap();
        assert_eq!(a, derive_slots(WatermarkKey(7), (64, 64), &c).unwrap());
        assert_ne!(a, derive_slots(WatermarkKey(8), (64, 64), &c).unwrap());
    }

    #[test]
    fn dimension_error_propagates() {
        let err = derive_slots(WatermarkKey(1), (64, 60), &CodecConfig::default()).unwrap_err();
        assert!(matches!(err, CodecError::Dimension(_)));
    }
}
