use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use super::CodecError;

/// The watermark bit sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitPayload {
    bits: Vec<bool>,
}

impl BitPayload {
    pub fn new(bits: Vec<bool>) -> Result<Self, CodecError> {
        if bits.is_empty() {
            return Err(CodecError::InvalidPayload("payload must hold at least one bit".into()));
        }
        Ok(BitPayload { bits })
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self, CodecError> {
        Self::new((0..d).map(|_| rng.random::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn complement(&self) -> BitPayload {
        BitPayload {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Copy with the listed positions flipped.
    pub fn with_flipped(&self, positions: impl IntoIterator<Item = usize>) -> BitPayload {
        let mut bits = self.bits.clone();
        for j in positions {
            bits[j] = !bits[j];
        }
        BitPayload { bits }
    }

    /// The `d` characters of `0`/`1` followed by a newline.
    pub fn to_text(&self) -> String {
        let mut s: String = self.to_string();
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self, CodecError> {
        let text = fs::read_to_string(path).map_err(|e| CodecError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn write(&self, path: &Path) -> Result<(), CodecError> {
        fs::write(path, self.to_text()).map_err(|e| CodecError::Io(format!("{}: {e}", path.display())))
    }
}

impl fmt::Display for BitPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitPayload {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_suffix('\n').map(|b| b.strip_suffix('\r').unwrap_or(b)).unwrap_or(s);
        let bits = body
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CodecError::InvalidPayload(format!(
                    "character {other:?} at offset {i} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        BitPayload::new(bits)
    }
}

/// Secret seed behind the slot assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WatermarkKey(pub u64);

impl WatermarkKey {
    pub fn seed(self) -> u64 {
        self.0
    }
}

impl fmt::Display for WatermarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for WatermarkKey {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(WatermarkKey)
    }
}
