use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::codec::{BitPayload, CodecConfig, WatermarkKey};
use crate::kvfile::{self, KvWriter, ParseError};

pub const ATTACK_MAGIC: &str = "WMCTL-ATTACK";
pub const ATTACK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum PayloadSource {
    File(PathBuf),
    Inline(BitPayload),
}

/// Where the null bias comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationSource {
    /// Decode the unmarked records of a manifest; attribute-scoped nulls use
    /// the records labelled with the attribute.
    CleanManifest(PathBuf),
    /// Known values, e.g. the true `p_w` of a simulated channel.
    Explicit {
        p_w: f64,
        per_attribute: BTreeMap<String, f64>,
    },
}

impl CalibrationSource {
    pub fn explicit(p_w: f64) -> Self {
        CalibrationSource::Explicit {
            p_w,
            per_attribute: BTreeMap::new(),
        }
    }

    fn covers(&self, attribute: &str) -> bool {
        match self {
            CalibrationSource::CleanManifest(_) => true,
            CalibrationSource::Explicit { per_attribute, .. } => per_attribute.contains_key(attribute),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Query budget.
    pub n: usize,
    pub key: WatermarkKey,
    pub payload: PayloadSource,
    pub alpha_level: f64,
    /// Attribute for the conditional row, if any.
    pub condition: Option<String>,
    pub calibration: CalibrationSource,
    /// Decoder settings; `codec.d` is the payload length.
    pub codec: CodecConfig,
}

impl AttackConfig {
    pub const DEFAULT_N: usize = 100;
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(payload: BitPayload, key: WatermarkKey, calibration: CalibrationSource) -> Self {
        AttackConfig {
            n: Self::DEFAULT_N,
            key,
            codec: CodecConfig::default().with_d(payload.len()),
            payload: PayloadSource::Inline(payload),
            alpha_level: Self::DEFAULT_ALPHA,
            condition: None,
            calibration,
        }
    }

    pub fn with_condition(mut self, attribute: impl Into<String>) -> Self {
        self.condition = Some(attribute.into());
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn d(&self) -> usize {
        self.codec.d
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: String| Err(HarnessError::Config(m));
        if self.n == 0 {
            return cfg("query budget n must be at least 1".into());
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return cfg(format!("alpha must lie in (0, 1), got {}", self.alpha_level));
        }
        self.codec.validate()?;
        if let CalibrationSource::Explicit { p_w, per_attribute } = &self.calibration {
            for (name, p) in std::iter::once(("p_w", p_w)).chain(per_attribute.iter().map(|(k, v)| (k.as_str(), v))) {
                if !(*p > 0.0 && *p < 1.0) {
                    return cfg(format!("calibration value for `{name}` must lie in (0, 1), got {p}"));
                }
            }
        }
        if let Some(a) = &self.condition {
            if !self.calibration.covers(a) {
                return cfg(format!(
                    "condition `{a}` needs an attribute-scoped calibration (p_w.{a} or a clean manifest)"
                ));
            }
        }
        if let PayloadSource::Inline(p) = &self.payload {
            self.check_len(p)?;
        }
        Ok(())
    }

    fn check_len(&self, p: &BitPayload) -> Result<(), HarnessError> {
        if p.len() != self.d() {
            return Err(HarnessError::Config(format!(
                "payload has {} bits but d = {}",
                p.len(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Resolves the payload, reading it from disk if needed.
    pub fn load_payload(&self) -> Result<BitPayload, HarnessError> {
        let p = match &self.payload {
            PayloadSource::Inline(p) => p.clone(),
            PayloadSource::File(path) => BitPayload::read(path)?,
        };
        self.check_len(&p)?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new(ATTACK_MAGIC, ATTACK_VERSION);
        w.field("n", self.n).field("d", self.d()).field("key", self.key);
        match &self.payload {
            PayloadSource::File(p) => w.field("payload", p.display()),
            PayloadSource::Inline(p) => w.field("payload_bits", p),
        };
        w.field("alpha", self.alpha_level)
            .field("condition", self.condition.as_deref().unwrap_or("-"));
        match &self.calibration {
            CalibrationSource::CleanManifest(p) => {
                w.field("calibration_manifest", p.display());
            }
            CalibrationSource::Explicit { p_w, per_attribute } => {
                w.field("p_w", p_w);
                for (a, p) in per_attribute {
                    w.field(&format!("p_w.{a}"), p);
                }
            }
        }
        w.finish()
    }

    /// Parses an attack file; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let doc = kvfile::parse(text, ATTACK_MAGIC, ATTACK_VERSION)?;
        if doc.groups.len() > 1 {
            return Err(ParseError::new(doc.groups[1].line, "attack file holds a single group").into());
        }
        let empty = kvfile::KvGroup::default();
        let g = doc.groups.first().unwrap_or(&empty);
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let d: usize = g.parse_required("d")?;
        let payload = match (g.get("payload"), g.entry("payload_bits")) {
            (Some(p), None) => PayloadSource::File(resolve(p)),
            (None, Some(e)) => PayloadSource::Inline(
                e.value
                    .parse()
                    .map_err(|err| ParseError::field(e.line, "payload_bits", format!("{err}")))?,
            ),
            (Some(_), Some(e)) => {
                return Err(ParseError::field(e.line, "payload_bits", "give either `payload` or `payload_bits`").into())
            }
            (None, None) => return Err(g.require("payload").unwrap_err().into()),
        };

        let calibration = match (g.get("calibration_manifest"), g.entry("p_w")) {
            (Some(m), None) => CalibrationSource::CleanManifest(resolve(m)),
            (None, Some(_)) => {
                let mut per_attribute = BTreeMap::new();
                for e in &g.entries {
                    if let Some(attr) = e.key.strip_prefix("p_w.") {
                        let v: f64 = e
                            .value
                            .parse()
                            .map_err(|err| ParseError::field(e.line, &e.key, format!("invalid value: {err}")))?;
                        per_attribute.insert(attr.to_string(), v);
                    }
                }
                CalibrationSource::Explicit {
                    p_w: g.parse_required("p_w")?,
                    per_attribute,
                }
            }
            (Some(_), Some(e)) => {
                return Err(ParseError::field(e.line, "p_w", "give either `calibration_manifest` or `p_w`").into())
            }
            (None, None) => return Err(g.require("calibration_manifest").unwrap_err().into()),
        };

        let config = AttackConfig {
            n: g.parse("n")?.unwrap_or(Self::DEFAULT_N),
            key: g.parse_required("key")?,
            payload,
            alpha_level: g.parse("alpha")?.unwrap_or(Self::DEFAULT_ALPHA),
            condition: g.get("condition").filter(|c| *c != "-").map(str::to_string),
            calibration,
            codec: CodecConfig::default().with_d(d),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, self.to_text()).map_err(|e| HarnessError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload() -> BitPayload {
        "0110".repeat(25).parse().unwrap()
    }

    #[test]
    fn roundtrip_explicit_and_manifest() {
        let mut per = BTreeMap::new();
        per.insert("checker".to_string(), 0.53);
        let cfg = AttackConfig::new(
            payload(),
            WatermarkKey(42),
            CalibrationSource::Explicit { p_w: 0.5174, per_attribute: per },
        )
        .with_condition("checker");
        let text = cfg.to_text();
        assert!(text.starts_with("WMCTL-ATTACK 1\n"));
        assert_eq!(AttackConfig::parse(&text, Path::new("/")).unwrap(), cfg);

        let mut cfg = AttackConfig::new(
            payload(),
            WatermarkKey(1),
            CalibrationSource::CleanManifest("/data/clean/manifest.txt".into()),
        );
        cfg.payload = PayloadSource::File("/data/w.txt".into());
        assert_eq!(AttackConfig::parse(&cfg.to_text(), Path::new("/")).unwrap(), cfg);
    }

    #[test]
    fn relative_paths_and_defaults() {
        let text = "WMCTL-ATTACK 1\nd = 100\nkey = 5\npayload = w.txt\ncalibration_manifest = clean/manifest.txt\n";
        let cfg = AttackConfig::parse(text, Path::new("/runs")).unwrap();
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.alpha_level, 0.05);
        assert_eq!(cfg.payload, PayloadSource::File("/runs/w.txt".into()));
        assert_eq!(cfg.calibration, CalibrationSource::CleanManifest("/runs/clean/manifest.txt".into()));
    }

    #[test]
    fn condition_needs_scoped_calibration() {
        let cfg = AttackConfig::new(payload(), WatermarkKey(1), CalibrationSource::explicit(0.5)).with_condition("x");
        assert!(cfg.validate().unwrap_err().to_string().starts_with("ConfigError"));
        let text = "WMCTL-ATTACK 1\nd = 100\nkey = 5\npayload = w\np_w = 0.5\ncondition = x\n";
        assert!(AttackConfig::parse(text, Path::new("/")).is_err());
        let text = "WMCTL-ATTACK 1\nd = 100\nkey = 5\npayload = w\np_w = 0.5\np_w.x = 0.6\ncondition = x\n";
        assert!(AttackConfig::parse(text, Path::new("/")).is_ok());
    }

    #[test]
    fn invalid_files() {
        let missing_key = "WMCTL-ATTACK 1\nd = 100\npayload = w\np_w = 0.5\n";
        let err = AttackConfig::parse(missing_key, Path::new("/")).unwrap_err();
        assert!(err.to_string().contains("key"), "{err}");
        let both = "WMCTL-ATTACK 1\nd = 100\nkey = 1\npayload = w\np_w = 0.5\ncalibration_manifest = m\n";
        assert!(AttackConfig::parse(both, Path::new("/")).is_err());
        let zero_n = "WMCTL-ATTACK 1\nn = 0\nd = 100\nkey = 1\npayload = w\np_w = 0.5\n";
        assert!(AttackConfig::parse(zero_n, Path::new("/")).is_err());
        let short = "WMCTL-ATTACK 1\nd = 100\nkey = 1\npayload_bits = 0101\np_w = 0.5\n";
        assert!(AttackConfig::parse(short, Path::new("/")).is_err());
    }
}
