//! Surrogate generator.
//!
//! Two modes produce query samples:
//!
//! * `memorize`: each sample is a uniformly drawn training image from a
//!   manifest, passed through a [`CorruptionPipeline`];
//! * `bit_channel`: each sample draws attributes from marginals, becomes a
//!   carrier with probability `carry_prob(attributes)`, and emits decoded
//!   bits that are correct with probability `beta` (carriers) or `p_w`
//!   (everyone else).
//!
//! Predicted attributes come from a [`PredictorStub`] in both modes.

mod corrupt;
mod predictor;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::BitPayload;
use crate::dataset::{load_manifest, DatasetError, Manifest};
use crate::image::{ImageBuffer, ImageError};
use crate::kvfile::{self, KvWriter, ParseError};
use crate::rng;

pub use corrupt::{
    corrupt, CorruptionPipeline, Stage, MAX_BLUR_RADIUS, MAX_BRIGHTNESS_SHIFT, MAX_NOISE_SIGMA, MAX_TRANSLATE,
};
pub use predictor::{predict_attributes, PredictorStub};

pub const PROXY_MAGIC: &str = "WMCTL-PROXY";
pub const PROXY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("IoError: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyMode {
    Memorize,
    BitChannel,
}

impl ProxyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProxyMode::Memorize => "memorize",
            ProxyMode::BitChannel => "bit_channel",
        }
    }
}

impl fmt::Display for ProxyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProxyMode {
    type Err = ProxyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memorize" => Ok(ProxyMode::Memorize),
            "bit_channel" => Ok(ProxyMode::BitChannel),
            other => Err(ProxyError::Config(format!("unknown proxy mode `{other}`"))),
        }
    }
}

/// Carrier probability by attribute profile.
///
/// A sample's rate is the largest entry among its attributes, or `default`
/// when none of them is listed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CarryTable {
    pub by_attribute: BTreeMap<String, f64>,
    pub default: f64,
}

impl CarryTable {
    pub fn constant(gamma: f64) -> Self {
        CarryTable {
            by_attribute: BTreeMap::new(),
            default: gamma,
        }
    }

    /// Carriers are exactly the samples with `attribute`.
    pub fn only(attribute: &str) -> Self {
        CarryTable {
            by_attribute: BTreeMap::from([(attribute.to_string(), 1.0)]),
            default: 0.0,
        }
    }

    pub fn rate(&self, attributes: &[String]) -> f64 {
        attributes
            .iter()
            .filter_map(|a| self.by_attribute.get(a).copied())
            .reduce(f64::max)
            .unwrap_or(self.default)
    }

    fn to_pairs(&self) -> String {
        std::iter::once(format!("*:{}", self.default))
            .chain(self.by_attribute.iter().map(|(n, g)| format!("{n}:{g}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProxyConfig {
    pub mode: ProxyMode,
    /// Training manifest (memorize mode).
    pub manifest: Option<PathBuf>,
    pub pipeline: CorruptionPipeline,
    pub carry_prob: CarryTable,
    /// Per-bit correct-decode probability for carriers.
    pub beta: f64,
    /// Per-bit correct-decode probability for non-carriers.
    pub null_bias: f64,
    /// Attribute marginals in declaration order (bit_channel mode).
    pub marginals: Vec<(String, f64)>,
    pub predictor: PredictorStub,
}

impl GeneratorProxyConfig {
    pub fn bit_channel(marginals: Vec<(String, f64)>, carry_prob: CarryTable, beta: f64, null_bias: f64) -> Self {
        GeneratorProxyConfig {
            mode: ProxyMode::BitChannel,
            manifest: None,
            pipeline: CorruptionPipeline::identity(),
            carry_prob,
            beta,
            null_bias,
            marginals,
            predictor: PredictorStub::perfect(),
        }
    }

    pub fn memorize(manifest: impl Into<PathBuf>, pipeline: CorruptionPipeline) -> Self {
        GeneratorProxyConfig {
            mode: ProxyMode::Memorize,
            manifest: Some(manifest.into()),
            pipeline,
            carry_prob: CarryTable::constant(0.0),
            beta: 1.0,
            null_bias: 0.5,
            marginals: Vec::new(),
            predictor: PredictorStub::perfect(),
        }
    }

    pub fn with_predictor(mut self, predictor: PredictorStub) -> Self {
        self.predictor = predictor;
        self
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        let cfg = |m: String| Err(ProxyError::Config(m));
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            return cfg(format!("beta must lie in (0.5, 1], got {}", self.beta));
        }
        if !(self.null_bias > 0.0 && self.null_bias < 1.0) {
            return cfg(format!("p_w must lie in (0, 1), got {}", self.null_bias));
        }
        for (name, g) in std::iter::once(("*", &self.carry_prob.default))
            .chain(self.carry_prob.by_attribute.iter().map(|(n, g)| (n.as_str(), g)))
        {
            if !(0.0..=1.0).contains(g) {
                return cfg(format!("carry_prob for `{name}` must lie in [0, 1], got {g}"));
            }
        }
        let mut seen = Vec::new();
        for (name, m) in &self.marginals {
            if name.is_empty() || name == "*" || seen.contains(&name) {
                return cfg(format!("invalid or duplicate marginal name `{name}`"));
            }
            if !(0.0..=1.0).contains(m) {
                return cfg(format!("marginal for `{name}` must lie in [0, 1], got {m}"));
            }
            seen.push(name);
        }
        self.predictor.validate()?;
        self.pipeline.validate()?;
        if self.mode == ProxyMode::Memorize && self.manifest.is_none() {
            return cfg("memorize mode requires a manifest".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let marginals: Vec<String> = self.marginals.iter().map(|(n, m)| format!("{n}:{m}")).collect();
        let mut w = KvWriter::new(PROXY_MAGIC, PROXY_VERSION);
        w.field("mode", self.mode)
            .field(
                "manifest",
                self.manifest.as_ref().map_or("-".to_string(), |p| p.display().to_string()),
            )
            .field("pipeline", &self.pipeline)
            .field("carry_prob", self.carry_prob.to_pairs())
            .field("beta", self.beta)
            .field("p_w", self.null_bias)
            .field("marginals", if marginals.is_empty() { "-".to_string() } else { marginals.join(",") })
            .field("epsilon", self.predictor.to_pairs());
        w.finish()
    }

    /// Parses a proxy file; a relative manifest path resolves against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ProxyError> {
        let doc = kvfile::parse(text, PROXY_MAGIC, PROXY_VERSION)?;
        if doc.groups.len() > 1 {
            return Err(ParseError::new(doc.groups[1].line, "proxy file holds a single group").into());
        }
        let empty = kvfile::KvGroup::default();
        let g = doc.groups.first().unwrap_or(&empty);
        let line = |key: &str| g.entry(key).map_or(doc.lines, |e| e.line);
        let mode: ProxyMode = g.require("mode")?.parse()?;
        let manifest = g
            .get("manifest")
            .filter(|m| *m != "-")
            .map(|m| resolve(base, Path::new(m)));
        let pipeline = g.get("pipeline").map_or(Ok(CorruptionPipeline::identity()), str::parse)?;

        let mut carry_prob = CarryTable::default();
        if let Some(v) = g.get("carry_prob") {
            for (name, gamma) in kvfile::parse_pairs::<f64>(v, line("carry_prob"), "carry_prob")? {
                if name == "*" {
                    carry_prob.default = gamma;
                } else {
                    carry_prob.by_attribute.insert(name, gamma);
                }
            }
        }
        let mut predictor = PredictorStub::perfect();
        if let Some(v) = g.get("epsilon") {
            for (name, e) in kvfile::parse_pairs::<f64>(v, line("epsilon"), "epsilon")? {
                if name == "*" {
                    predictor.default_epsilon = e;
                } else {
                    predictor.epsilon.insert(name, e);
                }
            }
        }
        let marginals = match g.get("marginals") {
            None | Some("-") => Vec::new(),
            Some(v) => kvfile::parse_pairs::<f64>(v, line("marginals"), "marginals")?,
        };
        let config = GeneratorProxyConfig {
            mode,
            manifest,
            pipeline,
            carry_prob,
            beta: g.parse("beta")?.unwrap_or(1.0),
            null_bias: g.parse("p_w")?.unwrap_or(0.5),
            marginals,
            predictor,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ProxyError> {
        let text = fs::read_to_string(path).map_err(|source| ProxyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn save(&self, path: &Path) -> Result<(), ProxyError> {
        fs::write(path, self.to_text()).map_err(|source| ProxyError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryContent {
    /// Generated image, still to be decoded.
    Image(ImageBuffer),
    /// Bits as the decoder would emit them.
    Bits(BitPayload),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySample {
    pub content: QueryContent,
    pub true_attributes: Vec<String>,
    pub predicted_attributes: Vec<String>,
    /// Whether the sample carries the watermark: the source record was
    /// marked (memorize) or the carrier draw succeeded (bit_channel).
    pub carrier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub samples: Vec<QuerySample>,
    pub seed: u64,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `n` query samples; deterministic in `(config, payload, n, seed)`.
///
/// `payload` is the watermark whose bits the bit channel reproduces; memorize
/// mode ignores it.
pub fn sample(config: &GeneratorProxyConfig, payload: &BitPayload, n: usize, seed: u64) -> Result<QuerySet, ProxyError> {
    config.validate()?;
    match config.mode {
        ProxyMode::BitChannel => Ok(sample_bit_channel(config, payload, n, seed)),
        ProxyMode::Memorize => {
            let path = config.manifest.as_ref().expect("validated");
            let manifest = load_manifest(path)?;
            sample_memorized(config, &manifest, n, seed)
        }
    }
}

/// Memorize-mode sampling from an already loaded manifest.
pub fn sample_memorized(
    config: &GeneratorProxyConfig,
    manifest: &Manifest,
    n: usize,
    seed: u64,
) -> Result<QuerySet, ProxyError> {
    config.validate()?;
    if manifest.records.is_empty() {
        return Err(ProxyError::Config("manifest has no records".into()));
    }
    let universe: Vec<String> = manifest.spec.attributes.iter().map(|a| a.name.clone()).collect();
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, rng::domain::SAMPLE, i);
            let record = &manifest.records[rng.random_range(0..manifest.records.len())];
            let corrupt_seed: u64 = rng.random();
            let predicted = predictor::predict_with(&record.attributes, &universe, &config.predictor, &mut rng);
            let image = ImageBuffer::read_pnm(&manifest.image_path(record))?;
            Ok(QuerySample {
                content: QueryContent::Image(corrupt(&image, &config.pipeline, corrupt_seed)?),
                true_attributes: record.attributes.clone(),
                predicted_attributes: predicted,
                carrier: record.watermarked,
            })
        })
        .collect::<Result<Vec<_>, ProxyError>>()?;
    Ok(QuerySet { samples, seed })
}

fn sample_bit_channel(config: &GeneratorProxyConfig, payload: &BitPayload, n: usize, seed: u64) -> QuerySet {
    let universe: Vec<String> = config.marginals.iter().map(|(a, _)| a.clone()).collect();
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, rng::domain::SAMPLE, i);
            let truth: Vec<String> = config
                .marginals
                .iter()
                .filter(|(_, m)| rng.random::<f64>() < *m)
                .map(|(a, _)| a.clone())
                .collect();
            let carrier = rng.random::<f64>() < config.carry_prob.rate(&truth);
            let p = if carrier { config.beta } else { config.null_bias };
            let bits = payload
                .bits()
                .iter()
                .map(|&b| if rng.random::<f64>() < p { b } else { !b })
                .collect();
            let predicted = predictor::predict_with(&truth, &universe, &config.predictor, &mut rng);
            QuerySample {
                content: QueryContent::Bits(BitPayload::new(bits).expect("payload is non-empty")),
                true_attributes: truth,
                predicted_attributes: predicted,
                carrier,
            }
        })
        .collect();
    QuerySet { samples, seed }
}

/// Keeps the samples whose predicted attributes include `attribute`, in order.
pub fn filter_by_attribute(queries: &QuerySet, attribute: &str) -> QuerySet {
    QuerySet {
        samples: queries
            .samples
            .iter()
            .filter(|s| s.predicted_attributes.iter().any(|a| a == attribute))
            .cloned()
            .collect(),
        seed: queries.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn payload() -> BitPayload {
        BitPayload::random(100, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
    }

    fn marginals() -> Vec<(String, f64)> {
        vec![("disc".into(), 0.455), ("stripes".into(), 0.205), ("checker".into(), 0.047)]
    }

    fn correct(s: &QuerySample, w: &BitPayload) -> usize {
        match &s.content {
            QueryContent::Bits(b) => b.bits().iter().zip(w.bits()).filter(|(a, b)| a == b).count(),
            QueryContent::Image(_) => unreachable!(),
        }
    }

    #[test]
    fn degenerate_channel_reproduces_payload() {
        let cfg = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::constant(1.0), 1.0, 0.5);
        let w = payload();
        let q = sample(&cfg, &w, 50, 3).unwrap();
        assert_eq!(q.len(), 50);
        assert!(q.samples.iter().all(|s| s.carrier && s.content == QueryContent::Bits(w.clone())));
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::only("checker"), 0.9, 0.52)
            .with_predictor(PredictorStub::uniform(0.1).unwrap());
        let w = payload();
        assert_eq!(sample(&cfg, &w, 200, 5).unwrap(), sample(&cfg, &w, 200, 5).unwrap());
        assert_ne!(sample(&cfg, &w, 200, 5).unwrap(), sample(&cfg, &w, 200, 6).unwrap());
        // Sample i does not depend on n.
        let short = sample(&cfg, &w, 20, 5).unwrap();
        assert_eq!(short.samples[..], sample(&cfg, &w, 200, 5).unwrap().samples[..20]);
    }

    #[test]
    fn carry_table_takes_the_strongest_attribute() {
        let mut t = CarryTable::only("a");
        t.by_attribute.insert("b".into(), 0.3);
        t.default = 0.1;
        let v = |x: &[&str]| t.rate(&x.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        assert_eq!(v(&["a", "b"]), 1.0);
        assert_eq!(v(&["b"]), 0.3);
        assert_eq!(v(&["c"]), 0.1);
        assert_eq!(v(&[]), 0.1);
    }

    #[test]
    fn carrier_rate_raises_accuracy() {
        let w = payload();
        let mean_acc = |gamma: f64| {
            let cfg = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::constant(gamma), 0.8, 0.5);
            let q = sample(&cfg, &w, 4000, 1).unwrap();
            q.samples.iter().map(|s| correct(s, &w)).sum::<usize>() as f64 / (4000.0 * 100.0)
        };
        let accs: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&g| mean_acc(g)).collect();
        assert!(accs.windows(2).all(|p| p[0] < p[1]), "{accs:?}");
        assert!((accs[4] - 0.8).abs() < 0.005);
    }

    #[test]
    fn conditioning_on_carrier_attribute_gains() {
        let w = payload();
        let cfg = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::only("stripes"), 0.9, 0.5);
        let q = sample(&cfg, &w, 5000, 2).unwrap();
        let acc = |set: &QuerySet| {
            set.samples.iter().map(|s| correct(s, &w)).sum::<usize>() as f64 / (set.len() as f64 * 100.0)
        };
        let sub = filter_by_attribute(&q, "stripes");
        assert!(sub.samples.iter().all(|s| s.carrier));
        assert!((acc(&sub) - 0.9).abs() < 0.005);
        assert!(acc(&q) < acc(&sub) - 0.2);
    }

    #[test]
    fn filter_edge_cases() {
        let w = payload();
        let cfg = GeneratorProxyConfig::bit_channel(vec![("all".into(), 1.0), ("none".into(), 0.0)], CarryTable::constant(0.0), 0.9, 0.5);
        let q = sample(&cfg, &w, 30, 0).unwrap();
        assert_eq!(filter_by_attribute(&q, "all"), q);
        assert!(filter_by_attribute(&q, "none").is_empty());
    }

    #[test]
    fn validation() {
        let ok = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::constant(0.0), 0.9, 0.5);
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.beta = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.carry_prob.default = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.mode = ProxyMode::Memorize;
        assert!(bad.validate().unwrap_err().to_string().starts_with("ConfigError"));
        let mut bad = ok;
        bad.marginals.push(("disc".into(), 0.1));
        assert!(bad.validate().is_err());
    }

    #[test]
    fn file_roundtrip() {
        let mut cfg = GeneratorProxyConfig::bit_channel(marginals(), CarryTable::only("checker"), 0.93, 0.5174)
            .with_predictor(PredictorStub::uniform(0.05).unwrap());
        cfg.pipeline = "gaussian_noise:2,translate:1".parse().unwrap();
        let text = cfg.to_text();
        assert!(text.starts_with("WMCTL-PROXY 1\n"));
        assert_eq!(GeneratorProxyConfig::parse(&text, Path::new("/x")).unwrap(), cfg);

        let mem = GeneratorProxyConfig::memorize("data/manifest.txt", CorruptionPipeline::default_generator());
        let back = GeneratorProxyConfig::parse(&mem.to_text(), Path::new("/root")).unwrap();
        assert_eq!(back.manifest.as_deref(), Some(Path::new("/root/data/manifest.txt")));

        let err = GeneratorProxyConfig::parse("WMCTL-PROXY 1\nbeta = 0.9\n", Path::new("/")).unwrap_err();
        assert!(err.to_string().contains("mode"), "{err}");
        assert!(GeneratorProxyConfig::parse("WMCTL-PROXY 2\nmode = memorize\n", Path::new("/")).is_err());
    }
}
