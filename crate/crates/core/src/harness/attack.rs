use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{DetectionReport, DetectionRow, UNCONDITIONAL};
use super::{AttackConfig, CalibrationSource, HarnessError};
use crate::codec::{decode, BitPayload};
use crate::dataset::{load_manifest, DatasetError};
use crate::genproxy::{self, GeneratorProxyConfig, QueryContent, QuerySet};
use crate::image::ImageBuffer;
use crate::stats::{self, calibrate_null, BitMatchSummary, NullCalibration, Verdict, CALIBRATION_FLOOR};

/// Null for one attribute scope.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopedNull {
    pub null: NullCalibration,
    /// The attribute pool was below the calibration floor and the
    /// unconditional null stands in.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub unconditional: NullCalibration,
    pub per_attribute: BTreeMap<String, ScopedNull>,
}

impl NullModel {
    pub fn explicit(p_w: f64) -> Result<Self, HarnessError> {
        Ok(NullModel {
            unconditional: NullCalibration::explicit(p_w, None)?,
            per_attribute: BTreeMap::new(),
        })
    }

    pub fn with_attribute(mut self, attribute: &str, p_w: f64) -> Result<Self, HarnessError> {
        let null = NullCalibration::explicit(p_w, Some(attribute.to_string()))?;
        self.per_attribute
            .insert(attribute.to_string(), ScopedNull { null, fallback: false });
        Ok(self)
    }
}

/// Builds the null model described by `config.calibration`.
pub fn calibrate(config: &AttackConfig, payload: &BitPayload) -> Result<NullModel, HarnessError> {
    match &config.calibration {
        CalibrationSource::Explicit { p_w, per_attribute } => {
            let mut model = NullModel::explicit(*p_w)?;
            for (a, p) in per_attribute {
                model = model.with_attribute(a, *p)?;
            }
            Ok(model)
        }
        CalibrationSource::CleanManifest(path) => {
            let manifest = load_manifest(path)?;
            if let Some(a) = &config.condition {
                if !manifest.spec.has_attribute(a) {
                    return Err(DatasetError::UnknownAttribute(a.clone()).into());
                }
            }
            let clean: Vec<_> = manifest.records.iter().filter(|r| !r.watermarked).collect();
            let decodes = clean
                .par_iter()
                .map(|r| {
                    let image = ImageBuffer::read_pnm(&manifest.image_path(r))?;
                    Ok(decode(&image, config.key, &config.codec)?.bits)
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let unconditional = calibrate_null(&decodes, payload, None)?;
            let mut per_attribute = BTreeMap::new();
            for attr in &manifest.spec.attributes {
                let pool: Vec<BitPayload> = clean
                    .iter()
                    .zip(&decodes)
                    .filter(|(r, _)| r.has(&attr.name))
                    .map(|(_, d)| d.clone())
                    .collect();
                let scoped = if pool.len() >= CALIBRATION_FLOOR {
                    ScopedNull {
                        null: calibrate_null(&pool, payload, Some(attr.name.clone()))?,
                        fallback: false,
                    }
                } else {
                    ScopedNull {
                        null: unconditional.clone(),
                        fallback: true,
                    }
                };
                per_attribute.insert(attr.name.clone(), scoped);
            }
            Ok(NullModel {
                unconditional,
                per_attribute,
            })
        }
    }
}

/// One report row from per-sample correct-bit counts.
///
/// An empty scope has no evidence: both p-values are 1 and accuracies 0.
pub fn detect_counts(
    scope: &str,
    counts: Vec<u32>,
    d: usize,
    null: &NullCalibration,
    alpha_level: f64,
    fallback: bool,
) -> Result<DetectionRow, HarnessError> {
    if counts.is_empty() {
        stats::verdict(0.0, alpha_level)?;
        return Ok(DetectionRow {
            scope: scope.to_string(),
            n_effective: 0,
            acc_avg: 0.0,
            acc_max: 0.0,
            log_p_avg: 0.0,
            log_p_max: 0.0,
            p_w_used: null.p_w,
            verdict: Verdict::NoEvidence,
            calibration_fallback: fallback,
        });
    }
    let summary = BitMatchSummary::from_counts(d, counts)?;
    let p = stats::p_values(&summary, null)?;
    Ok(DetectionRow {
        scope: scope.to_string(),
        n_effective: summary.n(),
        acc_avg: summary.acc_avg(),
        acc_max: summary.acc_max(),
        log_p_avg: p.log_p_avg,
        log_p_max: p.log_p_max,
        p_w_used: null.p_w,
        verdict: stats::verdict(p.log_p_avg, alpha_level)?,
        calibration_fallback: fallback,
    })
}

/// A validated attack with its payload and null model resolved.
#[derive(Debug, Clone)]
pub struct Attack {
    pub config: AttackConfig,
    pub payload: BitPayload,
    pub null: NullModel,
}

impl Attack {
    pub fn prepare(config: &AttackConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let payload = config.load_payload()?;
        let null = calibrate(config, &payload)?;
        Self::with_null(config, payload, null)
    }

    pub fn with_null(config: &AttackConfig, payload: BitPayload, null: NullModel) -> Result<Self, HarnessError> {
        config.validate()?;
        if payload.len() != config.d() {
            return Err(HarnessError::Config(format!(
                "payload has {} bits but d = {}",
                payload.len(),
                config.d()
            )));
        }
        if let Some(a) = &config.condition {
            if !null.per_attribute.contains_key(a) {
                return Err(HarnessError::Config(format!("no calibration for attribute `{a}`")));
            }
        }
        Ok(Attack {
            config: config.clone(),
            payload,
            null,
        })
    }

    pub fn run(&self, proxy: &GeneratorProxyConfig, seed: u64) -> Result<DetectionReport, HarnessError> {
        let queries = genproxy::sample(proxy, &self.payload, self.config.n, seed)?;
        self.evaluate(&queries)
    }

    /// Per-sample correct-bit counts, decoding images where needed.
    pub fn correct_counts(&self, queries: &QuerySet) -> Result<Vec<u32>, HarnessError> {
        queries
            .samples
            .par_iter()
            .map(|s| {
                let bits = match &s.content {
                    QueryContent::Bits(b) => b.clone(),
                    QueryContent::Image(img) => decode(img, self.config.key, &self.config.codec)?.bits,
                };
                Ok(stats::bit_correct_count(&bits, &self.payload)? as u32)
            })
            .collect()
    }

    pub fn evaluate(&self, queries: &QuerySet) -> Result<DetectionReport, HarnessError> {
        let counts = self.correct_counts(queries)?;
        let (d, alpha) = (self.config.d(), self.config.alpha_level);
        let mut rows = vec![detect_counts(
            UNCONDITIONAL,
            counts.clone(),
            d,
            &self.null.unconditional,
            alpha,
            false,
        )?];
        if let Some(attr) = &self.config.condition {
            let scoped = &self.null.per_attribute[attr];
            let subset = queries
                .samples
                .iter()
                .zip(&counts)
                .filter(|(s, _)| s.predicted_attributes.iter().any(|a| a == attr))
                .map(|(_, &c)| c)
                .collect();
            rows.push(detect_counts(attr, subset, d, &scoped.null, alpha, scoped.fallback)?);
        }
        Ok(DetectionReport {
            seed: queries.seed,
            n: self.config.n,
            d,
            alpha_level: alpha,
            rows,
        })
    }
}

pub fn run_attack(
    config: &AttackConfig,
    proxy: &GeneratorProxyConfig,
    seed: u64,
) -> Result<DetectionReport, HarnessError> {
    Attack::prepare(config)?.run(proxy, seed)
}
