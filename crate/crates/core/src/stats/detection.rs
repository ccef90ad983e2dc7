use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::binomial::{log1mexp, log_binom_sf, log_binom_tails};
use super::StatsError;
use crate::codec::BitPayload;

/// Minimum number of clean images behind a measured null.
pub const CALIBRATION_FLOOR: usize = 100;

/// The null bias `p_w`: per-bit agreement rate of the decoder with `w` on
/// images that carry no watermark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub p_w: f64,
    /// Clean images behind the estimate; 0 when `p_w` was supplied directly.
    pub n_calibration: usize,
    pub attribute_scope: Option<String>,
}

impl NullCalibration {
    pub fn measured(p_w: f64, n_calibration: usize, attribute_scope: Option<String>) -> Result<Self, StatsError> {
        if n_calibration < CALIBRATION_FLOOR {
            return Err(StatsError::InsufficientCalibration {
                found: n_calibration,
                floor: CALIBRATION_FLOOR,
            });
        }
        Self::check_p(p_w)?;
        Ok(NullCalibration {
            p_w,
            n_calibration,
            attribute_scope,
        })
    }

    /// A null whose `p_w` is known rather than estimated.
    pub fn explicit(p_w: f64, attribute_scope: Option<String>) -> Result<Self, StatsError> {
        Self::check_p(p_w)?;
        Ok(NullCalibration {
            p_w,
            n_calibration: 0,
            attribute_scope,
        })
    }

    fn check_p(p_w: f64) -> Result<(), StatsError> {
        if p_w > 0.0 && p_w < 1.0 {
            Ok(())
        } else {
            Err(StatsError::Domain(format!("p_w = {p_w} outside (0, 1)")))
        }
    }
}

/// Per-sample correct-bit counts over a query set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatchSummary {
    pub d: usize,
    pub per_sample_correct: Vec<u32>,
    pub total_correct: u64,
    pub k_max: u32,
}

impl BitMatchSummary {
    pub fn from_counts(d: usize, counts: Vec<u32>) -> Result<Self, StatsError> {
        if d == 0 {
            return Err(StatsError::Range("d must be positive".into()));
        }
        if let Some(&bad) = counts.iter().find(|&&c| c as usize > d) {
            return Err(StatsError::Range(format!("count {bad} exceeds d = {d}")));
        }
        Ok(BitMatchSummary {
            d,
            total_correct: counts.iter().map(|&c| u64::from(c)).sum(),
            k_max: counts.iter().copied().max().unwrap_or(0),
            per_sample_correct: counts,
        })
    }

    pub fn from_decodes<'a>(
        decodes: impl IntoIterator<Item = &'a BitPayload>,
        w: &BitPayload,
    ) -> Result<Self, StatsError> {
        let counts = decodes
            .into_iter()
            .map(|p| bit_correct_count(p, w).map(|c| c as u32))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_counts(w.len(), counts)
    }

    pub fn n(&self) -> usize {
        self.per_sample_correct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample_correct.is_empty()
    }

    pub fn acc_avg(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.total_correct as f64 / (self.n() * self.d) as f64
    }

    pub fn acc_max(&self) -> f64 {
        f64::from(self.k_max) / self.d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValuePair {
    pub log_p_avg: f64,
    pub log_p_max: f64,
}

/// Number of positions where `decoded` agrees with `w`.
pub fn bit_correct_count(decoded: &BitPayload, w: &BitPayload) -> Result<usize, StatsError> {
    if decoded.len() != w.len() {
        return Err(StatsError::LengthMismatch {
            left: decoded.len(),
            right: w.len(),
        });
    }
    Ok(decoded.bits().iter().zip(w.bits()).filter(|(a, b)| a == b).count())
}

pub fn bitwise_accuracy(count: usize, d: usize) -> Result<f64, StatsError> {
    if d == 0 || count > d {
        return Err(StatsError::Range(format!("count {count} invalid for d = {d}")));
    }
    Ok(count as f64 / d as f64)
}

/// `ln P(K' >= K)` with `K' ~ Bin(n d, p_w)`: the sum of `n` independent
/// `Bin(d, p_w)` counts is itself binomial, so the average-accuracy test is
/// the exact upper tail at the total correct-bit count.
pub fn p_avg(summary: &BitMatchSummary, null: &NullCalibration) -> Result<f64, StatsError> {
    let trials = (summary.n() * summary.d) as u64;
    log_binom_sf(summary.total_correct, trials, null.p_w)
}

/// `ln P(max_i #cor(i) >= k_max) = ln(1 - (1 - q)^n)` with `q = P(#cor >= k_max)`.
pub fn p_max(summary: &BitMatchSummary, null: &NullCalibration) -> Result<f64, StatsError> {
    if summary.is_empty() {
        return Err(StatsError::Domain("p_max needs at least one sample".into()));
    }
    let n = summary.n() as f64;
    let tails = log_binom_tails(u64::from(summary.k_max), summary.d as u64, null.p_w)?;
    let log_nq = n.ln() + tails.upper;
    if log_nq < -18.0 {
        // 1 - (1 - q)^n = n q (1 - (n - 1) q / 2 + O((n q)^2)); n * ln(1 - q)
        // would round to zero long before n q underflows.
        return Ok(log_nq + (-(n - 1.0) / 2.0 * tails.upper.exp()).ln_1p());
    }
    Ok(log1mexp(n * tails.lower))
}

pub fn p_values(summary: &BitMatchSummary, null: &NullCalibration) -> Result<PValuePair, StatsError> {
    Ok(PValuePair {
        log_p_avg: p_avg(summary, null)?,
        log_p_max: p_max(summary, null)?,
    })
}

/// Estimates `p_w` from decodes of clean images, clamped to
/// `[1/(m d), 1 - 1/(m d)]` for `m` images so that the null stays
/// non-degenerate.
pub fn calibrate_null(
    clean_decodes: &[BitPayload],
    w: &BitPayload,
    attribute_scope: Option<String>,
) -> Result<NullCalibration, StatsError> {
    let m = clean_decodes.len();
    if m < CALIBRATION_FLOOR {
        return Err(StatsError::InsufficientCalibration {
            found: m,
            floor: CALIBRATION_FLOOR,
        });
    }
    let summary = BitMatchSummary::from_decodes(clean_decodes, w)?;
    let trials = (m * w.len()) as f64;
    let eps = 1.0 / trials;
    let p_w = (summary.total_correct as f64 / trials).clamp(eps, 1.0 - eps);
    NullCalibration::measured(p_w, m, attribute_scope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    MemberEvidence,
    NoEvidence,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::MemberEvidence => "member_evidence",
            Verdict::NoEvidence => "no_evidence",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "member_evidence" => Ok(Verdict::MemberEvidence),
            "no_evidence" => Ok(Verdict::NoEvidence),
            other => Err(StatsError::Domain(format!("unknown verdict `{other}`"))),
        }
    }
}

/// `MemberEvidence` iff `log_p < ln(alpha_level)`.
pub fn verdict(log_p: f64, alpha_level: f64) -> Result<Verdict, StatsError> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(StatsError::Domain(format!("significance level {alpha_level} outside (0, 1)")));
    }
    if log_p.is_nan() || log_p > 0.0 {
        return Err(StatsError::Domain(format!("log p-value {log_p} is not a log-probability")));
    }
    Ok(if log_p < alpha_level.ln() {
        Verdict::MemberEvidence
    } else {
        Verdict::NoEvidence
    })
}
