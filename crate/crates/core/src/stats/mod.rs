//! Detection statistics: bit matches, null calibration, and the exact
//! one-sided `p_avg` / `p_max` tests under the binomial null.

mod binomial;
mod detection;

use thiserror::Error;

pub use binomial::{ln_pmf, log1mexp, log_binom_cdf, log_binom_sf, log_binom_tails, LogTails, MAX_TRIALS};
pub use detection::{
    bit_correct_count, bitwise_accuracy, calibrate_null, p_avg, p_max, p_values, verdict, BitMatchSummary,
    NullCalibration, PValuePair, Verdict, CALIBRATION_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("LengthMismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },
    #[error("RangeError: {0}")]
    Range(String),
    #[error("InsufficientCalibration: {found} clean images, at least {floor} required")]
    InsufficientCalibration { found: usize, floor: usize },
}
