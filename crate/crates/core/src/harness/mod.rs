//! End-to-end membership attack: null calibration, querying a proxy,
//! unconditional and attribute-conditional detection, reports and sweeps.

mod attack;
mod config;
mod report;
mod sweep;

use thiserror::Error;

use crate::codec::CodecError;
use crate::dataset::DatasetError;
use crate::genproxy::ProxyError;
use crate::image::ImageError;
use crate::kvfile::ParseError;
use crate::stats::StatsError;

pub use attack::{calibrate, detect_counts, run_attack, Attack, NullModel, ScopedNull};
pub use config::{AttackConfig, CalibrationSource, PayloadSource, ATTACK_MAGIC, ATTACK_VERSION};
pub use report::{
    emit_report, format_log_p, load_report, render_csv, render_json, render_text, DetectionReport, DetectionRow,
    ReportFormat, CSV_HEADER, UNCONDITIONAL,
};
pub use sweep::{concentrated_carriers, render_sweep_csv, sweep, SweepCell, SweepGrid, SweepPoint, SWEEP_CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
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
    Codec(#[from] CodecError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("FormatError: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
