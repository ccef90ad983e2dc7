use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::stats::Verdict;

/// Scope label of the row computed over every query.
pub const UNCONDITIONAL: &str = "unconditional";

pub const CSV_HEADER: &str =
    "scope,n_effective,acc_avg,p_avg,acc_max,p_max,log_p_avg,log_p_max,p_w_used,verdict,calibration_fallback";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub scope: String,
    pub n_effective: usize,
    pub acc_avg: f64,
    pub acc_max: f64,
    pub log_p_avg: f64,
    pub log_p_max: f64,
    pub p_w_used: f64,
    pub verdict: Verdict,
    pub calibration_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub alpha_level: f64,
    pub rows: Vec<DetectionRow>,
}

impl DetectionReport {
    pub fn row(&self, scope: &str) -> Option<&DetectionRow> {
        self.rows.iter().find(|r| r.scope == scope)
    }

    pub fn unconditional(&self) -> &DetectionRow {
        self.row(UNCONDITIONAL).expect("every report has an unconditional row")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Formats `exp(log_p)` in scientific notation with four significant digits,
/// working from the logarithm so that values below `f64::MIN_POSITIVE` print.
pub fn format_log_p(log_p: f64) -> String {
    if log_p == f64::NEG_INFINITY {
        return "0.000e0".to_string();
    }
    let l10 = log_p / std::f64::consts::LN_10;
    let mut exp = l10.floor();
    let mut mant = 10f64.powf(l10 - exp);
    if (mant * 1000.0).round() >= 10_000.0 {
        mant /= 10.0;
        exp += 1.0;
    }
    format!("{mant:.3}e{}", exp as i64)
}

pub fn render_text(report: &DetectionReport) -> String {
    let width = report
        .rows
        .iter()
        .map(|r| r.scope.len())
        .chain([UNCONDITIONAL.len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>5}  {:>7}  {:>11}  {:>7}  {:>11}  verdict",
        "scope", "n_eff", "acc_avg", "p_avg", "acc_max", "p_max"
    );
    for r in &report.rows {
        let flag = if r.calibration_fallback { " (fallback null)" } else { "" };
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>7.4}  {:>11}  {:>7.4}  {:>11}  {}{flag}",
            r.scope,
            r.n_effective,
            r.acc_avg,
            format_log_p(r.log_p_avg),
            r.acc_max,
            format_log_p(r.log_p_max),
            r.verdict
        );
    }
    out
}

pub fn render_csv(report: &DetectionReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scope,
            r.n_effective,
            r.acc_avg,
            format_log_p(r.log_p_avg),
            r.acc_max,
            format_log_p(r.log_p_max),
            r.log_p_avg,
            r.log_p_max,
            r.p_w_used,
            r.verdict,
            u8::from(r.calibration_fallback)
        );
    }
    out
}

pub fn render_json(report: &DetectionReport) -> Result<String, HarnessError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report(report: &DetectionReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let body = match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report)?,
    };
    fs::write(path, body).map_err(|e| HarnessError::io(path, e))
}

/// Reads a report written in the JSON format.
pub fn load_report(path: &Path) -> Result<DetectionReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> DetectionRow {
        DetectionRow {
            scope: UNCONDITIONAL.into(),
            n_effective: 100,
            acc_avg: 0.5491,
            acc_max: 0.68,
            log_p_avg: -10.0 * std::f64::consts::LN_10,
            log_p_max: -3.5,
            p_w_used: 0.5174,
            verdict: Verdict::MemberEvidence,
            calibration_fallback: false,
        }
    }

    fn report(rows: Vec<DetectionRow>) -> DetectionReport {
        DetectionReport {
            seed: 1,
            n: 100,
            d: 100,
            alpha_level: 0.05,
            rows,
        }
    }

    #[test]
    fn log_p_formatting() {
        assert_eq!(format_log_p(0.0), "1.000e0");
        assert_eq!(format_log_p((0.03f64).ln()), "3.000e-2");
        assert_eq!(format_log_p(-10.0 * std::f64::consts::LN_10), "1.000e-10");
        assert_eq!(format_log_p((7.5e-271f64).ln()), "7.500e-271");
        // far below the smallest subnormal
        assert_eq!(format_log_p(-2000.0 * std::f64::consts::LN_10), "1.000e-2000");
        assert_eq!(format_log_p((9.99999e-5f64).ln()), "1.000e-4");
        assert_eq!(format_log_p(f64::NEG_INFINITY), "0.000e0");
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = report(vec![]);
        assert_eq!(render_csv(&r), format!("{CSV_HEADER}\n"));
        assert_eq!(render_text(&r).lines().count(), 1);
    }

    #[test]
    fn text_column_order() {
        let text = render_text(&report(vec![row()]));
        let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["scope", "n_eff", "acc_avg", "p_avg", "acc_max", "p_max", "verdict"]);
        let cells: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
        assert_eq!(cells, ["unconditional", "100", "0.5491", "1.000e-10", "0.6800", "3.020e-2", "member_evidence"]);
    }

    #[test]
    fn json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut fb = row();
        fb.scope = "checker".into();
        fb.calibration_fallback = true;
        let r = report(vec![row(), fb]);
        emit_report(&r, ReportFormat::Json, &path).unwrap();
        assert_eq!(load_report(&path).unwrap(), r);
        emit_report(&r, ReportFormat::Csv, &path).unwrap();
        let csv = fs::read_to_string(&path).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with(",1"));
    }
}
