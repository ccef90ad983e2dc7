//! Shared test helpers: independent oracles and corpus builders.
#![allow(dead_code)]

use std::f64::consts::LN_2;

/// `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn log_one_minus_exp(a: f64) -> f64 {
    if a > -LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// Binomial log-PMF rows built trial by trial:
/// `row_t[j] = ln(p row_{t-1}[j-1] + q row_{t-1}[j])`.
///
/// Shares nothing with the library's saddle-point PMF or tail summation.
pub struct DpBinomial {
    pub p: f64,
    rows: Vec<Vec<f64>>,
}

impl DpBinomial {
    pub fn new(max_n: usize, p: f64) -> Self {
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let mut rows = Vec::with_capacity(max_n + 1);
        rows.push(vec![0.0]);
        for t in 1..=max_n {
            let prev: &Vec<f64> = &rows[t - 1];
            let mut row = vec![f64::NEG_INFINITY; t + 1];
            for j in 0..=t {
                let from_success = if j > 0 { prev[j - 1] + lp } else { f64::NEG_INFINITY };
                let from_failure = if j < t { prev[j] + lq } else { f64::NEG_INFINITY };
                row[j] = log_add(from_success, from_failure);
            }
            rows.push(row);
        }
        DpBinomial { p, rows }
    }

    pub fn log_pmf(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// `ln P(X >= k)` for every `k` in `0..=n`, complementing through the
    /// lower tail wherever the upper tail exceeds one half.
    pub fn log_sf_all(&self, n: usize) -> Vec<f64> {
        let row = &self.rows[n];
        let mut upper = vec![f64::NEG_INFINITY; n + 2];
        for k in (0..=n).rev() {
            upper[k] = log_add(upper[k + 1], row[k]);
        }
        let mut lower = vec![f64::NEG_INFINITY; n + 1]; // lower[k] = ln P(X <= k-1)
        for k in 1..=n {
            lower[k] = log_add(lower[k - 1], row[k - 1]);
        }
        (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else if upper[k] < -LN_2 {
                    upper[k]
                } else {
                    log_one_minus_exp(lower[k])
                }
            })
            .collect()
    }
}

/// Relative error of a log-probability, with an absolute floor at the
/// smallest normal double (below it the representation itself is coarse).
pub fn log_rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        return 0.0;
    }
    (got - want).abs() / want.abs().max(got.abs()).max(f64::MIN_POSITIVE)
}

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wmctl_core::codec::{BitPayload, CodecConfig, WatermarkKey};
use wmctl_core::dataset::{mark_subset, save_manifest, synth_dataset, DatasetSpec, Manifest};

pub fn payload(seed: u64, d: usize) -> BitPayload {
    BitPayload::random(d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Synthesizes a default-attribute corpus in `dir` and, if `attribute` is
/// given, marks that subset with `w`. The manifest on disk is up to date.
pub fn corpus(dir: &Path, n_images: usize, seed: u64, attribute: Option<&str>, w: &BitPayload, key: WatermarkKey) -> Manifest {
    let spec = DatasetSpec {
        n_images,
        seed,
        ..Default::default()
    };
    let mut manifest = synth_dataset(&spec, dir).unwrap();
    if let Some(a) = attribute {
        let config = CodecConfig::default().with_d(w.len());
        manifest = mark_subset(&manifest, a, w, key, &config).unwrap();
        save_manifest(&manifest, &dir.join("manifest.txt")).unwrap();
    }
    manifest
}
