use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Attack, HarnessError};
use crate::genproxy::{CarryTable, GeneratorProxyConfig, PredictorStub, ProxyMode};
use crate::stats::Verdict;

/// Lists of values whose Cartesian product forms the sweep cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Overall fraction of carrier samples.
    pub carrier_rate: Vec<f64>,
    pub beta: Vec<f64>,
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    /// Marginal of the conditioning attribute.
    pub marginal: Vec<f64>,
}

impl SweepGrid {
    /// A one-cell grid.
    pub fn single(carrier_rate: f64, beta: f64, n: usize, epsilon: f64, marginal: f64) -> Self {
        SweepGrid {
            carrier_rate: vec![carrier_rate],
            beta: vec![beta],
            n: vec![n],
            epsilon: vec![epsilon],
            marginal: vec![marginal],
        }
    }

    /// Cells in row-major order over (carrier_rate, beta, n, epsilon, marginal).
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &carrier_rate in &self.carrier_rate {
            for &beta in &self.beta {
                for &n in &self.n {
                    for &epsilon in &self.epsilon {
                        for &marginal in &self.marginal {
                            out.push(SweepPoint {
                                carrier_rate,
                                beta,
                                n,
                                epsilon,
                                marginal,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub carrier_rate: f64,
    pub beta: f64,
    pub n: usize,
    pub epsilon: f64,
    pub marginal: f64,
}

impl SweepPoint {
    /// Bit-channel proxy for this cell: `base` with the attribute marginal,
    /// carrier table, fidelity and predictor replaced.
    pub fn proxy(&self, base: &GeneratorProxyConfig, attribute: &str) -> Result<GeneratorProxyConfig, HarnessError> {
        let mut proxy = base.clone();
        match proxy.marginals.iter_mut().find(|(a, _)| a == attribute) {
            Some(entry) => entry.1 = self.marginal,
            None => proxy.marginals.push((attribute.to_string(), self.marginal)),
        }
        proxy.carry_prob = concentrated_carriers(attribute, self.carrier_rate, self.marginal)?;
        proxy.beta = self.beta;
        proxy.predictor = PredictorStub::uniform(self.epsilon)?;
        proxy.validate()?;
        Ok(proxy)
    }
}

/// Carrier table putting as many carriers as possible on `attribute`.
///
/// With attribute marginal `m` and overall carrier rate `gamma`, samples with
/// the attribute carry with probability `min(1, gamma/m)` and the remainder
/// of the rate is spread over the others, so that the expected carrier
/// fraction is `gamma`. `gamma = m` makes the carriers exactly the samples
/// with the attribute.
pub fn concentrated_carriers(attribute: &str, gamma: f64, marginal: f64) -> Result<CarryTable, HarnessError> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&marginal) {
        return Err(HarnessError::Config(format!(
            "carrier rate {gamma} and marginal {marginal} must lie in [0, 1]"
        )));
    }
    let on = if marginal > 0.0 { (gamma / marginal).min(1.0) } else { 0.0 };
    let off = if marginal < 1.0 {
        ((gamma - marginal * on) / (1.0 - marginal)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut table = CarryTable::only(attribute);
    table.by_attribute.insert(attribute.to_string(), on);
    table.default = off;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub point: SweepPoint,
    pub seeds: usize,
    pub median_log_p_avg_unconditional: f64,
    pub median_log_p_avg_conditional: f64,
    pub detection_rate_unconditional: f64,
    pub detection_rate_conditional: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// Runs `attack` on every grid cell for every seed.
///
/// Carriers concentrate on the attack's condition attribute (see
/// [`concentrated_carriers`]); `base` must be a bit-channel proxy and
/// supplies the remaining marginals and the null bias. All cells share the
/// same seeds.
pub fn sweep(
    attack: &Attack,
    base: &GeneratorProxyConfig,
    grid: &SweepGrid,
    seeds: &[u64],
) -> Result<Vec<SweepCell>, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("a sweep needs at least one seed".into()));
    }
    if base.mode != ProxyMode::BitChannel {
        return Err(HarnessError::Config("sweeps need a bit_channel proxy".into()));
    }
    let attribute = attack
        .config
        .condition
        .clone()
        .ok_or_else(|| HarnessError::Config("sweeps need a condition attribute".into()))?;
    let points = grid.points();
    if points.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    points
        .par_iter()
        .map(|point| {
            let proxy = point.proxy(base, &attribute)?;
            let mut cell_attack = attack.clone();
            cell_attack.config.n = point.n;
            let reports = seeds
                .par_iter()
                .map(|&s| cell_attack.run(&proxy, s))
                .collect::<Result<Vec<_>, _>>()?;
            let (mut uncond, mut cond) = (Vec::new(), Vec::new());
            let (mut hits_u, mut hits_c) = (0usize, 0usize);
            for r in &reports {
                let u = r.unconditional();
                let c = r.row(&attribute).expect("condition row present");
                uncond.push(u.log_p_avg);
                cond.push(c.log_p_avg);
                hits_u += usize::from(u.verdict == Verdict::MemberEvidence);
                hits_c += usize::from(c.verdict == Verdict::MemberEvidence);
            }
            let k = seeds.len() as f64;
            Ok(SweepCell {
                point: *point,
                seeds: seeds.len(),
                median_log_p_avg_unconditional: median(&mut uncond),
                median_log_p_avg_conditional: median(&mut cond),
                detection_rate_unconditional: hits_u as f64 / k,
                detection_rate_conditional: hits_c as f64 / k,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "carrier_rate,beta,n,epsilon,marginal,seeds,median_log_p_avg_unconditional,median_log_p_avg_conditional,detection_rate_unconditional,detection_rate_conditional";

pub fn render_sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for c in cells {
        let p = &c.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.carrier_rate,
            p.beta,
            p.n,
            p.epsilon,
            p.marginal,
            c.seeds,
            c.median_log_p_avg_unconditional,
            c.median_log_p_avg_conditional,
            c.detection_rate_unconditional,
            c.detection_rate_conditional
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concentrated_table_hits_the_rate() {
        for &(g, m) in &[(0.047, 0.047), (0.1, 0.047), (0.02, 0.047), (0.5, 0.0), (0.3, 1.0)] {
            let t = concentrated_carriers("a", g, m).unwrap();
            let on = t.by_attribute["a"];
            let expected = m * on + (1.0 - m) * t.default;
            assert!((expected - g).abs() < 1e-12, "g={g} m={m}");
        }
        let exact = concentrated_carriers("a", 0.047, 0.047).unwrap();
        assert_eq!((exact.by_attribute["a"], exact.default), (1.0, 0.0));
        assert!(concentrated_carriers("a", 1.5, 0.1).is_err());
    }

    #[test]
    fn grid_order() {
        let g = SweepGrid {
            carrier_rate: vec![0.1, 0.2],
            beta: vec![0.9],
            n: vec![50, 100],
            epsilon: vec![0.0],
            marginal: vec![0.05],
        };
        let pts = g.points();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].carrier_rate, pts[1].n), (0.1, 100));
        assert_eq!((pts[2].carrier_rate, pts[2].n), (0.2, 50));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
