//! Binomial tails in log space.
//!
//! Log-PMFs use Loader's saddle-point form (Stirling remainders plus the
//! deviance term `bd0`), which keeps full relative precision without the
//! cancellation of a plain `lgamma` difference. Tails are summed outward from
//! their dominant term with the PMF ratio recurrence; whichever tail lies on
//! the far side of the mean is summed directly and the other is obtained from
//! it with `log1mexp`, so both are accurate even when one of them is within
//! rounding of 1.

use std::f64::consts::LN_2;

use super::StatsError;

/// Largest number of trials accepted by the tail functions.
pub const MAX_TRIALS: u64 = 1_000_000_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// Stirling remainder ln(n!) - ln(sqrt(2 pi n) (n/e)^n) at n = 0..=15.
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_1,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_87,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        return STIRLERR_SMALL[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, stable when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P(X = k)` for `X ~ Bin(n, p)`, with `0 < p < 1` and `k <= n`.
pub fn ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if k == 0 {
        return n as f64 * (-p).ln_1p();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (kf, nf) = (k as f64, n as f64);
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln(1 - exp(a))` for `a <= 0`.
pub fn log1mexp(a: f64) -> f64 {
    if a > -LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// Both tails around `k`: `(ln P(X >= k), ln P(X <= k - 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTails {
    pub upper: f64,
    pub lower: f64,
}

fn check(k: u64, n: u64, p: f64) -> Result<(), StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain(format!("success probability {p} outside (0, 1)")));
    }
    if n == 0 || n > MAX_TRIALS {
        return Err(StatsError::Domain(format!("trial count {n} outside 1..={MAX_TRIALS}")));
    }
    if k > n {
        return Err(StatsError::Domain(format!("threshold {k} exceeds trial count {n}")));
    }
    Ok(())
}

// Relative size below which further terms cannot change the sum.
const SUM_CUTOFF: f64 = 1e-18;

pub fn log_binom_tails(k: u64, n: u64, p: f64) -> Result<LogTails, StatsError> {
    check(k, n, p)?;
    if k == 0 {
        return Ok(LogTails {
            upper: 0.0,
            lower: f64::NEG_INFINITY,
        });
    }
    let odds = p / (1.0 - p);
    if k as f64 > n as f64 * p {
        // k sits at or beyond the mode: terms j >= k only shrink.
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in k..n {
            term *= (n - j) as f64 / (j + 1) as f64 * odds;
            sum += term;
            if term < SUM_CUTOFF * sum {
                break;
            }
        }
        let upper = ln_pmf(k, n, p) + sum.ln();
        Ok(LogTails {
            upper: upper.min(0.0),
            lower: log1mexp(upper.min(0.0)),
        })
    } else {
        // k - 1 sits below the mode: terms j <= k - 1 shrink going down.
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in (1..k).rev() {
            term *= j as f64 / (n - j + 1) as f64 / odds;
            sum += term;
            if term < SUM_CUTOFF * sum {
                break;
            }
        }
        let lower = (ln_pmf(k - 1, n, p) + sum.ln()).min(0.0);
        Ok(LogTails {
            upper: log1mexp(lower),
            lower,
        })
    }
}

/// `ln P(X >= k)` for `X ~ Bin(n, p)`; the tail includes `k` itself.
pub fn log_binom_sf(k: u64, n: u64, p: f64) -> Result<f64, StatsError> {
    Ok(log_binom_tails(k, n, p)?.upper)
}

/// `ln P(X <= k)`.
pub fn log_binom_cdf(k: u64, n: u64, p: f64) -> Result<f64, StatsError> {
    if k >= n {
        check(n, n, p)?;
        return Ok(0.0);
    }
    Ok(log_binom_tails(k + 1, n, p)?.lower)
}
