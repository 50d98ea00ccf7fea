//! Success probabilities of the attacks: closed forms, bounds and exact
//! convolutions.

mod pmf;
pub mod stats;

pub use pmf::{convolve_uniform_sum, Pmf, UniformSumSeries, MASS_TOLERANCE, MAX_SUPPORT};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::NoiseDistribution;

/// Number of tuples in `(Z±r)³` whose sum lies outside `[-3(r-1), 3(r-1)]`,
/// by enumeration.
pub fn count_extreme_tuples(r: u32) -> Result<u64> {
    if r < 1 {
        return Err(Error::param("r must be at least 1"));
    }
    let r = i64::from(r);
    let edge = 3 * (r - 1);
    let mut n = 0;
    for e1 in -r..=r {
        for e2 in -r..=r {
            for e3 in -r..=r {
                if (e1 + e2 + e3).abs() > edge {
                    n += 1;
                }
            }
        }
    }
    Ok(n)
}

/// `Pr[r' = r]` for the perturbation finder with `m` probes.
pub fn perturbation_finder_success(r: u32, m: u64) -> f64 {
    let cube = f64::from(2 * r + 1).powi(3);
    // 1 - (1 - 20/cube)^m, kept accurate when the miss probability is tiny.
    -(m as f64 * (-20.0 / cube).ln_1p()).exp_m1()
}

/// Chebyshev lower bound on the noise remover's success with `k` partitions.
pub fn chebyshev_lower_bound(r: u32, k: u64) -> f64 {
    let r = f64::from(r);
    (1.0 - 8.0 * r * (r + 1.0) / (3.0 * k as f64)).max(0.0)
}

/// Exact success probability of the noise remover with `k` partitions and
/// uniform noise on `Z±r`: `Pr(|X_2k| < k/2)`.
pub fn noise_remover_exact_success(r: u32, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let pmf = convolve_uniform_sum(r, 2 * k as usize)?;
    Ok(pmf.mass_strictly_within(k as f64 / 2.0))
}

/// As [`noise_remover_exact_success`] for an arbitrary noise distribution.
pub fn noise_remover_success_for(noise: &NoiseDistribution, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let sum = Pmf::from_distribution(noise).convolution_power(2 * k as usize)?;
    Ok(sum.mass_strictly_within(k as f64 / 2.0))
}

/// Exact noise remover success for every `k` in `1..=k_max`, index `k - 1`.
pub fn noise_remover_success_curve(r: u32, k_max: u64) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::param("r must be at least 1"));
    }
    let mut series = UniformSumSeries::new(r);
    let mut out = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        series.step()?;
        series.step()?;
        out.push(series.mass_strictly_within(k as f64 / 2.0));
    }
    Ok(out)
}

/// Union bound for recovering a whole histogram of `m` values:
/// `max(0, 1 - (m + 1)(1 - p_nr))`.
pub fn histogram_union_bound(p_nr: f64, m: u64) -> f64 {
    (1.0 - (m as f64 + 1.0) * (1.0 - p_nr)).max(0.0)
}

/// Union bound for one target value recovered by differencing two
/// noise-remover runs: `max(0, 1 - 2(1 - p_nr))`.
pub fn single_target_union_bound(p_nr: f64) -> f64 {
    (1.0 - 2.0 * (1.0 - p_nr)).max(0.0)
}

/// Expected number of correctly recovered values in a histogram attack, by
/// union bound per value.
///
/// `p_k` is the noise remover success for the per-value runs and `p_base` for
/// the base-set run. A value whose true count is zero also comes out right
/// when its error is negative, because negative estimates are clamped; about
/// half of its per-value failures are absorbed that way.
pub fn predicted_histogram_correct(
    p_k: f64,
    p_base: f64,
    zero_values: u64,
    other_values: u64,
) -> f64 {
    let zero = (1.0 - (1.0 - p_k) / 2.0 - (1.0 - p_base)).max(0.0);
    let other = (1.0 - (1.0 - p_k) - (1.0 - p_base)).max(0.0);
    zero_values as f64 * zero + other_values as f64 * other
}

/// Minimum noise half-width against a budget of `t` queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseScale {
    pub t: u64,
    /// `⌈√t⌉`
    pub c: u64,
    /// Upper bound `4c²/t` on the variance of the averaged noise.
    pub variance_bound: f64,
}

pub fn min_noise_scale(t: u64) -> Result<NoiseScale> {
    if t == 0 {
        return Err(Error::param("t must be at least 1"));
    }
    let mut c = (t as f64).sqrt().ceil() as u64;
    while c * c < t {
        c += 1;
    }
    while c > 0 && (c - 1) * (c - 1) >= t {
        c -= 1;
    }
    Ok(NoiseScale {
        t,
        c,
        variance_bound: 4.0 * (c * c) as f64 / t as f64,
    })
}
