//! Small statistical checks used to compare simulation against theory.

use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

/// Central acceptance region for a Binomial(`trials`, `p`) count at the given
/// confidence `level`, from exact quantiles: `[q(α/2), q(1 - α/2)]` with
/// `q(u)` the smallest `x` such that `Pr(X ≤ x) ≥ u`.
pub fn binomial_interval(trials: u64, p: f64, level: f64) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&p) || !(0.0 < level && level < 1.0) {
        return Err(Error::param(format!(
            "bad binomial interval inputs p={p}, level={level}"
        )));
    }
    if p == 0.0 {
        return Ok((0, 0));
    }
    if p == 1.0 {
        return Ok((trials, trials));
    }
    let dist = Binomial::new(p, trials).map_err(|e| Error::param(e.to_string()))?;
    let alpha = 1.0 - level;
    let quantile = |u: f64| {
        let (mut lo, mut hi) = (0u64, trials);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if dist.cdf(mid) >= u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    Ok((quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)))
}

/// Whether `successes` out of `trials` is consistent with `p` at `level`.
pub fn within_binomial_interval(successes: u64, trials: u64, p: f64, level: f64) -> Result<bool> {
    let (lo, hi) = binomial_interval(trials, p, level)?;
    Ok((lo..=hi).contains(&successes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson goodness of fit of observed counts to category probabilities.
/// Categories with zero probability must be empty and are left out.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() {
        return Err(Error::param("observed and expected differ in length"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::param("no observations"));
    }
    let mut stat = 0.0;
    let mut cats = 0u64;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Ok(ChiSquareTest {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cats += 1;
    }
    if cats < 2 {
        return Err(Error::param("need at least two categories"));
    }
    let dof = cats - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::param(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_is_central_and_exact() {
        let (lo, hi) = binomial_interval(10_000, 0.5, 0.99).unwrap();
        assert!(lo < 5000 && hi > 5000);
        assert!((hi - 5000).abs_diff(5000 - lo) <= 1);
        // normal approximation: 2.576 * 50 = 128.8
        assert!((127..=131).contains(&(hi - 5000)));
        assert_eq!(binomial_interval(100, 1.0, 0.99).unwrap(), (100, 100));
        let (lo, hi) = binomial_interval(10_000, 1.0 - 1e-9, 0.99).unwrap();
        assert_eq!((lo, hi), (10_000, 10_000));
    }

    #[test]
    fn chi_square_detects_bias() {
        let fair = chi_square_gof(&[1010, 990, 1000], &[1.0 / 3.0; 3]).unwrap();
        assert_eq!(fair.dof, 2);
        assert!(fair.p_value > 0.5);
        let biased = chi_square_gof(&[1300, 850, 850], &[1.0 / 3.0; 3]).unwrap();
        assert!(biased.p_value < 1e-6);
        let off_support = chi_square_gof(&[5, 5, 1], &[0.5, 0.5, 0.0]).unwrap();
        assert_eq!(off_support.p_value, 0.0);
    }
}
