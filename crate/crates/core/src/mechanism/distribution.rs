use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on the sum-to-one and zero-mean constraints.
pub const PMF_TOLERANCE: f64 = 1e-12;

/// A zero-mean probability mass function on a finite set of integers.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDistribution {
    support: Vec<i64>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    /// `Some(r)` for the discrete uniform law on `-r..=r`, sampled exactly.
    uniform_radius: Option<i64>,
}

impl NoiseDistribution {
    /// Discrete uniform on the integers in `[-r, r]`.
    pub fn uniform(r: u32) -> Self {
        let r = i64::from(r);
        let width = (2 * r + 1) as f64;
        let support: Vec<i64> = (-r..=r).collect();
        let pmf = vec![1.0 / width; support.len()];
        let cdf = (1..=support.len()).map(|i| i as f64 / width).collect();
        Self {
            support,
            pmf,
            cdf,
            uniform_radius: Some(r),
        }
    }

    /// Point mass at zero.
    pub fn degenerate() -> Self {
        Self::uniform(0)
    }

    /// Validates and wraps an arbitrary pmf. Zero-probability points are kept.
    pub fn from_pmf(support: Vec<i64>, pmf: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != pmf.len() {
            return Err(Error::param(
                "support and pmf must be non-empty and equal length",
            ));
        }
        let mut pairs: Vec<(i64, f64)> = support.into_iter().zip(pmf).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("support points must be distinct"));
        }
        if pairs.iter().any(|p| !p.1.is_finite() || p.1 < 0.0) {
            return Err(Error::param(
                "probabilities must be finite and non-negative",
            ));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::param(format!("probabilities sum to {total}, not 1")));
        }
        let mean: f64 = pairs.iter().map(|p| p.0 as f64 * p.1).sum();
        if mean.abs() > PMF_TOLERANCE {
            return Err(Error::param(format!("distribution has mean {mean}, not 0")));
        }
        let (support, pmf): (Vec<i64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self {
            support,
            pmf,
            cdf,
            uniform_radius: None,
        })
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, e: i64) -> f64 {
        self.support.binary_search(&e).map_or(0.0, |i| self.pmf[i])
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_radius.is_some()
    }

    /// Largest absolute perturbation with non-zero probability.
    pub fn max_abs(&self) -> i64 {
        self.support
            .iter()
            .zip(&self.pmf)
            .filter(|(_, &p)| p > 0.0)
            .map(|(e, _)| e.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.pmf)
            .map(|(&e, p)| e as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.pmf)
            .map(|(&e, p)| (e as f64 - m).powi(2) * p)
            .sum()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .pmf
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    /// Uniform laws are sampled exactly; anything else by inverse CDF on a
    /// 64-bit uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if let Some(r) = self.uniform_radius {
            return rng.random_range(-r..=r);
        }
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let i = self.cdf.partition_point(|&c| c <= u);
        self.support[i.min(self.support.len() - 1)]
    }
}
