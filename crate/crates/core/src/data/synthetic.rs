use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::fixtures::SYNTHETIC_ATTRIBUTE;
use crate::error::{Error, Result};

/// Binned-normal single-column generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub seed: u64,
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    /// Populated bin labels, e.g. `1..=51`.
    pub bins: RangeInclusive<u32>,
    /// Domain is `1..=domain_size`; labels past the last bin stay empty.
    pub domain_size: u32,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 600_000,
            mean: 25.0,
            stddev: 5.0,
            bins: 1..=51,
            domain_size: 107,
        }
    }
}

/// Counts per domain value (index 0 is label 1).
pub fn synthetic_counts(p: &SyntheticParams) -> Result<Vec<u64>> {
    if p.n == 0 {
        return Err(Error::param("synthetic dataset needs n >= 1"));
    }
    let (lo, hi) = (*p.bins.start(), *p.bins.end());
    if lo == 0 || lo > hi {
        return Err(Error::param(format!("bad bin range {lo}..={hi}")));
    }
    if p.domain_size < hi {
        return Err(Error::param(format!(
            "domain size {} is smaller than the last bin label {hi}",
            p.domain_size
        )));
    }
    let normal = Normal::new(p.mean, p.stddev)
        .map_err(|e| Error::param(format!("normal({}, {}): {e}", p.mean, p.stddev)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut counts = vec![0u64; p.domain_size as usize];
    for _ in 0..p.n {
        // f64::round is half-away-from-zero.
        let bin = normal
            .sample(&mut rng)
            .round()
            .clamp(f64::from(lo), f64::from(hi)) as u32;
        counts[(bin - 1) as usize] += 1;
    }
    Ok(counts)
}

/// Samples `n` normal draws, rounds each to the nearest bin (clamping the
/// tails into the end bins) and returns the single-attribute dataset.
pub fn generate_synthetic(p: &SyntheticParams) -> Result<Dataset> {
    let counts = synthetic_counts(p)?;
    let labels = (1..=p.domain_size).map(|v| v.to_string()).collect();
    Dataset::from_counts(SYNTHETIC_ATTRIBUTE, labels, &counts)
}
