//! Averaging attacks, driven only through the [`Oracle`](crate::mechanism::Oracle)
//! interface: the perturbation finder, the noise remover and the histogram
//! reconstruction built from it.

mod finder;
mod partition;
mod remover;

pub use finder::{
    find_perturbation, select_probe_attributes, FinderMode, FinderOutcome, ProbeSelection,
};
pub use partition::{
    build_partitions_with_zero_set, enumerate_two_partitions, two_partition_count, PartitionFamily,
    PartitionSelection, TwoPartition, ZeroSetPlacement, MAX_PARTITION_SET,
};
pub use remover::{
    confirm_nonempty, noise_remover, reconstruct_histogram, recover_attribute_count,
    recover_via_other_attribute, BaseChoice, HistogramConfig, Partitions, ReconstructionResult,
    RemoverConfig, RemoverOutcome, RoundingMode, TargetOutcome, ValueEstimate,
};

use serde::Serialize;

use crate::error::{Error, Result};

/// Query accounting for an attack run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AttackBudget {
    /// Two-partitions (noise remover) or probes (perturbation finder).
    pub k: u64,
    /// Mechanism queries charged.
    pub t: u64,
}

impl AttackBudget {
    /// `t = 2k`, with `k` limited by the `m` usable values.
    pub fn noise_remover(k: u64, m: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if k > two_partition_count(m) {
            return Err(Error::param(format!(
                "k = {k} exceeds the {} two-partitions of {m} values",
                two_partition_count(m)
            )));
        }
        Ok(Self { k, t: 2 * k })
    }

    /// `t = 3m`.
    pub fn perturbation_finder(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("the perturbation finder needs m >= 1"));
        }
        Ok(Self { k: m, t: 3 * m })
    }
}
