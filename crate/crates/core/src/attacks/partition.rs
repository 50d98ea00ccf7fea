use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ValueId;
use crate::error::{Error, Result};

/// Largest value set we will enumerate partitions of.
pub const MAX_PARTITION_SET: usize = 30;

/// An unordered split of a value set into two disjoint, non-empty sides.
#[derive(Clone, Debug, Eq, Serialize)]
pub struct TwoPartition {
    left: Vec<ValueId>,
    right: Vec<ValueId>,
}

impl TwoPartition {
    pub fn new(mut left: Vec<ValueId>, mut right: Vec<ValueId>) -> Result<Self> {
        left.sort_unstable();
        right.sort_unstable();
        if left.is_empty() || right.is_empty() {
            return Err(Error::param(
                "both sides of a two-partition must be non-empty",
            ));
        }
        if left.windows(2).any(|w| w[0] == w[1]) || right.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("repeated value inside a two-partition side"));
        }
        if left.iter().any(|v| right.binary_search(v).is_ok()) {
            return Err(Error::param("two-partition sides overlap"));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &[ValueId] {
        &self.left
    }

    pub fn right(&self) -> &[ValueId] {
        &self.right
    }

    pub fn sides(&self) -> [&[ValueId]; 2] {
        [&self.left, &self.right]
    }

    /// Every value covered, sorted.
    pub fn union(&self) -> Vec<ValueId> {
        let mut all: Vec<ValueId> = self.left.iter().chain(&self.right).copied().collect();
        all.sort_unstable();
        all
    }

    fn ordered(&self) -> (&[ValueId], &[ValueId]) {
        if self.left <= self.right {
            (&self.left, &self.right)
        } else {
            (&self.right, &self.left)
        }
    }
}

impl PartialEq for TwoPartition {
    fn eq(&self, other: &Self) -> bool {
        self.ordered() == other.ordered()
    }
}

impl Hash for TwoPartition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ordered().hash(state);
    }
}

fn check_set(values: &[ValueId], what: &str) -> Result<()> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param(format!("{what} contains a repeated value")));
    }
    if values.len() > MAX_PARTITION_SET {
        return Err(Error::param(format!(
            "{what} has {} values; at most {MAX_PARTITION_SET} are supported",
            values.len()
        )));
    }
    Ok(())
}

/// Number of two-partitions of an `m`-element set, `2^(m-1) - 1`.
pub fn two_partition_count(m: usize) -> u64 {
    if m < 2 {
        0
    } else {
        (1u64 << (m - 1)) - 1
    }
}

/// An indexed family of two-partitions, generated on demand.
///
/// Partition `i` splits `core` by the mask `i + 1` over its first
/// `|core| - 1` positions (set bits go left, so the last core value is always
/// on the right), then adds the pinned values and the floating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionFamily {
    core: Vec<ValueId>,
    left_pin: Vec<ValueId>,
    right_pin: Vec<ValueId>,
    floating: Vec<ValueId>,
}

impl PartitionFamily {
    /// All two-partitions of `values`.
    pub fn of(values: &[ValueId]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param(format!(
                "two-partitions need at least 2 values, got {}",
                values.len()
            )));
        }
        check_set(values, "value set")?;
        Ok(Self {
            core: values.to_vec(),
            left_pin: Vec::new(),
            right_pin: Vec::new(),
            floating: Vec::new(),
        })
    }

    /// See [`build_partitions_with_zero_set`].
    pub fn with_zero_set(
        non_zero: &[ValueId],
        zero: &[ValueId],
        placement: ZeroSetPlacement,
    ) -> Result<Self> {
        let mut all = non_zero.to_vec();
        all.extend_from_slice(zero);
        check_set(&all, "partitioned set")?;
        match placement {
            ZeroSetPlacement::Alternate => {
                if non_zero.len() < 2 {
                    return Err(Error::param(format!(
                        "need at least 2 values with non-zero answers, got {}",
                        non_zero.len()
                    )));
                }
                Ok(Self {
                    floating: zero.to_vec(),
                    ..Self::of(non_zero)?
                })
            }
            ZeroSetPlacement::PinnedPair => {
                let &[a1, a2] = non_zero else {
                    return Err(Error::param(format!(
                        "pinned placement needs exactly 2 non-zero values, got {}",
                        non_zero.len()
                    )));
                };
                Ok(Self {
                    left_pin: vec![a1],
                    right_pin: vec![a2],
                    ..Self::of(zero)?
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        two_partition_count(self.core.len()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the two sides of partition `i` into the buffers.
    pub fn fill(&self, i: usize, left: &mut Vec<ValueId>, right: &mut Vec<ValueId>) {
        assert!(i < self.len(), "partition index {i} out of range");
        left.clear();
        right.clear();
        let mask = i as u64 + 1;
        let last = self.core.len() - 1;
        for (j, &v) in self.core.iter().enumerate() {
            if j < last && mask >> j & 1 == 1 {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        left.extend_from_slice(&self.left_pin);
        right.extend_from_slice(&self.right_pin);
        if i.is_multiple_of(2) {
            left.extend_from_slice(&self.floating);
        } else {
            right.extend_from_slice(&self.floating);
        }
    }

    pub fn get(&self, i: usize) -> TwoPartition {
        let (mut l, mut r) = (Vec::new(), Vec::new());
        self.fill(i, &mut l, &mut r);
        TwoPartition::new(l, r).expect("family members are valid two-partitions")
    }

    pub fn iter(&self) -> impl Iterator<Item = TwoPartition> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}

/// All two-partitions of `values`, in canonical order.
///
/// Position `i` of `values` is bit `i` of a subset's encoding. Masks run over
/// `1..2^(m-1)` on the first `m - 1` positions and give the left side, so the
/// last value is always on the right and the left side has the smaller
/// encoding.
pub fn enumerate_two_partitions(values: &[ValueId]) -> Result<Vec<TwoPartition>> {
    Ok(PartitionFamily::of(values)?.iter().collect())
}

/// Where zero-output values go in [`build_partitions_with_zero_set`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroSetPlacement {
    /// Partition the non-zero values; the whole zero set joins the left side
    /// of even-indexed partitions and the right side of odd-indexed ones.
    #[default]
    Alternate,
    /// Exactly two non-zero values `[a1, a2]`: partition the zero set and pin
    /// `a1` to the left side, `a2` to the right. The zero-output values must
    /// have non-empty contributors (see [`confirm_nonempty`](super::confirm_nonempty)).
    PinnedPair,
}

/// Two-partitions of `non_zero ∪ zero` whose sides all have fresh noise,
/// given that every value in `non_zero` has a non-zero answer.
pub fn build_partitions_with_zero_set(
    non_zero: &[ValueId],
    zero: &[ValueId],
    placement: ZeroSetPlacement,
) -> Result<Vec<TwoPartition>> {
    Ok(PartitionFamily::with_zero_set(non_zero, zero, placement)?
        .iter()
        .collect())
}

/// Which of the available partitions a run uses when it needs only `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PartitionSelection {
    /// The first `k` in canonical order.
    #[default]
    First,
    /// `k` drawn uniformly without replacement.
    Random { seed: u64 },
}

impl PartitionSelection {
    /// Indices into a list of `available` partitions. `stream` separates the
    /// random draws of different runs sharing one seed.
    pub fn pick(&self, available: usize, k: usize, stream: u64) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if k > available {
            return Err(Error::param(format!(
                "k = {k} exceeds the {available} available two-partitions"
            )));
        }
        Ok(match *self {
            PartitionSelection::First => (0..k).collect(),
            PartitionSelection::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                rand::seq::index::sample(&mut rng, available, k).into_vec()
            }
        })
    }
}
