use serde::{Deserialize, Serialize};

use crate::attacks::partition::{
    two_partition_count, PartitionFamily, PartitionSelection, TwoPartition, ZeroSetPlacement,
};
use crate::data::{AttrId, Query, ValueId};
use crate::error::{Error, Result};
use crate::mechanism::Oracle;

/// Tie-breaking for `⌊z⌉` when the average lands exactly on a half.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingMode {
    #[default]
    HalfAwayFromZero,
    HalfEven,
}

impl RoundingMode {
    /// `sum / k` rounded to the nearest integer, in exact arithmetic.
    pub fn round(self, sum: i64, k: u64) -> i64 {
        assert!(k > 0);
        let k = k as i64;
        let (q, rem) = (sum.div_euclid(k), sum.rem_euclid(k));
        // sum/k = q + rem/k with 0 <= rem < k
        match (2 * rem).cmp(&k) {
            std::cmp::Ordering::Less => q,
            std::cmp::Ordering::Greater => q + 1,
            std::cmp::Ordering::Equal => match self {
                RoundingMode::HalfAwayFromZero if q >= 0 => q + 1,
                RoundingMode::HalfAwayFromZero => q,
                RoundingMode::HalfEven if q % 2 == 0 => q,
                RoundingMode::HalfEven => q + 1,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoverConfig {
    #[serde(default)]
    pub rounding: RoundingMode,
    #[serde(default)]
    pub selection: PartitionSelection,
}

/// Anything that can hand out two-partitions by index.
pub trait Partitions {
    fn count(&self) -> usize;
    fn fill(&self, i: usize, left: &mut Vec<ValueId>, right: &mut Vec<ValueId>);
}

impl Partitions for [TwoPartition] {
    fn count(&self) -> usize {
        self.len()
    }

    fn fill(&self, i: usize, left: &mut Vec<ValueId>, right: &mut Vec<ValueId>) {
        left.clear();
        left.extend_from_slice(self[i].left());
        right.clear();
        right.extend_from_slice(self[i].right());
    }
}

impl Partitions for PartitionFamily {
    fn count(&self) -> usize {
        self.len()
    }

    fn fill(&self, i: usize, left: &mut Vec<ValueId>, right: &mut Vec<ValueId>) {
        PartitionFamily::fill(self, i, left, right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RemoverOutcome {
    /// `⌊sum / k⌉`
    pub estimate: i64,
    /// Sum of all `2k` total-query answers.
    pub sum: u64,
    pub k: u64,
    /// Mechanism queries spent.
    pub queries: u64,
}

impl RemoverOutcome {
    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.k as f64
    }
}

/// Averages `α_{A1} + α_{A2}` over `k` two-partitions of the target set and
/// rounds. Partitions are taken per `config.selection`.
pub fn noise_remover<O, P>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    partitions: &P,
    k: usize,
    config: &RemoverConfig,
) -> Result<RemoverOutcome>
where
    O: Oracle + ?Sized,
    P: Partitions + ?Sized,
{
    run_remover(oracle, b, attr, partitions, k, config, 0)
}

fn run_remover<O, P>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    partitions: &P,
    k: usize,
    config: &RemoverConfig,
    stream: u64,
) -> Result<RemoverOutcome>
where
    O: Oracle + ?Sized,
    P: Partitions + ?Sized,
{
    let picks = config.selection.pick(partitions.count(), k, stream)?;
    let before = oracle.queries_answered();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut sum = 0u64;
    for i in picks {
        partitions.fill(i, &mut left, &mut right);
        sum += oracle.analyse(b, attr, &left)?.total;
        sum += oracle.analyse(b, attr, &right)?.total;
    }
    Ok(RemoverOutcome {
        estimate: config.rounding.round(sum as i64, k as u64),
        sum,
        k: k as u64,
        queries: oracle.queries_answered() - before,
    })
}

/// Per-value analyser answers for `values`, one analyser call.
fn survey<O: Oracle + ?Sized>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    values: &[ValueId],
) -> Result<Vec<u64>> {
    Ok(oracle.analyse(b, attr, values)?.per_value)
}

/// Partitions of `base ∪ {target}`. A target with a non-zero answer is
/// placed last, so it always sits on the right; a zero-output target rides
/// along with the base partitions on alternating sides.
fn extension_family(
    base: &[ValueId],
    target: ValueId,
    zero_output: bool,
) -> Result<PartitionFamily> {
    if zero_output {
        PartitionFamily::with_zero_set(base, &[target], ZeroSetPlacement::Alternate)
    } else {
        let mut all = base.to_vec();
        all.push(target);
        PartitionFamily::of(&all)
    }
}

fn check_budget(m: usize, k: usize, what: &str) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if (k as u64) > two_partition_count(m) {
        return Err(Error::param(format!(
            "{what} has {m} values, giving {} two-partitions; k = {k} is too many",
            two_partition_count(m)
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TargetOutcome {
    pub estimate: u64,
    /// Difference before clamping at zero.
    pub raw: i64,
    pub base: RemoverOutcome,
    pub extended: RemoverOutcome,
}

/// Recovers the count of `b ∧ target` as `n'' − n'`, where `n'` is the noise
/// remover's estimate over `base` and `n''` over `base ∪ {target}`.
pub fn recover_attribute_count<O: Oracle + ?Sized>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    target: ValueId,
    base: &[ValueId],
    k: usize,
    config: &RemoverConfig,
) -> Result<TargetOutcome> {
    if base.contains(&target) {
        return Err(Error::param(
            "target lies in the base set; reconstruct_histogram handles base values",
        ));
    }
    check_budget(base.len(), k, "the base set")?;
    let base_family = PartitionFamily::of(base)?;
    let n1 = run_remover(oracle, b, attr, &base_family, k, config, 0)?;
    let zero = survey(oracle, b, attr, &[target])?[0] == 0;
    let family = extension_family(base, target, zero)?;
    let n2 = run_remover(oracle, b, attr, &family, k, config, u64::from(target.0) + 1)?;
    let raw = n2.estimate - n1.estimate;
    Ok(TargetOutcome {
        estimate: raw.max(0) as u64,
        raw,
        base: n1,
        extended: n2,
    })
}

/// How the histogram attack chooses its base set `A'`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseChoice {
    /// The values with the largest non-zero answers. `size` defaults to the
    /// smallest set that supports both `k` and the base run's `base_k`.
    #[default]
    Auto,
    Largest {
        size: usize,
    },
    Explicit {
        values: Vec<ValueId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    /// Partitions per value.
    pub k: usize,
    /// Partitions for the single base-set run; defaults to `k`.
    #[serde(default)]
    pub base_k: Option<usize>,
    #[serde(default)]
    pub base: BaseChoice,
    #[serde(default)]
    pub remover: RemoverConfig,
}

impl HistogramConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            base_k: None,
            base: BaseChoice::Auto,
            remover: RemoverConfig::default(),
        }
    }

    pub fn base_k(&self) -> usize {
        self.base_k.unwrap_or(self.k)
    }

    /// Smallest base size `m'` with `2^(m'-2) - 1 >= k` (base values are
    /// recovered from `m' - 1` values) and `2^(m'-1) - 1 >= base_k`.
    pub fn min_base_size(&self) -> usize {
        (2..=super::MAX_PARTITION_SET)
            .find(|&m| {
                two_partition_count(m - 1) >= self.k as u64
                    && two_partition_count(m) >= self.base_k() as u64
            })
            .unwrap_or(super::MAX_PARTITION_SET + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValueEstimate {
    pub value: ValueId,
    /// Clamped at zero.
    pub estimate: u64,
    pub raw: i64,
    /// The value's own analyser answer during the survey.
    pub observed: u64,
    pub in_base: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReconstructionResult {
    pub attr: AttrId,
    pub k: usize,
    pub base_k: usize,
    pub base: Vec<ValueId>,
    pub base_estimate: i64,
    pub values: Vec<ValueEstimate>,
    /// Mechanism queries spent, survey included.
    pub queries_used: u64,
}

impl ReconstructionResult {
    pub fn estimates(&self) -> Vec<u64> {
        self.values.iter().map(|v| v.estimate).collect()
    }

    /// Values whose raw estimate was negative.
    pub fn clamped(&self) -> Vec<ValueId> {
        self.values
            .iter()
            .filter(|v| v.raw < 0)
            .map(|v| v.value)
            .collect()
    }

    /// Queries the attack itself is charged with, `2k(m + 1)` when the base
    /// run also uses `k` partitions.
    pub fn nominal_queries(&self) -> u64 {
        2 * (self.base_k + self.k * self.values.len()) as u64
    }
}

/// Recovers the count of `b ∧ a` for every value `a` of `attr`.
///
/// One survey call finds which values have non-zero answers. The base set
/// `A'` is estimated once with `base_k` partitions; each other value comes
/// from `A' ∪ {a}` and each base value from `A' − {a}`, with `k` partitions
/// apiece. Negative differences are clamped to zero.
pub fn reconstruct_histogram<O: Oracle + ?Sized>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    config: &HistogramConfig,
) -> Result<ReconstructionResult> {
    let domain = oracle
        .schema()
        .attribute(attr)
        .ok_or_else(|| Error::Domain {
            clause: format!("{attr}"),
            reason: format!("unknown attribute {attr}"),
        })?
        .clone();
    let values: Vec<ValueId> = domain.ids().collect();
    let name = domain.name().to_string();
    let start = oracle.queries_answered();
    let observed = survey(oracle, b, attr, &values)?;

    let mut nonzero: Vec<(u64, ValueId)> = values
        .iter()
        .zip(&observed)
        .filter(|(_, &o)| o > 0)
        .map(|(&v, &o)| (o, v))
        .collect();
    nonzero.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let need = config.min_base_size();
    let mut base: Vec<ValueId> = match &config.base {
        BaseChoice::Auto | BaseChoice::Largest { .. } => {
            let size = match config.base {
                BaseChoice::Largest { size } => size,
                _ => need,
            };
            if nonzero.len() < size.max(need) {
                let largest = nonzero.len();
                return Err(Error::param(format!(
                    "no adequate base set for `{name}`: the largest subset with non-zero answers has {largest} values, \
                     supporting k <= {} and base_k <= {}, but k = {} and base_k = {} need {} values",
                    two_partition_count(largest.saturating_sub(1)),
                    two_partition_count(largest),
                    config.k,
                    config.base_k(),
                    size.max(need)
                )));
            }
            nonzero[..size].iter().map(|p| p.1).collect()
        }
        BaseChoice::Explicit { values: chosen } => {
            for v in chosen {
                let i = values
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| Error::Domain {
                        clause: format!("{name}=#{}", v.0),
                        reason: format!("value #{} is not in the domain of `{name}`", v.0),
                    })?;
                if observed[i] == 0 {
                    return Err(Error::param(format!(
                        "base value `{}` has a zero answer",
                        domain.label(*v).unwrap_or("?")
                    )));
                }
            }
            chosen.clone()
        }
    };
    base.sort_unstable();
    base.dedup();
    check_budget(base.len(), config.base_k(), "the base set")?;
    check_budget(base.len() - 1, config.k, "the base set minus one value")?;

    let cfg = &config.remover;
    let base_family = PartitionFamily::of(&base)?;
    let n1 = run_remover(oracle, b, attr, &base_family, config.base_k(), cfg, 0)?;

    let mut out = Vec::with_capacity(values.len());
    let mut rest = Vec::with_capacity(base.len());
    for (&v, &obs) in values.iter().zip(&observed) {
        let stream = u64::from(v.0) + 1;
        let in_base = base.binary_search(&v).is_ok();
        let raw = if in_base {
            rest.clear();
            rest.extend(base.iter().copied().filter(|&x| x != v));
            let family = PartitionFamily::of(&rest)?;
            n1.estimate - run_remover(oracle, b, attr, &family, config.k, cfg, stream)?.estimate
        } else {
            let family = extension_family(&base, v, obs == 0)?;
            run_remover(oracle, b, attr, &family, config.k, cfg, stream)?.estimate - n1.estimate
        };
        out.push(ValueEstimate {
            value: v,
            estimate: raw.max(0) as u64,
            raw,
            observed: obs,
            in_base,
        });
    }
    Ok(ReconstructionResult {
        attr,
        k: config.k,
        base_k: config.base_k(),
        base,
        base_estimate: n1.estimate,
        values: out,
        queries_used: oracle.queries_answered() - start,
    })
}

/// Checks that `candidate` has contributors under `b` even if its own answer
/// is suppressed: the answers to `b ∧ anchor` and `b ∧ (anchor ∨ candidate)`
/// can only differ when the contributor sets differ. A non-empty candidate
/// goes unnoticed with probability `Pr(E₁ = E₂)`.
pub fn confirm_nonempty<O: Oracle + ?Sized>(
    oracle: &mut O,
    b: &Query,
    attr: AttrId,
    anchor: ValueId,
    candidate: ValueId,
) -> Result<bool> {
    let alone = oracle.analyse(b, attr, &[anchor])?.total;
    let joined = oracle.analyse(b, attr, &[anchor, candidate])?.total;
    Ok(alone != joined)
}

/// Recovers `b ∧ target` by averaging over two-partitions of a different
/// attribute: each side `B'` is asked as `(b ∧ target) ∧ B'`. Useful when the
/// target's own attribute has too few values with non-zero answers.
#[allow(clippy::too_many_arguments)]
pub fn recover_via_other_attribute<O: Oracle + ?Sized>(
    oracle: &mut O,
    b: &Query,
    target_attr: AttrId,
    target: ValueId,
    other_attr: AttrId,
    other_values: &[ValueId],
    k: usize,
    config: &RemoverConfig,
) -> Result<RemoverOutcome> {
    if target_attr == other_attr {
        return Err(Error::param(
            "the partitioned attribute must differ from the target's",
        ));
    }
    let narrowed = b.clone().with(target_attr, &[target])?;
    let observed = survey(oracle, &narrowed, other_attr, other_values)?;
    let (nonzero, zero): (Vec<_>, Vec<_>) = other_values
        .iter()
        .zip(&observed)
        .partition(|(_, &o)| o > 0);
    let nonzero: Vec<ValueId> = nonzero.into_iter().map(|(&v, _)| v).collect();
    let zero: Vec<ValueId> = zero.into_iter().map(|(&v, _)| v).collect();
    let family = PartitionFamily::with_zero_set(&nonzero, &zero, ZeroSetPlacement::Alternate)?;
    let mut out = run_remover(oracle, &narrowed, other_attr, &family, k, config, 0)?;
    out.estimate = out.estimate.max(0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::RoundingMode::*;

    #[test]
    fn rounding_modes() {
        assert_eq!(HalfAwayFromZero.round(5, 2), 3);
        assert_eq!(HalfAwayFromZero.round(-5, 2), -3);
        assert_eq!(HalfAwayFromZero.round(7, 2), 4);
        assert_eq!(HalfEven.round(5, 2), 2);
        assert_eq!(HalfEven.round(7, 2), 4);
        assert_eq!(HalfEven.round(-5, 2), -2);
        assert_eq!(HalfAwayFromZero.round(1001, 1000), 1);
        assert_eq!(HalfAwayFromZero.round(1499, 1000), 1);
        assert_eq!(HalfAwayFromZero.round(-1499, 1000), -1);
        assert_eq!(HalfAwayFromZero.round(-1501, 1000), -2);
    }
}
