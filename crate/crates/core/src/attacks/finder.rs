use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{AttrId, Query, ValueId};
use crate::error::{Error, Result};
use crate::mechanism::Oracle;

/// How the finder obtains `z₁`, `z₂`, `z₃` for one probe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinderMode {
    /// Separate analyser calls on `{a1}`, `{a2}` and the whole of `b`.
    #[default]
    ThreeCalls,
    /// One analyser call on `{a1, a2}` returns all three answers.
    SingleCall,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProbeSelection {
    pub kept: Vec<Query>,
    /// Indices of candidates dropped because a sub-query came back 0.
    pub suppressed: Vec<usize>,
    /// Indices dropped because their answer repeated an earlier kept one.
    pub duplicates: Vec<usize>,
}

/// Screens candidate probes `b₁..b_M` for the finder: both `b ∧ a1` and
/// `b ∧ a2` must be answered non-zero, and no two kept probes may share an
/// answer to `b` (distinct answers imply distinct contributors).
pub fn select_probe_attributes<O: Oracle + ?Sized>(
    oracle: &mut O,
    candidates: &[Query],
    attr: AttrId,
    pair: (ValueId, ValueId),
) -> Result<ProbeSelection> {
    check_pair(oracle, attr, pair)?;
    let mut out = ProbeSelection::default();
    let mut seen = HashSet::new();
    for (i, b) in candidates.iter().enumerate() {
        let ans = oracle.analyse(b, attr, &[pair.0, pair.1])?;
        if ans.per_value.contains(&0) {
            out.suppressed.push(i);
            continue;
        }
        let whole = oracle.answer(b)?;
        if seen.insert(whole) {
            out.kept.push(b.clone());
        } else {
            out.duplicates.push(i);
        }
    }
    Ok(out)
}

fn check_pair<O: Oracle + ?Sized>(
    oracle: &O,
    attr: AttrId,
    pair: (ValueId, ValueId),
) -> Result<()> {
    let domain = oracle
        .schema()
        .attribute(attr)
        .ok_or_else(|| Error::Domain {
            clause: format!("{attr}"),
            reason: format!("unknown attribute {attr}"),
        })?;
    if domain.len() < 2 {
        return Err(Error::param(format!(
            "attribute `{}` has fewer than 2 values",
            domain.name()
        )));
    }
    if pair.0 == pair.1 {
        return Err(Error::param("the pair must be two different values"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinderOutcome {
    pub r_guess: i64,
    pub z_min: i64,
    pub z_max: i64,
    pub probes: usize,
    /// Mechanism queries spent.
    pub queries: u64,
}

fn ceil_div3(z: i64) -> i64 {
    -((-z).div_euclid(3))
}

fn guess(z_min: i64, z_max: i64) -> i64 {
    ceil_div3(-z_min).max(ceil_div3(z_max))
}

/// Estimates the hidden perturbation parameter from `z = z₁ + z₂ − z₃` over
/// the probes: `max(⌈−z_min/3⌉, ⌈z_max/3⌉)`, so either tail can reveal `r`.
///
/// For `z₃` the finder needs the count of `b ∧ (a1 ∨ a2)`. When the attribute
/// has exactly two values that is `b` itself.
pub fn find_perturbation<O: Oracle + ?Sized>(
    oracle: &mut O,
    probes: &[Query],
    attr: AttrId,
    pair: (ValueId, ValueId),
    mode: FinderMode,
) -> Result<FinderOutcome> {
    if probes.is_empty() {
        return Err(Error::param(
            "the perturbation finder needs at least one probe",
        ));
    }
    check_pair(oracle, attr, pair)?;
    let binary = oracle
        .schema()
        .attribute(attr)
        .is_some_and(|a| a.len() == 2);
    let before = oracle.queries_answered();
    let (mut z_min, mut z_max) = (i64::MAX, i64::MIN);
    for b in probes {
        let (z1, z2, z3) = match mode {
            FinderMode::SingleCall => {
                let ans = oracle.analyse(b, attr, &[pair.0, pair.1])?;
                (ans.per_value[0], ans.per_value[1], ans.total)
            }
            FinderMode::ThreeCalls => {
                let z1 = oracle.analyse(b, attr, &[pair.0])?.per_value[0];
                let z2 = oracle.analyse(b, attr, &[pair.1])?.per_value[0];
                let z3 = if binary {
                    oracle.analyse(b, attr, &[])?.total
                } else {
                    oracle.analyse(b, attr, &[pair.0, pair.1])?.total
                };
                (z1, z2, z3)
            }
        };
        let z = z1 as i64 + z2 as i64 - z3 as i64;
        z_min = z_min.min(z);
        z_max = z_max.max(z);
    }
    Ok(FinderOutcome {
        r_guess: guess(z_min, z_max),
        z_min,
        z_max,
        probes: probes.len(),
        queries: oracle.queries_answered() - before,
    })
}

#[cfg(test)]
mod tests {
    use super::{ceil_div3, guess};

    #[test]
    fn ceiling_thirds() {
        assert_eq!(ceil_div3(6), 2);
        assert_eq!(ceil_div3(7), 3);
        assert_eq!(ceil_div3(-6), -2);
        assert_eq!(ceil_div3(-7), -2);
        assert_eq!(ceil_div3(0), 0);
    }

    #[test]
    fn either_tail_reveals_r() {
        // r = 5: anything beyond ±12 is extreme
        assert_eq!(guess(-13, 0), 5);
        assert_eq!(guess(-15, 12), 5);
        assert_eq!(guess(-2, 13), 5);
        assert_eq!(guess(-12, 12), 4);
    }
}
