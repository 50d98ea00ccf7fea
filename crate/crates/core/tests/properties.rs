use std::collections::BTreeSet;

use bounded_noise::attacks::PartitionFamily;
use bounded_noise::data::{evaluate_query, AttrId, Attribute, Dataset, Query, Schema, ValueId};
use bounded_noise::mechanism::{MechanismParams, Oracle, Session};
use proptest::prelude::*;

const DOMAINS: [usize; 3] = [4, 5, 3];

fn dataset(rows: &[[u32; 3]]) -> Dataset {
    let schema = Schema::new(
        DOMAINS
            .iter()
            .enumerate()
            .map(|(a, &n)| {
                Attribute::new(format!("a{a}"), (0..n).map(|v| format!("v{v}")).collect()).unwrap()
            })
            .collect(),
    )
    .unwrap();
    let columns = (0..3)
        .map(|a| rows.iter().map(|r| r[a]).collect())
        .collect();
    Dataset::from_columns(schema, columns).unwrap()
}

fn rows() -> impl Strategy<Value = Vec<[u32; 3]>> {
    // skewed so that some cells are large and some empty
    prop::collection::vec(
        (0u32..4, 0u32..5, 0u32..3).prop_map(|(a, b, c)| [a, b.min(a + 1), c]),
        1..120,
    )
}

/// Each attribute is left free or restricted to a non-empty value subset.
fn query() -> impl Strategy<Value = [Option<Vec<u32>>; 3]> {
    let clause = |n: usize| {
        prop::option::of(prop::sample::subsequence(
            (0..n as u32).collect::<Vec<_>>(),
            1..=n,
        ))
    };
    (clause(DOMAINS[0]), clause(DOMAINS[1]), clause(DOMAINS[2])).prop_map(|(a, b, c)| [a, b, c])
}

fn build(clauses: &[Option<Vec<u32>>; 3]) -> Query {
    let mut q = Query::empty();
    for (a, c) in clauses.iter().enumerate() {
        if let Some(vals) = c {
            let ids: Vec<ValueId> = vals.iter().map(|&v| ValueId(v)).collect();
            q = q.with(AttrId(a as u16), &ids).unwrap();
        }
    }
    q
}

/// A structurally different query with the same contributors: every
/// attribute is restricted to exactly the values its contributors take.
fn tightened(d: &Dataset, q: &Query) -> Query {
    let (_, c) = evaluate_query(d, q).unwrap();
    if c.is_empty() {
        return q.clone();
    }
    let mut out = Query::empty();
    for a in 0..3u16 {
        let attr = AttrId(a);
        let vals: BTreeSet<ValueId> = c
            .members(d)
            .iter()
            .map(|&row| d.value(row as usize - 1, attr))
            .collect();
        let vals: Vec<ValueId> = vals.into_iter().collect();
        out = out.with(attr, &vals).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn answers_respect_suppression_and_noise_bounds(
        rows in rows(),
        queries in prop::collection::vec(query(), 1..40),
        r in 1u32..6,
        extra in 0u64..4,
        seed in any::<u64>(),
    ) {
        let d = dataset(&rows);
        let s = u64::from(r) + extra;
        let mut session = Session::new(&d, MechanismParams::uniform(r, s, seed).unwrap()).unwrap();
        for clauses in &queries {
            let q = build(clauses);
            let (n, contributors) = evaluate_query(&d, &q).unwrap();
            let a = session.answer(&q).unwrap();
            prop_assert!(a as i64 >= n as i64 - s as i64);
            prop_assert!(a <= n + u64::from(r));
            if a > 0 {
                prop_assert!(!contributors.is_empty());
                prop_assert!(n > s);
            }
            if n <= s {
                prop_assert_eq!(a, 0);
            }
        }
    }

    #[test]
    fn equal_contributors_get_equal_answers(
        rows in rows(),
        queries in prop::collection::vec(query(), 1..30),
        seed in any::<u64>(),
    ) {
        let d = dataset(&rows);
        let mut session = Session::new(&d, MechanismParams::uniform(3, 3, seed).unwrap()).unwrap();
        for clauses in &queries {
            let q = build(clauses);
            let q2 = tightened(&d, &q);
            let first = session.answer(&q).unwrap();
            prop_assert_eq!(session.answer(&q2).unwrap(), first);
            prop_assert_eq!(session.answer(&q).unwrap(), first);
        }
    }

    #[test]
    fn two_partitions_split_counts_and_contributors(
        rows in rows(),
        b in query(),
        attr in 0u16..3,
        mask in any::<u64>(),
    ) {
        let d = dataset(&rows);
        let attr = AttrId(attr);
        let mut b = b;
        b[attr.0 as usize] = None;
        let b = build(&b);
        let values: Vec<ValueId> = d.schema().attribute(attr).unwrap().ids().collect();
        let family = PartitionFamily::of(&values).unwrap();
        let p = family.get(mask as usize % family.len());
        let whole = b.clone().with(attr, &values).unwrap();
        let (n, c) = evaluate_query(&d, &whole).unwrap();
        let (n1, c1) = evaluate_query(&d, &b.clone().with(attr, p.left()).unwrap()).unwrap();
        let (n2, c2) = evaluate_query(&d, &b.clone().with(attr, p.right()).unwrap()).unwrap();
        prop_assert_eq!(n1 + n2, n);
        let (m, m1, m2) = (c.members(&d), c1.members(&d), c2.members(&d));
        let mut joined: Vec<u32> = m1.iter().chain(&m2).copied().collect();
        joined.sort_unstable();
        prop_assert_eq!(joined, m);
        prop_assert!(m1.iter().all(|x| m2.binary_search(x).is_err()));
    }

    #[test]
    fn conjunction_intersects_and_disjunction_unites(
        rows in rows(),
        q1 in query(),
        q2 in query(),
        attr in 0u16..3,
        v1 in 0u32..3,
        v2 in 0u32..3,
    ) {
        let d = dataset(&rows);
        let (a, b) = (build(&q1), build(&q2));
        let (_, ca) = evaluate_query(&d, &a).unwrap();
        let (_, cb) = evaluate_query(&d, &b).unwrap();
        let (_, cab) = evaluate_query(&d, &a.and(&b)).unwrap();
        let sa: BTreeSet<u32> = ca.members(&d).into_iter().collect();
        let sb: BTreeSet<u32> = cb.members(&d).into_iter().collect();
        let expect: Vec<u32> = sa.intersection(&sb).copied().collect();
        prop_assert_eq!(cab.members(&d), expect);

        let attr = AttrId(attr);
        let (x, y) = (ValueId(v1), ValueId(v2));
        let one = |vals: &[ValueId]| evaluate_query(&d, &Query::single(attr, vals).unwrap()).unwrap().1.members(&d);
        let union: BTreeSet<u32> = one(&[x]).into_iter().chain(one(&[y])).collect();
        let mut both = vec![x, y];
        both.dedup();
        prop_assert_eq!(one(&both), union.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn partition_sides_have_distinct_contributors_when_all_values_occur(
        counts in prop::collection::vec(1u64..6, 2..8),
    ) {
        let labels = (0..counts.len()).map(|i| i.to_string()).collect();
        let d = Dataset::from_counts("a", labels, &counts).unwrap();
        let values: Vec<ValueId> = d.schema().attributes()[0].ids().collect();
        let family = PartitionFamily::of(&values).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in family.iter() {
            for side in p.sides() {
                let (_, c) = evaluate_query(&d, &Query::single(AttrId(0), side).unwrap()).unwrap();
                prop_assert!(seen.insert(c.members(&d)));
            }
        }
        prop_assert_eq!(seen.len(), 2 * family.len());
    }
}

#[test]
fn analyser_answers_are_sticky_across_calls() {
    let d = dataset(
        &[
            [0, 0, 0],
            [0, 1, 1],
            [1, 1, 2],
            [2, 2, 0],
            [3, 4, 1],
            [0, 0, 2],
        ]
        .repeat(4),
    );
    let mut session = Session::new(&d, MechanismParams::uniform(1, 1, 5).unwrap()).unwrap();
    let b = Query::single(AttrId(2), &[ValueId(0), ValueId(1)]).unwrap();
    let first = session
        .analyse(&b, AttrId(0), &[ValueId(0), ValueId(1)])
        .unwrap();
    let again = session
        .analyse(&b, AttrId(0), &[ValueId(1), ValueId(0)])
        .unwrap();
    assert_eq!(first.total, again.total);
    assert_eq!(
        first.per_value,
        again.per_value.iter().rev().copied().collect::<Vec<_>>()
    );
}
