//! Small built-in datasets used by examples, tests and the experiment harness.

use crate::data::dataset::Dataset;
use crate::data::schema::{Attribute, Schema};
use crate::error::Result;

/// The six-person Suburb/Age/Gender toy table.
///
/// Age has five values even though only four occur.
pub fn toy_table() -> Dataset {
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let schema = Schema::new(vec![
        Attribute::new(
            "Suburb",
            labels(&["Darlinghurst", "Newtown", "Redfern", "Surry Hills"]),
        )
        .unwrap(),
        Attribute::new(
            "Age",
            labels(&["20-29", "30-39", "40-49", "50-59", "70-79"]),
        )
        .unwrap(),
        Attribute::new("Gender", labels(&["M", "F"])).unwrap(),
    ])
    .unwrap();
    let rows = [
        ["Redfern", "20-29", "M"],
        ["Redfern", "20-29", "M"],
        ["Newtown", "30-39", "F"],
        ["Redfern", "20-29", "F"],
        ["Surry Hills", "40-49", "M"],
        ["Darlinghurst", "70-79", "F"],
    ];
    let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
    Dataset::from_rows(schema, &rows).unwrap()
}

/// Name of the single attribute in the synthetic datasets.
pub const SYNTHETIC_ATTRIBUTE: &str = "target";

const SYNTHETIC_POPULATED: [u64; 51] = [
    1, 3, 6, 12, 33, 53, 114, 199, 372, 677, 1075, 1837, 2884, 4388, 6496, 9136, 12694, 16893,
    21513, 26566, 31854, 36741, 40268, 43426, 44865, 44812, 43054, 40259, 35698, 31534, 26103,
    20953, 16539, 12430, 8977, 6297, 4283, 2715, 1775, 1085, 614, 377, 196, 93, 53, 24, 14, 3, 4,
    1, 1,
];

/// Per-value counts of the 107-value synthetic target column (values 1..=107;
/// 52..=107 are empty). Sums to 600,000.
pub fn synthetic_fixture_counts() -> Vec<u64> {
    let mut counts = SYNTHETIC_POPULATED.to_vec();
    counts.resize(107, 0);
    counts
}

pub fn synthetic_fixture() -> Result<Dataset> {
    let counts = synthetic_fixture_counts();
    let labels = (1..=counts.len()).map(|v| v.to_string()).collect();
    Dataset::from_counts(SYNTHETIC_ATTRIBUTE, labels, &counts)
}

/// Name of the attribute in the census-style age datasets.
pub const AGE_ATTRIBUTE: &str = "age";

/// Ages 10..=120: the observed ages 17..=88 and 90 plus zero-count padding.
pub const AGE_DOMAIN: std::ops::RangeInclusive<u32> = 10..=120;

/// Padding ages that never occur in the census extract.
pub fn age_padding() -> Vec<u32> {
    (10..=16).chain([89]).chain(91..=120).collect()
}

const AGE_COUNTS: [(u32, u64); 73] = [
    (17, 395),
    (18, 550),
    (19, 712),
    (20, 753),
    (21, 720),
    (22, 765),
    (23, 877),
    (24, 798),
    (25, 841),
    (26, 785),
    (27, 835),
    (28, 867),
    (29, 813),
    (30, 861),
    (31, 888),
    (32, 828),
    (33, 875),
    (34, 886),
    (35, 876),
    (36, 898),
    (37, 858),
    (38, 827),
    (39, 816),
    (40, 794),
    (41, 808),
    (42, 780),
    (43, 770),
    (44, 724),
    (45, 734),
    (46, 737),
    (47, 708),
    (48, 543),
    (49, 577),
    (50, 602),
    (51, 595),
    (52, 478),
    (53, 464),
    (54, 415),
    (55, 419),
    (56, 366),
    (57, 358),
    (58, 366),
    (59, 355),
    (60, 312),
    (61, 300),
    (62, 258),
    (63, 230),
    (64, 208),
    (65, 178),
    (66, 150),
    (67, 151),
    (68, 120),
    (69, 108),
    (70, 89),
    (71, 72),
    (72, 67),
    (73, 64),
    (74, 51),
    (75, 45),
    (76, 46),
    (77, 29),
    (78, 23),
    (79, 22),
    (80, 22),
    (81, 20),
    (82, 12),
    (83, 6),
    (84, 10),
    (85, 3),
    (86, 1),
    (87, 1),
    (88, 3),
    (90, 43),
];

/// Stand-in for the census age column: 32,561 people over the 111-value age
/// domain, with 38 empty values, 4 in 1..=4, 16 in 5..=100 and 53 above 100.
pub fn age_standin_counts() -> Vec<u64> {
    let mut counts = vec![0u64; AGE_DOMAIN.clone().count()];
    for (age, c) in AGE_COUNTS {
        counts[(age - AGE_DOMAIN.start()) as usize] = c;
    }
    counts
}

pub fn age_standin() -> Result<Dataset> {
    let labels = AGE_DOMAIN.map(|a| a.to_string()).collect();
    Dataset::from_counts(AGE_ATTRIBUTE, labels, &age_standin_counts())
}

/// Two-attribute table for the perturbation finder: `B` has `m` values
/// `b0..`, `G` has `x` and `y`, and every `(B, G)` cell holds
/// `base + b + 3g` rows, so no sub-query is suppressed when `s < base`
/// and no two probes `B = b` share a count.
pub fn probe_table(m: usize, base: u32) -> Result<Dataset> {
    let schema = Schema::new(vec![
        Attribute::new("B", (0..m).map(|i| format!("b{i}")).collect())?,
        Attribute::new("G", vec!["x".into(), "y".into()])?,
    ])?;
    let (mut cb, mut cg) = (Vec::new(), Vec::new());
    for b in 0..m as u32 {
        for g in 0..2u32 {
            for _ in 0..base + b + 3 * g {
                cb.push(b);
                cg.push(g);
            }
        }
    }
    Dataset::from_columns(schema, vec![cb, cg])
}
