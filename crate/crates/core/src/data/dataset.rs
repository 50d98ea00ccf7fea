use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::data::query::Query;
use crate::data::schema::{AttrId, Attribute, Schema, ValueId};
use crate::error::{Error, Result};

/// 128-bit digest of a contributor set.
pub type Digest = u128;

/// Rows are grouped into cells: maximal groups of rows sharing the same value
/// tuple. No query in the language can separate two rows of one cell, so every
/// contributor set is a union of cells and the sorted list of its non-empty
/// cells is a canonical, exact encoding of the row set.
#[derive(Clone, Debug)]
struct CellIndex {
    width: usize,
    tuples: Vec<u32>,
    sizes: Vec<u64>,
    keys: Vec<Digest>,
    rows: Vec<Vec<u32>>,
    /// attr -> value -> sorted cell ids
    by_value: Vec<Vec<Vec<u32>>>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_key(cell: u32) -> Digest {
    let hi = splitmix64(u64::from(cell) ^ 0xA076_1D64_78BD_642F);
    let lo = splitmix64(hi ^ u64::from(cell).rotate_left(32));
    (u128::from(hi) << 64) | u128::from(lo)
}

impl CellIndex {
    fn build(schema: &Schema, columns: &[Vec<u32>], n: usize) -> Self {
        let width = columns.len();
        let mut lookup: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut tuples = Vec::new();
        let mut rows: Vec<Vec<u32>> = Vec::new();
        let mut tuple = vec![0u32; width];
        for row in 0..n {
            for (slot, col) in tuple.iter_mut().zip(columns) {
                *slot = col[row];
            }
            let id = match lookup.get(&tuple) {
                Some(&id) => id,
                None => {
                    let id = rows.len() as u32;
                    lookup.insert(tuple.clone(), id);
                    tuples.extend_from_slice(&tuple);
                    rows.push(Vec::new());
                    id
                }
            };
            rows[id as usize].push(row as u32);
        }
        let sizes = rows.iter().map(|r| r.len() as u64).collect();
        let keys = (0..rows.len() as u32).map(cell_key).collect();
        let mut by_value: Vec<Vec<Vec<u32>>> = schema
            .attributes()
            .iter()
            .map(|a| vec![Vec::new(); a.len()])
            .collect();
        for cell in 0..rows.len() {
            for (attr, lists) in by_value.iter_mut().enumerate() {
                lists[tuples[cell * width + attr] as usize].push(cell as u32);
            }
        }
        Self {
            width,
            tuples,
            sizes,
            keys,
            rows,
            by_value,
        }
    }

    fn tuple(&self, cell: u32) -> &[u32] {
        let start = cell as usize * self.width;
        &self.tuples[start..start + self.width]
    }
}

/// The set of individuals satisfying a query, in canonical form.
///
/// Equality is exact: two sets are equal iff they cover the same cells, which
/// (for a fixed dataset) holds iff they contain the same rows. The digest is
/// the wrapping sum of per-cell random keys and is only used for hashing.
#[derive(Clone, Debug, Eq)]
pub struct ContributorSet {
    cells: Vec<u32>,
    count: u64,
    digest: Digest,
}

impl PartialEq for ContributorSet {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest && self.cells == other.cells
    }
}

impl Hash for ContributorSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.digest.hash(state);
    }
}

impl ContributorSet {
    pub(crate) fn from_cells(dataset: &Dataset, cells: Vec<u32>) -> Self {
        let idx = &dataset.cells;
        let mut count = 0u64;
        let mut digest: Digest = 0;
        for &c in &cells {
            count += idx.sizes[c as usize];
            digest = digest.wrapping_add(idx.keys[c as usize]);
        }
        Self {
            cells,
            count,
            digest,
        }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    /// Sorted ids of the cells making up this set.
    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Canonical encoding: the digest as 32 hex digits.
    pub fn encode(&self) -> String {
        format!("{:032x}", self.digest)
    }

    /// Sorted row numbers (1-based, standing in for the hidden user ids).
    pub fn members(&self, dataset: &Dataset) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .cells
            .iter()
            .flat_map(|&c| dataset.cells.rows[c as usize].iter().map(|r| r + 1))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Result of evaluating a counting query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub count: u64,
    pub contributors: ContributorSet,
}

/// An immutable table of individuals, one value per attribute per row.
#[derive(Clone, Debug)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Vec<u32>>,
    n: usize,
    cells: CellIndex,
}

impl Dataset {
    /// Builds a dataset from column vectors of value ids.
    pub fn from_columns(schema: Schema, columns: Vec<Vec<u32>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::param(format!(
                "{} columns given for {} attributes",
                columns.len(),
                schema.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (attr, col) in schema.attributes().iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::param(format!(
                    "column `{}` has {} rows, expected {n}",
                    attr.name(),
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|&v| v as usize >= attr.len()) {
                return Err(Error::Domain {
                    clause: attr.name().to_string(),
                    reason: format!("row {} holds a value outside the domain", row + 1),
                });
            }
        }
        let cells = CellIndex::build(&schema, &columns, n);
        Ok(Self {
            schema,
            columns,
            n,
            cells,
        })
    }

    /// Builds a dataset from labelled rows.
    pub fn from_rows(schema: Schema, rows: &[Vec<&str>]) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); schema.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::param(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    schema.len()
                )));
            }
            for (a, label) in row.iter().enumerate() {
                let id = schema.value_id(AttrId(a as u16), label)?;
                columns[a].push(id.0);
            }
        }
        Self::from_columns(schema, columns)
    }

    /// Single-attribute dataset with `counts[i]` rows holding value `labels[i]`.
    pub fn from_counts(attribute: &str, labels: Vec<String>, counts: &[u64]) -> Result<Self> {
        if labels.len() != counts.len() {
            return Err(Error::param("labels and counts differ in length"));
        }
        let schema = Schema::new(vec![Attribute::new(attribute, labels)?])?;
        let total: u64 = counts.iter().sum();
        let mut col = Vec::with_capacity(total as usize);
        for (v, &c) in counts.iter().enumerate() {
            col.extend(std::iter::repeat_n(v as u32, c as usize));
        }
        Self::from_columns(schema, vec![col])
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Number of rows, i.e. |U|.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, row: usize, attr: AttrId) -> ValueId {
        ValueId(self.columns[attr.0 as usize][row])
    }

    /// True per-value counts of one attribute. Scoring only.
    pub fn value_counts(&self, attr: AttrId) -> Vec<u64> {
        self.cells.by_value[attr.0 as usize]
            .iter()
            .map(|cells| cells.iter().map(|&c| self.cells.sizes[c as usize]).sum())
            .collect()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.sizes.len()
    }

    pub(crate) fn cell_size(&self, cell: u32) -> u64 {
        self.cells.sizes[cell as usize]
    }

    pub(crate) fn cell_key(&self, cell: u32) -> Digest {
        self.cells.keys[cell as usize]
    }

    pub(crate) fn cell_tuple(&self, cell: u32) -> &[u32] {
        self.cells.tuple(cell)
    }

    pub(crate) fn cells_with(&self, attr: AttrId, value: ValueId) -> &[u32] {
        &self.cells.by_value[attr.0 as usize][value.0 as usize]
    }

    /// Sorted ids of the cells satisfying `query` (already validated).
    pub(crate) fn matching_cells(&self, query: &Query) -> Vec<u32> {
        let clauses = query.clauses();
        if clauses.is_empty() {
            return (0..self.cell_count() as u32).collect();
        }
        // Seed from the most selective clause, filter by the rest.
        let seed = clauses
            .iter()
            .min_by_key(|c| {
                c.values()
                    .iter()
                    .map(|&v| self.cells_with(c.attr(), v).len())
                    .sum::<usize>()
            })
            .expect("non-empty");
        let mut out: Vec<u32> = seed
            .values()
            .iter()
            .flat_map(|&v| self.cells_with(seed.attr(), v).iter().copied())
            .filter(|&cell| query.matches(self.cell_tuple(cell)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Counts the rows satisfying `query` and returns their contributor set.
    pub fn evaluate(&self, query: &Query) -> Result<Evaluation> {
        query.validate(&self.schema)?;
        let contributors = ContributorSet::from_cells(self, self.matching_cells(query));
        Ok(Evaluation {
            count: contributors.len(),
            contributors,
        })
    }

    pub fn count(&self, query: &Query) -> Result<u64> {
        Ok(self.evaluate(query)?.count)
    }
}

/// `q(D)` together with `C(q)`.
pub fn evaluate_query(dataset: &Dataset, query: &Query) -> Result<(u64, ContributorSet)> {
    let e = dataset.evaluate(query)?;
    Ok((e.count, e.contributors))
}
