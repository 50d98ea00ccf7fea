use std::collections::{hash_map, HashMap};
use std::hash::{BuildHasherDefault, Hasher};
use std::io::Write;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{AttrId, Dataset, Digest, Query, Schema, ValueId};
use crate::error::{Error, Result};
use crate::mechanism::distribution::NoiseDistribution;

/// Default cap on queries answered by one mechanism instance.
pub const DEFAULT_QUERY_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug)]
pub struct MechanismParams {
    pub r: u32,
    pub s: u64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
    pub query_limit: u64,
}

impl MechanismParams {
    /// Uniform noise on `-r..=r`.
    pub fn uniform(r: u32, s: u64, seed: u64) -> Result<Self> {
        Self::new(r, s, NoiseDistribution::uniform(r), seed)
    }

    pub fn new(r: u32, s: u64, distribution: NoiseDistribution, seed: u64) -> Result<Self> {
        let p = Self {
            r,
            s,
            distribution,
            seed,
            query_limit: DEFAULT_QUERY_LIMIT,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_query_limit(mut self, limit: u64) -> Self {
        self.query_limit = limit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("perturbation parameter r must be positive"));
        }
        if self.s < u64::from(self.r) {
            return Err(Error::param(format!(
                "suppression parameter s={} must be at least r={}",
                self.s, self.r
            )));
        }
        if self.distribution.max_abs() > i64::from(self.r) {
            return Err(Error::param(format!(
                "noise support reaches {} but r={}",
                self.distribution.max_abs(),
                self.r
            )));
        }
        Ok(())
    }
}

/// Digests are already uniformly mixed; fold them rather than rehash.
#[derive(Default)]
struct DigestHasher(u64);

impl Hasher for DigestHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u128(&mut self, v: u128) {
        self.0 = (v as u64) ^ ((v >> 64) as u64);
    }
}

struct Entry {
    cells: Box<[u32]>,
    noise: i64,
}

/// Per-value answers `α₁..α_m` and the total `α_{A'}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnalyserAnswer {
    pub per_value: Vec<u64>,
    pub total: u64,
}

/// The bounded noisy counts mechanism with its sticky-noise dictionary.
///
/// Contributor sets are compared exactly: the dictionary is keyed by digest
/// and each entry keeps its cell list, so two distinct sets that happen to
/// share a digest still get independent noise.
pub struct Mechanism {
    params: MechanismParams,
    rng: ChaCha8Rng,
    dictionary: HashMap<Digest, Entry, BuildHasherDefault<DigestHasher>>,
    collisions: Vec<(Digest, Entry)>,
    queries: u64,
    scratch: Vec<u32>,
}

impl Mechanism {
    pub fn new(params: MechanismParams) -> Result<Self> {
        params.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Self::with_rng(params, rng))
    }

    /// Uses the given generator instead of seeding one from `params.seed`.
    pub fn with_rng(params: MechanismParams, rng: ChaCha8Rng) -> Self {
        Self {
            params,
            rng,
            dictionary: HashMap::default(),
            collisions: Vec::new(),
            queries: 0,
            scratch: Vec::new(),
        }
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn queries_answered(&self) -> u64 {
        self.queries
    }

    /// Number of distinct contributor sets that have been assigned noise.
    pub fn dictionary_len(&self) -> usize {
        self.dictionary.len() + self.collisions.len()
    }

    /// Stored noise for a contributor set, if any.
    pub fn stored_noise(&self, digest: Digest, cells: &[u32]) -> Option<i64> {
        match self.dictionary.get(&digest) {
            Some(e) if *e.cells == *cells => Some(e.noise),
            Some(_) => self
                .collisions
                .iter()
                .find(|(d, e)| *d == digest && *e.cells == *cells)
                .map(|(_, e)| e.noise),
            None => None,
        }
    }

    /// Core of the mechanism, on a contributor set given as sorted cells.
    fn respond(&mut self, count: u64, digest: Digest, cells: &[u32]) -> Result<u64> {
        if self.queries >= self.params.query_limit {
            return Err(Error::QueryBudget {
                limit: self.params.query_limit,
            });
        }
        self.queries += 1;
        if count <= self.params.s {
            return Ok(0);
        }
        let noise = match self.stored_noise(digest, cells) {
            Some(e) => e,
            None => {
                let e = self.params.distribution.sample(&mut self.rng);
                let entry = Entry {
                    cells: cells.into(),
                    noise: e,
                };
                match self.dictionary.entry(digest) {
                    hash_map::Entry::Occupied(_) => self.collisions.push((digest, entry)),
                    hash_map::Entry::Vacant(slot) => {
                        slot.insert(entry);
                    }
                }
                e
            }
        };
        // count > s >= r >= |e|, so this stays positive.
        Ok((count as i64 + noise) as u64)
    }

    fn respond_cells(&mut self, dataset: &Dataset, cells: &[u32]) -> Result<u64> {
        let mut count = 0u64;
        let mut digest: Digest = 0;
        for &c in cells {
            count += dataset.cell_size(c);
            digest = digest.wrapping_add(dataset.cell_key(c));
        }
        self.respond(count, digest, cells)
    }

    /// Noisy answer to one counting query.
    pub fn answer(&mut self, dataset: &Dataset, query: &Query) -> Result<u64> {
        query.validate(dataset.schema())?;
        let cells = dataset.matching_cells(query);
        self.respond_cells(dataset, &cells)
    }

    /// Answers `b ∧ a` for each `a` in `subset`, in order, then `b ∧ subset`.
    /// An empty subset answers `b` alone.
    pub fn analyse(
        &mut self,
        dataset: &Dataset,
        b: &Query,
        attr: AttrId,
        subset: &[ValueId],
    ) -> Result<AnalyserAnswer> {
        let schema = dataset.schema();
        b.validate(schema)?;
        let domain = schema.attribute(attr).ok_or_else(|| Error::Domain {
            clause: format!("{attr}"),
            reason: format!("unknown attribute {attr}"),
        })?;
        if b.constrains(attr) {
            return Err(Error::Interface(format!(
                "target attribute `{}` is already constrained by b",
                domain.name()
            )));
        }
        if let Some(v) = subset.iter().find(|v| v.0 as usize >= domain.len()) {
            return Err(Error::Domain {
                clause: format!("{}=#{}", domain.name(), v.0),
                reason: format!("value #{} is not in the domain of `{}`", v.0, domain.name()),
            });
        }
        if subset.is_empty() {
            return Ok(AnalyserAnswer {
                per_value: Vec::new(),
                total: self.answer(dataset, b)?,
            });
        }

        let mut all = std::mem::take(&mut self.scratch);
        all.clear();
        let mut per_value = Vec::with_capacity(subset.len());
        let mut filtered = Vec::new();
        let mut seen = Vec::with_capacity(subset.len());
        for &v in subset {
            let cells = dataset.cells_with(attr, v);
            let cells: &[u32] = if b.is_empty() {
                cells
            } else {
                filtered.clear();
                filtered.extend(
                    cells
                        .iter()
                        .copied()
                        .filter(|&c| b.matches(dataset.cell_tuple(c))),
                );
                &filtered
            };
            let answer = self.respond_cells(dataset, cells);
            let answer = match answer {
                Ok(a) => a,
                Err(e) => {
                    self.scratch = all;
                    return Err(e);
                }
            };
            per_value.push(answer);
            // A repeated value adds nothing to the disjunction.
            if !seen.contains(&v) {
                seen.push(v);
                all.extend_from_slice(cells);
            }
        }
        all.sort_unstable();
        let total = self.respond_cells(dataset, &all);
        self.scratch = all;
        Ok(AnalyserAnswer {
            per_value,
            total: total?,
        })
    }

    /// Writes `digest noise` lines, sorted by digest.
    pub fn dump_dictionary(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut rows: Vec<(Digest, i64)> = self
            .dictionary
            .iter()
            .map(|(&d, e)| (d, e.noise))
            .chain(self.collisions.iter().map(|(d, e)| (*d, e.noise)))
            .collect();
        rows.sort_unstable();
        for (d, e) in rows {
            writeln!(out, "{d:032x} {e}")?;
        }
        Ok(())
    }

    /// Every stored noise value, for distribution checks.
    pub fn noise_values(&self) -> Vec<i64> {
        let mut v: Vec<(Digest, i64)> = self
            .dictionary
            .iter()
            .map(|(&d, e)| (d, e.noise))
            .chain(self.collisions.iter().map(|(d, e)| (*d, e.noise)))
            .collect();
        v.sort_unstable();
        v.into_iter().map(|p| p.1).collect()
    }
}

/// What an attack is allowed to see: the schema and the two query
/// interfaces. The underlying dataset is not reachable through it.
pub trait Oracle {
    fn schema(&self) -> &Schema;
    fn answer(&mut self, query: &Query) -> Result<u64>;
    fn analyse(&mut self, b: &Query, attr: AttrId, subset: &[ValueId]) -> Result<AnalyserAnswer>;
    fn queries_answered(&self) -> u64;
}

/// One user session: a dataset behind a mechanism.
pub struct Session<'d> {
    dataset: &'d Dataset,
    mechanism: Mechanism,
}

impl<'d> Session<'d> {
    pub fn new(dataset: &'d Dataset, params: MechanismParams) -> Result<Self> {
        Ok(Self {
            dataset,
            mechanism: Mechanism::new(params)?,
        })
    }

    pub fn from_mechanism(dataset: &'d Dataset, mechanism: Mechanism) -> Self {
        Self { dataset, mechanism }
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mechanism
    }

    pub fn into_mechanism(self) -> Mechanism {
        self.mechanism
    }
}

impl Oracle for Session<'_> {
    fn schema(&self) -> &Schema {
        self.dataset.schema()
    }

    fn answer(&mut self, query: &Query) -> Result<u64> {
        self.mechanism.answer(self.dataset, query)
    }

    fn analyse(&mut self, b: &Query, attr: AttrId, subset: &[ValueId]) -> Result<AnalyserAnswer> {
        self.mechanism.analyse(self.dataset, b, attr, subset)
    }

    fn queries_answered(&self) -> u64 {
        self.mechanism.queries_answered()
    }
}

/// A session that several threads may query at once. Each call holds the
/// lock for its whole duration, so the first caller to reach a contributor
/// set fixes its noise for everyone.
pub struct SharedSession<'d> {
    dataset: &'d Dataset,
    mechanism: Mutex<Mechanism>,
}

impl<'d> SharedSession<'d> {
    pub fn new(dataset: &'d Dataset, params: MechanismParams) -> Result<Self> {
        Ok(Self {
            dataset,
            mechanism: Mutex::new(Mechanism::new(params)?),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Mechanism> {
        self.mechanism.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn answer(&self, query: &Query) -> Result<u64> {
        self.lock().answer(self.dataset, query)
    }

    pub fn analyse(&self, b: &Query, attr: AttrId, subset: &[ValueId]) -> Result<AnalyserAnswer> {
        self.lock().analyse(self.dataset, b, attr, subset)
    }

    pub fn queries_answered(&self) -> u64 {
        self.lock().queries_answered()
    }

    pub fn into_mechanism(self) -> Mechanism {
        self.mechanism
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
    }
}

impl Oracle for &SharedSession<'_> {
    fn schema(&self) -> &Schema {
        self.dataset.schema()
    }

    fn answer(&mut self, query: &Query) -> Result<u64> {
        SharedSession::answer(self, query)
    }

    fn analyse(&mut self, b: &Query, attr: AttrId, subset: &[ValueId]) -> Result<AnalyserAnswer> {
        SharedSession::analyse(self, b, attr, subset)
    }

    fn queries_answered(&self) -> u64 {
        SharedSession::queries_answered(self)
    }
}
