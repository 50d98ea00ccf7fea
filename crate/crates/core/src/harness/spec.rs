use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::RoundingMode;
use crate::data::{
    fixtures, generate_synthetic, load_csv, ColumnSpec, CsvSchema, Dataset, SyntheticParams,
    ValueId,
};
use crate::error::{Error, Result};
use crate::mechanism::{solve_max_entropy, NoiseDistribution, DEFAULT_QUERY_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table2,
    Table3,
    AppendixC,
    Figures,
    NoiseScale,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Table3 => "table3",
            ExperimentKind::AppendixC => "appendix-c",
            ExperimentKind::Figures => "figures",
            ExperimentKind::NoiseScale => "noise-scale",
        }
    }
}

/// Where an experiment's rows come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source", deny_unknown_fields)]
pub enum DatasetSource {
    /// The exact 107-value synthetic count vector.
    SyntheticFixture,
    /// Freshly sampled binned-normal data.
    SyntheticSampled {
        #[serde(default)]
        params: SyntheticParams,
    },
    /// The 111-value census-style age column shipped with the crate.
    AgeStandin,
    /// The six-row Suburb/Age/Gender table.
    Toy,
    /// `B × G` table for the perturbation finder.
    ProbeTable {
        m: usize,
        #[serde(default = "default_probe_base")]
        base: u32,
    },
    Csv {
        path: PathBuf,
        schema: CsvSchema,
        /// Used, with a notice, when `path` does not exist.
        #[serde(default)]
        fallback: Option<Box<DatasetSource>>,
    },
}

fn default_probe_base() -> u32 {
    40
}

impl DatasetSource {
    /// The census extract: age is the first field, padded to ages 10..=120.
    pub fn adult(path: impl Into<PathBuf>) -> Self {
        let mut age = ColumnSpec::new(fixtures::AGE_ATTRIBUTE, 0);
        age.padding_ranges = vec![[10, 120]];
        DatasetSource::Csv {
            path: path.into(),
            schema: CsvSchema {
                has_header: false,
                delimiter: ',',
                columns: vec![age],
            },
            fallback: Some(Box::new(DatasetSource::AgeStandin)),
        }
    }

    /// Loads the dataset. The second element is a notice when a fallback
    /// replaced a missing file.
    pub fn load(&self) -> Result<(Dataset, String, Option<String>)> {
        match self {
            DatasetSource::SyntheticFixture => Ok((
                fixtures::synthetic_fixture()?,
                "synthetic-fixture".into(),
                None,
            )),
            DatasetSource::SyntheticSampled { params } => Ok((
                generate_synthetic(params)?,
                format!("synthetic-sampled(seed={})", params.seed),
                None,
            )),
            DatasetSource::AgeStandin => Ok((fixtures::age_standin()?, "age-standin".into(), None)),
            DatasetSource::Toy => Ok((fixtures::toy_table(), "toy".into(), None)),
            DatasetSource::ProbeTable { m, base } => Ok((
                fixtures::probe_table(*m, *base)?,
                format!("probe-table(m={m})"),
                None,
            )),
            DatasetSource::Csv {
                path,
                schema,
                fallback,
            } => {
                if !path.exists() {
                    if let Some(fb) = fallback {
                        let (d, name, _) = fb.load()?;
                        let notice =
                            format!("{} not found; running on {name} instead", path.display());
                        return Ok((d, name, Some(notice)));
                    }
                }
                Ok((load_csv(path, schema)?, path.display().to_string(), None))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    Uniform,
    /// Max-entropy distribution on `Z±r` with the given variance bound.
    MaxEntropy { variance: f64 },
}

impl NoiseSpec {
    pub fn distribution(&self, r: u32) -> Result<NoiseDistribution> {
        match self {
            NoiseSpec::Uniform => Ok(NoiseDistribution::uniform(r)),
            NoiseSpec::MaxEntropy { variance } => {
                let r = i64::from(r);
                let support: Vec<i64> = (-r..=r).collect();
                solve_max_entropy(&support, *variance)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    /// One experiment cell per value.
    pub r: Vec<u32>,
    /// Suppression threshold; raised to `r` when smaller.
    #[serde(default = "default_s")]
    pub s: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_query_limit")]
    pub query_limit: u64,
}

fn default_s() -> u64 {
    4
}

fn default_query_limit() -> u64 {
    DEFAULT_QUERY_LIMIT
}

impl MechanismSpec {
    pub fn uniform(r: Vec<u32>, s: u64) -> Self {
        Self {
            r,
            s,
            noise: NoiseSpec::Uniform,
            query_limit: DEFAULT_QUERY_LIMIT,
        }
    }

    pub fn effective_s(&self, r: u32) -> u64 {
        self.s.max(u64::from(r))
    }
}

/// Base set for the histogram attack.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum BaseSpec {
    #[default]
    Auto,
    Largest {
        size: usize,
    },
    /// Value labels, e.g. ages `"17"` to `"27"`.
    Labels {
        values: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionSpec {
    /// The first `k` partitions in canonical order.
    #[default]
    First,
    /// `k` partitions drawn at random, reseeded every trial.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    /// Name of the attacked attribute; defaults to the first one.
    #[serde(default)]
    pub attribute: Option<String>,
    pub k: Vec<usize>,
    #[serde(default)]
    pub base_k: Option<usize>,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default)]
    pub selection: SelectionSpec,
    #[serde(default)]
    pub rounding: RoundingMode,
    /// Upper edges of the suppressed and mid count buckets.
    #[serde(default = "default_edges")]
    pub bucket_edges: [u64; 2],
}

fn default_edges() -> [u64; 2] {
    [4, 100]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Every trial queries a fresh mechanism.
    #[default]
    Mechanism,
    /// Noise is drawn directly, one fresh draw per total query.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r: Vec<u32>,
    pub m: Vec<usize>,
    #[serde(default)]
    pub engine: Engine,
    /// True count of each value in the mechanism engine's dataset.
    #[serde(default = "default_cell_count")]
    pub count: u64,
}

fn default_cell_count() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    pub r: Vec<u32>,
    /// Largest probe count for the perturbation finder grid (`t = 3m`).
    pub finder_m_max: u64,
    /// Value count whose partitions bound the Chebyshev grid.
    pub chebyshev_m: usize,
    /// Largest `t = 2k` on the exact grid.
    pub exact_t_max: u64,
    /// Partitions per value for the whole-histogram bound.
    pub union_k: u64,
    /// Attribute sizes for the whole-histogram bound.
    pub union_m: [u64; 2],
}

impl Default for FigureSpec {
    fn default() -> Self {
        Self {
            r: (1..=10).collect(),
            finder_m_max: 400,
            chebyshev_m: 12,
            exact_t_max: 2000,
            union_k: 800,
            union_m: [12, 200],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseScaleSpec {
    /// Budgets checked with `r = ⌈√t⌉`.
    pub scaled_t: Vec<u64>,
    pub fixed_r: u32,
    /// Budgets checked with `r = fixed_r`.
    pub fixed_t: Vec<u64>,
    #[serde(default)]
    pub engine: Engine,
}

impl Default for NoiseScaleSpec {
    fn default() -> Self {
        Self {
            scaled_t: vec![100, 1000, 10_000],
            fixed_r: 2,
            fixed_t: vec![20, 100, 200, 400],
            engine: Engine::Mechanism,
        }
    }
}

/// A full experiment description, usually read from TOML.
///
/// Sections not relevant to `kind` are ignored; missing ones come from
/// [`ExperimentSpec::preset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub trials: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    #[serde(default)]
    pub mechanism: Option<MechanismSpec>,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub figures: Option<FigureSpec>,
    #[serde(default)]
    pub noise_scale: Option<NoiseScaleSpec>,
}

impl ExperimentSpec {
    /// The built-in protocol for each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut spec = Self {
            name: kind.name().to_string(),
            kind,
            seed: 2019,
            trials: 100,
            output: None,
            dataset: None,
            mechanism: None,
            attack: None,
            grid: None,
            figures: None,
            noise_scale: None,
        };
        match kind {
            ExperimentKind::Table2 => {
                spec.dataset = Some(DatasetSource::SyntheticFixture);
                spec.mechanism = Some(MechanismSpec::uniform(vec![2], 4));
                spec.attack = Some(AttackSpec {
                    attribute: None,
                    k: vec![50, 127, 200, 255],
                    base_k: Some(1000),
                    base: BaseSpec::Largest { size: 11 },
                    selection: SelectionSpec::Random,
                    rounding: RoundingMode::HalfAwayFromZero,
                    bucket_edges: default_edges(),
                });
            }
            ExperimentKind::Table3 => {
                spec.dataset = Some(DatasetSource::adult("data/adult.data"));
                spec.mechanism = Some(MechanismSpec::uniform(vec![2, 3, 5], 4));
                spec.attack = Some(AttackSpec {
                    attribute: None,
                    k: vec![50, 100, 200, 250],
                    base_k: Some(1000),
                    base: BaseSpec::Labels {
                        values: (17..=27).map(|a: u32| a.to_string()).collect(),
                    },
                    selection: SelectionSpec::Random,
                    rounding: RoundingMode::HalfAwayFromZero,
                    bucket_edges: default_edges(),
                });
            }
            ExperimentKind::AppendixC => {
                spec.trials = 10_000;
                spec.grid = Some(GridSpec {
                    r: (2..=10).collect(),
                    m: (2..=11).collect(),
                    engine: Engine::Mechanism,
                    count: default_cell_count(),
                });
            }
            ExperimentKind::Figures => {
                spec.trials = 0;
                spec.figures = Some(FigureSpec::default());
            }
            ExperimentKind::NoiseScale => {
                spec.trials = 400;
                spec.noise_scale = Some(NoiseScaleSpec::default());
            }
        }
        spec
    }

    /// Parses a spec. Missing keys, top-level or inside a section, are taken
    /// from the preset of the same kind, except that a given `[dataset]` is
    /// used as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config(&e))?;
        let kind: ExperimentKind = match table.get("kind") {
            Some(v) => v.clone().try_into().map_err(|e| config(&e))?,
            None => return Err(Error::Config("missing field `kind`".into())),
        };
        let preset = toml::Table::try_from(Self::preset(kind)).map_err(|e| config(&e))?;
        for (key, base) in preset {
            match (table.get_mut(&key), base) {
                (None, base) => {
                    table.insert(key, base);
                }
                (Some(toml::Value::Table(user)), toml::Value::Table(base)) if key != "dataset" => {
                    for (k, v) in base {
                        user.entry(k).or_insert(v);
                    }
                }
                _ => {}
            }
        }
        let spec: Self = table.try_into().map_err(|e| config(&e))?;
        Ok(spec.filled())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills missing sections from the preset of the same kind.
    pub fn filled(mut self) -> Self {
        let preset = Self::preset(self.kind);
        self.dataset = self.dataset.or(preset.dataset);
        self.mechanism = self.mechanism.or(preset.mechanism);
        self.attack = self.attack.or(preset.attack);
        self.grid = self.grid.or(preset.grid);
        self.figures = self.figures.or(preset.figures);
        self.noise_scale = self.noise_scale.or(preset.noise_scale);
        self
    }

    pub(crate) fn section<'a, T>(&self, value: &'a Option<T>, what: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "experiment `{}` has no [{what}] section",
                self.name
            ))
        })
    }
}

/// Resolves a [`BaseSpec`] against the attacked attribute.
pub(crate) fn resolve_base(
    spec: &BaseSpec,
    dataset: &Dataset,
    attr: crate::data::AttrId,
) -> Result<crate::attacks::BaseChoice> {
    use crate::attacks::BaseChoice;
    Ok(match spec {
        BaseSpec::Auto => BaseChoice::Auto,
        BaseSpec::Largest { size } => BaseChoice::Largest { size: *size },
        BaseSpec::Labels { values } => {
            let labels: Vec<&str> = values.iter().map(String::as_str).collect();
            let ids: Vec<ValueId> = dataset.schema().value_ids(attr, &labels)?;
            BaseChoice::Explicit { values: ids }
        }
    })
}
