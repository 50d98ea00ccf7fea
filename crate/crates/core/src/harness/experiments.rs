use std::time::{Duration, Instant};

use rand::RngCore;
use serde::Serialize;

use crate::analysis::{
    chebyshev_lower_bound, histogram_union_bound, min_noise_scale, noise_remover_exact_success,
    noise_remover_success_curve, noise_remover_success_for, perturbation_finder_success,
    predicted_histogram_correct,
};
use crate::attacks::{
    noise_remover, reconstruct_histogram, two_partition_count, HistogramConfig, PartitionFamily,
    PartitionSelection, RemoverConfig, RoundingMode,
};
use crate::data::{AttrId, Dataset, Query};
use crate::error::{Error, Result};
use crate::harness::runner::{run_trials, trial_rng, Execution};
use crate::harness::spec::{
    resolve_base, Engine, ExperimentKind, ExperimentSpec, MechanismSpec, SelectionSpec,
};
use crate::mechanism::{Mechanism, MechanismParams, NoiseDistribution, Session};

/// A named CSV table written next to the summary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketTally {
    pub label: String,
    /// Values of the attribute whose true count falls in the bucket.
    pub instances: u64,
    /// Correct recoveries summed over trials.
    pub correct: u64,
    pub mean_correct: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NegativeRaw {
    pub trial: u64,
    pub value: String,
    pub raw: i64,
}

/// One `(r, k)` cell of a histogram experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramCell {
    pub r: u32,
    pub s: u64,
    pub k: usize,
    pub base_k: usize,
    pub base: Vec<String>,
    pub trials: u64,
    pub values: u64,
    pub buckets: Vec<BucketTally>,
    pub mean_correct: f64,
    pub success_fraction: f64,
    /// Trials that recovered every value.
    pub all_correct_runs: u64,
    /// Raw estimates below zero, before clamping.
    pub negative_raw: Vec<NegativeRaw>,
    pub mean_queries: f64,
    /// Expected correct values from the exact per-run success probabilities.
    pub predicted_correct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub r: u32,
    pub m: usize,
    pub k: u64,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub exact: f64,
}

/// First `m` at which the empirical rate reaches 0.9, per `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Crossing {
    pub r: u32,
    pub m: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleRow {
    /// `scaled` (r grows as √t) or `fixed`.
    pub regime: String,
    pub t: u64,
    pub r: u32,
    pub k: u64,
    pub m: usize,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    /// Exact success, when the convolution fits in memory.
    pub exact: Option<f64>,
}

/// What an experiment produced. Everything serialised is a pure function of
/// the spec and seed; the wall-clock time and CSV tables are kept out of the
/// summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<HistogramCell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub crossings: Vec<Crossing>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scale: Vec<ScaleRow>,
    #[serde(skip)]
    pub tables: Vec<CsvTable>,
    /// Per-trial lines, written as-is.
    #[serde(skip)]
    pub detail: Vec<String>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentReport {
    fn new(spec: &ExperimentSpec) -> Self {
        Self {
            name: spec.name.clone(),
            kind: spec.kind,
            seed: spec.seed,
            trials: spec.trials,
            dataset: None,
            notice: None,
            cells: Vec::new(),
            grid: Vec::new(),
            crossings: Vec::new(),
            scale: Vec::new(),
            tables: Vec::new(),
            detail: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    pub fn cell(&self, r: u32, k: usize) -> Option<&HistogramCell> {
        self.cells.iter().find(|c| c.r == r && c.k == k)
    }
}

/// Runs whichever experiment `spec.kind` names.
pub fn run_experiment(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    match spec.kind {
        ExperimentKind::Table2 => run_table2(spec, execution),
        ExperimentKind::Table3 => run_table3(spec, execution),
        ExperimentKind::AppendixC => run_appendix_c(spec, execution),
        ExperimentKind::Figures => run_figure_grids(spec),
        ExperimentKind::NoiseScale => run_noise_scale(spec, execution),
    }
}

fn distribution(mech: &MechanismSpec, r: u32) -> Result<NoiseDistribution> {
    mech.noise.distribution(r)
}

/// Exact noise remover success for `k` partitions.
pub fn remover_success(noise: &NoiseDistribution, k: u64) -> Result<f64> {
    if noise.is_uniform() {
        noise_remover_exact_success(noise.max_abs() as u32, k)
    } else {
        noise_remover_success_for(noise, k)
    }
}

fn session_for<'d>(
    dataset: &'d Dataset,
    mech: &MechanismSpec,
    noise: &NoiseDistribution,
    r: u32,
    s: u64,
    rng: rand_chacha::ChaCha8Rng,
) -> Result<Session<'d>> {
    let params = MechanismParams::new(r, s, noise.clone(), 0)?.with_query_limit(mech.query_limit);
    Ok(Session::from_mechanism(
        dataset,
        Mechanism::with_rng(params, rng),
    ))
}

/// Synthetic fixture, `r = 2`, `s = 4`, `k ∈ {50, 127, 200, 255}`.
pub fn run_table2(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    if spec.kind != ExperimentKind::Table2 {
        return Err(Error::Config(format!(
            "`{}` is not a table2 spec",
            spec.name
        )));
    }
    run_histogram(spec, execution)
}

/// Census ages, base ages 17..=27, `r ∈ {2, 3, 5}`, `k ∈ {50, 100, 200, 250}`.
/// Falls back to the bundled stand-in, with a notice, when the file is absent.
pub fn run_table3(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    if spec.kind != ExperimentKind::Table3 {
        return Err(Error::Config(format!(
            "`{}` is not a table3 spec",
            spec.name
        )));
    }
    run_histogram(spec, execution)
}

fn bucket_of(count: u64, edges: [u64; 2]) -> usize {
    match count {
        0 => 0,
        c if c <= edges[0] => 1,
        c if c <= edges[1] => 2,
        _ => 3,
    }
}

fn bucket_labels(edges: [u64; 2]) -> Vec<String> {
    vec![
        "c = 0".to_string(),
        format!("0 < c <= {}", edges[0]),
        format!("{} < c <= {}", edges[0], edges[1]),
        format!("c > {}", edges[1]),
    ]
}

struct TrialResult {
    estimates: Vec<u64>,
    raw: Vec<i64>,
    queries: u64,
    base: Vec<u32>,
}

fn run_histogram(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    let started = Instant::now();
    let source = spec.section(&spec.dataset, "dataset")?;
    let mech = spec.section(&spec.mechanism, "mechanism")?;
    let attack = spec.section(&spec.attack, "attack")?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let (dataset, dataset_name, notice) = source.load()?;
    let attr = match &attack.attribute {
        Some(name) => dataset
            .schema()
            .attr_id(name)
            .map_err(|e| Error::Config(e.to_string()))?,
        None => AttrId(0),
    };
    let domain = dataset
        .schema()
        .attribute(attr)
        .ok_or_else(|| Error::Config("dataset has no attributes".into()))?
        .clone();
    let truth = dataset.value_counts(attr);
    let base_choice = resolve_base(&attack.base, &dataset, attr)?;

    let mut report = ExperimentReport::new(spec);
    report.dataset = Some(dataset_name);
    report.notice = notice;
    let mut estimates = CsvTable::new(
        "estimates",
        &[
            "r",
            "k",
            "trial",
            "value",
            "true_count",
            "estimate",
            "raw",
            "correct",
        ],
    );

    let labels = bucket_labels(attack.bucket_edges);
    let mut instances = [0u64; 4];
    for &c in &truth {
        instances[bucket_of(c, attack.bucket_edges)] += 1;
    }
    if instances.iter().sum::<u64>() != domain.len() as u64 {
        return Err(Error::Invariant(
            "bucket totals differ from the domain size".into(),
        ));
    }
    let zero_values = instances[0];

    let mut cell_index = 0u64;
    for &r in &mech.r {
        let s = mech.effective_s(r);
        let noise = distribution(mech, r)?;
        for &k in &attack.k {
            let config = HistogramConfig {
                k,
                base_k: attack.base_k,
                base: base_choice.clone(),
                remover: RemoverConfig {
                    rounding: attack.rounding,
                    selection: PartitionSelection::First,
                },
            };
            let cell = cell_index;
            cell_index += 1;
            let results = run_trials(execution, spec.trials, |trial| {
                let mut rng = trial_rng(spec.seed, cell, trial);
                let mut config = config.clone();
                if attack.selection == SelectionSpec::Random {
                    config.remover.selection = PartitionSelection::Random {
                        seed: rng.next_u64(),
                    };
                }
                let mut session = session_for(&dataset, mech, &noise, r, s, rng)?;
                let res = reconstruct_histogram(&mut session, &Query::empty(), attr, &config)?;
                Ok(TrialResult {
                    estimates: res.estimates(),
                    raw: res.values.iter().map(|v| v.raw).collect(),
                    queries: res.queries_used,
                    base: res.base.iter().map(|v| v.0).collect(),
                })
            })?;

            // scoring: the only place true counts are read
            let mut correct = [0u64; 4];
            let mut all_correct_runs = 0;
            let mut negative_raw = Vec::new();
            let mut queries = 0u64;
            for (trial, res) in results.iter().enumerate() {
                let mut n_ok = 0;
                let mut clamped = Vec::new();
                for (i, (&est, &raw)) in res.estimates.iter().zip(&res.raw).enumerate() {
                    let ok = est == truth[i];
                    if ok {
                        correct[bucket_of(truth[i], attack.bucket_edges)] += 1;
                        n_ok += 1;
                    }
                    let label = &domain.values()[i];
                    if raw < 0 {
                        negative_raw.push(NegativeRaw {
                            trial: trial as u64,
                            value: label.clone(),
                            raw,
                        });
                        clamped.push(format!("{label}:{raw}"));
                    }
                    estimates.push(vec![
                        r.to_string(),
                        k.to_string(),
                        trial.to_string(),
                        label.clone(),
                        truth[i].to_string(),
                        est.to_string(),
                        raw.to_string(),
                        ok.to_string(),
                    ]);
                }
                if n_ok == truth.len() {
                    all_correct_runs += 1;
                }
                queries += res.queries;
                report.detail.push(format!(
                    "r={r} k={k} trial={trial} correct={n_ok}/{} queries={} clamped={}",
                    truth.len(),
                    res.queries,
                    if clamped.is_empty() {
                        "-".to_string()
                    } else {
                        clamped.join(",")
                    }
                ));
            }
            let trials = spec.trials as f64;
            let base_k = config.base_k();
            let p_k = remover_success(&noise, k as u64)?;
            let p_base = remover_success(&noise, base_k as u64)?;
            let total_correct: u64 = correct.iter().sum();
            let mean_correct = total_correct as f64 / trials;
            report.cells.push(HistogramCell {
                r,
                s,
                k,
                base_k,
                base: results[0]
                    .base
                    .iter()
                    .map(|&v| domain.values()[v as usize].clone())
                    .collect(),
                trials: spec.trials,
                values: truth.len() as u64,
                buckets: labels
                    .iter()
                    .enumerate()
                    .map(|(b, label)| BucketTally {
                        label: label.clone(),
                        instances: instances[b],
                        correct: correct[b],
                        mean_correct: correct[b] as f64 / trials,
                    })
                    .collect(),
                mean_correct,
                success_fraction: mean_correct / truth.len() as f64,
                all_correct_runs,
                negative_raw,
                mean_queries: queries as f64 / trials,
                predicted_correct: predicted_histogram_correct(
                    p_k,
                    p_base,
                    zero_values,
                    truth.len() as u64 - zero_values,
                ),
            });
        }
    }
    report.tables.push(estimates);
    report.wall_clock = started.elapsed();
    Ok(report)
}

/// Success of a single noise-remover run over all `2^(m-1) - 1` partitions
/// of `m` values with non-zero answers, for each `(r, m)`.
pub fn run_appendix_c(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    let started = Instant::now();
    if spec.kind != ExperimentKind::AppendixC {
        return Err(Error::Config(format!(
            "`{}` is not an appendix-c spec",
            spec.name
        )));
    }
    let grid = spec.section(&spec.grid, "grid")?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut report = ExperimentReport::new(spec);
    let mut table = CsvTable::new(
        "grid",
        &["r", "m", "k", "trials", "successes", "rate", "exact"],
    );
    for (ri, &r) in grid.r.iter().enumerate() {
        let noise = NoiseDistribution::uniform(r);
        let curve = noise_remover_success_curve(
            r,
            grid.m
                .iter()
                .map(|&m| two_partition_count(m))
                .max()
                .unwrap_or(1),
        )?;
        for (mi, &m) in grid.m.iter().enumerate() {
            if !(2..=crate::attacks::MAX_PARTITION_SET).contains(&m) {
                return Err(Error::Config(format!(
                    "m = {m} is outside 2..={}",
                    crate::attacks::MAX_PARTITION_SET
                )));
            }
            let k = two_partition_count(m);
            let cell = (ri * grid.m.len() + mi) as u64;
            let successes = remover_trials(
                spec,
                execution,
                grid.engine,
                &noise,
                r,
                u64::from(r),
                m,
                k,
                grid.count,
                cell,
            )?;
            let rate = successes as f64 / spec.trials as f64;
            let exact = curve[k as usize - 1];
            table.push(vec![
                r.to_string(),
                m.to_string(),
                k.to_string(),
                spec.trials.to_string(),
                successes.to_string(),
                rate.to_string(),
                exact.to_string(),
            ]);
            report.grid.push(GridRow {
                r,
                m,
                k,
                trials: spec.trials,
                successes,
                rate,
                exact,
            });
        }
        report.crossings.push(Crossing {
            r,
            m: report
                .grid
                .iter()
                .filter(|row| row.r == r && row.rate >= 0.9)
                .map(|row| row.m)
                .min(),
        });
    }
    report.tables.push(table);
    report.wall_clock = started.elapsed();
    Ok(report)
}

/// Counts trials in which the noise remover with the first `k` partitions of
/// `m` values recovers the total exactly.
#[allow(clippy::too_many_arguments)]
fn remover_trials(
    spec: &ExperimentSpec,
    execution: Execution,
    engine: Engine,
    noise: &NoiseDistribution,
    r: u32,
    s: u64,
    m: usize,
    k: u64,
    count: u64,
    cell: u64,
) -> Result<u64> {
    if count <= s {
        return Err(Error::Config(format!(
            "per-value count {count} would be suppressed at s = {s}"
        )));
    }
    let rounding = RoundingMode::HalfAwayFromZero;
    let outcomes = match engine {
        Engine::Independent => run_trials(execution, spec.trials, |trial| {
            let mut rng = trial_rng(spec.seed, cell, trial);
            let sum: i64 = (0..2 * k).map(|_| noise.sample(&mut rng)).sum();
            Ok(rounding.round(sum, k) == 0)
        })?,
        Engine::Mechanism => {
            let labels = (1..=m).map(|v| v.to_string()).collect();
            let dataset = Dataset::from_counts("a", labels, &vec![count; m])?;
            let values: Vec<_> = dataset.schema().attributes()[0].ids().collect();
            let family = PartitionFamily::of(&values)?;
            let mech = MechanismSpec {
                r: vec![r],
                s,
                noise: Default::default(),
                query_limit: crate::mechanism::DEFAULT_QUERY_LIMIT,
            };
            let config = RemoverConfig {
                rounding,
                selection: PartitionSelection::First,
            };
            run_trials(execution, spec.trials, |trial| {
                let rng = trial_rng(spec.seed, cell, trial);
                let mut session = session_for(&dataset, &mech, noise, r, s, rng)?;
                let out = noise_remover(
                    &mut session,
                    &Query::empty(),
                    AttrId(0),
                    &family,
                    k as usize,
                    &config,
                )?;
                Ok(out.estimate == (count * m as u64) as i64)
            })?
        }
    };
    Ok(outcomes.into_iter().filter(|&ok| ok).count() as u64)
}

/// Noise-remover success when the noise half-width grows as `⌈√t⌉`, against
/// a fixed half-width, for the budgets in the spec.
pub fn run_noise_scale(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentReport> {
    let started = Instant::now();
    if spec.kind != ExperimentKind::NoiseScale {
        return Err(Error::Config(format!(
            "`{}` is not a noise-scale spec",
            spec.name
        )));
    }
    let plan = spec.section(&spec.noise_scale, "noise_scale")?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut report = ExperimentReport::new(spec);
    let mut table = CsvTable::new(
        "noise_scale",
        &[
            "regime",
            "t",
            "r",
            "k",
            "m",
            "trials",
            "successes",
            "rate",
            "exact",
        ],
    );
    let runs = plan
        .scaled_t
        .iter()
        .map(|&t| Ok(("scaled", t, min_noise_scale(t)?.c as u32)))
        .chain(plan.fixed_t.iter().map(|&t| Ok(("fixed", t, plan.fixed_r))))
        .collect::<Result<Vec<_>>>()?;
    for (cell, (regime, t, r)) in runs.into_iter().enumerate() {
        let k = (t / 2).max(1);
        let m = (2..=crate::attacks::MAX_PARTITION_SET)
            .find(|&m| two_partition_count(m) >= k)
            .ok_or_else(|| {
                Error::Config(format!("t = {t} needs more partitions than supported"))
            })?;
        let noise = NoiseDistribution::uniform(r);
        let count = 10 * u64::from(r) + 100;
        let successes = remover_trials(
            spec,
            execution,
            plan.engine,
            &noise,
            r,
            u64::from(r),
            m,
            k,
            count,
            cell as u64,
        )?;
        let rate = successes as f64 / spec.trials as f64;
        // the convolution outgrows its support limit for large r and t
        let exact = noise_remover_exact_success(r, k).ok();
        table.push(vec![
            regime.to_string(),
            t.to_string(),
            r.to_string(),
            k.to_string(),
            m.to_string(),
            spec.trials.to_string(),
            successes.to_string(),
            rate.to_string(),
            exact.map_or(String::new(), |p| p.to_string()),
        ]);
        report.scale.push(ScaleRow {
            regime: regime.to_string(),
            t,
            r,
            k,
            m,
            trials: spec.trials,
            successes,
            rate,
            exact,
        });
    }
    report.tables.push(table);
    report.wall_clock = started.elapsed();
    Ok(report)
}

/// Probability grids behind the finder, Chebyshev, exact and union-bound
/// plots. Purely analytic, so `trials` is ignored.
pub fn run_figure_grids(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let started = Instant::now();
    if spec.kind != ExperimentKind::Figures {
        return Err(Error::Config(format!(
            "`{}` is not a figures spec",
            spec.name
        )));
    }
    let fig = spec.section(&spec.figures, "figures")?;
    if fig.union_k == 0 || fig.union_m[0] > fig.union_m[1] {
        return Err(Error::Config(
            "figures need union_k >= 1 and an ascending union_m".into(),
        ));
    }
    let mut report = ExperimentReport::new(spec);

    let mut finder = CsvTable::new("fig1_finder", &["r", "m", "t", "probability"]);
    let mut cheb = CsvTable::new("fig2_chebyshev", &["r", "k", "t", "probability"]);
    let mut exact = CsvTable::new("fig3_exact", &["r", "k", "t", "probability"]);
    let mut union = CsvTable::new("fig4_union", &["r", "k", "m", "probability"]);
    let cheb_k = two_partition_count(fig.chebyshev_m);
    let exact_k = fig.exact_t_max / 2;
    let [m_lo, m_hi] = fig.union_m;
    for &r in &fig.r {
        if r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        for m in 1..=fig.finder_m_max {
            finder.push(vec![
                r.to_string(),
                m.to_string(),
                (3 * m).to_string(),
                perturbation_finder_success(r, m).to_string(),
            ]);
        }
        for k in 1..=cheb_k {
            cheb.push(vec![
                r.to_string(),
                k.to_string(),
                (2 * k).to_string(),
                chebyshev_lower_bound(r, k).to_string(),
            ]);
        }
        let curve = noise_remover_success_curve(r, exact_k.max(fig.union_k))?;
        for k in 1..=exact_k {
            exact.push(vec![
                r.to_string(),
                k.to_string(),
                (2 * k).to_string(),
                curve[k as usize - 1].to_string(),
            ]);
        }
        let p = curve[fig.union_k as usize - 1];
        for m in m_lo..=m_hi {
            union.push(vec![
                r.to_string(),
                fig.union_k.to_string(),
                m.to_string(),
                histogram_union_bound(p, m).to_string(),
            ]);
        }
    }
    report.tables = vec![finder, cheb, exact, union];
    report.wall_clock = started.elapsed();
    Ok(report)
}
