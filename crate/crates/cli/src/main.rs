use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bounded_noise::analysis::{
    chebyshev_lower_bound, histogram_union_bound, noise_remover_success_curve,
    perturbation_finder_success,
};
use bounded_noise::attacks::{
    find_perturbation, reconstruct_histogram, select_probe_attributes, BaseChoice, FinderMode,
    HistogramConfig, PartitionSelection, RemoverConfig, RoundingMode,
};
use bounded_noise::data::{AttrId, CsvSchema, Dataset, Query, SyntheticParams};
use bounded_noise::harness::{
    reconstruction_table, run_experiment, write_csv, write_report, CsvTable, DatasetSource,
    Execution, ExperimentKind, ExperimentSpec, NoiseSpec,
};
use bounded_noise::mechanism::{MechanismParams, Oracle, Session};
use bounded_noise::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bounded-noise",
    version,
    about = "Bounded-noise counting queries and the averaging attacks against them"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial runs (1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset as CSV rows, or as value,count pairs.
    GenData {
        #[command(flatten)]
        data: DataArgs,
        /// Emit one `value,count` line per domain value instead of rows.
        #[arg(long)]
        counts: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer queries read from stdin, one per line.
    ///
    /// `Suburb=Redfern; Gender=M` asks a counting query. `analyse Age 20-29|30-39 : Suburb=Redfern`
    /// runs the attribute analyser. `*` selects everyone.
    Query {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mech: MechArgs,
    },
    /// Estimate the perturbation parameter from probe queries.
    AttackFindR {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mech: MechArgs,
        /// Attribute holding the pair.
        #[arg(long)]
        attr: String,
        /// The two values a1,a2.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        pair: Vec<String>,
        /// Attribute whose single values form the candidate probes.
        #[arg(long)]
        probe_attr: String,
        /// Use at most this many probes.
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long, value_enum, default_value_t = ModeArg::ThreeCalls)]
        mode: ModeArg,
    },
    /// Reconstruct a whole attribute histogram and score it.
    AttackReconstruct {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mech: MechArgs,
        /// Attacked attribute; defaults to the first.
        #[arg(long)]
        attr: Option<String>,
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[arg(long)]
        base_k: Option<usize>,
        /// `auto`, `largest:N` or `labels:v1,v2,...`.
        #[arg(long, default_value = "auto")]
        base: String,
        /// Draw partitions at random instead of taking the first k.
        #[arg(long)]
        random_partitions: bool,
        #[arg(long, value_enum, default_value_t = RoundingArg::HalfAwayFromZero)]
        rounding: RoundingArg,
        /// Directory for reconstruction.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an analytic probability grid as CSV.
    Analyze {
        #[arg(value_enum)]
        grid: GridArg,
        /// Noise half-widths.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,10")]
        r: Vec<u32>,
        /// Largest m (finder, union) or k (chebyshev, exact).
        #[arg(long, default_value_t = 1000)]
        max: u64,
        /// Partitions per value for the union bound.
        #[arg(long, default_value_t = 800)]
        k: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiments.
    Experiment {
        #[arg(value_enum)]
        which: Which,
        /// TOML spec; the built-in protocol when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved spec as TOML and exit.
        #[arg(long)]
        print_spec: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    /// `synthetic-fixture`, `synthetic-sampled`, `age-standin`, `toy`,
    /// `probe-table:M` or a CSV path.
    #[arg(long, default_value = "synthetic-fixture")]
    data: String,
    /// Columns to read from a CSV (zero-based), all integers or labels.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    columns: Vec<usize>,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct MechArgs {
    #[arg(long, default_value_t = 2)]
    r: u32,
    /// Suppression threshold (at least r).
    #[arg(long, default_value_t = 4)]
    s: u64,
    /// Use the max-entropy law with this variance bound instead of uniform.
    #[arg(long)]
    variance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ThreeCalls,
    SingleCall,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    HalfAwayFromZero,
    HalfEven,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Finder,
    Chebyshev,
    Exact,
    Union,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Table2,
    Table3,
    AppendixC,
    Figures,
    NoiseScale,
}

impl From<Which> for ExperimentKind {
    fn from(w: Which) -> Self {
        match w {
            Which::Table2 => ExperimentKind::Table2,
            Which::Table3 => ExperimentKind::Table3,
            Which::AppendixC => ExperimentKind::AppendixC,
            Which::Figures => ExperimentKind::Figures,
            Which::NoiseScale => ExperimentKind::NoiseScale,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Ingest { .. } | Error::Io(_) => 2,
        Error::Invariant(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> bounded_noise::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let execution = Execution::with_jobs(cli.jobs);
    match cli.command {
        Command::GenData { data, counts, out } => gen_data(&data, seed, counts, out.as_deref()),
        Command::Query { data, mech } => {
            let dataset = load(&data, seed)?;
            let mut session = Session::new(&dataset, params(&mech, seed)?)?;
            query_loop(&mut session, io::stdin().lock(), &mut io::stdout().lock())
        }
        Command::AttackFindR {
            data,
            mech,
            attr,
            pair,
            probe_attr,
            probes,
            mode,
        } => {
            let dataset = load(&data, seed)?;
            let schema = dataset.schema();
            let attr = schema.attr_id(&attr)?;
            let pair = (
                schema.value_id(attr, &pair[0])?,
                schema.value_id(attr, &pair[1])?,
            );
            let probe_attr = schema.attr_id(&probe_attr)?;
            let candidates = schema
                .attribute(probe_attr)
                .expect("attribute id came from the schema")
                .ids()
                .take(probes.unwrap_or(usize::MAX))
                .map(|v| Query::single(probe_attr, &[v]))
                .collect::<bounded_noise::Result<Vec<_>>>()?;
            let mut session = Session::new(&dataset, params(&mech, seed)?)?;
            let selected = select_probe_attributes(&mut session, &candidates, attr, pair)?;
            let mode = match mode {
                ModeArg::ThreeCalls => FinderMode::ThreeCalls,
                ModeArg::SingleCall => FinderMode::SingleCall,
            };
            let out = find_perturbation(&mut session, &selected.kept, attr, pair, mode)?;
            println!(
                "r_guess={} z_min={} z_max={} probes={} dropped={} queries={}",
                out.r_guess,
                out.z_min,
                out.z_max,
                out.probes,
                selected.suppressed.len() + selected.duplicates.len(),
                out.queries
            );
            Ok(())
        }
        Command::AttackReconstruct {
            data,
            mech,
            attr,
            k,
            base_k,
            base,
            random_partitions,
            rounding,
            out,
        } => {
            let dataset = load(&data, seed)?;
            let attr = match attr {
                Some(name) => dataset.schema().attr_id(&name)?,
                None => AttrId(0),
            };
            let config = HistogramConfig {
                k,
                base_k,
                base: parse_base(&base, &dataset, attr)?,
                remover: RemoverConfig {
                    rounding: match rounding {
                        RoundingArg::HalfAwayFromZero => RoundingMode::HalfAwayFromZero,
                        RoundingArg::HalfEven => RoundingMode::HalfEven,
                    },
                    selection: if random_partitions {
                        PartitionSelection::Random { seed }
                    } else {
                        PartitionSelection::First
                    },
                },
            };
            let result = {
                let mut session = Session::new(&dataset, params(&mech, seed)?)?;
                reconstruct_histogram(&mut session, &Query::empty(), attr, &config)?
            };
            let truth = dataset.value_counts(attr);
            let table = reconstruction_table(&result, dataset.schema(), &truth)?;
            let mut stdout = io::stdout().lock();
            for row in &table.rows {
                writeln!(
                    stdout,
                    "value={} true={} estimate={} raw={} correct={}",
                    row[0], row[1], row[2], row[3], row[4]
                )?;
            }
            let correct = table.rows.iter().filter(|r| r[4] == "true").count();
            writeln!(
                stdout,
                "correct={correct}/{} queries={} base={}",
                table.rows.len(),
                result.queries_used,
                result
                    .base
                    .iter()
                    .map(|&v| dataset.schema().label(attr, v).unwrap_or("?"))
                    .collect::<Vec<_>>()
                    .join(",")
            )?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_csv(&dir.join("reconstruction.csv"), &table)?;
            }
            Ok(())
        }
        Command::Analyze {
            grid,
            r,
            max,
            k,
            out,
        } => {
            let table = analyze(grid, &r, max, k)?;
            match out {
                Some(path) => write_csv(&path, &table),
                None => {
                    let mut stdout = io::stdout().lock();
                    writeln!(stdout, "{}", table.columns.join(","))?;
                    for row in &table.rows {
                        writeln!(stdout, "{}", row.join(","))?;
                    }
                    Ok(())
                }
            }
        }
        Command::Experiment {
            which,
            config,
            trials,
            out,
            print_spec,
        } => {
            let kind = ExperimentKind::from(which);
            let mut spec = match config {
                Some(path) => ExperimentSpec::from_path(path)?,
                None => ExperimentSpec::preset(kind),
            };
            if spec.kind != kind {
                return Err(Error::Config(format!(
                    "the config describes a `{}` experiment, not `{}`",
                    spec.kind.name(),
                    kind.name()
                )));
            }
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if print_spec {
                print!("{}", spec.to_toml()?);
                return Ok(());
            }
            let dir = out
                .or_else(|| spec.output.clone())
                .unwrap_or_else(|| Path::new("results").join(&spec.name));
            let report = run_experiment(&spec, execution)?;
            if let Some(notice) = &report.notice {
                eprintln!("notice: {notice}");
            }
            let written = write_report(&report, &dir)?;
            print_summary(&report);
            for path in written {
                println!("wrote {}", path.display());
            }
            eprintln!("wall-clock: {:.2?}", report.wall_clock);
            Ok(())
        }
    }
}

fn load(args: &DataArgs, seed: u64) -> bounded_noise::Result<Dataset> {
    let source = match args.data.as_str() {
        "synthetic-fixture" => DatasetSource::SyntheticFixture,
        "synthetic-sampled" => DatasetSource::SyntheticSampled {
            params: SyntheticParams {
                seed,
                ..SyntheticParams::default()
            },
        },
        "age-standin" => DatasetSource::AgeStandin,
        "toy" => DatasetSource::Toy,
        other => match other.strip_prefix("probe-table:") {
            Some(m) => DatasetSource::ProbeTable {
                m: m.parse()
                    .map_err(|_| Error::Config(format!("bad probe-table size `{m}`")))?,
                base: 40,
            },
            None => {
                let path = PathBuf::from(other);
                if !path.exists() {
                    return Err(Error::Ingest {
                        path,
                        row: 0,
                        reason: "no such file".into(),
                    });
                }
                let columns = args
                    .columns
                    .iter()
                    .map(|&i| bounded_noise::data::ColumnSpec::new(format!("c{i}"), i))
                    .collect();
                DatasetSource::Csv {
                    path,
                    schema: CsvSchema {
                        has_header: args.header,
                        delimiter: ',',
                        columns,
                    },
                    fallback: None,
                }
            }
        },
    };
    Ok(source.load()?.0)
}

fn params(mech: &MechArgs, seed: u64) -> bounded_noise::Result<MechanismParams> {
    let noise = match mech.variance {
        None => NoiseSpec::Uniform,
        Some(variance) => NoiseSpec::MaxEntropy { variance },
    };
    MechanismParams::new(mech.r, mech.s, noise.distribution(mech.r)?, seed)
}

fn parse_base(text: &str, dataset: &Dataset, attr: AttrId) -> bounded_noise::Result<BaseChoice> {
    if text == "auto" {
        return Ok(BaseChoice::Auto);
    }
    if let Some(n) = text.strip_prefix("largest:") {
        let size = n
            .parse()
            .map_err(|_| Error::Config(format!("bad base size `{n}`")))?;
        return Ok(BaseChoice::Largest { size });
    }
    if let Some(list) = text.strip_prefix("labels:") {
        let labels: Vec<&str> = list.split(',').map(str::trim).collect();
        let values = dataset.schema().value_ids(attr, &labels)?;
        return Ok(BaseChoice::Explicit { values });
    }
    Err(Error::Config(format!(
        "base must be `auto`, `largest:N` or `labels:...`, got `{text}`"
    )))
}

fn gen_data(
    args: &DataArgs,
    seed: u64,
    counts: bool,
    out: Option<&Path>,
) -> bounded_noise::Result<()> {
    let dataset = load(args, seed)?;
    let schema = dataset.schema();
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = io::BufWriter::new(sink);
    if counts {
        let attr = AttrId(0);
        for (label, c) in schema.attributes()[0]
            .values()
            .iter()
            .zip(dataset.value_counts(attr))
        {
            writeln!(w, "{label},{c}")?;
        }
    } else {
        for row in 0..dataset.n() {
            let fields: Vec<&str> = (0..schema.len())
                .map(|a| {
                    let attr = AttrId(a as u16);
                    schema.label(attr, dataset.value(row, attr)).unwrap_or("?")
                })
                .collect();
            writeln!(w, "{}", fields.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Handles one line of the query loop.
fn query_line(session: &mut Session, line: &str) -> bounded_noise::Result<String> {
    let schema = session.schema().clone();
    if let Some(rest) = line
        .strip_prefix("analyse ")
        .or_else(|| line.strip_prefix("analyze "))
    {
        let (lhs, b) = rest.split_once(':').unwrap_or((rest, ""));
        let mut parts = lhs.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::Config("analyse needs an attribute".into()))?;
        let attr = schema.attr_id(name)?;
        let subset = match parts.next() {
            Some(vals) => {
                let labels: Vec<&str> = vals.split('|').collect();
                schema.value_ids(attr, &labels)?
            }
            None => Vec::new(),
        };
        let b = Query::parse(&schema, b)?;
        let ans = session.analyse(&b, attr, &subset)?;
        let per: Vec<String> = subset
            .iter()
            .zip(&ans.per_value)
            .map(|(&v, n)| format!("{}={n}", schema.label(attr, v).unwrap_or("?")))
            .collect();
        Ok(format!("{} total={}", per.join(" "), ans.total)
            .trim_start()
            .to_string())
    } else {
        let q = Query::parse(&schema, line)?;
        Ok(session.answer(&q)?.to_string())
    }
}

fn query_loop(
    session: &mut Session,
    input: impl BufRead,
    out: &mut impl Write,
) -> bounded_noise::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "quit" || line == "exit" {
            break;
        }
        match query_line(session, line) {
            Ok(s) => writeln!(out, "{s}")?,
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(())
}

fn analyze(grid: GridArg, rs: &[u32], max: u64, union_k: u64) -> bounded_noise::Result<CsvTable> {
    if rs.contains(&0) {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let mut table = match grid {
        GridArg::Finder => CsvTable::new("finder", &["r", "m", "t", "probability"]),
        GridArg::Chebyshev => CsvTable::new("chebyshev", &["r", "k", "t", "probability"]),
        GridArg::Exact => CsvTable::new("exact", &["r", "k", "t", "probability"]),
        GridArg::Union => CsvTable::new("union", &["r", "k", "m", "probability"]),
    };
    for &r in rs {
        match grid {
            GridArg::Finder => {
                for m in 1..=max {
                    table.push(vec![
                        r.to_string(),
                        m.to_string(),
                        (3 * m).to_string(),
                        perturbation_finder_success(r, m).to_string(),
                    ]);
                }
            }
            GridArg::Chebyshev => {
                for k in 1..=max {
                    table.push(vec![
                        r.to_string(),
                        k.to_string(),
                        (2 * k).to_string(),
                        chebyshev_lower_bound(r, k).to_string(),
                    ]);
                }
            }
            GridArg::Exact => {
                for (i, p) in noise_remover_success_curve(r, max)?.into_iter().enumerate() {
                    let k = i as u64 + 1;
                    table.push(vec![
                        r.to_string(),
                        k.to_string(),
                        (2 * k).to_string(),
                        p.to_string(),
                    ]);
                }
            }
            GridArg::Union => {
                if union_k == 0 {
                    return Err(Error::Config("k must be at least 1".into()));
                }
                let p = noise_remover_success_curve(r, union_k)?[union_k as usize - 1];
                for m in 1..=max {
                    table.push(vec![
                        r.to_string(),
                        union_k.to_string(),
                        m.to_string(),
                        histogram_union_bound(p, m).to_string(),
                    ]);
                }
            }
        }
    }
    Ok(table)
}

fn print_summary(report: &bounded_noise::harness::ExperimentReport) {
    for c in &report.cells {
        println!(
            "r={} s={} k={} mean_correct={:.2}/{} ({:.1}%) all_correct_runs={}/{} negative_raw={} predicted={:.2}",
            c.r,
            c.s,
            c.k,
            c.mean_correct,
            c.values,
            100.0 * c.success_fraction,
            c.all_correct_runs,
            c.trials,
            c.negative_raw.len(),
            c.predicted_correct
        );
    }
    for row in &report.grid {
        println!(
            "r={} m={} k={} rate={:.4} exact={:.4}",
            row.r, row.m, row.k, row.rate, row.exact
        );
    }
    for c in &report.crossings {
        match c.m {
            Some(m) => println!("r={} reaches 0.9 at m={m}", c.r),
            None => println!("r={} never reaches 0.9", c.r),
        }
    }
    for row in &report.scale {
        println!(
            "{} t={} r={} k={} rate={:.4} exact={}",
            row.regime,
            row.t,
            row.r,
            row.k,
            row.rate,
            row.exact.map_or("-".to_string(), |p| format!("{p:.4}"))
        );
    }
}
