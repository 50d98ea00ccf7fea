use std::fs;

use bounded_noise::attacks::{reconstruct_histogram, HistogramConfig};
use bounded_noise::data::{fixtures, AttrId, Query};
use bounded_noise::harness::{
    reconstruction_table, run_appendix_c, run_figure_grids, run_noise_scale, run_table2,
    run_table3, run_trials, trial_rng, write_report, BaseSpec, DatasetSource, Engine, Execution,
    ExperimentKind, ExperimentSpec,
};
use bounded_noise::mechanism::{MechanismParams, Session};
use bounded_noise::Error;
use rand::RngCore;

fn small_table2(trials: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(ExperimentKind::Table2);
    spec.trials = trials;
    spec.attack.as_mut().unwrap().k = vec![50, 200];
    spec
}

#[test]
fn reruns_write_identical_files() {
    let spec = small_table2(3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_table2(&spec, Execution::Parallel).unwrap();
    let rb = run_table2(&spec, Execution::Sequential).unwrap();
    let fa = write_report(&ra, a.path()).unwrap();
    let fb = write_report(&rb, b.path()).unwrap();
    let names: Vec<_> = fa
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["summary.json", "estimates.csv", "trials.txt"]);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(
            fs::read(x).unwrap(),
            fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
    let summary = fs::read_to_string(a.path().join("summary.json")).unwrap();
    assert!(!summary.contains("wall"));
}

#[test]
fn different_seeds_give_different_trials() {
    let spec = small_table2(2);
    let mut other = spec.clone();
    other.seed += 1;
    let a = run_table2(&spec, Execution::Sequential).unwrap();
    let b = run_table2(&other, Execution::Sequential).unwrap();
    assert_ne!(a.tables, b.tables);
}

#[test]
fn table2_buckets_follow_the_fixture() {
    let report = run_table2(&small_table2(1), Execution::Sequential).unwrap();
    let cell = report.cell(2, 200).unwrap();
    let instances: Vec<u64> = cell.buckets.iter().map(|b| b.instances).collect();
    assert_eq!(instances, vec![56, 6, 8, 37]);
    assert_eq!(instances.iter().sum::<u64>(), cell.values);
    assert_eq!(cell.base.len(), 11);
    assert_eq!(cell.base_k, 1000);
    assert!(cell.mean_correct >= 100.0);
    assert_eq!(report.detail.len(), 2);
    assert!(report.detail[0].starts_with("r=2 k=50 trial=0 correct="));
}

#[test]
fn table3_falls_back_to_the_standin() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::Table3);
    spec.dataset = Some(DatasetSource::adult("/nonexistent/adult.data"));
    spec.trials = 1;
    spec.mechanism.as_mut().unwrap().r = vec![5];
    spec.attack.as_mut().unwrap().k = vec![250];
    let report = run_table3(&spec, Execution::Sequential).unwrap();
    assert!(report.notice.as_deref().unwrap().contains("not found"));
    assert_eq!(report.dataset.as_deref(), Some("age-standin"));
    let cell = report.cell(5, 250).unwrap();
    assert_eq!(cell.s, 5);
    let instances: Vec<u64> = cell.buckets.iter().map(|b| b.instances).collect();
    assert_eq!(instances, vec![38, 4, 16, 53]);
    let base: Vec<String> = (17..=27).map(|a: u32| a.to_string()).collect();
    assert_eq!(cell.base, base);
}

#[test]
fn csv_without_fallback_is_a_dataset_error() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::Table3);
    if let Some(DatasetSource::Csv { fallback, path, .. }) = spec.dataset.as_mut() {
        *fallback = None;
        *path = "/nonexistent/adult.data".into();
    }
    spec.trials = 1;
    assert!(matches!(
        run_table3(&spec, Execution::Sequential),
        Err(Error::Ingest { .. })
    ));
}

#[test]
fn wrong_kind_is_a_config_error() {
    let spec = ExperimentSpec::preset(ExperimentKind::Table3);
    assert!(matches!(
        run_table2(&spec, Execution::Sequential),
        Err(Error::Config(_))
    ));
}

#[test]
fn spec_round_trips_through_toml() {
    for kind in [
        ExperimentKind::Table2,
        ExperimentKind::Table3,
        ExperimentKind::AppendixC,
        ExperimentKind::Figures,
        ExperimentKind::NoiseScale,
    ] {
        let spec = ExperimentSpec::preset(kind);
        let text = spec.to_toml().unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec, "{text}");
    }
}

#[test]
fn partial_spec_is_filled_from_the_preset() {
    let spec = ExperimentSpec::from_toml(
        r#"
name = "quick"
kind = "table2"
seed = 7
trials = 5

[attack]
k = [64]
"#,
    )
    .unwrap();
    assert_eq!(spec.dataset, Some(DatasetSource::SyntheticFixture));
    assert_eq!(spec.mechanism.as_ref().unwrap().r, vec![2]);
    assert_eq!(spec.attack.as_ref().unwrap().k, vec![64]);
    let attack = spec.attack.as_ref().unwrap();
    assert_eq!(attack.base_k, Some(1000));
    assert_eq!(attack.base, BaseSpec::Largest { size: 11 });

    let bad = ExperimentSpec::from_toml("name = \"x\"\nkind = \"table2\"\ntrials = 1\nbogus = 3\n");
    assert!(matches!(bad, Err(Error::Config(_))));
}

#[test]
fn sampled_dataset_spec_parses() {
    let spec = ExperimentSpec::from_toml(
        r#"
name = "sampled"
kind = "table2"
trials = 1

[dataset]
source = "synthetic-sampled"

[dataset.params]
seed = 3
n = 5000
"#,
    )
    .unwrap();
    assert_eq!(spec.seed, 2019);
    let (d, name, _) = spec.dataset.unwrap().load().unwrap();
    assert_eq!(d.n(), 5000);
    assert!(name.contains("seed=3"));
}

#[test]
fn figure_grids_cover_the_expected_ranges() {
    let report = run_figure_grids(&ExperimentSpec::preset(ExperimentKind::Figures)).unwrap();
    let names: Vec<&str> = report.tables.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(
        names,
        ["fig1_finder", "fig2_chebyshev", "fig3_exact", "fig4_union"]
    );
    let t_range = |i: usize| {
        let t = &report.tables[i];
        let col = t.columns.iter().position(|c| c == "t").unwrap();
        let ts: Vec<u64> = t.rows.iter().map(|r| r[col].parse().unwrap()).collect();
        (*ts.iter().min().unwrap(), *ts.iter().max().unwrap())
    };
    assert_eq!(t_range(1), (2, 4094));
    assert_eq!(t_range(2), (2, 2000));
    let union = &report.tables[3];
    assert!(union.rows.iter().all(|r| r[1] == "800"));
    assert_eq!(union.rows[0][2], "12");
    // r = 5 finder curve passes 0.95 before t = 600
    let finder = &report.tables[0];
    let hit = finder
        .rows
        .iter()
        .find(|r| r[0] == "5" && r[3].parse::<f64>().unwrap() >= 0.95)
        .unwrap();
    assert!(hit[2].parse::<u64>().unwrap() < 600);
}

#[test]
fn appendix_c_two_values_is_a_guess() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::AppendixC);
    spec.trials = 2000;
    for engine in [Engine::Mechanism, Engine::Independent] {
        let grid = spec.grid.as_mut().unwrap();
        grid.r = vec![2];
        grid.m = vec![2, 3];
        grid.engine = engine;
        let report = run_appendix_c(&spec, Execution::Parallel).unwrap();
        let row = &report.grid[0];
        assert_eq!((row.m, row.k), (2, 1));
        assert!((row.exact - 0.2).abs() < 1e-12);
        assert!((row.rate - 0.2).abs() < 0.04, "{engine:?}: {}", row.rate);
        assert_eq!(report.crossings.len(), 1);
        assert_eq!(report.crossings[0].m, None);
    }
}

#[test]
fn noise_scale_rows() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::NoiseScale);
    spec.trials = 50;
    let plan = spec.noise_scale.as_mut().unwrap();
    plan.scaled_t = vec![100];
    plan.fixed_t = vec![400];
    let report = run_noise_scale(&spec, Execution::Sequential).unwrap();
    assert_eq!(report.scale.len(), 2);
    let scaled = &report.scale[0];
    assert_eq!((scaled.r, scaled.k, scaled.m), (10, 50, 7));
    assert!(scaled.exact.unwrap() < 0.5);
    let fixed = &report.scale[1];
    assert_eq!((fixed.r, fixed.k), (2, 200));
    assert!(fixed.exact.unwrap() > 0.99);
}

#[test]
fn trial_streams_are_independent_of_scheduling() {
    let seq = run_trials(Execution::Sequential, 64, |i| {
        Ok(trial_rng(9, 3, i).next_u64())
    })
    .unwrap();
    let par = run_trials(Execution::ParallelJobs(3), 64, |i| {
        Ok(trial_rng(9, 3, i).next_u64())
    })
    .unwrap();
    assert_eq!(seq, par);
    let distinct: std::collections::HashSet<_> = seq.iter().collect();
    assert_eq!(distinct.len(), 64);
    assert_ne!(trial_rng(9, 3, 0).next_u64(), trial_rng(9, 4, 0).next_u64());
}

#[test]
fn trial_errors_propagate() {
    let out = run_trials(Execution::Parallel, 10, |i| {
        if i == 7 {
            Err(Error::Invariant("boom".into()))
        } else {
            Ok(i)
        }
    });
    assert!(matches!(out, Err(Error::Invariant(_))));
}

#[test]
fn reconstruction_table_scores_values() {
    let d = fixtures::synthetic_fixture().unwrap();
    let mut session = Session::new(&d, MechanismParams::uniform(2, 4, 11).unwrap()).unwrap();
    let mut config = HistogramConfig::new(200);
    config.base_k = Some(1000);
    let res = reconstruct_histogram(&mut session, &Query::empty(), AttrId(0), &config).unwrap();
    let truth = d.value_counts(AttrId(0));
    let table = reconstruction_table(&res, d.schema(), &truth).unwrap();
    assert_eq!(
        table.columns,
        ["value", "true_count", "estimate", "raw", "correct"]
    );
    assert_eq!(table.rows.len(), 107);
    assert_eq!(table.rows[24][0], "25");
    assert_eq!(table.rows[24][1], "44865");
    assert!(reconstruction_table(&res, d.schema(), &truth[1..]).is_err());
}
