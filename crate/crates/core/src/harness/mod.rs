//! Experiment specs, the seeded trial runner and the table and figure
//! reproductions built on top of the attacks.

mod experiments;
mod output;
mod runner;
mod spec;

pub use experiments::{
    remover_success, run_appendix_c, run_experiment, run_figure_grids, run_noise_scale, run_table2,
    run_table3, BucketTally, Crossing, CsvTable, ExperimentReport, GridRow, HistogramCell,
    NegativeRaw, ScaleRow,
};
pub use output::{reconstruction_table, write_csv, write_report};
pub use runner::{run_trials, trial_rng, Execution};
pub use spec::{
    AttackSpec, BaseSpec, DatasetSource, Engine, ExperimentKind, ExperimentSpec, FigureSpec,
    GridSpec, MechanismSpec, NoiseScaleSpec, NoiseSpec, SelectionSpec,
};
