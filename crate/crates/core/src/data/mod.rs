//! Datasets, the restricted counting-query language, and data sources.

mod dataset;
pub mod fixtures;
mod ingest;
mod query;
mod schema;
mod synthetic;

pub use dataset::{evaluate_query, ContributorSet, Dataset, Digest, Evaluation};
pub use ingest::{load_csv, ColumnSpec, CsvSchema};
pub use query::{Clause, Query};
pub use schema::{AttrId, Attribute, Schema, ValueId};
pub use synthetic::{generate_synthetic, synthetic_counts, SyntheticParams};
