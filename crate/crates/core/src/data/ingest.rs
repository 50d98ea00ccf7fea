use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::schema::{Attribute, Schema};
use crate::error::{Error, Result};

/// Which columns of a delimited file to ingest, and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub columns: Vec<ColumnSpec>,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    /// Attribute name in the resulting dataset.
    pub name: String,
    /// Zero-based field index. Defaults to the header named `name`.
    #[serde(default)]
    pub index: Option<usize>,
    /// Integer binning: each value is mapped to the lower edge of its bin.
    #[serde(default)]
    pub bin_width: Option<i64>,
    #[serde(default)]
    pub bin_origin: i64,
    /// Extra domain values that may have no rows.
    #[serde(default)]
    pub padding: Vec<String>,
    /// Inclusive integer ranges of extra domain values.
    #[serde(default)]
    pub padding_ranges: Vec<[i64; 2]>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            index: Some(index),
            bin_width: None,
            bin_origin: 0,
            padding: Vec::new(),
            padding_ranges: Vec::new(),
        }
    }

    fn padding_labels(&self) -> impl Iterator<Item = String> + '_ {
        self.padding.iter().cloned().chain(
            self.padding_ranges
                .iter()
                .flat_map(|&[lo, hi]| (lo..=hi).map(|v| v.to_string())),
        )
    }

    fn bin(&self, raw: &str) -> std::result::Result<String, String> {
        match self.bin_width {
            None => Ok(raw.to_string()),
            Some(w) if w <= 0 => Err(format!("bin width {w} must be positive")),
            Some(w) => {
                let v: i64 = raw
                    .parse()
                    .map_err(|_| format!("`{raw}` in column `{}` is not an integer", self.name))?;
                let lower = self.bin_origin + (v - self.bin_origin).div_euclid(w) * w;
                Ok(lower.to_string())
            }
        }
    }
}

impl CsvSchema {
    /// Headerless comma-separated file, single integer column at `index`.
    pub fn single_column(name: &str, index: usize) -> Self {
        Self {
            has_header: false,
            delimiter: ',',
            columns: vec![ColumnSpec::new(name, index)],
        }
    }
}

/// Orders domain labels numerically when they are all integers.
fn sort_domain(labels: BTreeSet<String>) -> Vec<String> {
    let mut labels: Vec<String> = labels.into_iter().collect();
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    labels
}

/// Reads a delimited file into a [`Dataset`].
///
/// Domains are the observed values plus any declared padding. Blank lines are
/// skipped; every other line must have the same number of fields.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let err = |row: usize, reason: String| Error::Ingest {
        path: path.to_path_buf(),
        row,
        reason,
    };
    if schema.columns.is_empty() {
        return Err(err(0, "schema selects no columns".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(0, e.to_string()))?;

    let mut indices = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let idx = match col.index {
            Some(i) => i,
            None => {
                if !schema.has_header {
                    return Err(err(0, format!("column `{}` needs an index", col.name)));
                }
                let headers = reader.headers().map_err(|e| err(1, e.to_string()))?;
                headers
                    .iter()
                    .position(|h| h == col.name)
                    .ok_or_else(|| err(1, format!("no header named `{}`", col.name)))?
            }
        };
        indices.push(idx);
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            err(row, e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(err(
                    row,
                    format!("ragged row: {} fields, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        for ((col, &idx), out) in schema.columns.iter().zip(&indices).zip(raw.iter_mut()) {
            let cell = record
                .get(idx)
                .ok_or_else(|| err(row, format!("no field {idx} for column `{}`", col.name)))?;
            if cell.is_empty() {
                return Err(err(row, format!("empty cell in column `{}`", col.name)));
            }
            out.push(col.bin(cell).map_err(|m| err(row, m))?);
        }
    }
    if raw[0].is_empty() {
        return Err(err(0, "file contains no data rows".into()));
    }

    let mut attributes = Vec::with_capacity(schema.columns.len());
    let mut columns = Vec::with_capacity(schema.columns.len());
    for (col, values) in schema.columns.iter().zip(&raw) {
        let mut domain: BTreeSet<String> = values.iter().cloned().collect();
        domain.extend(col.padding_labels());
        let attr = Attribute::new(col.name.clone(), sort_domain(domain))?;
        columns.push(
            values
                .iter()
                .map(|v| attr.value_id(v).expect("value is in its own domain").0)
                .collect(),
        );
        attributes.push(attr);
    }
    Dataset::from_columns(Schema::new(attributes)?, columns)
}
