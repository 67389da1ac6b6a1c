//! CSV ingestion and export, standardization and optional jitter.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Label column given by header name or 0-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// A bare non-negative integer is an index, anything else a name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub delimiter: u8,
    /// Skip rows whose feature cells are all empty or null-like.
    pub drop_null_rows: bool,
}

impl CsvOptions {
    pub fn new(label: LabelColumn) -> Self {
        Self {
            label,
            delimiter: b',',
            drop_null_rows: false,
        }
    }
}

fn is_null(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "?"
    )
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, opts)
}

/// Parses a header-first CSV. Labels become dense ids in order of first appearance.
pub fn read_csv(reader: impl Read, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match &opts.label {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("label column `{name}` not found")))?,
        LabelColumn::Index(i) => {
            return Err(Error::InvalidConfig(format!(
                "label column index {i} out of range for {} columns",
                headers.len()
            )))
        }
    };
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // 1-based file line, counting the header
        let row = i + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        if opts.drop_null_rows && feature_cols.iter().all(|&c| is_null(&record[c])) {
            continue;
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
        let label = record[label_idx].trim().to_string();
        let next = class_names.len();
        let id = *class_ids.entry(label.clone()).or_insert_with(|| {
            class_names.push(label);
            next
        });
        labels.push(id);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }
    let p = feature_cols.len();
    let features = DMatrix::from_row_slice(labels.len(), p, &values);
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(features, labels, names, class_names)
}

/// Writes features then a trailing `label_name` column, shortest round-trip float text.
pub fn write_csv(data: &Dataset, label_name: &str, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.push(label_name);
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(data.n_features() + 1);
    for r in 0..data.n_rows() {
        row.clear();
        for j in 0..data.n_features() {
            row.push(format!("{}", data.features()[(r, j)]));
        }
        row.push(data.class_names()[data.labels()[r]].clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Zero mean, unit sample standard deviation per column. Constant columns become
/// all zeros and their indices are returned.
pub fn standardize(data: &Dataset) -> (Dataset, Vec<usize>) {
    let (n, p) = (data.n_rows(), data.n_features());
    let mut out = data.features().clone();
    let mut constant = Vec::new();
    for j in 0..p {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        if !(sd > f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE)) {
            constant.push(j);
            out.column_mut(j).fill(0.0);
            continue;
        }
        for r in 0..n {
            out[(r, j)] = (col[r] - mean) / sd;
        }
    }
    let data = data.with_features(out).expect("same shape, finite values");
    (data, constant)
}

/// Adds seeded `N(0, sigma^2)` noise to every feature value.
pub fn jitter(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("jitter must be a nonnegative number, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.features().clone();
    for v in out.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    data.with_features(out)
}
