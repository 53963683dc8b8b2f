//! Feature CSV: header `label,f0,...,f{d-1}`, then one sample per row.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

/// Labeled feature vectors, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, data: Vec<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::Shape("feature dimension must be positive".into()));
        }
        if data.len() != dim * labels.len() {
            return Err(CoreError::Shape(format!(
                "{} labels need {} feature values of dimension {dim}, got {}",
                labels.len(),
                dim * labels.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Validation(format!("sample {} has a non-finite feature", i / dim)));
        }
        if let Some(i) = labels.iter().position(|&l| l >= classes) {
            return Err(CoreError::Validation(format!(
                "sample {i} has label {} outside [0, {classes})",
                labels[i]
            )));
        }
        Ok(Self { dim, data, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    pub(super) fn with_labels(&self, labels: Vec<usize>) -> Self {
        assert_eq!(labels.len(), self.labels.len());
        Self {
            dim: self.dim,
            data: self.data.clone(),
            labels,
        }
    }
}

/// Parses feature CSV from `reader`. Errors carry `location` and the 1-based
/// line number (the header is line 1).
pub fn parse_features(reader: impl Read, classes: usize, location: &str) -> Result<FeatureSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let line = |n: u64| format!("{location}, line {n}");

    let header = match records.next() {
        None => return Err(CoreError::parse(line(1), "missing header row")),
        Some(r) => r.map_err(|e| CoreError::parse(line(1), e))?,
    };
    if header.len() < 2 || &header[0] != "label" {
        return Err(CoreError::parse(line(1), "header must be label,f0,f1,..."));
    }
    let dim = header.len() - 1;
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{k}") {
            return Err(CoreError::parse(line(1), format!("header column {} is '{name}', expected 'f{k}'", k + 1)));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in records.enumerate() {
        let n = i as u64 + 2;
        let rec = rec.map_err(|e| CoreError::parse(line(n), e))?;
        if rec.len() != dim + 1 {
            return Err(CoreError::parse(
                line(n),
                format!("expected {} fields (label + {dim} features), found {}", dim + 1, rec.len()),
            ));
        }
        let label: usize = rec[0]
            .parse()
            .map_err(|_| CoreError::parse(line(n), format!("label '{}' is not a non-negative integer", &rec[0])))?;
        if label >= classes {
            return Err(CoreError::parse(line(n), format!("label {label} outside [0, {classes})")));
        }
        labels.push(label);
        for (k, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| CoreError::parse(line(n), format!("f{k} = '{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(CoreError::parse(line(n), format!("f{k} is not finite")));
            }
            data.push(v);
        }
    }
    FeatureSet::new(dim, data, labels, classes)
}

pub fn load_features(path: &Path, classes: usize) -> Result<FeatureSet> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    parse_features(std::io::BufReader::new(file), classes, &path.display().to_string())
}

/// Writes CSV; values use shortest round-trip formatting.
pub fn write_features(fs: &FeatureSet, writer: impl Write) -> Result<()> {
    let err = |e: csv::Error| CoreError::Internal(format!("writing features: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..fs.dim()).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(err)?;
    let mut row = Vec::with_capacity(fs.dim() + 1);
    for i in 0..fs.len() {
        row.clear();
        row.push(fs.label(i).to_string());
        row.extend(fs.features(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CoreError::Internal(format!("writing features: {e}")))
}

pub fn save_features(fs: &FeatureSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    write_features(fs, std::io::BufWriter::new(file))
}
