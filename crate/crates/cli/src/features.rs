//! Feature matrices as CSV: header `filename,f0,..,f{d-1}`, one row per image.
//! Values use the shortest decimal form that round-trips the `f32`.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub filenames: Vec<String>,
    pub dim: usize,
    /// Row-major `filenames.len() × dim`.
    pub data: Vec<f32>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.filenames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filenames.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn io_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => skullnet::Error::Io { path: path.into(), source }.into(),
        other => CliError::format(path, format!("{other:?}")),
    }
}

pub fn write_features(path: &Path, table: &FeatureTable) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = std::iter::once("filename".to_string()).chain((0..table.dim).map(|j| format!("f{j}")));
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for (i, name) in table.filenames.iter().enumerate() {
        let row = std::iter::once(name.clone()).chain(table.row(i).iter().map(|v| v.to_string()));
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush()
        .map_err(|e| CliError::from(skullnet::Error::Io { path: path.into(), source: e }))
}

pub fn read_features(path: &Path) -> CliResult<FeatureTable> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    if header.get(0) != Some("filename") {
        return Err(CliError::format(path, "first column must be `filename`"));
    }
    let dim = header.len() - 1;
    for (j, h) in header.iter().skip(1).enumerate() {
        if h != format!("f{j}") {
            return Err(CliError::format(path, format!("column {} is `{h}`, expected `f{j}`", j + 2)));
        }
    }
    if dim == 0 {
        return Err(CliError::format(path, "no feature columns"));
    }
    let mut table = FeatureTable {
        filenames: Vec::new(),
        dim,
        data: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| io_err(path, e))?;
        if rec.len() != dim + 1 {
            return Err(CliError::format(
                path,
                format!("line {line} has {} fields, expected {}", rec.len(), dim + 1),
            ));
        }
        table.filenames.push(rec[0].to_string());
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f32 = field.parse().map_err(|_| {
                CliError::format(path, format!("line {line}, column {}: `{field}` is not a number", j + 2))
            })?;
            table.data.push(v);
        }
    }
    Ok(table)
}
