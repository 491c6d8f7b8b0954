use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Label columns, in file and matrix order.
pub const LABEL_NAMES: [&str; 7] = [
    "fracture",
    "not_fractured",
    "linear",
    "depressed",
    "linear_non_depressed",
    "facial",
    "comminuted",
];

pub const N_LABELS: usize = LABEL_NAMES.len();

pub const FRACTURE: usize = 0;
pub const NOT_FRACTURED: usize = 1;
/// Columns of the five fracture types.
pub const FRACTURE_TYPES: std::ops::Range<usize> = 2..7;

/// Row-major binary matrix, one row per sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    n_cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn empty(n_cols: usize) -> Self {
        LabelMatrix {
            n_cols,
            data: Vec::new(),
        }
    }

    pub fn from_flat(n_cols: usize, data: Vec<u8>) -> Result<Self> {
        if n_cols == 0 || data.len() % n_cols != 0 {
            return Err(Error::shape(format!(
                "{} label entries do not fill rows of {n_cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::Validation(format!(
                "label entry at row {}, column {} is {}, expected 0 or 1",
                pos / n_cols,
                pos % n_cols,
                data[pos]
            )));
        }
        Ok(LabelMatrix { n_cols, data })
    }

    pub fn from_rows<R: AsRef<[u8]>>(n_cols: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::shape(format!(
                    "row {i} has {} labels, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn as_flat(&self) -> &[u8] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[u8]) -> Result<()> {
        if row.len() != self.n_cols || row.iter().any(|&v| v > 1) {
            return Err(Error::Validation(format!(
                "row {row:?} is not a binary row of width {}",
                self.n_cols
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        LabelMatrix {
            n_cols: self.n_cols,
            data,
        }
    }
}

/// Contents of a `labels.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelFile {
    pub labels: LabelMatrix,
    pub filenames: Vec<String>,
    /// Grouping key per row; the filename when the file has no `study_id` column.
    pub study_ids: Vec<String>,
}

impl LabelFile {
    pub fn index_of(&self, filename: &str) -> Option<usize> {
        self.filenames.iter().position(|f| f == filename)
    }
}

pub fn labels_header(with_study_id: bool) -> Vec<&'static str> {
    let mut h = vec!["filename"];
    h.extend(LABEL_NAMES);
    if with_study_id {
        h.push("study_id");
    }
    h
}

/// Reads `filename,<7 label columns>[,study_id]`.
pub fn load_labels_csv(path: &Path) -> Result<LabelFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let base = labels_header(false);
    for (i, want) in base.iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*want) {
            return Err(Error::Validation(format!(
                "{}: missing column '{want}' at position {i} (header {header:?})",
                path.display()
            )));
        }
    }
    let has_study = match &header[base.len()..] {
        [] => false,
        [s] if s == "study_id" => true,
        extra => {
            return Err(Error::Validation(format!(
                "{}: unexpected columns {extra:?}",
                path.display()
            )))
        }
    };

    let mut labels = LabelMatrix::empty(N_LABELS);
    let mut filenames = Vec::new();
    let mut study_ids = Vec::new();
    let mut seen = HashSet::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        // header is line 1
        let line = r + 2;
        if record.len() != header.len() {
            return Err(Error::Validation(format!(
                "{}: line {line} has {} fields, expected {}",
                path.display(),
                record.len(),
                header.len()
            )));
        }
        let name = record[0].trim().to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::Validation(format!(
                "{}: line {line}: duplicate filename '{name}'",
                path.display()
            )));
        }
        let mut row = [0u8; N_LABELS];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match record[j + 1].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Validation(format!(
                        "{}: line {line}, column '{}': value '{other}' is not 0 or 1",
                        path.display(),
                        LABEL_NAMES[j]
                    )))
                }
            };
        }
        labels.push_row(&row)?;
        study_ids.push(if has_study {
            record[N_LABELS + 1].trim().to_string()
        } else {
            name.clone()
        });
        filenames.push(name);
    }
    Ok(LabelFile {
        labels,
        filenames,
        study_ids,
    })
}

pub fn write_labels_csv(path: &Path, file: &LabelFile) -> Result<()> {
    let mut out = String::new();
    out.push_str(&labels_header(true).join(","));
    out.push('\n');
    for (i, name) in file.filenames.iter().enumerate() {
        out.push_str(name);
        for v in file.labels.row(i) {
            out.push(',');
            out.push(if *v == 1 { '1' } else { '0' });
        }
        out.push(',');
        out.push_str(&file.study_ids[i]);
        out.push('\n');
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Validation(format!("{}: {e}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// `fracture` and `not_fractured` are equal.
    FractureStatusContradiction,
    /// A fracture type is set on a row marked `not_fractured`.
    TypeWithoutFracture,
    /// `fracture` is set but no type is.
    FractureWithoutType,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub rule: Rule,
    pub severity: Severity,
}

/// Checks every row of a 7-column label matrix against the label semantics.
pub fn validate_consistency(labels: &LabelMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..labels.n_rows() {
        let row = labels.row(i);
        let any_type = row[FRACTURE_TYPES].iter().any(|&v| v == 1);
        if row[FRACTURE] == row[NOT_FRACTURED] {
            out.push(Violation {
                row: i,
                rule: Rule::FractureStatusContradiction,
                severity: Severity::Error,
            });
        }
        if any_type && row[NOT_FRACTURED] == 1 {
            out.push(Violation {
                row: i,
                rule: Rule::TypeWithoutFracture,
                severity: Severity::Error,
            });
        }
        if row[FRACTURE] == 1 && !any_type {
            out.push(Violation {
                row: i,
                rule: Rule::FractureWithoutType,
                severity: Severity::Warning,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("labels.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    const HEADER: &str = "filename,fracture,not_fractured,linear,depressed,linear_non_depressed,facial,comminuted";

    #[test]
    fn parses_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            &format!("{HEADER}\na.png,1,0,1,0,0,0,0\nb.png,0,1,0,0,0,0,0\nc.png,1,0,0,1,0,1,0\n"),
        );
        let f = load_labels_csv(&p).unwrap();
        assert_eq!(f.labels.n_rows(), 3);
        assert_eq!(f.labels.row(2), &[1, 0, 0, 1, 0, 1, 0]);
        assert_eq!(f.filenames, vec!["a.png", "b.png", "c.png"]);
        assert_eq!(f.study_ids, f.filenames);
    }

    #[test]
    fn rejects_non_binary_cell_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &format!("{HEADER}\na.png,1,0,2,0,0,0,0\n"));
        let msg = load_labels_csv(&p).unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("'linear'"), "{msg}");
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &format!("{HEADER},study_id\n"));
        let f = load_labels_csv(&p).unwrap();
        assert_eq!(f.labels.n_rows(), 0);
        assert!(f.filenames.is_empty());
    }

    #[test]
    fn rejects_missing_column_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "filename,fracture,not_fractured\na.png,1,0\n");
        assert!(load_labels_csv(&p).unwrap_err().to_string().contains("linear"));
        let p = write(
            dir.path(),
            &format!("{HEADER}\na.png,1,0,1,0,0,0,0\na.png,1,0,1,0,0,0,0\n"),
        );
        assert!(load_labels_csv(&p).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn study_ids_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = LabelFile {
            labels: LabelMatrix::from_rows(7, &[[1u8, 0, 0, 0, 0, 0, 1], [0, 1, 0, 0, 0, 0, 0]]).unwrap(),
            filenames: vec!["x.png".into(), "y.png".into()],
            study_ids: vec!["s1".into(), "s1".into()],
        };
        let p = dir.path().join("labels.csv");
        write_labels_csv(&p, &file).unwrap();
        assert_eq!(load_labels_csv(&p).unwrap(), file);
    }

    #[test]
    fn consistency_rules() {
        let m = LabelMatrix::from_rows(
            7,
            &[
                [1u8, 0, 1, 0, 0, 0, 0],
                [1, 1, 0, 0, 0, 0, 0],
                [0, 1, 1, 0, 0, 0, 0],
                [1, 0, 0, 0, 0, 0, 0],
            ],
        )
        .unwrap();
        let v = validate_consistency(&m);
        assert!(!v.iter().any(|x| x.row == 0));
        assert!(v.contains(&Violation { row: 1, rule: Rule::FractureStatusContradiction, severity: Severity::Error }));
        assert!(v.contains(&Violation { row: 2, rule: Rule::TypeWithoutFracture, severity: Severity::Error }));
        assert!(v.contains(&Violation { row: 3, rule: Rule::FractureWithoutType, severity: Severity::Warning }));
    }
}
