use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::labels::{load_labels_csv, LabelFile, LabelMatrix};
use crate::data::preprocess::{is_image_file, load_image};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LABELS_FILE: &str = "labels.csv";

/// One preprocessed image with its labels.
#[derive(Clone, Debug)]
pub struct Sample {
    /// `(200, 200, 3)`, values in `[0, 1]`.
    pub image: Tensor<f32>,
    pub labels: Vec<u8>,
    pub study_id: String,
    pub path: PathBuf,
}

impl Sample {
    pub fn filename(&self) -> String {
        self.path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// A directory of images with `labels.csv` at its root.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> LabelMatrix {
        let cols = self.samples.first().map(|s| s.labels.len()).unwrap_or(7);
        let rows: Vec<&[u8]> = self.samples.iter().map(|s| s.labels.as_slice()).collect();
        LabelMatrix::from_rows(cols, &rows).expect("samples carry validated labels")
    }

    pub fn study_ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.study_id.clone()).collect()
    }
}

/// Loads the rows of `labels` (optionally only those whose filename is in
/// `only`) from `root`, decoding images in parallel.
pub fn load_dataset_with(root: &Path, labels: &LabelFile, only: Option<&[String]>) -> Result<Dataset> {
    let rows: Vec<usize> = match only {
        None => (0..labels.filenames.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                labels.index_of(n).ok_or_else(|| {
                    Error::Validation(format!("{n} is not listed in the labels file"))
                })
            })
            .collect::<Result<_>>()?,
    };
    let samples = rows
        .par_iter()
        .map(|&i| {
            let path = root.join(&labels.filenames[i]);
            Ok(Sample {
                image: load_image(&path)?,
                labels: labels.labels.row(i).to_vec(),
                study_id: labels.study_ids[i].clone(),
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        root: root.to_path_buf(),
        samples,
    })
}

pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let labels = load_labels_csv(&root.join(LABELS_FILE))?;
    load_dataset_with(root, &labels, None)
}

/// Image files directly inside `dir`, sorted by filename.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image_file(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
