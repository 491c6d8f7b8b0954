//! Dataset ingestion, preprocessing and the synthetic generator.

mod dataset;
mod labels;
mod preprocess;
mod synth;

pub use dataset::{list_images, load_dataset, load_dataset_with, Dataset, Sample, LABELS_FILE};
pub use labels::{
    labels_header, load_labels_csv, validate_consistency, write_labels_csv, LabelFile, LabelMatrix,
    Rule, Severity, Violation, FRACTURE, FRACTURE_TYPES, LABEL_NAMES, NOT_FRACTURED, N_LABELS,
};
pub use preprocess::{is_image_file, load_image, preprocess_image, resize_bilinear, IMAGE_SIZE};
pub use synth::{generate_synthetic, render_slice, synthetic_labels, SYNTH_SIZE};
