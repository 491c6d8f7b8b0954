use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use skullnet::data::{
    generate_synthetic, list_images, load_dataset_with, load_image, load_labels_csv, LabelFile,
    LabelMatrix, LABELS_FILE, LABEL_NAMES,
};
use skullnet::metrics::full_report;
use skullnet::nn::extract_features;
use skullnet::train::{split_dataset, train, Partition, Split, SplitSpec, TrainConfig};
use skullnet::{fit_mlknn, Architecture, MlknnConfig, MlknnModel32, ModelParams32, Rng};

use crate::binio::write_file;
use crate::error::{CliError, CliResult};
use crate::features::{read_features, write_features, FeatureTable};
use crate::knn_file::{load_knn, save_knn};
use crate::model_file::{load_model, save_model};

/// `model.skn` → `model.history.csv`.
pub fn history_path(model: &Path) -> PathBuf {
    model.with_extension("history.csv")
}

/// `model.skn` → `model.split.csv`.
pub fn split_path(model: &Path) -> PathBuf {
    model.with_extension("split.csv")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_file(path, text.as_bytes())
}

fn label_names(n: usize) -> Vec<String> {
    if n == LABEL_NAMES.len() {
        LABEL_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|j| format!("label_{j}")).collect()
    }
}

pub fn parse_partitions(spec: &str) -> CliResult<Vec<Partition>> {
    let out = spec
        .split(',')
        .map(|p| p.parse::<Partition>())
        .collect::<skullnet::Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(CliError::usage("empty partition list"));
    }
    Ok(out)
}

fn split_csv(labels: &LabelFile, split: &Split) -> String {
    let mut s = String::from("filename,partition\n");
    for (name, p) in labels.filenames.iter().zip(split.assignment(labels.filenames.len())) {
        s.push_str(&format!("{name},{}\n", p.name()));
    }
    s
}

/// Filenames listed under any of `partitions` in a split file, in file order.
pub fn read_split(path: &Path, partitions: &[Partition]) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::from(skullnet::Error::Io { path: path.into(), source: e }))?;
    let mut lines = text.lines();
    if lines.next() != Some("filename,partition") {
        return Err(CliError::format(path, "header must be `filename,partition`"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let (name, part) = line
            .rsplit_once(',')
            .ok_or_else(|| CliError::format(path, format!("line {} is malformed", i + 2)))?;
        let part: Partition = part
            .parse()
            .map_err(|_| CliError::format(path, format!("line {}: unknown partition `{part}`", i + 2)))?;
        if partitions.contains(&part) {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

fn selected_files(split: Option<&Path>, partition: Option<&str>, default: &str) -> CliResult<Option<Vec<String>>> {
    match (split, partition) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(CliError::usage("--partition needs --split")),
        (Some(path), p) => Ok(Some(read_split(path, &parse_partitions(p.unwrap_or(default))?)?)),
    }
}

/// Features for each image, computed in parallel; order follows `paths`.
fn features_for(model: &ModelParams32, paths: &[PathBuf]) -> CliResult<Vec<Vec<f32>>> {
    Ok(paths
        .par_iter()
        .map(|p| extract_features(model, &load_image(p)?))
        .collect::<skullnet::Result<Vec<_>>>()?)
}

pub fn cmd_synth(n: usize, seed: u64, out: &Path) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let file = generate_synthetic(n, seed, out)?;
    log::info!("wrote {} images to {}", file.filenames.len(), out.display());
    Ok(())
}

pub fn cmd_train(data: &Path, config: Option<&Path>, out: &Path) -> CliResult<()> {
    let config = match config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    config.validate()?;
    let labels = load_labels_csv(&data.join(LABELS_FILE))?;
    let n = labels.filenames.len();
    let spec = SplitSpec::new(config.split.0, config.split.1, config.split.2, config.seed)?;
    let split = split_dataset(n, Some(&labels.study_ids), &spec)?;
    log::info!(
        "split {n} images into {} train, {} val, {} test",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let dataset = load_dataset_with(data, &labels, None)?;
    let train_set: Vec<_> = split.train.iter().map(|&i| &dataset.samples[i]).collect();
    let val_set: Vec<_> = split.val.iter().map(|&i| &dataset.samples[i]).collect();

    let mut rng = Rng::new(config.seed);
    let model = ModelParams32::build(&Architecture::skullnet(), config.leaky_slope, &mut rng)?;
    let (model, history) = train(model, &train_set, &val_set, &config)?;

    save_model(out, &model)?;
    write_text(&history_path(out), &history.to_csv())?;
    write_text(&split_path(out), &split_csv(&labels, &split))?;
    log::info!("saved model to {}", out.display());
    Ok(())
}

pub fn cmd_extract(
    model: &Path,
    data: &Path,
    out: &Path,
    split: Option<&Path>,
    partition: Option<&str>,
) -> CliResult<()> {
    let params = load_model(model)?;
    let paths: Vec<PathBuf> = match selected_files(split, partition, "train,val,test")? {
        Some(names) => names.iter().map(|n| data.join(n)).collect(),
        None => list_images(data)?,
    };
    if paths.is_empty() {
        return Err(CliError::usage(format!("no images found in {}", data.display())));
    }
    let rows = features_for(&params, &paths)?;
    let table = FeatureTable {
        filenames: paths
            .iter()
            .map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        dim: params.arch.feature_len(),
        data: rows.concat(),
    };
    write_features(out, &table)?;
    log::info!("wrote {} feature rows to {}", table.len(), out.display());
    Ok(())
}

pub fn cmd_fit_knn(features: &Path, labels: &Path, config: MlknnConfig, out: &Path) -> CliResult<()> {
    let table = read_features(features)?;
    let file = load_labels_csv(labels)?;
    let rows = table
        .filenames
        .iter()
        .map(|n| {
            file.index_of(n)
                .ok_or_else(|| CliError::usage(format!("{n} has no row in {}", labels.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let y: LabelMatrix = file.labels.select(&rows);
    let model = fit_mlknn(&table.data, table.dim, &y, config)?;
    save_knn(out, &model)?;
    log::info!("fitted ML-KNN (k={}) on {} rows", config.k, table.len());
    Ok(())
}

pub fn cmd_predict(model: &Path, knn: &Path, image: &Path) -> CliResult<String> {
    let params = load_model(model)?;
    let knn: MlknnModel32 = load_knn(knn)?;
    let features = extract_features(&params, &load_image(image)?)?;
    let pred = knn.predict(&features)?;
    let mut out = String::new();
    for ((name, bit), conf) in label_names(knn.n_labels()).iter().zip(&pred.labels).zip(&pred.confidences) {
        out.push_str(&format!("{name} {bit} {conf:.6}\n"));
    }
    Ok(out)
}

pub struct EvaluateArgs<'a> {
    pub model: &'a Path,
    pub knn: &'a Path,
    pub data: &'a Path,
    pub labels: Option<&'a Path>,
    pub report_dir: &'a Path,
    pub split: Option<&'a Path>,
    pub partition: Option<&'a str>,
}

/// Writes the report files and returns the key=value block.
pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<String> {
    let params = load_model(a.model)?;
    let knn = load_knn(a.knn)?;
    let labels_path = a.labels.map(Path::to_path_buf).unwrap_or_else(|| a.data.join(LABELS_FILE));
    let file = load_labels_csv(&labels_path)?;
    let names = selected_files(a.split, a.partition, "test")?;
    let rows: Vec<usize> = match &names {
        Some(names) => names
            .iter()
            .map(|n| {
                file.index_of(n)
                    .ok_or_else(|| CliError::usage(format!("{n} has no row in {}", labels_path.display())))
            })
            .collect::<CliResult<_>>()?,
        None => (0..file.filenames.len()).collect(),
    };
    if rows.is_empty() {
        return Err(CliError::usage("nothing to evaluate"));
    }
    let paths: Vec<PathBuf> = rows.iter().map(|&i| a.data.join(&file.filenames[i])).collect();
    let feats = features_for(&params, &paths)?;
    let preds = feats
        .par_iter()
        .map(|f| knn.predict(f))
        .collect::<skullnet::Result<Vec<_>>>()?;

    let y_true = file.labels.select(&rows);
    let l = y_true.n_cols();
    let y_pred = LabelMatrix::from_flat(l, preds.iter().flat_map(|p| p.labels.clone()).collect())?;
    let conf: Vec<f64> = preds.iter().flat_map(|p| p.confidences.clone()).collect();
    let report = full_report(&y_true, &y_pred, &conf, &label_names(l))?;

    fs::create_dir_all(a.report_dir)
        .map_err(|e| CliError::from(skullnet::Error::Io { path: a.report_dir.into(), source: e }))?;
    let text = report.to_text();
    write_text(&a.report_dir.join("report.txt"), &text)?;
    write_text(&a.report_dir.join("roc.csv"), &report.roc_csv())?;
    write_text(&a.report_dir.join("pr.csv"), &report.pr_csv())?;
    write_text(&a.report_dir.join("confusion.csv"), &report.confusion_csv())?;
    log::info!(
        "evaluated {} images: subset_accuracy={:.4} micro_f1={:.4}",
        rows.len(),
        report.subset_accuracy,
        report.f1_score()
    );
    Ok(text)
}
