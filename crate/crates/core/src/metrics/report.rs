use std::fmt::Write as _;

use super::{
    averaged, per_label_confusion, prf_specificity, ratio, subset_accuracy, hamming_loss,
    hamming_score, pr_average_precision, roc_auc, weighted_mean, AverageMode, ConfusionCounts,
    CurvePoint, AVERAGE_MODES,
};
use crate::data::LabelMatrix;
use crate::error::{Error, Result};

const SCALARS: [&str; 6] = ["precision", "recall", "f1", "specificity", "roc_auc", "average_precision"];

#[derive(Clone, Debug, PartialEq)]
pub struct LabelScores {
    pub name: String,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: f64,
    /// `None` when the label column holds a single class.
    pub roc_auc: Option<f64>,
    /// `None` when the label column has no positives.
    pub average_precision: Option<f64>,
    pub roc: Vec<CurvePoint>,
    pub pr: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AverageRow {
    pub mode: AverageMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: Option<f64>,
    pub roc_auc: Option<f64>,
    pub average_precision: Option<f64>,
    /// Labels left out of the AUC average because their AUC is undefined.
    pub auc_skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub labels: Vec<LabelScores>,
    pub averages: Vec<AverageRow>,
    pub subset_accuracy: f64,
    pub hamming_score: f64,
    pub hamming_loss: f64,
}

impl MetricsReport {
    pub fn average(&self, mode: AverageMode) -> &AverageRow {
        self.averages
            .iter()
            .find(|r| r.mode == mode)
            .expect("report holds every averaging mode")
    }

    pub fn f1_score(&self) -> f64 {
        self.average(AverageMode::Micro).f1
    }

    pub fn roc_auc(&self) -> Option<f64> {
        self.average(AverageMode::Micro).roc_auc
    }

    fn entries(&self) -> Vec<(String, String)> {
        let fmt = |v: f64| format!("{v:.6}");
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt);
        let mut out = Vec::new();
        for l in &self.labels {
            let vals = [
                fmt(l.precision),
                fmt(l.recall),
                fmt(l.f1),
                fmt(l.specificity),
                opt(l.roc_auc),
                opt(l.average_precision),
            ];
            for (k, v) in SCALARS.iter().zip(vals) {
                out.push((format!("label.{}.{k}", l.name), v));
            }
            out.push((format!("label.{}.support", l.name), l.counts.support().to_string()));
        }
        for r in &self.averages {
            let vals = [
                fmt(r.precision),
                fmt(r.recall),
                fmt(r.f1),
                opt(r.specificity),
                opt(r.roc_auc),
                opt(r.average_precision),
            ];
            for (k, v) in SCALARS.iter().zip(vals) {
                out.push((format!("{}.{k}", r.mode.name()), v));
            }
            out.push((format!("{}.auc_skipped", r.mode.name()), r.auc_skipped.join(";")));
        }
        out.push(("subset_accuracy".into(), fmt(self.subset_accuracy)));
        out.push(("f1_score".into(), fmt(self.f1_score())));
        out.push(("hamming_score".into(), fmt(self.hamming_score)));
        out.push(("hamming_loss".into(), fmt(self.hamming_loss)));
        out.push(("roc_auc".into(), opt(self.roc_auc())));
        out
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    fn curve_csv(&self, pick: impl Fn(&LabelScores) -> &[CurvePoint]) -> String {
        let mut s = String::from("label,threshold,x,y\n");
        for l in &self.labels {
            for p in pick(l) {
                let t = if p.threshold.is_infinite() {
                    "inf".to_string()
                } else {
                    p.threshold.to_string()
                };
                let _ = writeln!(s, "{},{t},{},{}", l.name, p.x, p.y);
            }
        }
        s
    }

    /// ROC points as CSV: `x` is the false-positive rate, `y` the true-positive rate.
    pub fn roc_csv(&self) -> String {
        self.curve_csv(|l| &l.roc)
    }

    /// PR points as CSV: `x` is recall, `y` precision.
    pub fn pr_csv(&self) -> String {
        self.curve_csv(|l| &l.pr)
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("label,tp,fp,tn,fn\n");
        for l in &self.labels {
            let c = &l.counts;
            let _ = writeln!(s, "{},{},{},{},{}", l.name, c.tp, c.fp, c.tn, c.fn_);
        }
        s
    }
}

/// Keys of [`MetricsReport::to_text`] in output order.
pub fn report_keys<S: AsRef<str>>(label_names: &[S]) -> Vec<String> {
    let mut keys = Vec::new();
    for name in label_names {
        for k in SCALARS {
            keys.push(format!("label.{}.{k}", name.as_ref()));
        }
        keys.push(format!("label.{}.support", name.as_ref()));
    }
    for mode in AVERAGE_MODES {
        for k in SCALARS {
            keys.push(format!("{}.{k}", mode.name()));
        }
        keys.push(format!("{}.auc_skipped", mode.name()));
    }
    for k in ["subset_accuracy", "f1_score", "hamming_score", "hamming_loss", "roc_auc"] {
        keys.push(k.to_string());
    }
    keys
}

fn defined_mean(values: &[Option<f64>], weights: &[f64]) -> Option<f64> {
    let (v, w): (Vec<f64>, Vec<f64>) = values
        .iter()
        .zip(weights)
        .filter_map(|(v, &w)| v.map(|v| (v, w)))
        .unzip();
    if v.is_empty() || w.iter().sum::<f64>() == 0.0 {
        None
    } else {
        Some(weighted_mean(&v, &w))
    }
}

fn ok_or_undefined<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Every per-label and averaged quantity, the set scores and the curves.
///
/// `confidences` is row-major `n × labels`. Labels whose AUC or AP is
/// undefined are marked `None` and left out of the averages.
pub fn full_report<S: AsRef<str>>(
    y_true: &LabelMatrix,
    y_pred: &LabelMatrix,
    confidences: &[f64],
    label_names: &[S],
) -> Result<MetricsReport> {
    let (n, l) = (y_true.n_rows(), y_true.n_cols());
    if confidences.len() != n * l {
        return Err(Error::shape(format!(
            "{} confidences for a {n}x{l} label matrix",
            confidences.len()
        )));
    }
    if label_names.len() != l {
        return Err(Error::shape(format!("{} label names for {l} labels", label_names.len())));
    }
    let counts = per_label_confusion(y_true, y_pred)?;
    let column_scores = |j: usize| -> Vec<f64> { (0..n).map(|i| confidences[i * l + j]).collect() };

    let mut labels = Vec::with_capacity(l);
    for (j, c) in counts.iter().enumerate() {
        let s = prf_specificity(c);
        let truth = y_true.column(j);
        let scores = column_scores(j);
        let roc = ok_or_undefined(roc_auc(&scores, &truth))?;
        let pr = ok_or_undefined(pr_average_precision(&scores, &truth))?;
        labels.push(LabelScores {
            name: label_names[j].as_ref().to_string(),
            counts: *c,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            specificity: s.specificity,
            roc_auc: roc.as_ref().map(|r| r.1),
            average_precision: pr.as_ref().map(|r| r.1),
            roc: roc.map(|r| r.0).unwrap_or_default(),
            pr: pr.map(|r| r.0).unwrap_or_default(),
        });
    }
    let skipped: Vec<String> = labels
        .iter()
        .filter(|s| s.roc_auc.is_none())
        .map(|s| s.name.clone())
        .collect();
    let aucs: Vec<Option<f64>> = labels.iter().map(|s| s.roc_auc).collect();
    let aps: Vec<Option<f64>> = labels.iter().map(|s| s.average_precision).collect();
    let specs: Vec<Option<f64>> = labels.iter().map(|s| Some(s.specificity)).collect();

    let mut averages = Vec::with_capacity(4);
    for mode in AVERAGE_MODES {
        let prf = averaged(y_true, y_pred, mode)?;
        let (specificity, auc, ap, auc_skipped) = match mode {
            AverageMode::Micro => {
                let mut tn = 0;
                let mut fp = 0;
                for c in &counts {
                    tn += c.tn;
                    fp += c.fp;
                }
                let flat = y_true.as_flat();
                let auc = ok_or_undefined(roc_auc(confidences, flat))?.map(|r| r.1);
                let ap = ok_or_undefined(pr_average_precision(confidences, flat))?.map(|r| r.1);
                (Some(ratio(tn, tn + fp)), auc, ap, Vec::new())
            }
            AverageMode::Macro | AverageMode::Weighted => {
                let weights: Vec<f64> = if mode == AverageMode::Macro {
                    vec![1.0; l]
                } else {
                    counts.iter().map(|c| c.support() as f64).collect()
                };
                (
                    defined_mean(&specs, &weights),
                    defined_mean(&aucs, &weights),
                    defined_mean(&aps, &weights),
                    skipped.clone(),
                )
            }
            AverageMode::Samples => {
                let row_auc: Vec<Option<f64>> = (0..n)
                    .map(|i| {
                        ok_or_undefined(roc_auc(&confidences[i * l..(i + 1) * l], y_true.row(i)))
                            .map(|r| r.map(|r| r.1))
                    })
                    .collect::<Result<_>>()?;
                let row_ap: Vec<Option<f64>> = (0..n)
                    .map(|i| {
                        ok_or_undefined(pr_average_precision(
                            &confidences[i * l..(i + 1) * l],
                            y_true.row(i),
                        ))
                        .map(|r| r.map(|r| r.1))
                    })
                    .collect::<Result<_>>()?;
                let ones = vec![1.0; n];
                (None, defined_mean(&row_auc, &ones), defined_mean(&row_ap, &ones), Vec::new())
            }
        };
        averages.push(AverageRow {
            mode,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            specificity,
            roc_auc: auc,
            average_precision: ap,
            auc_skipped,
        });
    }

    Ok(MetricsReport {
        labels,
        averages,
        subset_accuracy: subset_accuracy(y_true, y_pred)?,
        hamming_score: hamming_score(y_true, y_pred)?,
        hamming_loss: hamming_loss(y_true, y_pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (LabelMatrix, LabelMatrix, Vec<f64>) {
        let t = LabelMatrix::from_rows(3, &[[1u8, 0, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 0]]).unwrap();
        let p = LabelMatrix::from_rows(3, &[[1u8, 0, 0], [0, 1, 0], [1, 0, 0], [0, 1, 1], [1, 0, 0]]).unwrap();
        let conf = vec![
            0.9, 0.2, 0.4, 0.1, 0.8, 0.3, 0.7, 0.45, 0.2, 0.3, 0.6, 0.9, 0.8, 0.1, 0.35,
        ];
        (t, p, conf)
    }

    #[test]
    fn perfect_report() {
        let t = LabelMatrix::from_rows(2, &[[1u8, 0], [0, 1], [1, 1], [0, 0]]).unwrap();
        let conf: Vec<f64> = t.as_flat().iter().map(|&v| if v == 1 { 0.95 } else { 0.05 }).collect();
        let r = full_report(&t, &t, &conf, &["a", "b"]).unwrap();
        for l in &r.labels {
            assert_eq!([l.precision, l.recall, l.f1, l.specificity], [1.0; 4]);
            assert_eq!(l.roc_auc, Some(1.0));
            assert_eq!(l.average_precision, Some(1.0));
        }
        for a in &r.averages {
            assert_eq!([a.precision, a.recall, a.f1], [1.0; 3]);
            assert_eq!(a.roc_auc, Some(1.0));
        }
        assert_eq!((r.subset_accuracy, r.hamming_score, r.hamming_loss), (1.0, 1.0, 0.0));
    }

    #[test]
    fn report_equals_individual_ops() {
        let (t, p, conf) = fixture();
        let r = full_report(&t, &p, &conf, &["a", "b", "c"]).unwrap();
        assert_eq!(r.subset_accuracy, subset_accuracy(&t, &p).unwrap());
        assert_eq!(r.hamming_score, hamming_score(&t, &p).unwrap());
        assert_eq!(r.hamming_loss, hamming_loss(&t, &p).unwrap());
        for mode in AVERAGE_MODES {
            let a = averaged(&t, &p, mode).unwrap();
            assert_eq!(r.average(mode).f1, a.f1);
            assert_eq!(r.average(mode).precision, a.precision);
        }
        for j in 0..3 {
            let col: Vec<f64> = (0..5).map(|i| conf[i * 3 + j]).collect();
            assert_eq!(r.labels[j].roc_auc, Some(roc_auc(&col, &t.column(j)).unwrap().1));
            assert_eq!(
                r.labels[j].average_precision,
                Some(pr_average_precision(&col, &t.column(j)).unwrap().1)
            );
        }
    }

    #[test]
    fn single_class_column_is_marked_and_skipped() {
        let t = LabelMatrix::from_rows(2, &[[1u8, 0], [0, 0], [1, 0]]).unwrap();
        let conf = [0.9, 0.1, 0.2, 0.3, 0.8, 0.2];
        let r = full_report(&t, &t, &conf, &["a", "b"]).unwrap();
        assert_eq!(r.labels[1].roc_auc, None);
        assert_eq!(r.labels[1].average_precision, None);
        let macro_row = r.average(AverageMode::Macro);
        assert_eq!(macro_row.roc_auc, Some(1.0));
        assert_eq!(macro_row.auc_skipped, vec!["b".to_string()]);
        assert!(r.to_text().contains("label.b.roc_auc=undefined"));
    }

    #[test]
    fn text_follows_key_schema() {
        let (t, p, conf) = fixture();
        let r = full_report(&t, &p, &conf, &["a", "b", "c"]).unwrap();
        let keys: Vec<String> = r
            .to_text()
            .lines()
            .map(|line| line.split_once('=').unwrap().0.to_string())
            .collect();
        assert_eq!(keys, report_keys(&["a", "b", "c"]));
    }

    #[test]
    fn csv_headers() {
        let (t, p, conf) = fixture();
        let r = full_report(&t, &p, &conf, &["a", "b", "c"]).unwrap();
        assert!(r.roc_csv().starts_with("label,threshold,x,y\na,inf,0,0\n"));
        assert!(r.pr_csv().starts_with("label,threshold,x,y\n"));
        assert_eq!(r.confusion_csv().lines().count(), 4);
    }

    #[test]
    fn shape_mismatch() {
        let (t, p, conf) = fixture();
        assert!(full_report(&t, &p, &conf[1..], &["a", "b", "c"]).is_err());
        assert!(full_report(&t, &p, &conf, &["a", "b"]).is_err());
    }
}
