//! Multi-label evaluation: confusion counts, averaged precision/recall/F1,
//! set-based scores, ranking curves and the assembled report.
//!
//! Conventions: any ratio with an empty denominator is 0, except in the
//! samples average and the Hamming score, where a row whose true and
//! predicted sets are both empty scores 1.

mod curves;
mod report;

pub use curves::{pr_average_precision, roc_auc, CurvePoint};
pub use report::{full_report, report_keys, AverageRow, LabelScores, MetricsReport};

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }

    fn add(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fn_ += 1,
            _ => {
                return Err(Error::Validation(format!(
                    "entry {i} is not binary: true {t}, predicted {p}"
                )))
            }
        }
    }
    Ok(c)
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrfSpecificity {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: f64,
}

pub fn prf_specificity(c: &ConfusionCounts) -> PrfSpecificity {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    PrfSpecificity {
        precision,
        recall,
        f1: harmonic(precision, recall),
        specificity: ratio(c.tn, c.tn + c.fp),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AverageMode {
    /// Pool counts over labels, then score.
    Micro,
    /// Unweighted mean of per-label scores.
    Macro,
    /// Per-label scores weighted by label support.
    Weighted,
    /// Per-sample set scores averaged over samples.
    Samples,
}

pub const AVERAGE_MODES: [AverageMode; 4] = [
    AverageMode::Micro,
    AverageMode::Macro,
    AverageMode::Weighted,
    AverageMode::Samples,
];

impl AverageMode {
    pub fn name(self) -> &'static str {
        match self {
            AverageMode::Micro => "micro_avg",
            AverageMode::Macro => "macro_avg",
            AverageMode::Weighted => "weighted_avg",
            AverageMode::Samples => "samples_avg",
        }
    }
}

fn check_pair(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<()> {
    if y_true.n_rows() != y_pred.n_rows() || y_true.n_cols() != y_pred.n_cols() {
        return Err(Error::shape(format!(
            "label matrices {}x{} vs {}x{}",
            y_true.n_rows(),
            y_true.n_cols(),
            y_pred.n_rows(),
            y_pred.n_cols()
        )));
    }
    Ok(())
}

fn check_nonempty(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<()> {
    check_pair(y_true, y_pred)?;
    if y_true.n_rows() == 0 {
        return Err(Error::invalid("metric undefined for zero samples"));
    }
    Ok(())
}

/// Confusion counts for every label column.
pub fn per_label_confusion(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<Vec<ConfusionCounts>> {
    check_pair(y_true, y_pred)?;
    (0..y_true.n_cols())
        .map(|j| confusion(&y_true.column(j), &y_pred.column(j)))
        .collect()
}

/// Mean of `values` weighted by `weights`; 0 when the weights sum to 0.
pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        0.0
    } else {
        values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
    }
}

pub fn averaged(y_true: &LabelMatrix, y_pred: &LabelMatrix, mode: AverageMode) -> Result<Prf> {
    check_pair(y_true, y_pred)?;
    let counts = per_label_confusion(y_true, y_pred)?;
    let per_label: Vec<PrfSpecificity> = counts.iter().map(prf_specificity).collect();
    let by = |weights: &[f64]| Prf {
        precision: weighted_mean(&per_label.iter().map(|s| s.precision).collect::<Vec<_>>(), weights),
        recall: weighted_mean(&per_label.iter().map(|s| s.recall).collect::<Vec<_>>(), weights),
        f1: weighted_mean(&per_label.iter().map(|s| s.f1).collect::<Vec<_>>(), weights),
    };
    Ok(match mode {
        AverageMode::Micro => {
            let mut pooled = ConfusionCounts::default();
            counts.iter().for_each(|c| pooled.add(c));
            let s = prf_specificity(&pooled);
            Prf {
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
            }
        }
        AverageMode::Macro => by(&vec![1.0; counts.len()]),
        AverageMode::Weighted => by(&counts.iter().map(|c| c.support() as f64).collect::<Vec<_>>()),
        AverageMode::Samples => {
            let n = y_true.n_rows();
            if n == 0 {
                return Ok(Prf { precision: 0.0, recall: 0.0, f1: 0.0 });
            }
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let (inter, n_true, n_pred) = set_sizes(y_true.row(i), y_pred.row(i));
                if n_true == 0 && n_pred == 0 {
                    p += 1.0;
                    r += 1.0;
                    f += 1.0;
                    continue;
                }
                p += ratio(inter, n_pred);
                r += ratio(inter, n_true);
                f += ratio(2 * inter, n_true + n_pred);
            }
            Prf {
                precision: p / n as f64,
                recall: r / n as f64,
                f1: f / n as f64,
            }
        }
    })
}

/// `(|Y ∩ Ŷ|, |Y|, |Ŷ|)` for one row.
fn set_sizes(t: &[u8], p: &[u8]) -> (usize, usize, usize) {
    let inter = t.iter().zip(p).filter(|(&a, &b)| a == 1 && b == 1).count();
    let n_true = t.iter().filter(|&&a| a == 1).count();
    let n_pred = p.iter().filter(|&&b| b == 1).count();
    (inter, n_true, n_pred)
}

/// Fraction of rows predicted exactly.
pub fn subset_accuracy(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<f64> {
    check_nonempty(y_true, y_pred)?;
    let n = y_true.n_rows();
    let exact = (0..n).filter(|&i| y_true.row(i) == y_pred.row(i)).count();
    Ok(exact as f64 / n as f64)
}

/// Fraction of mismatched label bits.
pub fn hamming_loss(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<f64> {
    check_nonempty(y_true, y_pred)?;
    let wrong = y_true
        .as_flat()
        .iter()
        .zip(y_pred.as_flat())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / y_true.as_flat().len() as f64)
}

/// Mean per-row Jaccard similarity `|Y ∩ Ŷ| / |Y ∪ Ŷ|`; two empty sets score 1.
pub fn hamming_score(y_true: &LabelMatrix, y_pred: &LabelMatrix) -> Result<f64> {
    check_nonempty(y_true, y_pred)?;
    let n = y_true.n_rows();
    let total: f64 = (0..n)
        .map(|i| {
            let (inter, n_true, n_pred) = set_sizes(y_true.row(i), y_pred.row(i));
            let union = n_true + n_pred - inter;
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lm(rows: &[&[u8]]) -> LabelMatrix {
        LabelMatrix::from_rows(rows[0].len(), rows).unwrap()
    }

    #[test]
    fn confusion_cases() {
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (2, 1, 0, 0));
        assert_eq!(confusion(&[1, 1], &[0, 0]).unwrap().fn_, 2);
        assert!(matches!(confusion(&[2], &[0]), Err(Error::Validation(_))));
        assert!(confusion(&[1], &[0, 1]).is_err());
    }

    #[test]
    fn prf_arithmetic_and_degenerate() {
        let s = prf_specificity(&ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 5 });
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        assert!((s.specificity - 5.0 / 6.0).abs() < 1e-15);
        let s = prf_specificity(&ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 1 });
        assert_eq!(s.precision, 0.0);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn micro_pools_counts() {
        // label 0: tp 1, fp 1; label 1: tp 2, fp 0
        let t = lm(&[&[1, 1], &[0, 1], &[0, 0]]);
        let p = lm(&[&[1, 1], &[1, 1], &[0, 0]]);
        assert_eq!(averaged(&t, &p, AverageMode::Micro).unwrap().precision, 0.75);
    }

    #[test]
    fn perfect_prediction_is_one_everywhere() {
        let t = lm(&[&[1, 0, 1], &[0, 1, 0], &[1, 1, 0]]);
        for mode in AVERAGE_MODES {
            let s = averaged(&t, &t, mode).unwrap();
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0), "{mode:?}");
        }
    }

    #[test]
    fn set_metrics_examples() {
        let t = lm(&[&[1, 1, 0], &[0, 0, 1], &[1, 0, 0], &[0, 1, 1]]);
        let mut p = t.clone();
        assert_eq!(subset_accuracy(&t, &p).unwrap(), 1.0);
        p = lm(&[&[1, 1, 0], &[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]);
        assert_eq!(subset_accuracy(&t, &p).unwrap(), 0.75);

        let y = lm(&[&[1, 1, 0]]);
        let yh = lm(&[&[0, 1, 1]]);
        assert!((hamming_score(&y, &yh).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let zeros = lm(&[&[0, 0, 0], &[0, 0, 0]]);
        assert_eq!(hamming_score(&zeros, &zeros).unwrap(), 1.0);
        assert_eq!(averaged(&zeros, &zeros, AverageMode::Samples).unwrap().f1, 1.0);

        let a = LabelMatrix::from_flat(7, vec![0; 14]).unwrap();
        let mut flat = vec![0u8; 14];
        flat[3] = 1;
        let b = LabelMatrix::from_flat(7, flat).unwrap();
        assert!((hamming_loss(&a, &b).unwrap() - 1.0 / 14.0).abs() < 1e-15);
        assert_eq!(hamming_loss(&a, &a).unwrap(), 0.0);
        let ones = LabelMatrix::from_flat(7, vec![1; 14]).unwrap();
        assert_eq!(hamming_loss(&a, &ones).unwrap(), 1.0);
    }

    #[test]
    fn single_flipped_bit_in_ten_rows() {
        let t = LabelMatrix::from_flat(7, (0..70).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let mut flat = t.as_flat().to_vec();
        flat[40] ^= 1;
        let p = LabelMatrix::from_flat(7, flat).unwrap();
        assert!((subset_accuracy(&t, &p).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs_rejected() {
        let e = LabelMatrix::empty(7);
        assert!(subset_accuracy(&e, &e).is_err());
        assert!(hamming_loss(&e, &e).is_err());
        assert!(hamming_score(&e, &e).is_err());
    }

    fn matrices() -> impl Strategy<Value = (LabelMatrix, LabelMatrix)> {
        (1usize..30, 1usize..8).prop_flat_map(|(n, l)| {
            (
                proptest::collection::vec(0u8..2, n * l),
                proptest::collection::vec(0u8..2, n * l),
            )
                .prop_map(move |(a, b)| {
                    (LabelMatrix::from_flat(l, a).unwrap(), LabelMatrix::from_flat(l, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn chain_inequality((t, p) in matrices()) {
            let sa = subset_accuracy(&t, &p).unwrap();
            let hs = hamming_score(&t, &p).unwrap();
            let hl = hamming_loss(&t, &p).unwrap();
            prop_assert!(sa <= hs + 1e-15);
            prop_assert!(hs <= 1.0 - hl + 1e-15);
        }

        #[test]
        fn micro_and_macro_f1_identities((t, p) in matrices()) {
            let counts = per_label_confusion(&t, &p).unwrap();
            let mut pooled = ConfusionCounts::default();
            counts.iter().for_each(|c| pooled.add(c));
            prop_assert_eq!(averaged(&t, &p, AverageMode::Micro).unwrap().f1, prf_specificity(&pooled).f1);
            let mean = counts.iter().map(|c| prf_specificity(c).f1).sum::<f64>() / counts.len() as f64;
            prop_assert!((averaged(&t, &p, AverageMode::Macro).unwrap().f1 - mean).abs() < 1e-15);
        }

        #[test]
        fn harmonic_fixed_point(p in 0.0f64..1.0) {
            prop_assert!((harmonic(p, p) - p).abs() < 1e-15);
        }
    }
}
