use crate::error::{Error, Result};

/// One point of a threshold sweep. `threshold` is infinite for the ROC origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Cumulative `(threshold, tp, fp)` at every distinct score, highest first.
fn sweep(scores: &[f64], y: &[u8]) -> Result<Vec<(f64, usize, usize)>> {
    if scores.len() != y.len() {
        return Err(Error::shape(format!("{} scores vs {} labels", scores.len(), y.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Validation(format!("score {i} is not finite")));
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::Validation(format!("label {i} is not binary")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(pos + 1)
            .map_or(true, |&next| scores[next] != scores[i]);
        if last_of_group {
            out.push((scores[i], tp, fp));
        }
    }
    Ok(out)
}

/// ROC curve as (FPR, TPR) points and its trapezoidal area.
pub fn roc_auc(scores: &[f64], y: &[u8]) -> Result<(Vec<CurvePoint>, f64)> {
    let steps = sweep(scores, y)?;
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC AUC needs both classes present".into(),
        ));
    }
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    // accumulate twice the area in integer pair units so the result is exact
    let mut area2: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for &(threshold, tp, fp) in &steps {
        area2 += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        prev_tp = tp;
        prev_fp = fp;
        points.push(CurvePoint {
            threshold,
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
        });
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((points, auc))
}

/// Precision-recall curve as (recall, precision) points and the average
/// precision `Σ (Rₙ − Rₙ₋₁)·Pₙ`.
pub fn pr_average_precision(scores: &[f64], y: &[u8]) -> Result<(Vec<CurvePoint>, f64)> {
    let steps = sweep(scores, y)?;
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut points = Vec::with_capacity(steps.len());
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &(threshold, tp, fp) in &steps {
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(CurvePoint {
            threshold,
            x: recall,
            y: precision,
        });
    }
    Ok((points, ap))
}
