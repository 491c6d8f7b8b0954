use rayon::prelude::*;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::nn::{dense_sigmoid_head, ForwardCache, Gradients, ModelParams};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::config::TrainConfig;
use crate::train::loss::{bce_loss, bce_sigmoid_grad};
use crate::train::optim::{optimizer_step, OptimizerState};

/// Anything that pairs an input image with its label row.
pub trait Labeled<T> {
    fn image(&self) -> &Tensor<T>;
    fn label_row(&self) -> &[u8];
}

impl Labeled<f32> for Sample {
    fn image(&self) -> &Tensor<f32> {
        &self.image
    }

    fn label_row(&self) -> &[u8] {
        &self.labels
    }
}

impl<T> Labeled<T> for (Tensor<T>, Vec<u8>) {
    fn image(&self) -> &Tensor<T> {
        &self.0
    }

    fn label_row(&self) -> &[u8] {
        &self.1
    }
}

impl<T, S: Labeled<T>> Labeled<T> for &S {
    fn image(&self) -> &Tensor<T> {
        (*self).image()
    }

    fn label_row(&self) -> &[u8] {
        (*self).label_row()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    /// `None` when there is no validation set.
    pub val_loss: Vec<Option<f64>>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    /// `epoch,train_loss,val_loss` with one row per completed epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let v = v.map(|v| format!("{v:.9}")).unwrap_or_default();
            out.push_str(&format!("{},{t:.9},{v}\n", e + 1));
        }
        out
    }
}

/// Forward + backward for one sample; returns `(probabilities, gradients)`.
fn sample_gradients<T: Scalar>(
    model: &ModelParams<T>,
    sample: &(impl Labeled<T> + ?Sized),
    batch_entries: usize,
) -> Result<(Vec<T>, Gradients<T>)> {
    let mut cache = ForwardCache::new();
    let features = model.forward_features(sample.image(), Some(&mut cache))?;
    let probs = dense_sigmoid_head(&features, &model.head)?;
    let dlogits = bce_sigmoid_grad(&probs, sample.label_row(), batch_entries)?;
    let grads = model.backward(&cache, &features, &dlogits)?;
    Ok((probs, grads))
}

/// Mean BCE of `model` over `set`.
pub fn evaluate_loss<T: Scalar, S: Labeled<T> + Sync>(model: &ModelParams<T>, set: &[S]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("cannot evaluate loss on an empty set"));
    }
    let per: Vec<(Vec<T>, &[u8])> = set
        .par_iter()
        .map(|s| Ok((model.predict_proba(s.image())?, s.label_row())))
        .collect::<Result<_>>()?;
    let (probs, labels): (Vec<T>, Vec<u8>) = per
        .into_iter()
        .flat_map(|(p, y)| p.into_iter().zip(y.iter().copied()))
        .unzip();
    bce_loss(&probs, &labels)
}

/// Mini-batch training with a freshly seeded shuffle per epoch.
///
/// Per-sample gradients inside a batch run in parallel and are summed in
/// sample order, so results do not depend on the thread count. With a
/// validation set and a patience, training stops once validation loss has
/// not improved for `patience` epochs, and the best-validation parameters
/// are returned.
pub fn train<T: Scalar, S: Labeled<T> + Sync>(
    mut model: ModelParams<T>,
    train_set: &[S],
    val_set: &[S],
    config: &TrainConfig,
) -> Result<(ModelParams<T>, TrainHistory)> {
    config.validate()?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let n_labels = model.arch.n_labels;
    if let Some(bad) = train_set.iter().chain(val_set).find(|s| s.label_row().len() != n_labels) {
        return Err(Error::shape(format!(
            "sample has {} labels, model predicts {n_labels}",
            bad.label_row().len()
        )));
    }

    let mut rng = Rng::new(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut state = OptimizerState::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ModelParams<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let entries = batch.len() * n_labels;
            let results: Vec<(Vec<T>, Gradients<T>)> = batch
                .par_iter()
                .map(|&i| sample_gradients(&model, &train_set[i], entries))
                .collect::<Result<_>>()?;

            let mut probs = Vec::with_capacity(entries);
            let mut labels = Vec::with_capacity(entries);
            let mut iter = results.into_iter().zip(batch);
            let ((p0, mut total), &i0) = iter.next().expect("chunks are non-empty");
            probs.extend(p0);
            labels.extend_from_slice(train_set[i0].label_row());
            for ((p, g), &i) in iter {
                total.accumulate(&g);
                probs.extend(p);
                labels.extend_from_slice(train_set[i].label_row());
            }
            let batch_loss = bce_loss(&probs, &labels)?;
            if !batch_loss.is_finite() || !total.all_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at epoch {}, batch {b}: loss {batch_loss}",
                    epoch + 1
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;
            optimizer_step(
                config.optimizer,
                config.learning_rate,
                model.arrays_mut(),
                total.arrays(),
                &mut state,
            )?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_loss(&model, val_set)?)
        };
        log::info!(
            "epoch {}: train_loss={train_loss:.6} val_loss={}",
            epoch + 1,
            val_loss.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
        );
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);

        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "validation loss is {v} after epoch {}",
                    epoch + 1
                )));
            }
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if config.early_stop_patience.is_some_and(|p| since_best >= p) {
                    log::info!("early stop after epoch {}", epoch + 1);
                    break;
                }
            }
        }
    }
    let model = best.map(|(_, m)| m).unwrap_or(model);
    Ok((model, history))
}
