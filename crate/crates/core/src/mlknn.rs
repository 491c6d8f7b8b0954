//! Multi-label k-nearest-neighbour classification with per-label
//! maximum-a-posteriori decisions.
//!
//! Fitting stores the training features and, for each label `ℓ`, a
//! Laplace-smoothed prior and two likelihood tables over the number `j`
//! of positive neighbours among the `k` nearest (leave-one-out on the
//! training set):
//!
//! ```text
//! prior1[ℓ]   = (s + #positives) / (2s + m),   prior0[ℓ] = 1 − prior1[ℓ]
//! P(E_j | H1) = (s + κ1[ℓ][j]) / (s(k+1) + Σ_j κ1[ℓ][j])     (same for H0)
//! ```
//!
//! A query with `C` positive neighbours gets label `ℓ` iff
//! `prior1·P(E_C|H1) ≥ prior0·P(E_C|H0)`; its confidence is the
//! normalized posterior.

use rayon::prelude::*;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlknnConfig {
    pub k: usize,
    pub smoothing: f64,
    /// L2-normalize feature vectors before any distance computation.
    pub normalize: bool,
}

impl Default for MlknnConfig {
    fn default() -> Self {
        MlknnConfig {
            k: 3,
            smoothing: 1.0,
            normalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlknnModel<T> {
    pub config: MlknnConfig,
    pub dim: usize,
    /// `m × dim`, row-major; already normalized when `config.normalize` is set.
    pub features: Vec<T>,
    pub labels: LabelMatrix,
    pub prior1: Vec<f64>,
    pub prior0: Vec<f64>,
    /// `[label][j]` for `j ∈ 0..=k`.
    pub posterior1: Vec<Vec<f64>>,
    pub posterior0: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub confidences: Vec<f64>,
}

/// Squared Euclidean distance with `f64` accumulation.
fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum()
}

pub fn euclidean_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "distance between vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(squared_distance(a, b).sqrt())
}

fn l2_normalized<T: Scalar>(v: &[T]) -> Vec<T> {
    let norm = v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|&x| T::from_f64_lossy(x.as_f64() / norm)).collect()
}

/// The `k` smallest `(distance², index)` pairs, ascending, ties by index.
fn smallest_k(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Indices of the `k` rows of `features` nearest to `query`, sorted by
/// `(distance, index)`; `exclude` removes one row from consideration.
pub fn k_nearest<T: Scalar>(
    features: &[T],
    dim: usize,
    query: &[T],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    if dim == 0 || features.len() % dim != 0 || query.len() != dim {
        return Err(Error::shape(format!(
            "query of length {} against {} values of dimension {dim}",
            query.len(),
            features.len()
        )));
    }
    let m = features.len() / dim;
    let available = m - exclude.map_or(0, |e| (e < m) as usize);
    if k == 0 || k > available {
        return Err(Error::invalid(format!(
            "need 1 <= k <= {available} candidate neighbours, got k = {k}"
        )));
    }
    let candidates = features
        .chunks_exact(dim)
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| (squared_distance(row, query), i))
        .collect();
    Ok(smallest_k(candidates, k))
}

/// Fits the prior and likelihood tables from `m × dim` features and an `m × L` label matrix.
pub fn fit_mlknn<T: Scalar>(
    features: &[T],
    dim: usize,
    labels: &LabelMatrix,
    config: MlknnConfig,
) -> Result<MlknnModel<T>> {
    let MlknnConfig { k, smoothing: s, .. } = config;
    if dim == 0 || features.len() % dim != 0 {
        return Err(Error::shape(format!(
            "{} feature values do not form rows of dimension {dim}",
            features.len()
        )));
    }
    let m = features.len() / dim;
    if labels.n_rows() != m {
        return Err(Error::shape(format!(
            "{m} feature rows but {} label rows",
            labels.n_rows()
        )));
    }
    if k == 0 || m <= k {
        return Err(Error::invalid(format!(
            "ML-KNN needs at least k + 1 = {} training rows and k >= 1, got m = {m}",
            k + 1
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("smoothing must be positive"));
    }
    let stored: Vec<T> = if config.normalize {
        features.chunks_exact(dim).flat_map(l2_normalized).collect()
    } else {
        features.to_vec()
    };

    // symmetric pairwise distances, upper triangle computed once
    let rows: Vec<&[T]> = stored.chunks_exact(dim).collect();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i + 1..m).map(|j| squared_distance(rows[i], rows[j])).collect())
        .collect();
    let dist = |i: usize, j: usize| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        upper[a][b - a - 1]
    };
    let neighbours: Vec<Vec<usize>> = (0..m)
        .map(|i| smallest_k((0..m).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect(), k))
        .collect();

    let n_labels = labels.n_cols();
    let mut prior1 = Vec::with_capacity(n_labels);
    let mut prior0 = Vec::with_capacity(n_labels);
    let mut posterior1 = Vec::with_capacity(n_labels);
    let mut posterior0 = Vec::with_capacity(n_labels);
    for l in 0..n_labels {
        let positives = (0..m).filter(|&i| labels.get(i, l) == 1).count();
        let p1 = (s + positives as f64) / (2.0 * s + m as f64);
        prior1.push(p1);
        prior0.push(1.0 - p1);

        let mut kappa1 = vec![0usize; k + 1];
        let mut kappa0 = vec![0usize; k + 1];
        for (i, nb) in neighbours.iter().enumerate() {
            let delta = nb.iter().filter(|&&j| labels.get(j, l) == 1).count();
            if labels.get(i, l) == 1 {
                kappa1[delta] += 1;
            } else {
                kappa0[delta] += 1;
            }
        }
        let table = |kappa: &[usize]| {
            let total = kappa.iter().sum::<usize>() as f64;
            kappa
                .iter()
                .map(|&c| (s + c as f64) / (s * (k + 1) as f64 + total))
                .collect::<Vec<f64>>()
        };
        posterior1.push(table(&kappa1));
        posterior0.push(table(&kappa0));
    }
    Ok(MlknnModel {
        config,
        dim,
        features: stored,
        labels: labels.clone(),
        prior1,
        prior0,
        posterior1,
        posterior0,
    })
}

impl<T: Scalar> MlknnModel<T> {
    pub fn n_train(&self) -> usize {
        self.labels.n_rows()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_cols()
    }

    fn prepared_query(&self, query: &[T]) -> Vec<T> {
        if self.config.normalize {
            l2_normalized(query)
        } else {
            query.to_vec()
        }
    }

    /// The `k` nearest training rows to `query`.
    pub fn knn_neighbors(&self, query: &[T], k: usize) -> Result<Vec<usize>> {
        k_nearest(&self.features, self.dim, &self.prepared_query(query), k, None)
    }

    /// Number of positive neighbours per label among the `k` nearest.
    pub fn neighbour_counts(&self, query: &[T]) -> Result<Vec<usize>> {
        let nb = self.knn_neighbors(query, self.config.k)?;
        Ok((0..self.n_labels())
            .map(|l| nb.iter().filter(|&&j| self.labels.get(j, l) == 1).count())
            .collect())
    }

    /// MAP decision and normalized posterior from per-label neighbour counts.
    pub fn decide(&self, counts: &[usize]) -> Result<Prediction> {
        if counts.len() != self.n_labels() || counts.iter().any(|&c| c > self.config.k) {
            return Err(Error::invalid(format!("invalid neighbour counts {counts:?}")));
        }
        let mut labels = Vec::with_capacity(counts.len());
        let mut confidences = Vec::with_capacity(counts.len());
        for (l, &c) in counts.iter().enumerate() {
            let p1 = self.prior1[l] * self.posterior1[l][c];
            let p0 = self.prior0[l] * self.posterior0[l][c];
            labels.push((p1 >= p0) as u8);
            confidences.push(p1 / (p1 + p0));
        }
        Ok(Prediction {
            labels,
            confidences,
        })
    }

    pub fn predict(&self, query: &[T]) -> Result<Prediction> {
        if query.len() != self.dim {
            return Err(Error::shape(format!(
                "query has {} features, model expects {}",
                query.len(),
                self.dim
            )));
        }
        self.decide(&self.neighbour_counts(query)?)
    }

    /// Checks the table invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let (m, l, k) = (self.n_train(), self.n_labels(), self.config.k);
        if self.dim == 0 || self.features.len() != m * self.dim {
            return Err(Error::Validation("feature block does not match label rows".into()));
        }
        if k == 0 || m <= k {
            return Err(Error::Validation(format!("k = {k} invalid for {m} training rows")));
        }
        if [self.prior1.len(), self.prior0.len(), self.posterior1.len(), self.posterior0.len()] != [l; 4] {
            return Err(Error::Validation("table count does not match label count".into()));
        }
        for j in 0..l {
            if (self.prior1[j] + self.prior0[j] - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("priors of label {j} do not sum to 1")));
            }
            for table in [&self.posterior1[j], &self.posterior0[j]] {
                if table.len() != k + 1 || table.iter().any(|&p| !(p > 0.0))
                    || (table.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(Error::Validation(format!(
                        "likelihood table of label {j} is not a positive distribution over 0..={k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Indicator decision `confidence > tau`, per label.
pub fn apply_threshold(confidences: &[f64], tau: &[f64]) -> Result<Vec<u8>> {
    if confidences.len() != tau.len() {
        return Err(Error::shape(format!(
            "{} confidences vs {} thresholds",
            confidences.len(),
            tau.len()
        )));
    }
    Ok(confidences.iter().zip(tau).map(|(&c, &t)| (c > t) as u8).collect())
}
