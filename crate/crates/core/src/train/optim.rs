use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::invalid(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

/// Moment buffers, one per parameter array; empty for SGD.
#[derive(Clone, Debug, Default)]
pub struct OptimizerState<T> {
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new() -> Self {
        OptimizerState {
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }
}

/// One in-place update of `params` from `grads` (matched array by array).
pub fn optimizer_step<T: Scalar>(
    kind: OptimizerKind,
    learning_rate: f64,
    params: Vec<&mut [T]>,
    grads: Vec<&[T]>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(&grads).any(|(p, g)| p.len() != g.len()) {
        return Err(Error::shape("optimizer: gradients do not match parameters"));
    }
    if let Some(bad) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric(format!(
            "non-finite gradient in parameter array {bad}"
        )));
    }
    state.step += 1;
    let lr = T::from_f64_lossy(learning_rate);
    match kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.into_iter().zip(grads) {
                for (w, &d) in p.iter_mut().zip(g) {
                    *w -= lr * d;
                }
            }
        }
        OptimizerKind::Adam => {
            if state.first.is_empty() {
                state.first = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
                state.second = state.first.clone();
            }
            let (b1, b2) = (ADAM_BETA1, ADAM_BETA2);
            let t = state.step as i32;
            let correction1 = T::from_f64_lossy(1.0 - b1.powi(t));
            let correction2 = T::from_f64_lossy(1.0 - b2.powi(t));
            let (b1, b2) = (T::from_f64_lossy(b1), T::from_f64_lossy(b2));
            let eps = T::from_f64_lossy(ADAM_EPSILON);
            for (((p, g), m), v) in params
                .into_iter()
                .zip(grads)
                .zip(&mut state.first)
                .zip(&mut state.second)
            {
                for (((w, &d), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m + (T::one() - b1) * d;
                    *v = b2 * *v + (T::one() - b2) * d * d;
                    let m_hat = *m / correction1;
                    let v_hat = *v / correction2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}
