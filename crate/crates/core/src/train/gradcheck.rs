//! Finite-difference verification of every analytic backward pass.
//!
//! Instances are built at `f64`; each scalar objective is perturbed by
//! `±epsilon` per coordinate and the central difference compared with the
//! analytic gradient.

use crate::error::{Error, Result};
use crate::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_logits, leaky_relu, leaky_relu_backward,
    maxpool2_backward, maxpool2_forward, sigmoid, Architecture, ConvLayer, DenseLayer, ForwardCache,
    ModelParams,
};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::train::loss::{bce_loss, bce_sigmoid_grad};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// 3×3 conv on a 6×6×2 input with 2 output channels.
    Conv,
    LeakyRelu,
    /// 2×2 pool on a 5×5×2 input (odd sizes exercise the dropped row/column).
    MaxPool,
    /// Dense layer on a length-10 feature vector feeding sigmoid + BCE.
    Dense,
    /// The fused sigmoid + BCE loss with respect to its logits.
    SigmoidBce,
    /// Head weights of a small full network, gradients backpropagated through the conv stack.
    NetworkHead,
}

pub const ALL_LAYER_KINDS: [LayerKind; 6] = [
    LayerKind::Conv,
    LayerKind::LeakyRelu,
    LayerKind::MaxPool,
    LayerKind::Dense,
    LayerKind::SigmoidBce,
    LayerKind::NetworkHead,
];

/// `|a − n| / max(|a|, |n|)`, defined as 0 when both are 0.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Max relative error over the coordinates of `theta` for which `include` is true.
fn compare(
    theta: &[f64],
    analytic: &[f64],
    include: impl Fn(usize) -> bool,
    epsilon: f64,
    objective: impl Fn(&[f64]) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        if !include(i) {
            continue;
        }
        probe[i] = theta[i] + epsilon;
        let up = objective(&probe);
        probe[i] = theta[i] - epsilon;
        let down = objective(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

fn uniform_vec(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs one random instance of `kind` and returns the max relative error.
pub fn grad_check(kind: LayerKind, rng: &mut Rng, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    match kind {
        LayerKind::Conv => {
            let x = uniform_vec(rng, 6 * 6 * 2, -1.0, 1.0);
            let k = uniform_vec(rng, 9 * 2 * 2, -1.0, 1.0);
            let b = uniform_vec(rng, 2, -1.0, 1.0);
            conv_check(&x, &k, &b, rng, epsilon)
        }
        LayerKind::LeakyRelu => {
            let slope = 0.01;
            // keep every element clear of the kink
            let x: Vec<f64> = (0..40)
                .map(|_| loop {
                    let v = rng.uniform(-1.0, 1.0);
                    if v.abs() > 2.0 * epsilon {
                        break v;
                    }
                })
                .collect();
            let r = uniform_vec(rng, 40, -1.0, 1.0);
            let xt = Tensor::from_vec(&[40], x.clone())?;
            let g = leaky_relu_backward(&xt, &Tensor::from_vec(&[40], r.clone())?, slope)?;
            Ok(compare(&x, g.data(), |_| true, epsilon, |t| {
                dot(leaky_relu(&Tensor::from_vec(&[40], t.to_vec()).unwrap(), slope).data(), &r)
            }))
        }
        LayerKind::MaxPool => {
            let shape = [5, 5, 2];
            let x = uniform_vec(rng, 50, -1.0, 1.0);
            let r = uniform_vec(rng, 2 * 2 * 2, -1.0, 1.0);
            let xt = Tensor::from_vec(&shape, x.clone())?;
            let (_, idx) = maxpool2_forward(&xt)?;
            let g = maxpool2_backward(&Tensor::from_vec(&[2, 2, 2], r.clone())?, &idx)?;
            // skip windows whose two largest entries are within 2ε of each other
            let mut near_tie = vec![false; 50];
            for oy in 0..2 {
                for ox in 0..2 {
                    for c in 0..2 {
                        let members: Vec<usize> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                            .iter()
                            .map(|(dy, dx)| ((2 * oy + dy) * 5 + 2 * ox + dx) * 2 + c)
                            .collect();
                        let mut vals: Vec<f64> = members.iter().map(|&i| x[i]).collect();
                        vals.sort_by(|a, b| b.total_cmp(a));
                        if vals[0] - vals[1] < 2.0 * epsilon {
                            for i in members {
                                near_tie[i] = true;
                            }
                        }
                    }
                }
            }
            Ok(compare(&x, g.data(), |i| !near_tie[i], epsilon, |t| {
                let (y, _) = maxpool2_forward(&Tensor::from_vec(&shape, t.to_vec()).unwrap()).unwrap();
                dot(y.data(), &r)
            }))
        }
        LayerKind::Dense => {
            let (n_in, n_out) = (10, 7);
            let f = uniform_vec(rng, n_in, -1.0, 1.0);
            let w = uniform_vec(rng, n_in * n_out, -0.5, 0.5);
            let b = uniform_vec(rng, n_out, -0.5, 0.5);
            let y: Vec<u8> = (0..n_out).map(|_| rng.bernoulli(0.5) as u8).collect();
            let head_of = |w: &[f64], b: &[f64]| {
                DenseLayer::from_parts(Tensor::from_vec(&[n_in, n_out], w.to_vec()).unwrap(), b.to_vec()).unwrap()
            };
            let head = head_of(&w, &b);
            let probs: Vec<f64> = dense_logits(&f, &head)?.into_iter().map(sigmoid).collect();
            let dlogits = bce_sigmoid_grad(&probs, &y, n_out)?;
            let (df, g) = dense_backward(&f, &head, &dlogits)?;
            let theta: Vec<f64> = f.iter().chain(&w).chain(&b).copied().collect();
            let analytic: Vec<f64> = df.iter().chain(&g.weights).chain(&g.bias).copied().collect();
            Ok(compare(&theta, &analytic, |_| true, epsilon, |t| {
                let (tf, rest) = t.split_at(n_in);
                let (tw, tb) = rest.split_at(n_in * n_out);
                let p: Vec<f64> = dense_logits(tf, &head_of(tw, tb)).unwrap().into_iter().map(sigmoid).collect();
                bce_loss(&p, &y).unwrap()
            }))
        }
        LayerKind::SigmoidBce => {
            let n = 3 * 7;
            let z = uniform_vec(rng, n, -4.0, 4.0);
            let y: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.5) as u8).collect();
            let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
            let g = bce_sigmoid_grad(&p, &y, n)?;
            Ok(compare(&z, &g, |_| true, epsilon, |t| {
                bce_loss(&t.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>(), &y).unwrap()
            }))
        }
        LayerKind::NetworkHead => {
            let arch = Architecture {
                input: [8, 8, 2],
                blocks: vec![[3, 3], [4, 4]],
                n_labels: 3,
            };
            let model = ModelParams::<f64>::build(&arch, 0.01, rng)?;
            let image = Tensor::from_vec(&[8, 8, 2], uniform_vec(rng, 128, 0.0, 1.0))?;
            let y: Vec<u8> = (0..3).map(|_| rng.bernoulli(0.5) as u8).collect();
            let mut cache = ForwardCache::new();
            let f = model.forward_features(&image, Some(&mut cache))?;
            let probs: Vec<f64> = dense_logits(&f, &model.head)?.into_iter().map(sigmoid).collect();
            let grads = model.backward(&cache, &f, &bce_sigmoid_grad(&probs, &y, 3)?)?;
            let n_w = model.head.weights.len();
            let theta: Vec<f64> = model.head.weights.data().iter().chain(&model.head.bias).copied().collect();
            let analytic: Vec<f64> = grads.head.weights.iter().chain(&grads.head.bias).copied().collect();
            Ok(compare(&theta, &analytic, |_| true, epsilon, |t| {
                let mut m = model.clone();
                m.head.weights.data_mut().copy_from_slice(&t[..n_w]);
                m.head.bias.copy_from_slice(&t[n_w..]);
                bce_loss(&m.predict_proba(&image).unwrap(), &y).unwrap()
            }))
        }
    }
}

/// Conv check on explicit data; `x` is 6×6×2, kernels `(3, 3, 2, 2)`.
fn conv_check(x: &[f64], k: &[f64], b: &[f64], rng: &mut Rng, epsilon: f64) -> Result<f64> {
    let r = uniform_vec(rng, 6 * 6 * 2, -1.0, 1.0);
    let layer_of = |k: &[f64], b: &[f64]| {
        ConvLayer::from_parts(Tensor::from_vec(&[3, 3, 2, 2], k.to_vec()).unwrap(), b.to_vec()).unwrap()
    };
    let xt = Tensor::from_vec(&[6, 6, 2], x.to_vec())?;
    let (dx, g) = conv2d_backward(&xt, &layer_of(k, b), &Tensor::from_vec(&[6, 6, 2], r.clone())?, true)?;
    let dx = dx.expect("dx requested");
    let theta: Vec<f64> = x.iter().chain(k).chain(b).copied().collect();
    let analytic: Vec<f64> = dx.data().iter().chain(&g.kernels).chain(&g.bias).copied().collect();
    Ok(compare(&theta, &analytic, |_| true, epsilon, |t| {
        let (tx, rest) = t.split_at(72);
        let (tk, tb) = rest.split_at(36);
        let y = conv2d_forward(&Tensor::from_vec(&[6, 6, 2], tx.to_vec()).unwrap(), &layer_of(tk, tb)).unwrap();
        dot(y.data(), &r)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_within_tolerance() {
        let mut rng = Rng::new(10);
        assert!(grad_check(LayerKind::Conv, &mut rng, 1e-3).unwrap() < 1e-4);
    }

    #[test]
    fn dense_head_within_tolerance() {
        let mut rng = Rng::new(11);
        assert!(grad_check(LayerKind::Dense, &mut rng, 1e-3).unwrap() < 1e-5);
    }

    #[test]
    fn network_head_within_tolerance() {
        let mut rng = Rng::new(12);
        assert!(grad_check(LayerKind::NetworkHead, &mut rng, 1e-3).unwrap() < 1e-4);
    }

    #[test]
    fn zero_input_zero_weight_conv() {
        let mut rng = Rng::new(13);
        let err = conv_check(&[0.0; 72], &[0.0; 36], &[0.0; 2], &mut rng, 1e-3).unwrap();
        assert!(err < 1e-9, "{err}");
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let mut rng = Rng::new(0);
        assert!(grad_check(LayerKind::Conv, &mut rng, 0.0).is_err());
        assert!(grad_check(LayerKind::Conv, &mut rng, 0.1).is_err());
    }
}
