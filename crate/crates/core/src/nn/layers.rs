//! Forward and backward passes for every layer type in the network.

use crate::error::{Error, Result};
use crate::rng::{he_normal, Rng};
use crate::scalar::{MatRef, Scalar};
use crate::tensor::{col2im_raw, im2col_raw, Tensor};

/// 3×3 same-padded, stride-1 convolution (cross-correlation, no kernel flip).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    /// `(3, 3, C_in, C_out)`.
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    /// He-normal kernels (fan-in `9·C_in`) and zero biases.
    pub fn he_init(rng: &mut Rng, in_channels: usize, out_channels: usize) -> Result<Self> {
        let fan_in = 9 * in_channels;
        let kernels = Tensor::from_vec(
            &[3, 3, in_channels, out_channels],
            he_normal(rng, fan_in, fan_in * out_channels)?,
        )?;
        Ok(ConvLayer {
            kernels,
            bias: vec![T::zero(); out_channels],
        })
    }

    pub fn from_parts(kernels: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        match kernels.shape() {
            &[3, 3, _, co] if co == bias.len() => Ok(ConvLayer { kernels, bias }),
            s => Err(Error::shape(format!(
                "conv kernels {s:?} incompatible with {} biases",
                bias.len()
            ))),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[3]
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let (h, w, c) = x.hwc()?;
    if c != layer.in_channels() {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {c}",
            layer.in_channels()
        )));
    }
    let co = layer.out_channels();
    let cols = im2col_raw(x.data(), h, w, c);
    let mut out = Vec::with_capacity(h * w * co);
    for _ in 0..h * w {
        out.extend_from_slice(&layer.bias);
    }
    T::gemm(
        T::one(),
        MatRef::row_major(&cols, h * w, 9 * c),
        MatRef::row_major(layer.kernels.data(), 9 * c, co),
        T::one(),
        &mut out,
    );
    Tensor::from_vec(&[h, w, co], out)
}

/// Gradients of [`conv2d_forward`] given its input `x` and upstream `dy`.
///
/// `dx` is skipped when `need_dx` is false (the first layer never needs it).
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    layer: &ConvLayer<T>,
    dy: &Tensor<T>,
    need_dx: bool,
) -> Result<(Option<Tensor<T>>, ConvGrads<T>)> {
    let (h, w, c) = x.hwc()?;
    let co = layer.out_channels();
    if c != layer.in_channels() || dy.shape() != [h, w, co] {
        return Err(Error::shape(format!(
            "conv backward: input {:?} / upstream {:?} do not match layer {:?}",
            x.shape(),
            dy.shape(),
            layer.kernels.shape()
        )));
    }
    let hw = h * w;
    let cols = im2col_raw(x.data(), h, w, c);

    let mut dk = vec![T::zero(); 9 * c * co];
    T::gemm(
        T::one(),
        MatRef::transposed(&cols, hw, 9 * c),
        MatRef::row_major(dy.data(), hw, co),
        T::zero(),
        &mut dk,
    );
    drop(cols);

    let mut db = vec![T::zero(); co];
    for px in dy.data().chunks_exact(co) {
        for (b, &g) in db.iter_mut().zip(px) {
            *b += g;
        }
    }

    let dx = if need_dx {
        let mut dcols = vec![T::zero(); hw * 9 * c];
        T::gemm(
            T::one(),
            MatRef::row_major(dy.data(), hw, co),
            MatRef::transposed(layer.kernels.data(), 9 * c, co),
            T::zero(),
            &mut dcols,
        );
        Some(Tensor::from_vec(&[h, w, c], col2im_raw(&dcols, h, w, c))?)
    } else {
        None
    };
    Ok((
        dx,
        ConvGrads {
            kernels: dk,
            bias: db,
        },
    ))
}

/// `v` for `v ≥ 0`, `slope·v` otherwise.
pub fn leaky_relu<T: Scalar>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v >= T::zero() { v } else { slope * v })
}

/// Backward of [`leaky_relu`]; `z` is the forward input.
pub fn leaky_relu_backward<T: Scalar>(z: &Tensor<T>, dy: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
    if z.shape() != dy.shape() {
        return Err(Error::shape(format!(
            "leaky relu backward: {:?} vs {:?}",
            z.shape(),
            dy.shape()
        )));
    }
    let data = z
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v >= T::zero() { g } else { slope * g })
        .collect();
    Tensor::from_vec(z.shape(), data)
}

/// Winning input positions of a 2×2 max-pool, one flat input index per output element.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolIndex {
    pub input_shape: [usize; 3],
    pub argmax: Vec<u32>,
}

/// 2×2, stride-2 max pooling; a trailing odd row/column is dropped.
/// Ties go to the first element of the window in row-major order.
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndex)> {
    let (h, w, c) = x.hwc()?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!(
            "max-pool needs H, W >= 2, got {:?}",
            x.shape()
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            let base = [
                ((2 * oy) * w + 2 * ox) * c,
                ((2 * oy) * w + 2 * ox + 1) * c,
                ((2 * oy + 1) * w + 2 * ox) * c,
                ((2 * oy + 1) * w + 2 * ox + 1) * c,
            ];
            for ch in 0..c {
                let mut best = base[0] + ch;
                for &b in &base[1..] {
                    if src[b + ch] > src[best] {
                        best = b + ch;
                    }
                }
                out.push(src[best]);
                argmax.push(best as u32);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[oh, ow, c], out)?,
        PoolIndex {
            input_shape: [h, w, c],
            argmax,
        },
    ))
}

pub fn maxpool2_backward<T: Scalar>(dy: &Tensor<T>, index: &PoolIndex) -> Result<Tensor<T>> {
    let [h, w, c] = index.input_shape;
    if dy.shape() != [h / 2, w / 2, c] || dy.len() != index.argmax.len() {
        return Err(Error::shape(format!(
            "max-pool backward: upstream {:?} does not match input {:?}",
            dy.shape(),
            index.input_shape
        )));
    }
    let mut dx = vec![T::zero(); h * w * c];
    for (&i, &g) in index.argmax.iter().zip(dy.data()) {
        dx[i as usize] += g;
    }
    Tensor::from_vec(&index.input_shape, dx)
}

/// Row-major flattening of an `(H, W, C)` tensor; `(i, j, c)` lands at `(i·W + j)·C + c`.
pub fn flatten<T: Scalar>(x: &Tensor<T>, expected: [usize; 3]) -> Result<Vec<T>> {
    if x.shape() != expected {
        return Err(Error::shape(format!(
            "flatten expects {expected:?}, got {:?}",
            x.shape()
        )));
    }
    Ok(x.data().to_vec())
}

/// Fully connected layer, `weights` is `(in_dim, out_dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn he_init(rng: &mut Rng, in_dim: usize, out_dim: usize) -> Result<Self> {
        Ok(DenseLayer {
            weights: Tensor::from_vec(&[in_dim, out_dim], he_normal(rng, in_dim, in_dim * out_dim)?)?,
            bias: vec![T::zero(); out_dim],
        })
    }

    pub fn from_parts(weights: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        match weights.shape() {
            &[_, o] if o == bias.len() => Ok(DenseLayer { weights, bias }),
            s => Err(Error::shape(format!(
                "dense weights {s:?} incompatible with {} biases",
                bias.len()
            ))),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `Wᵀf + b`.
pub fn dense_logits<T: Scalar>(features: &[T], head: &DenseLayer<T>) -> Result<Vec<T>> {
    if features.len() != head.in_dim() {
        return Err(Error::shape(format!(
            "dense head expects {} features, got {}",
            head.in_dim(),
            features.len()
        )));
    }
    let mut out = head.bias.clone();
    T::gemm(
        T::one(),
        MatRef::row_major(features, 1, head.in_dim()),
        MatRef::row_major(head.weights.data(), head.in_dim(), head.out_dim()),
        T::one(),
        &mut out,
    );
    Ok(out)
}

/// Independent per-label sigmoid probabilities; labels are not mutually exclusive.
pub fn dense_sigmoid_head<T: Scalar>(features: &[T], head: &DenseLayer<T>) -> Result<Vec<T>> {
    Ok(dense_logits(features, head)?.into_iter().map(sigmoid).collect())
}

/// Returns `(d features, weight/bias grads)` for upstream logit gradients.
pub fn dense_backward<T: Scalar>(
    features: &[T],
    head: &DenseLayer<T>,
    dlogits: &[T],
) -> Result<(Vec<T>, DenseGrads<T>)> {
    let (n_in, n_out) = (head.in_dim(), head.out_dim());
    if features.len() != n_in || dlogits.len() != n_out {
        return Err(Error::shape(format!(
            "dense backward: {} features / {} logit grads for a {n_in}x{n_out} layer",
            features.len(),
            dlogits.len()
        )));
    }
    let mut dw = vec![T::zero(); n_in * n_out];
    for (row, &f) in dw.chunks_exact_mut(n_out).zip(features) {
        for (g, &d) in row.iter_mut().zip(dlogits) {
            *g = f * d;
        }
    }
    let df = head
        .weights
        .data()
        .chunks_exact(n_out)
        .map(|row| row.iter().zip(dlogits).map(|(&w, &d)| w * d).sum())
        .collect();
    Ok((
        df,
        DenseGrads {
            weights: dw,
            bias: dlogits.to_vec(),
        },
    ))
}
