//! Dense row-major tensors and the kernels the network is built from.
//!
//! Images and activations use channels-last `(H, W, C)` layout.

use crate::error::{Error, Result};
use crate::scalar::{MatRef, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    /// A tensor of `shape` with every element equal to `fill`.
    pub fn new(shape: &[usize], fill: T) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, T::zero())
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = checked_len(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// `n × n` identity matrix.
    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    /// Interprets the tensor as `(H, W, C)`.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::shape(format!(
                "expected an (H, W, C) tensor, got {:?}",
                self.shape
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn matrix_dims<T: Scalar>(t: &Tensor<T>, name: &str) -> Result<(usize, usize)> {
    match t.shape() {
        &[r, c] => Ok((r, c)),
        s => Err(Error::shape(format!("{name} must be a matrix, got {s:?}"))),
    }
}

/// Matrix product of an `m × k` and a `k × n` tensor.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = matrix_dims(a, "left operand")?;
    let (k2, n) = matrix_dims(b, "right operand")?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dimensions disagree: {m}x{k} times {k2}x{n}"
        )));
    }
    let mut out = vec![T::zero(); m * n];
    T::gemm(
        T::one(),
        MatRef::row_major(a.data(), m, k),
        MatRef::row_major(b.data(), k, n),
        T::zero(),
        &mut out,
    );
    Tensor::from_vec(&[m, n], out)
}

/// 3×3, stride 1, same-padding patch extraction.
///
/// Row `y·W + x` holds the zero-padded receptive field centred on output
/// pixel `(y, x)`; within a row the column index is `(ky·3 + kx)·C + c`.
pub fn im2col<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = x.hwc()?;
    let cols = im2col_raw(x.data(), h, w, c);
    Tensor::from_vec(&[h * w, 9 * c], cols)
}

pub(crate) fn im2col_raw<T: Scalar>(x: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let row_len = 9 * c;
    let mut out = vec![T::zero(); h * w * row_len];
    for y in 0..h {
        for xx in 0..w {
            let row = &mut out[(y * w + xx) * row_len..(y * w + xx + 1) * row_len];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = (sy as usize * w + sx as usize) * c;
                    let dst = (ky * 3 + kx) * c;
                    row[dst..dst + c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col_raw`]: scatters patch-gradients back onto the image.
pub(crate) fn col2im_raw<T: Scalar>(cols: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let row_len = 9 * c;
    let mut out = vec![T::zero(); h * w * c];
    for y in 0..h {
        for xx in 0..w {
            let row = &cols[(y * w + xx) * row_len..(y * w + xx + 1) * row_len];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let dst = (sy as usize * w + sx as usize) * c;
                    let src = (ky * 3 + kx) * c;
                    for (o, &g) in out[dst..dst + c].iter_mut().zip(&row[src..src + c]) {
                        *o += g;
                    }
                }
            }
        }
    }
    out
}
