use crate::error::{Error, Result};
use crate::nn::layers::*;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Shape of a conv stack: blocks of two 3×3 convs, each block closed by a 2×2 max-pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input: [usize; 3],
    /// Output channels of the two convs in each block.
    pub blocks: Vec<[usize; 2]>,
    pub n_labels: usize,
}

impl Architecture {
    /// 200×200×3 input, blocks of 32/64/128/256 filters, 7 sigmoid outputs.
    pub fn skullnet() -> Self {
        Architecture {
            input: [200, 200, 3],
            blocks: vec![[32, 32], [64, 64], [128, 128], [256, 256]],
            n_labels: 7,
        }
    }

    /// `(C_in, C_out)` of every conv layer, in order.
    pub fn conv_channels(&self) -> Vec<(usize, usize)> {
        let mut c = self.input[2];
        let mut out = Vec::with_capacity(2 * self.blocks.len());
        for block in &self.blocks {
            for &co in block {
                out.push((c, co));
                c = co;
            }
        }
        out
    }

    /// Activation shapes after every conv and pool layer, in order.
    pub fn activation_shapes(&self) -> Vec<[usize; 3]> {
        let [mut h, mut w, _] = self.input;
        let mut out = Vec::new();
        for block in &self.blocks {
            for &co in block {
                out.push([h, w, co]);
            }
            h /= 2;
            w /= 2;
            out.push([h, w, block[1]]);
        }
        out
    }

    pub fn feature_shape(&self) -> [usize; 3] {
        *self
            .activation_shapes()
            .last()
            .expect("architecture has at least one block")
    }

    pub fn feature_len(&self) -> usize {
        self.feature_shape().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.n_labels == 0 || self.input.contains(&0) {
            return Err(Error::invalid("architecture needs an input, blocks and labels"));
        }
        if self.blocks.iter().flatten().any(|&c| c == 0) {
            return Err(Error::invalid("zero-width conv layer"));
        }
        let [h, w, _] = self.input;
        if h >> self.blocks.len() == 0 || w >> self.blocks.len() == 0 {
            return Err(Error::invalid(format!(
                "input {h}x{w} too small for {} pooling stages",
                self.blocks.len()
            )));
        }
        Ok(())
    }
}

/// All trainable parameters: the conv stack (two layers per block) and the dense head.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Architecture,
    pub convs: Vec<ConvLayer<T>>,
    pub head: DenseLayer<T>,
    pub leaky_slope: T,
}

impl<T: Scalar> ModelParams<T> {
    /// He-normal kernels and head weights, zero biases.
    pub fn build(arch: &Architecture, leaky_slope: f64, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let convs = arch
            .conv_channels()
            .into_iter()
            .map(|(ci, co)| ConvLayer::he_init(rng, ci, co))
            .collect::<Result<Vec<_>>>()?;
        let head = DenseLayer::he_init(rng, arch.feature_len(), arch.n_labels)?;
        Ok(ModelParams {
            arch: arch.clone(),
            convs,
            head,
            leaky_slope: T::from_f64_lossy(leaky_slope),
        })
    }

    pub fn from_parts(
        arch: Architecture,
        convs: Vec<ConvLayer<T>>,
        head: DenseLayer<T>,
        leaky_slope: T,
    ) -> Result<Self> {
        arch.validate()?;
        let expected = arch.conv_channels();
        let actual: Vec<_> = convs
            .iter()
            .map(|c| (c.in_channels(), c.out_channels()))
            .collect();
        if expected != actual {
            return Err(Error::shape(format!(
                "conv layers {actual:?} do not realize architecture {expected:?}"
            )));
        }
        if head.in_dim() != arch.feature_len() || head.out_dim() != arch.n_labels {
            return Err(Error::shape(format!(
                "head is {}x{}, architecture needs {}x{}",
                head.in_dim(),
                head.out_dim(),
                arch.feature_len(),
                arch.n_labels
            )));
        }
        Ok(ModelParams {
            arch,
            convs,
            head,
            leaky_slope,
        })
    }

    pub fn head_param_count(&self) -> usize {
        self.head.param_count()
    }

    /// Every parameter array in a fixed order: per conv (kernels, bias), then head (weights, bias).
    pub fn arrays_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for conv in &mut self.convs {
            out.push(conv.kernels.data_mut());
            out.push(&mut conv.bias);
        }
        out.push(self.head.weights.data_mut());
        out.push(&mut self.head.bias);
        out
    }

    pub fn arrays(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for conv in &self.convs {
            out.push(conv.kernels.data());
            out.push(&conv.bias);
        }
        out.push(self.head.weights.data());
        out.push(&self.head.bias);
        out
    }

    /// Forward pass up to and including flatten. Fills `cache` when given.
    pub fn forward_features(
        &self,
        image: &Tensor<T>,
        mut cache: Option<&mut ForwardCache<T>>,
    ) -> Result<Vec<T>> {
        if image.shape() != self.arch.input {
            return Err(Error::shape(format!(
                "model expects input {:?}, got {:?}",
                self.arch.input,
                image.shape()
            )));
        }
        if let Some(c) = cache.as_deref_mut() {
            c.clear();
        }
        let mut x = image.clone();
        let mut convs = self.convs.iter();
        for _ in &self.arch.blocks {
            for _ in 0..2 {
                let layer = convs.next().expect("conv count matches architecture");
                let z = conv2d_forward(&x, layer)?;
                let a = leaky_relu(&z, self.leaky_slope);
                if let Some(c) = cache.as_deref_mut() {
                    c.conv_inputs.push(std::mem::replace(&mut x, a));
                    c.pre_activations.push(z);
                } else {
                    x = a;
                }
            }
            let (pooled, index) = maxpool2_forward(&x)?;
            if let Some(c) = cache.as_deref_mut() {
                c.pools.push(index);
            }
            x = pooled;
        }
        flatten(&x, self.arch.feature_shape())
    }

    /// Head probabilities for one image.
    pub fn predict_proba(&self, image: &Tensor<T>) -> Result<Vec<T>> {
        let f = self.forward_features(image, None)?;
        dense_sigmoid_head(&f, &self.head)
    }

    /// Gradients of all parameters given upstream logit gradients for the
    /// features recorded in `cache` (from a [`Self::forward_features`] call).
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        features: &[T],
        dlogits: &[T],
    ) -> Result<Gradients<T>> {
        let n_conv = self.convs.len();
        if cache.conv_inputs.len() != n_conv || cache.pools.len() != self.arch.blocks.len() {
            return Err(Error::shape("forward cache does not belong to this model"));
        }
        let (df, head_grads) = dense_backward(features, &self.head, dlogits)?;
        let mut dy = Tensor::from_vec(&self.arch.feature_shape(), df)?;
        let mut conv_grads = vec![None; n_conv];
        for (b, _) in self.arch.blocks.iter().enumerate().rev() {
            dy = maxpool2_backward(&dy, &cache.pools[b])?;
            for l in [2 * b + 1, 2 * b] {
                let dz = leaky_relu_backward(&cache.pre_activations[l], &dy, self.leaky_slope)?;
                let (dx, g) = conv2d_backward(&cache.conv_inputs[l], &self.convs[l], &dz, l > 0)?;
                conv_grads[l] = Some(g);
                if let Some(dx) = dx {
                    dy = dx;
                }
            }
        }
        Ok(Gradients {
            convs: conv_grads
                .into_iter()
                .map(|g| g.expect("every conv visited"))
                .collect(),
            head: head_grads,
        })
    }
}

/// Per-sample state recorded on the forward pass for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T> {
    pub conv_inputs: Vec<Tensor<T>>,
    pub pre_activations: Vec<Tensor<T>>,
    pub pools: Vec<PoolIndex>,
}

impl<T> ForwardCache<T> {
    pub fn new() -> Self {
        ForwardCache {
            conv_inputs: Vec::new(),
            pre_activations: Vec::new(),
            pools: Vec::new(),
        }
    }

    fn clear(&mut self) {
        self.conv_inputs.clear();
        self.pre_activations.clear();
        self.pools.clear();
    }
}

/// Parameter gradients, laid out like [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub convs: Vec<ConvGrads<T>>,
    pub head: DenseGrads<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Same order as [`ModelParams::arrays`].
    pub fn arrays(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for g in &self.convs {
            out.push(&g.kernels);
            out.push(&g.bias);
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for g in &mut self.convs {
            out.push(&mut g.kernels);
            out.push(&mut g.bias);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// The full extractor with He-initialized weights.
pub fn build_extractor(rng: &mut Rng) -> Result<ModelParams<f32>> {
    ModelParams::build(&Architecture::skullnet(), DEFAULT_LEAKY_SLOPE, rng)
}

/// Trainable parameters of the conv stack (the head is counted separately).
pub fn count_params<T: Scalar>(params: &ModelParams<T>) -> usize {
    params.convs.iter().map(ConvLayer::param_count).sum()
}

/// Flatten-layer feature vector for one preprocessed image.
pub fn extract_features<T: Scalar>(params: &ModelParams<T>, image: &Tensor<T>) -> Result<Vec<T>> {
    params.forward_features(image, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_arch() -> Architecture {
        Architecture {
            input: [10, 10, 3],
            blocks: vec![[4, 4], [6, 6]],
            n_labels: 7,
        }
    }

    #[test]
    fn table_one_parameter_counts() {
        let params = build_extractor(&mut Rng::new(0)).unwrap();
        let per_layer: Vec<usize> = params.convs.iter().map(|c| c.param_count()).collect();
        assert_eq!(
            per_layer,
            vec![896, 9248, 18496, 36928, 73856, 147584, 295168, 590080]
        );
        assert_eq!(count_params(&params), 1_172_256);
        assert_eq!(params.head.in_dim(), 36864);
        assert_eq!(params.head.out_dim(), 7);
        assert_eq!(params.head_param_count(), 36864 * 7 + 7);
    }

    #[test]
    fn table_one_activation_shapes() {
        let shapes = Architecture::skullnet().activation_shapes();
        let want = [
            [200, 200, 32],
            [200, 200, 32],
            [100, 100, 32],
            [100, 100, 64],
            [100, 100, 64],
            [50, 50, 64],
            [50, 50, 128],
            [50, 50, 128],
            [25, 25, 128],
            [25, 25, 256],
            [25, 25, 256],
            [12, 12, 256],
        ];
        assert_eq!(shapes, want);
        assert_eq!(Architecture::skullnet().feature_len(), 36864);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = ModelParams::<f32>::build(&toy_arch(), 0.01, &mut Rng::new(5)).unwrap();
        let b = ModelParams::<f32>::build(&toy_arch(), 0.01, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_image_gives_zero_features() {
        let params = ModelParams::<f32>::build(&toy_arch(), 0.01, &mut Rng::new(5)).unwrap();
        let f = extract_features(&params, &Tensor::zeros(&[10, 10, 3]).unwrap()).unwrap();
        assert_eq!(f.len(), 2 * 2 * 6);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extract_equals_manual_composition() {
        let mut rng = Rng::new(9);
        let params = ModelParams::<f32>::build(&toy_arch(), 0.01, &mut rng).unwrap();
        let img = Tensor::from_vec(&[10, 10, 3], (0..300).map(|_| rng.next_f64() as f32).collect()).unwrap();
        let mut x = img.clone();
        for b in 0..2 {
            for l in [2 * b, 2 * b + 1] {
                x = leaky_relu(&conv2d_forward(&x, &params.convs[l]).unwrap(), 0.01);
            }
            x = maxpool2_forward(&x).unwrap().0;
        }
        let manual = flatten(&x, [2, 2, 6]).unwrap();
        assert_eq!(extract_features(&params, &img).unwrap(), manual);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let params = ModelParams::<f32>::build(&toy_arch(), 0.01, &mut Rng::new(5)).unwrap();
        assert!(matches!(
            extract_features(&params, &Tensor::zeros(&[10, 10, 1]).unwrap()),
            Err(Error::Shape(_))
        ));
    }
}
