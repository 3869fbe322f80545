//! The speaker-classification CNN: two conv+pool stages, two dense layers
//! with dropout between them, and a softmax output. The second dense layer's
//! activations double as speaker embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{MelSnippet, MEL_BANDS, SNIPPET_FRAMES};
use crate::nn::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, maxpool_backward, maxpool_forward, softmax_cross_entropy,
    softmax_cross_entropy_grad, Activation,
};
use crate::nn::tensor::{Real, Tensor};

/// Layer sizing; every model records the architecture it was built with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input shape (channels, mel bands, frames).
    pub input: (usize, usize, usize),
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    /// Square kernel side for both conv layers.
    pub kernel: usize,
    /// Pool side for both pooling layers.
    pub pool: usize,
    pub dense1_units: usize,
    pub dense2_units: usize,
    pub num_classes: usize,
}

impl Architecture {
    /// Full-size architecture: 32/64 conv filters, 5000/2500 dense units.
    pub fn full(num_classes: usize) -> Self {
        Self {
            input: (1, MEL_BANDS, SNIPPET_FRAMES),
            conv1_filters: 32,
            conv2_filters: 64,
            kernel: 3,
            pool: 4,
            dense1_units: 5000,
            dense2_units: 2500,
            num_classes,
        }
    }

    /// Desk-scale variant (4/8 conv filters, 32/16 dense units) preserving
    /// the layer pattern; used by fast tests and the `--reduced` flag.
    pub fn reduced(num_classes: usize) -> Self {
        Self {
            conv1_filters: 4,
            conv2_filters: 8,
            dense1_units: 32,
            dense2_units: 16,
            ..Self::full(num_classes)
        }
    }

    /// Output shape of conv1.
    pub fn conv1_out(&self) -> (usize, usize, usize) {
        let (_, h, w) = self.input;
        (self.conv1_filters, h - self.kernel + 1, w - self.kernel + 1)
    }

    /// Output shape of pool1.
    pub fn pool1_out(&self) -> (usize, usize, usize) {
        let (c, h, w) = self.conv1_out();
        (c, h / self.pool, w / self.pool)
    }

    /// Output shape of conv2.
    pub fn conv2_out(&self) -> (usize, usize, usize) {
        let (_, h, w) = self.pool1_out();
        (self.conv2_filters, h - self.kernel + 1, w - self.kernel + 1)
    }

    /// Output shape of pool2.
    pub fn pool2_out(&self) -> (usize, usize, usize) {
        let (c, h, w) = self.conv2_out();
        (c, h / self.pool, w / self.pool)
    }

    /// Flattened length feeding the first dense layer.
    pub fn flatten_len(&self) -> usize {
        let (c, h, w) = self.pool2_out();
        c * h * w
    }

    /// Checks that every stage keeps positive spatial extent.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, n: usize| {
            if n == 0 {
                Err(Error::Config(format!("architecture leaves {name} empty")))
            } else {
                Ok(())
            }
        };
        positive("input channels", self.input.0)?;
        positive("conv1_filters", self.conv1_filters)?;
        positive("conv2_filters", self.conv2_filters)?;
        positive("dense1_units", self.dense1_units)?;
        positive("dense2_units", self.dense2_units)?;
        positive("num_classes", self.num_classes)?;
        if self.kernel == 0 || self.pool == 0 {
            return Err(Error::Config("kernel and pool must be positive".into()));
        }
        let (_, h0, w0) = self.input;
        if h0 < self.kernel || w0 < self.kernel {
            return Err(Error::Config("input smaller than conv1 kernel".into()));
        }
        let (_, h1, w1) = self.conv1_out();
        if h1 < self.pool || w1 < self.pool {
            return Err(Error::Config("conv1 output smaller than pool".into()));
        }
        let (_, h2, w2) = self.pool1_out();
        if h2 < self.kernel || w2 < self.kernel {
            return Err(Error::Config("pool1 output smaller than conv2 kernel".into()));
        }
        let (_, h3, w3) = self.conv2_out();
        if h3 < self.pool || w3 < self.pool {
            return Err(Error::Config("conv2 output smaller than pool".into()));
        }
        Ok(())
    }
}

/// Parameter tensors in declaration (serialization) order.
pub const PARAM_NAMES: [&str; 10] = [
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense1_w", "dense1_b", "dense2_w", "dense2_b",
    "out_w", "out_b",
];

/// The CNN with all parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T> {
    pub arch: Architecture,
    pub conv1_w: Tensor<T>,
    pub conv1_b: Tensor<T>,
    pub conv2_w: Tensor<T>,
    pub conv2_b: Tensor<T>,
    pub dense1_w: Tensor<T>,
    pub dense1_b: Tensor<T>,
    pub dense2_w: Tensor<T>,
    pub dense2_b: Tensor<T>,
    pub out_w: Tensor<T>,
    pub out_b: Tensor<T>,
}

fn uniform_tensor<T: Real>(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| T::of((rng.gen::<f64>() * 2.0 - 1.0) * limit))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches generated length")
}

impl<T: Real> CnnModel<T> {
    /// Initializes weights He-uniform where a ReLU follows (dense1, dense2)
    /// and Glorot-uniform elsewhere (linear convs, softmax layer); biases
    /// start at zero. Draws happen in f64 in declaration order, so a given
    /// seed produces the same model at either precision.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = arch.kernel * arch.kernel;

        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let he = |fan_in: usize| (6.0 / fan_in as f64).sqrt();

        let c1_fan_in = arch.input.0 * k2;
        let c1_fan_out = arch.conv1_filters * k2;
        let conv1_w = uniform_tensor(
            &[arch.conv1_filters, arch.input.0, arch.kernel, arch.kernel],
            glorot(c1_fan_in, c1_fan_out),
            &mut rng,
        );
        let c2_fan_in = arch.conv1_filters * k2;
        let c2_fan_out = arch.conv2_filters * k2;
        let conv2_w = uniform_tensor(
            &[arch.conv2_filters, arch.conv1_filters, arch.kernel, arch.kernel],
            glorot(c2_fan_in, c2_fan_out),
            &mut rng,
        );
        let flat = arch.flatten_len();
        let dense1_w = uniform_tensor(&[arch.dense1_units, flat], he(flat), &mut rng);
        let dense2_w = uniform_tensor(
            &[arch.dense2_units, arch.dense1_units],
            he(arch.dense1_units),
            &mut rng,
        );
        let out_w = uniform_tensor(
            &[arch.num_classes, arch.dense2_units],
            glorot(arch.dense2_units, arch.num_classes),
            &mut rng,
        );

        Ok(Self {
            conv1_b: Tensor::zeros(&[arch.conv1_filters]),
            conv2_b: Tensor::zeros(&[arch.conv2_filters]),
            dense1_b: Tensor::zeros(&[arch.dense1_units]),
            dense2_b: Tensor::zeros(&[arch.dense2_units]),
            out_b: Tensor::zeros(&[arch.num_classes]),
            conv1_w,
            conv2_w,
            dense1_w,
            dense2_w,
            out_w,
            arch,
        })
    }

    /// Parameters in declaration order, aligned with [`PARAM_NAMES`].
    pub fn params(&self) -> [&Tensor<T>; 10] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 10] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    /// Runs the network, caching every activation needed by `backward`.
    ///
    /// `dropout` carries the keep mask and rate during training; `None`
    /// makes the dropout layer an identity (inference).
    pub fn forward(
        &self,
        input: &Tensor<T>,
        dropout: Option<(&[bool], f64)>,
    ) -> Result<ForwardCache<T>> {
        let (c, h, w) = self.arch.input;
        if input.shape() != [c, h, w] {
            return Err(Error::Dimension(format!(
                "model expects input ({c}, {h}, {w}), got {:?}",
                input.shape()
            )));
        }
        let c1 = conv2d_forward(input, &self.conv1_w, &self.conv1_b)?;
        let (p1, p1_argmax) = maxpool_forward(&c1, self.arch.pool)?;
        let c2 = conv2d_forward(&p1, &self.conv2_w, &self.conv2_b)?;
        let (p2, p2_argmax) = maxpool_forward(&c2, self.arch.pool)?;
        let flat = p2.data().to_vec();
        let d1 = dense_forward(&flat, &self.dense1_w, &self.dense1_b, Activation::Relu)?;
        let dropped = dropout_forward(&d1, dropout.map(|(m, _)| m), dropout.map_or(0.0, |(_, r)| r));
        let d2 = dense_forward(&dropped, &self.dense2_w, &self.dense2_b, Activation::Relu)?;
        let logits = dense_forward(&d2, &self.out_w, &self.out_b, Activation::Linear)?;
        Ok(ForwardCache {
            input: input.clone(),
            c1,
            p1,
            p1_argmax,
            c2,
            p2,
            p2_argmax,
            d1,
            dropped,
            d2,
            logits,
            dropout: dropout.map(|(m, r)| (m.to_vec(), r)),
        })
    }

    /// Loss, predicted class, and gradients for one cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<T>, label: usize) -> Result<(T, Gradients<T>)> {
        let (loss, probs) = softmax_cross_entropy(&cache.logits, label)?;
        let d_logits = softmax_cross_entropy_grad(&probs, label);

        let (d_d2, g_out_w, g_out_b) = dense_backward(
            &cache.d2,
            &self.out_w,
            &cache.logits,
            &d_logits,
            Activation::Linear,
        );
        let (d_dropped, g_d2_w, g_d2_b) = dense_backward(
            &cache.dropped,
            &self.dense2_w,
            &cache.d2,
            &d_d2,
            Activation::Relu,
        );
        let (mask, rate) = match &cache.dropout {
            Some((m, r)) => (Some(m.as_slice()), *r),
            None => (None, 0.0),
        };
        let d_d1 = dropout_backward(&d_dropped, mask, rate);
        let (d_flat, g_d1_w, g_d1_b) = dense_backward(
            cache.p2.data(),
            &self.dense1_w,
            &cache.d1,
            &d_d1,
            Activation::Relu,
        );
        let d_p2 = Tensor::from_vec(cache.p2.shape(), d_flat)?;
        let d_c2 = maxpool_backward(cache.c2.shape(), &cache.p2_argmax, &d_p2);
        let (d_p1, g_c2_w, g_c2_b) = conv2d_backward(&cache.p1, &self.conv2_w, &d_c2);
        let d_c1 = maxpool_backward(cache.c1.shape(), &cache.p1_argmax, &d_p1);
        let (_, g_c1_w, g_c1_b) = conv2d_backward(&cache.input, &self.conv1_w, &d_c1);

        Ok((
            loss,
            Gradients {
                tensors: [
                    g_c1_w, g_c1_b, g_c2_w, g_c2_b, g_d1_w, g_d1_b, g_d2_w, g_d2_b, g_out_w,
                    g_out_b,
                ],
            },
        ))
    }

    /// Class probabilities for one input, inference mode.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        let cache = self.forward(input, None)?;
        let (_, probs) = softmax_cross_entropy(&cache.logits, 0)?;
        Ok(probs)
    }

    /// The embedding of a snippet: post-ReLU activations of the second dense
    /// layer, inference mode. All entries are nonnegative.
    pub fn extract_embedding(&self, snippet: &MelSnippet) -> Result<Vec<T>> {
        let cache = self.forward(&snippet_tensor(snippet), None)?;
        Ok(cache.d2)
    }

    /// In-place SGD step: `theta -= scale * grad` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients<T>, scale: T) {
        for (param, grad) in self.params_mut().into_iter().zip(&grads.tensors) {
            debug_assert_eq!(param.shape(), grad.shape());
            for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
                *p -= scale * *g;
            }
        }
    }
}

/// Converts a mel snippet into the (1, bands, frames) input tensor.
pub fn snippet_tensor<T: Real>(snippet: &MelSnippet) -> Tensor<T> {
    Tensor::from_vec(
        &[1, MEL_BANDS, SNIPPET_FRAMES],
        snippet.values.iter().map(|&v| T::of(v as f64)).collect(),
    )
    .expect("snippet invariant fixes the element count")
}

/// Every activation of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub input: Tensor<T>,
    pub c1: Tensor<T>,
    pub p1: Tensor<T>,
    pub p1_argmax: Vec<usize>,
    pub c2: Tensor<T>,
    pub p2: Tensor<T>,
    pub p2_argmax: Vec<usize>,
    pub d1: Vec<T>,
    pub dropped: Vec<T>,
    pub d2: Vec<T>,
    pub logits: Vec<T>,
    dropout: Option<(Vec<bool>, f64)>,
}

/// Per-parameter gradients, aligned with [`CnnModel::params`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub tensors: [Tensor<T>; 10],
}

impl<T: Real> Gradients<T> {
    /// Zero gradients shaped like the model's parameters.
    pub fn zeros_like(model: &CnnModel<T>) -> Self {
        Self {
            tensors: model.params().map(|p| Tensor::zeros(p.shape())),
        }
    }

    /// Elementwise accumulation.
    pub fn add(&mut self, other: &Gradients<T>) {
        for (acc, g) in self.tensors.iter_mut().zip(&other.tensors) {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += *b;
            }
        }
    }
}
