//! Layer forward and hand-derived backward passes.
//!
//! Every backward here is verified against central finite differences in the
//! test suite; none of this is generated by an autodiff framework.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::{Real, Tensor};

/// Valid (no padding) cross-correlation with per-output-channel bias and
/// linear activation.
///
/// `input` is (C_in, H, W), `filters` (C_out, C_in, K, K), `bias` (C_out);
/// output is (C_out, H-K+1, W-K+1). The kernel is not flipped.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c_in, h, w) = rank3(input, "conv input")?;
    let fs = filters.shape();
    if fs.len() != 4 || fs[1] != c_in || fs[2] != fs[3] {
        return Err(Error::Dimension(format!(
            "filters {fs:?} do not apply to input ({c_in}, {h}, {w})"
        )));
    }
    let (c_out, k) = (fs[0], fs[2]);
    if bias.shape() != [c_out] {
        return Err(Error::Dimension(format!(
            "bias {:?} does not match {c_out} output channels",
            bias.shape()
        )));
    }
    if h < k || w < k {
        return Err(Error::Dimension(format!(
            "input ({h}, {w}) smaller than {k}x{k} kernel"
        )));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Tensor::zeros(&[c_out, oh, ow]);
    for co in 0..c_out {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = bias.data()[co];
                for ci in 0..c_in {
                    for ki in 0..k {
                        for kj in 0..k {
                            acc += input.at3(ci, i + ki, j + kj)
                                * filters.at4(co, ci, ki, kj);
                        }
                    }
                }
                let idx = out.idx3(co, i, j);
                out.data_mut()[idx] = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of a conv layer given the upstream gradient on its output.
///
/// Returns (grad_input, grad_filters, grad_bias). The input gradient is the
/// full correlation of the output gradient with the flipped kernel; filter
/// gradients correlate input patches with the output gradient.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, k) = (filters.shape()[0], filters.shape()[2]);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    debug_assert_eq!(grad_out.shape()[0], c_out);
    debug_assert_eq!((oh, ow), (h - k + 1, w - k + 1));

    let mut grad_in = Tensor::zeros(&[c_in, h, w]);
    let mut grad_f = Tensor::zeros(&[c_out, c_in, k, k]);
    let mut grad_b = Tensor::zeros(&[c_out]);

    for co in 0..c_out {
        let mut b_acc = T::zero();
        for i in 0..oh {
            for j in 0..ow {
                let g = grad_out.at3(co, i, j);
                b_acc += g;
                for ci in 0..c_in {
                    for ki in 0..k {
                        for kj in 0..k {
                            let fi = grad_f.idx4(co, ci, ki, kj);
                            grad_f.data_mut()[fi] += g * input.at3(ci, i + ki, j + kj);
                            let ii = grad_in.idx3(ci, i + ki, j + kj);
                            grad_in.data_mut()[ii] += g * filters.at4(co, ci, ki, kj);
                        }
                    }
                }
            }
        }
        grad_b.data_mut()[co] = b_acc;
    }
    (grad_in, grad_f, grad_b)
}

/// Non-overlapping max pooling with stride equal to the pool size.
///
/// Remainder rows and columns that do not fill a window are dropped. The
/// returned indices give, per output cell, the flat input index of its
/// maximum (first occurrence wins ties) for backward routing.
pub fn maxpool_forward<T: Real>(
    input: &Tensor<T>,
    pool: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, h, w) = rank3(input, "maxpool input")?;
    if pool == 0 || h < pool || w < pool {
        return Err(Error::Dimension(format!(
            "cannot pool ({h}, {w}) by {pool}"
        )));
    }
    let (oh, ow) = (h / pool, w / pool);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = input.at3(ch, i * pool, j * pool);
                let mut best_idx = input.idx3(ch, i * pool, j * pool);
                for pi in 0..pool {
                    for pj in 0..pool {
                        let v = input.at3(ch, i * pool + pi, j * pool + pj);
                        if v > best {
                            best = v;
                            best_idx = input.idx3(ch, i * pool + pi, j * pool + pj);
                        }
                    }
                }
                let oi = out.idx3(ch, i, j);
                out.data_mut()[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes output gradients back to each window's argmax position.
pub fn maxpool_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    debug_assert_eq!(argmax.len(), grad_out.len());
    let mut grad_in = Tensor::zeros(input_shape);
    for (cell, &src) in argmax.iter().enumerate() {
        grad_in.data_mut()[src] += grad_out.data()[cell];
    }
    grad_in
}

/// Activation applied by a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

/// Fully connected layer: `act(W x + b)` with `weights` of shape (out, in).
pub fn dense_forward<T: Real>(
    x: &[T],
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    act: Activation,
) -> Result<Vec<T>> {
    let ws = weights.shape();
    if ws.len() != 2 || ws[1] != x.len() || bias.shape() != [ws[0]] {
        return Err(Error::Dimension(format!(
            "dense weights {ws:?} / bias {:?} do not apply to input of {}",
            bias.shape(),
            x.len()
        )));
    }
    let (rows, cols) = (ws[0], ws[1]);
    let mut y = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &weights.data()[r * cols..(r + 1) * cols];
        let mut acc = bias.data()[r];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        y.push(match act {
            Activation::Linear => acc,
            Activation::Relu => acc.max(T::zero()),
        });
    }
    Ok(y)
}

/// Gradients of a dense layer.
///
/// `y` is the layer's own (post-activation) output; for ReLU the gate is
/// recovered from `y > 0`. Returns (grad_x, grad_w, grad_b).
pub fn dense_backward<T: Real>(
    x: &[T],
    weights: &Tensor<T>,
    y: &[T],
    grad_y: &[T],
    act: Activation,
) -> (Vec<T>, Tensor<T>, Tensor<T>) {
    let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(grad_y.len(), rows);

    let gz: Vec<T> = match act {
        Activation::Linear => grad_y.to_vec(),
        Activation::Relu => grad_y
            .iter()
            .zip(y)
            .map(|(g, out)| if *out > T::zero() { *g } else { T::zero() })
            .collect(),
    };

    let mut grad_w = Tensor::zeros(&[rows, cols]);
    let mut grad_x = vec![T::zero(); cols];
    for r in 0..rows {
        let g = gz[r];
        let wrow = &weights.data()[r * cols..(r + 1) * cols];
        let grow = &mut grad_w.data_mut()[r * cols..(r + 1) * cols];
        for c in 0..cols {
            grow[c] = g * x[c];
            grad_x[c] += g * wrow[c];
        }
    }
    let grad_b = Tensor::from_vec(&[rows], gz).expect("length matches by construction");
    (grad_x, grad_w, grad_b)
}

/// Draws a keep mask for inverted dropout: `false` drops the unit.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    (0..len).map(|_| rng.gen::<f64>() >= rate).collect()
}

/// Inverted dropout: surviving units are scaled by 1/(1-rate) at train time
/// so inference (`mask: None`) is exactly the identity.
pub fn dropout_forward<T: Real>(x: &[T], mask: Option<&[bool]>, rate: f64) -> Vec<T> {
    match mask {
        None => x.to_vec(),
        Some(mask) => {
            assert_eq!(mask.len(), x.len(), "mask length mismatch");
            let scale = T::of(1.0 / (1.0 - rate));
            x.iter()
                .zip(mask)
                .map(|(v, keep)| if *keep { *v * scale } else { T::zero() })
                .collect()
        }
    }
}

/// Backward of [`dropout_forward`] under the same mask.
pub fn dropout_backward<T: Real>(grad_y: &[T], mask: Option<&[bool]>, rate: f64) -> Vec<T> {
    dropout_forward(grad_y, mask, rate)
}

/// Numerically stable softmax with categorical cross-entropy.
///
/// The loss is computed in log space, so extreme logits yield a finite loss
/// even when an individual probability underflows.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Dimension(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let shifted: Vec<T> = logits.iter().map(|&v| v - max).collect();
    let total = shifted.iter().fold(T::zero(), |acc, &v| acc + v.exp());
    let probs: Vec<T> = shifted.iter().map(|&v| v.exp() / total).collect();
    let loss = total.ln() - shifted[label];
    Ok((loss, probs))
}

/// d(loss)/d(logits) = probs - one_hot(label).
pub fn softmax_cross_entropy_grad<T: Real>(probs: &[T], label: usize) -> Vec<T> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == label { p - T::one() } else { p })
        .collect()
}

fn rank3<T: Real>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::Dimension(format!(
            "{what} must be rank 3, got {other:?}"
        ))),
    }
}
