//! Layer forward/backward pairs.
//!
//! Convolution is cross-correlation (no kernel flip) over channels-first
//! `[C, H, W]` tensors, implemented as im2col plus the blocked matrix
//! kernels. Backward passes return exact analytic gradients; the
//! finite-difference harness in [`crate::gradcheck`] verifies every layer.

use super::mm::{matmul_acc, matmul_nt_acc, matmul_tn_acc};
use super::Tensor;
use crate::error::{Error, Result};

/// Convolution geometry: square kernel, stride, zero padding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        ConvSpec {
            kernel,
            stride,
            padding,
        }
    }

    fn out_dim(&self, dim: usize) -> Option<usize> {
        let padded = dim + 2 * self.padding;
        if padded < self.kernel || self.stride == 0 {
            None
        } else {
            Some((padded - self.kernel) / self.stride + 1)
        }
    }
}

fn expect_3d(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::ShapeMismatch {
            op,
            detail: format!("expected a [C, H, W] tensor, got shape {other:?}"),
        }),
    }
}

/// Unrolls conv windows into a `[C*k*k, Ho*Wo]` matrix (zero padding).
fn im2col(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let k = spec.kernel;
    let s = spec.stride;
    let p = spec.padding as i64;
    let m = ho * wo;
    let mut cols = vec![0.0; c * k * k * m];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * m;
                for oy in 0..ho {
                    let iy = (oy * s + ky) as i64 - p;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    let src = (ci * h + iy as usize) * w;
                    let dst = row + oy * wo;
                    if s == 1 {
                        let off = kx as i64 - p;
                        let ox0 = (-off).max(0) as usize;
                        let ox1 = ((w as i64 - off).min(wo as i64)).max(0) as usize;
                        if ox1 > ox0 {
                            let ix0 = (ox0 as i64 + off) as usize;
                            cols[dst + ox0..dst + ox1]
                                .copy_from_slice(&input[src + ix0..src + ix0 + (ox1 - ox0)]);
                        }
                    } else {
                        for ox in 0..wo {
                            let ix = (ox * s + kx) as i64 - p;
                            if ix >= 0 && ix < w as i64 {
                                cols[dst + ox] = input[src + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a `[C*k*k, Ho*Wo]` gradient back onto the input layout.
fn col2im(
    cols: &[f64],
    (c, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let k = spec.kernel;
    let s = spec.stride;
    let p = spec.padding as i64;
    let m = ho * wo;
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * m;
                for oy in 0..ho {
                    let iy = (oy * s + ky) as i64 - p;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    let dst = (ci * h + iy as usize) * w;
                    let src = row + oy * wo;
                    for ox in 0..wo {
                        let ix = (ox * s + kx) as i64 - p;
                        if ix >= 0 && ix < w as i64 {
                            out[dst + ix as usize] += cols[src + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_dims(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<((usize, usize, usize), usize, (usize, usize))> {
    let (c_in, h, w) = expect_3d("conv2d", input)?;
    let (c_out, wc_in, kh, kw) = match weights.shape() {
        [a, b, c, d] => (*a, *b, *c, *d),
        other => {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!("weights must be [C_out, C_in, k, k], got {other:?}"),
            })
        }
    };
    if wc_in != c_in {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("weight input channels {wc_in} != input channels {c_in}"),
        });
    }
    if kh != spec.kernel || kw != spec.kernel {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("weight kernel {kh}x{kw} != spec kernel {}", spec.kernel),
        });
    }
    if bias.shape() != [c_out] {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            detail: format!("bias shape {:?} != [{c_out}]", bias.shape()),
        });
    }
    let ho = spec.out_dim(h).ok_or_else(|| Error::ShapeMismatch {
        op: "conv2d",
        detail: format!("kernel {} exceeds padded input height {h}", spec.kernel),
    })?;
    let wo = spec.out_dim(w).ok_or_else(|| Error::ShapeMismatch {
        op: "conv2d",
        detail: format!("kernel {} exceeds padded input width {w}", spec.kernel),
    })?;
    Ok(((c_in, h, w), c_out, (ho, wo)))
}

/// 2-D cross-correlation with bias.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<Tensor> {
    let (dims, c_out, (ho, wo)) = conv_dims(input, weights, bias, spec)?;
    let kk = dims.0 * spec.kernel * spec.kernel;
    let m = ho * wo;
    let cols = im2col(input.data(), dims, spec, (ho, wo));
    let mut out = vec![0.0; c_out * m];
    matmul_acc(&mut out, weights.data(), &cols, c_out, kk, m);
    for (co, chunk) in out.chunks_exact_mut(m).enumerate() {
        let b = bias.data()[co];
        if b != 0.0 {
            chunk.iter_mut().for_each(|v| *v += b);
        }
    }
    Tensor::from_vec(&[c_out, ho, wo], out)
}

/// Gradients of a convolution w.r.t. input, weights, and bias.
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let bias_probe = Tensor::zeros(&[weights.shape()[0]]);
    let (dims, c_out, (ho, wo)) = conv_dims(input, weights, &bias_probe, spec)?;
    if grad_out.shape() != [c_out, ho, wo] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            detail: format!(
                "grad shape {:?} != output shape [{c_out}, {ho}, {wo}]",
                grad_out.shape()
            ),
        });
    }
    let kk = dims.0 * spec.kernel * spec.kernel;
    let m = ho * wo;
    let cols = im2col(input.data(), dims, spec, (ho, wo));

    let mut grad_bias = vec![0.0; c_out];
    for (co, chunk) in grad_out.data().chunks_exact(m).enumerate() {
        grad_bias[co] = chunk.iter().sum();
    }

    let mut grad_w = vec![0.0; c_out * kk];
    matmul_nt_acc(&mut grad_w, grad_out.data(), &cols, c_out, m, kk);

    let mut grad_cols = vec![0.0; kk * m];
    matmul_tn_acc(&mut grad_cols, weights.data(), grad_out.data(), c_out, kk, m);
    let grad_input = col2im(&grad_cols, dims, spec, (ho, wo));

    Ok(ConvGrads {
        input: Tensor::from_vec(input.shape(), grad_input)?,
        weights: Tensor::from_vec(weights.shape(), grad_w)?,
        bias: Tensor::from_vec(&[c_out], grad_bias)?,
    })
}

/// Elementwise `max(0, x)`; the subgradient at 0 is 0.
pub fn relu_forward(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

/// Window max over `[C, H, W]`; returns the output and, per output element,
/// the flat input index that produced it (ties: first in row-major order).
pub fn maxpool2d_forward(input: &Tensor, k: usize, s: usize) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = expect_3d("maxpool2d", input)?;
    if k == 0 || s == 0 {
        return Err(Error::ShapeMismatch {
            op: "maxpool2d",
            detail: "kernel and stride must be >= 1".to_string(),
        });
    }
    if k > h || k > w {
        return Err(Error::ShapeMismatch {
            op: "maxpool2d",
            detail: format!("window {k} larger than input {h}x{w}"),
        });
    }
    let ho = (h - k) / s + 1;
    let wo = (w - k) / s + 1;
    let mut out = vec![0.0; c * ho * wo];
    let mut argmax = vec![0usize; c * ho * wo];
    let data = input.data();
    for ci in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for ky in 0..k {
                    let iy = oy * s + ky;
                    let row = (ci * h + iy) * w;
                    for kx in 0..k {
                        let idx = row + ox * s + kx;
                        if data[idx] > best {
                            best = data[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ci * ho + oy) * wo + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    Ok((Tensor::from_vec(&[c, ho, wo], out)?, argmax))
}

pub fn maxpool2d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor,
) -> Tensor {
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (o, &idx) in argmax.iter().enumerate() {
        g[idx] += grad_out.data()[o];
    }
    grad
}

/// Reduces each channel to its maximum; output is a `[C]` vector.
pub fn global_maxpool_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = expect_3d("global_maxpool", input)?;
    let plane = h * w;
    if plane == 0 {
        return Err(Error::ShapeMismatch {
            op: "global_maxpool",
            detail: "empty spatial dims".to_string(),
        });
    }
    let mut out = vec![0.0; c];
    let mut argmax = vec![0usize; c];
    for ci in 0..c {
        let base = ci * plane;
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = base;
        for (i, &v) in input.data()[base..base + plane].iter().enumerate() {
            if v > best {
                best = v;
                best_idx = base + i;
            }
        }
        out[ci] = best;
        argmax[ci] = best_idx;
    }
    Ok((Tensor::from_vec(&[c], out)?, argmax))
}

pub fn global_maxpool_backward(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor,
) -> Tensor {
    let mut grad = Tensor::zeros(input_shape);
    for (o, &idx) in argmax.iter().enumerate() {
        grad.data_mut()[idx] += grad_out.data()[o];
    }
    grad
}

/// Stacks `b`'s channels after `a`'s; spatial dims must match.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, ha, wa) = expect_3d("concat_channels", a)?;
    let (cb, hb, wb) = expect_3d("concat_channels", b)?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::ShapeMismatch {
            op: "concat_channels",
            detail: format!("spatial dims {ha}x{wa} != {hb}x{wb}"),
        });
    }
    let mut data = Vec::with_capacity((ca + cb) * ha * wa);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[ca + cb, ha, wa], data)
}

/// Splits a concat gradient back into the two input gradients.
pub fn concat_channels_backward(
    grad_out: &Tensor,
    c_a: usize,
) -> Result<(Tensor, Tensor)> {
    let (c, h, w) = expect_3d("concat_channels_backward", grad_out)?;
    if c_a > c {
        return Err(Error::ShapeMismatch {
            op: "concat_channels_backward",
            detail: format!("first input channels {c_a} exceed total {c}"),
        });
    }
    let split = c_a * h * w;
    let ga = Tensor::from_vec(&[c_a, h, w], grad_out.data()[..split].to_vec())?;
    let gb = Tensor::from_vec(&[c - c_a, h, w], grad_out.data()[split..].to_vec())?;
    Ok((ga, gb))
}

/// Affine map `W x + b` over the flattened input.
pub fn fully_connected_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, cols) = match weights.shape() {
        [r, c] => (*r, *c),
        other => {
            return Err(Error::ShapeMismatch {
                op: "fully_connected",
                detail: format!("weights must be [out, in], got {other:?}"),
            })
        }
    };
    if input.len() != cols {
        return Err(Error::ShapeMismatch {
            op: "fully_connected",
            detail: format!("input length {} != weight columns {cols}", input.len()),
        });
    }
    if bias.shape() != [rows] {
        return Err(Error::ShapeMismatch {
            op: "fully_connected",
            detail: format!("bias shape {:?} != [{rows}]", bias.shape()),
        });
    }
    let x = input.data();
    let mut out = vec![0.0; rows];
    for (r, o) in out.iter_mut().enumerate() {
        let wr = &weights.data()[r * cols..(r + 1) * cols];
        let mut s = 0.0;
        for (wv, xv) in wr.iter().zip(x.iter()) {
            s += wv * xv;
        }
        *o = s + bias.data()[r];
    }
    Tensor::from_vec(&[rows], out)
}

pub struct FcGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn fully_connected_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<FcGrads> {
    let (rows, cols) = match weights.shape() {
        [r, c] => (*r, *c),
        other => {
            return Err(Error::ShapeMismatch {
                op: "fully_connected_backward",
                detail: format!("weights must be [out, in], got {other:?}"),
            })
        }
    };
    if grad_out.len() != rows || input.len() != cols {
        return Err(Error::ShapeMismatch {
            op: "fully_connected_backward",
            detail: format!(
                "grad length {} / input length {} vs weights [{rows}, {cols}]",
                grad_out.len(),
                input.len()
            ),
        });
    }
    let mut grad_w = vec![0.0; rows * cols];
    for r in 0..rows {
        let g = grad_out.data()[r];
        if g != 0.0 {
            let row = &mut grad_w[r * cols..(r + 1) * cols];
            for (gw, &x) in row.iter_mut().zip(input.data()) {
                *gw = g * x;
            }
        }
    }
    let mut grad_in = vec![0.0; cols];
    for r in 0..rows {
        let g = grad_out.data()[r];
        if g != 0.0 {
            let wr = &weights.data()[r * cols..(r + 1) * cols];
            for (gi, &wv) in grad_in.iter_mut().zip(wr) {
                *gi += g * wv;
            }
        }
    }
    Ok(FcGrads {
        input: Tensor::from_vec(input.shape(), grad_in)?,
        weights: Tensor::from_vec(&[rows, cols], grad_w)?,
        bias: grad_out.clone(),
    })
}

/// `L = 0.5 * sum((pred - target)^2)` and its gradient `pred - target`.
pub fn euclidean_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "euclidean_loss",
            detail: format!("{:?} vs {:?}", pred.shape(), target.shape()),
        });
    }
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            loss += 0.5 * d * d;
            d
        })
        .collect();
    Ok((loss, Tensor::from_vec(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;

    fn rand_tensor(rng: &mut DetRng, shape: &[usize]) -> Tensor {
        let data = (0..shape.iter().product())
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn conv_1x1_identity() {
        let mut rng = DetRng::seed_from_u64(60);
        let input = rand_tensor(&mut rng, &[3, 5, 7]);
        let mut w = Tensor::zeros(&[3, 3, 1, 1]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let bias = Tensor::zeros(&[3]);
        let out = conv2d_forward(&input, &w, &bias, &ConvSpec::new(1, 1, 0)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_box_stamp() {
        let mut input = Tensor::zeros(&[1, 7, 7]);
        input.data_mut()[3 * 7 + 3] = 1.0;
        let w = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let bias = Tensor::zeros(&[1]);
        let out = conv2d_forward(&input, &w, &bias, &ConvSpec::new(3, 1, 1)).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let inside = (2..=4).contains(&y) && (2..=4).contains(&x);
                assert_eq!(out.data()[y * 7 + x], if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn conv_output_dims_and_shape_errors() {
        let input = Tensor::zeros(&[2, 9, 11]);
        let w = Tensor::zeros(&[4, 2, 3, 3]);
        let bias = Tensor::zeros(&[4]);
        let out = conv2d_forward(&input, &w, &bias, &ConvSpec::new(3, 2, 1)).unwrap();
        assert_eq!(out.shape(), &[4, 5, 6]);

        let bad_w = Tensor::zeros(&[4, 3, 3, 3]);
        let err = conv2d_forward(&input, &bad_w, &bias, &ConvSpec::new(3, 2, 1)).unwrap_err();
        assert!(err.to_string().contains("channels"));

        let huge = ConvSpec::new(15, 1, 0);
        let w15 = Tensor::zeros(&[4, 2, 15, 15]);
        assert!(conv2d_forward(&input, &w15, &bias, &huge).is_err());
    }

    #[test]
    fn conv_stride2_matches_direct_window_sum() {
        let mut rng = DetRng::seed_from_u64(61);
        let input = rand_tensor(&mut rng, &[2, 8, 9]);
        let w = rand_tensor(&mut rng, &[3, 2, 3, 3]);
        let bias = rand_tensor(&mut rng, &[3]);
        let spec = ConvSpec::new(3, 2, 1);
        let out = conv2d_forward(&input, &w, &bias, &spec).unwrap();
        // Direct sliding-window evaluation.
        let (ho, wo) = (4, 5);
        assert_eq!(out.shape(), &[3, ho, wo]);
        for co in 0..3 {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut s = bias.data()[co];
                    for ci in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as i64 - 1;
                                let ix = (ox * 2 + kx) as i64 - 1;
                                if (0..8).contains(&iy) && (0..9).contains(&ix) {
                                    s += w.data()[((co * 2 + ci) * 3 + ky) * 3 + kx]
                                        * input.data()[(ci * 8 + iy as usize) * 9 + ix as usize];
                                }
                            }
                        }
                    }
                    let got = out.data()[(co * ho + oy) * wo + ox];
                    assert!((got - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn relu_behaviour() {
        let neg = Tensor::filled(&[4], -2.0);
        assert!(relu_forward(&neg).iter().all(|&v| v == 0.0));
        let pos = Tensor::filled(&[4], 2.0);
        assert_eq!(relu_forward(&pos), pos);
        let g = relu_backward(&neg, &Tensor::filled(&[4], 1.0));
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_identity_and_tie_rule() {
        let mut rng = DetRng::seed_from_u64(62);
        let input = rand_tensor(&mut rng, &[2, 4, 4]);
        let (out, _) = maxpool2d_forward(&input, 1, 1).unwrap();
        assert_eq!(out, input);

        let flat = Tensor::filled(&[1, 4, 4], 3.0);
        let (out, argmax) = maxpool2d_forward(&flat, 2, 2).unwrap();
        assert!(out.iter().all(|&v| v == 3.0));
        // Ties route to the first element of each window in row-major order.
        assert_eq!(argmax, vec![0, 2, 8, 10]);
        let grad = maxpool2d_backward(&[1, 4, 4], &argmax, &Tensor::filled(&[1, 2, 2], 1.0));
        assert_eq!(grad.data()[0], 1.0);
        assert_eq!(grad.data()[1], 0.0);
    }

    #[test]
    fn maxpool_matches_bruteforce() {
        let mut rng = DetRng::seed_from_u64(63);
        for _ in 0..20 {
            let input = rand_tensor(&mut rng, &[4, 8, 8]);
            let (out, _) = maxpool2d_forward(&input, 2, 2).unwrap();
            for c in 0..4 {
                for oy in 0..4 {
                    for ox in 0..4 {
                        let mut best = f64::NEG_INFINITY;
                        for ky in 0..2 {
                            for kx in 0..2 {
                                best =
                                    best.max(input.data()[(c * 8 + oy * 2 + ky) * 8 + ox * 2 + kx]);
                            }
                        }
                        assert_eq!(out.data()[(c * 4 + oy) * 4 + ox], best);
                    }
                }
            }
        }
    }

    #[test]
    fn maxpool_window_too_large() {
        let input = Tensor::zeros(&[1, 3, 3]);
        assert!(maxpool2d_forward(&input, 4, 1).is_err());
    }

    #[test]
    fn concat_roundtrip() {
        let mut rng = DetRng::seed_from_u64(64);
        let a = rand_tensor(&mut rng, &[2, 3, 4]);
        let b = rand_tensor(&mut rng, &[3, 3, 4]);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), &[5, 3, 4]);
        let (ga, gb) = concat_channels_backward(&cat, 2).unwrap();
        assert_eq!(ga, a);
        assert_eq!(gb, b);
        let bad = rand_tensor(&mut rng, &[3, 2, 4]);
        assert!(concat_channels(&a, &bad).is_err());
    }

    #[test]
    fn fc_identity_and_hand_case() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        let out = fully_connected_forward(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out.data(), x.data());

        let w = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        let out = fully_connected_forward(&x, &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(out.data(), &[3.0, 7.0]);
    }

    #[test]
    fn loss_values_and_gradient() {
        let p = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        let t = Tensor::zeros(&[2]);
        let (l, g) = euclidean_loss(&p, &t).unwrap();
        assert_eq!(l, 12.5);
        assert_eq!(g.data(), p.data());

        let (l0, _) = euclidean_loss(&t, &t).unwrap();
        assert_eq!(l0, 0.0);

        let bad = Tensor::zeros(&[3]);
        assert!(euclidean_loss(&p, &bad).is_err());
    }

    #[test]
    fn global_maxpool_picks_channel_max() {
        let mut input = Tensor::zeros(&[2, 2, 3]);
        input.data_mut().copy_from_slice(&[
            0.1, 0.9, 0.3, 0.2, 0.9, 0.0, // channel 0: max 0.9 first at idx 1
            -1.0, -0.5, -2.0, -3.0, -0.5, -4.0, // channel 1: max -0.5 first at idx 7
        ]);
        let (out, argmax) = global_maxpool_forward(&input).unwrap();
        assert_eq!(out.data(), &[0.9, -0.5]);
        assert_eq!(argmax, vec![1, 7]);
        let grad = global_maxpool_backward(&[2, 2, 3], &argmax, &Tensor::filled(&[2], 2.0));
        assert_eq!(grad.data()[1], 2.0);
        assert_eq!(grad.data()[7], 2.0);
        assert_eq!(grad.data().iter().filter(|&&v| v != 0.0).count(), 2);
    }

    /// Throughput probe for the conv kernels; run explicitly with
    /// `cargo test -p calib-core conv_throughput -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn conv_throughput() {
        let mut rng = DetRng::seed_from_u64(65);
        let input = rand_tensor(&mut rng, &[3, 96, 256]);
        let w = rand_tensor(&mut rng, &[24, 3, 7, 7]);
        let bias = rand_tensor(&mut rng, &[24]);
        let spec = ConvSpec::new(7, 2, 3);
        let start = std::time::Instant::now();
        let iters = 20;
        let mut sink = 0.0;
        for _ in 0..iters {
            let out = conv2d_forward(&input, &w, &bias, &spec).unwrap();
            sink += out.data()[0];
        }
        let fwd = start.elapsed().as_secs_f64() / iters as f64;
        let out = conv2d_forward(&input, &w, &bias, &spec).unwrap();
        let start = std::time::Instant::now();
        for _ in 0..iters {
            let g = conv2d_backward(&input, &w, &spec, &out).unwrap();
            sink += g.weights.data()[0];
        }
        let bwd = start.elapsed().as_secs_f64() / iters as f64;
        let flops = 2.0 * 24.0 * 48.0 * 128.0 * 3.0 * 49.0;
        println!(
            "conv 7x7/2 3->24 on 96x256: fwd {:.1} ms ({:.2} GFLOP/s), bwd {:.1} ms (sink {sink:.3})",
            fwd * 1e3,
            flops / fwd / 1e9,
            bwd * 1e3
        );
    }
}
